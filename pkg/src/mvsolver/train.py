"""Joint teacher-forced training and the second-phase selector fit."""

import logging
import time

import numpy as np

from . import tensor as T
from .augmentation import apply_distributive, augment_dataset
from .config import DataError
from .discriminator import CandidateBatch, build_negatives
from .evaluate import answer_correct, prediction_expression
from .optim import Adam
from .tensor import NumericsError

log = logging.getLogger("mvsolver.train")


class TrainingDiverged(RuntimeError):
    """Loss or gradients left the finite range; training aborted."""


def _problem_term(model, problem, want):
    """Weighted loss Tensor for one problem plus raw component values.

    Gold equations the bottom-up view cannot express (self-paired pool
    rows) fall back to the top-down term alone, or contribute nothing
    when that term is not wanted either.
    """
    want_t, want_b, want_a = want
    cfg = model.cfg
    try:
        parts = model.problem_losses(problem, want_t2b=want_t,
                                     want_b2t=want_b, want_align=want_a)
    except DataError:
        if not want_t:
            return None, {}
        parts = model.problem_losses(problem, want_t2b=True,
                                     want_b2t=False, want_align=False)
    term = None
    raw = {}
    for key, w in (("t2b", cfg.w_t2b), ("b2t", cfg.w_b2t),
                   ("align", cfg.w_align)):
        if key not in parts:
            continue
        raw[key] = parts[key].item()
        piece = parts[key] if w == 1.0 else parts[key].scale(w)
        term = piece if term is None else term + piece
    return term, raw


def dev_accuracy(model, problems):
    """Greedy (beam 1) answer accuracy: the cheap model-selection proxy."""
    if not problems:
        return 0.0
    hits = sum(answer_correct(model.predict(p, phase=1, beam=1), p)
               for p in problems)
    return hits / len(problems)


def train(model, train_set, dev_set):
    """Phase-1 loop; returns per-epoch history, model left at best dev.

    Each epoch: distributive augmentation when enabled, seeded shuffle,
    then one optimizer step per batch on the mean of
    w_t2b*L_t2b + w_b2t*L_b2t + w_align*L_ccl.  Zero-weight terms are
    never computed, so their parameters see no gradient at all.
    """
    cfg = model.cfg
    if not train_set:
        raise DataError("training set is empty")
    rng = np.random.default_rng(cfg.seed + 0x5EED)
    opt = Adam(model.phase1_params(), lr=cfg.lr,
               weight_decay=cfg.weight_decay)
    want = (cfg.w_t2b > 0, cfg.w_b2t > 0,
            cfg.w_align > 0 and cfg.alignment)
    history = []
    best_acc = -1.0
    best_snap = None
    for epoch in range(cfg.epochs):
        data = augment_dataset(train_set) if cfg.augment else list(train_set)
        order = rng.permutation(len(data))
        sums = {"t2b": 0.0, "b2t": 0.0, "align": 0.0}
        total_loss = 0.0
        used = 0
        started = time.time()
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo:lo + cfg.batch_size]
            opt.zero_grad()
            with T.Tape() as tape:
                terms = []
                for k in batch:
                    term, raw = _problem_term(model, data[k], want)
                    if term is None:
                        continue
                    terms.append(term)
                    for key, v in raw.items():
                        sums[key] += v
                if not terms:
                    continue
                loss = terms[0]
                for t in terms[1:]:
                    loss = loss + t
                loss = loss.scale(1.0 / len(terms))
                if not np.isfinite(loss.data).all():
                    raise TrainingDiverged(
                        "epoch %d: non-finite batch loss" % epoch)
                tape.backward(loss)
            try:
                opt.step()
            except NumericsError as exc:
                raise TrainingDiverged("epoch %d: %s" % (epoch, exc))
            total_loss += loss.item() * len(terms)
            used += len(terms)
        acc = dev_accuracy(model, dev_set)
        # ties prefer the later epoch: training past a dev plateau keeps
        # refining the losses, which overfit runs rely on
        if acc >= best_acc:
            best_acc = acc
            best_snap = model.snapshot()
        entry = {"epoch": epoch,
                 "loss": total_loss / used if used else 0.0,
                 "t2b": sums["t2b"] / used if used else 0.0,
                 "b2t": sums["b2t"] / used if used else 0.0,
                 "align": sums["align"] / used if used else 0.0,
                 "dev_accuracy": acc,
                 "seconds": time.time() - started}
        history.append(entry)
        log.info("epoch %d: loss %.4f (t2b %.4f b2t %.4f align %.4f) "
                 "dev %.3f in %.1fs", epoch, entry["loss"], entry["t2b"],
                 entry["b2t"], entry["align"], acc, entry["seconds"])
    if best_snap is not None:
        model.restore(best_snap)
    return history


# -- second phase: selector over the two views' outputs ------------------

def mine_candidates(model, problems):
    """Positive/negative expression sets per problem, mined once.

    Positives are the gold tree plus its distributive variants; the
    negative side starts from wrong beam candidates and is topped up by
    rule-based corruptions.  Problems with no negative are dropped since
    the loss needs both sides.
    """
    cfg = model.cfg
    mined = []
    for p in problems:
        encoded, e_q = model.encode_problem(p)
        m = len(p.quantities)
        found = model.topdown.beam_search(
            encoded, e_q, m, beam=cfg.beam_size,
            max_len=2 * model.build_cap(m) + 1)
        beamed = [e for e in map(prediction_expression, found)
                  if e is not None]
        negatives = build_negatives(p.expression, beamed, p.bindings(),
                                    limit=cfg.disc_max_negatives)
        if not negatives:
            log.info("selector mining: no usable negative for %s", p.pid)
            continue
        positives = [p.expression] + apply_distributive(p.expression)
        mined.append((p, positives, negatives))
    return mined


def train_discriminator(model, train_set):
    """Fit the selector on mined candidate sets; other parts stay fixed."""
    cfg = model.cfg
    mined = mine_candidates(model, train_set)
    if not mined:
        raise DataError("no training problem produced a candidate set")
    opt = Adam(model.disc.params(), lr=cfg.lr,
               weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(cfg.seed + 0xD15C)
    history = []
    for epoch in range(cfg.disc_epochs):
        order = rng.permutation(len(mined))
        total = 0.0
        for k in order:
            p, positives, negatives = mined[k]
            opt.zero_grad()
            with T.Tape() as tape:
                encoded, e_q = model.encode_problem(p)
                batch = CandidateBatch(encoded=encoded, e_q=e_q,
                                       m=len(p.quantities),
                                       positives=positives,
                                       negatives=negatives)
                loss = model.disc.loss(batch)
                if not np.isfinite(loss.data).all():
                    raise TrainingDiverged(
                        "selector epoch %d: non-finite loss" % epoch)
                tape.backward(loss)
            try:
                opt.step()
            except NumericsError as exc:
                raise TrainingDiverged("selector epoch %d: %s"
                                       % (epoch, exc))
            total += loss.item()
        history.append({"epoch": epoch, "loss": total / len(mined)})
        log.info("selector epoch %d: loss %.4f", epoch, total / len(mined))
    return history
