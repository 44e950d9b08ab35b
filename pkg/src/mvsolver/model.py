"""Full solver assembly: shared trunk, both views, alignment, selector.

Every submodule draws its initial parameters from one generator seeded
by the config, so (config, vocab) pins the starting point exactly and a
checkpoint round-trip restores it bit for bit.
"""

from dataclasses import asdict

import numpy as np

from . import checkpoint
from .alignment import Alignment, pair_traces
from .bottomup import BottomUpView
from .checkpoint import CheckpointError
from .config import ConfigError, DataError, TrainConfig
from .discriminator import Discriminator
from .encoder import Encoder, SharedEmbeddings, Vocab, gather_quantities
from .expression import to_postorder, to_preorder
from .prediction import T2B, Prediction
from .topdown import TopDownView


class Model:
    def __init__(self, cfg, vocab):
        cfg.validated()
        self.cfg = cfg
        self.vocab = vocab
        rng = np.random.default_rng(cfg.seed)
        self.shared = SharedEmbeddings(rng, vocab, cfg.d, cfg.constants)
        self.encoder = Encoder(rng, self.shared)
        self.topdown = TopDownView(rng, self.shared, attention=cfg.attention)
        self.bottomup = BottomUpView(rng, self.shared)
        self.align = Alignment(rng, cfg.d, cfg.d_align,
                               metric=cfg.align_metric)
        self.disc = Discriminator(rng, self.shared)

    # -- parameter plumbing ----------------------------------------------

    def params(self):
        out = self.shared.params()
        out.update(self.encoder.params())
        out.update(self.topdown.params())
        out.update(self.bottomup.params())
        out.update(self.align.params())
        out.update(self.disc.params())
        return out

    def phase1_params(self):
        """Joint-training subset: trunk, both views, alignment heads."""
        out = self.shared.params()
        out.update(self.encoder.params())
        out.update(self.topdown.params())
        out.update(self.bottomup.params())
        out.update(self.align.params())
        return out

    def snapshot(self):
        return {k: t.data.copy() for k, t in self.params().items()}

    def restore(self, snap):
        for k, t in self.params().items():
            t.data[...] = snap[k]

    # -- per-problem forward ---------------------------------------------

    def encode_problem(self, problem):
        encoded = self.encoder.encode(problem.tokens)
        e_q = gather_quantities(encoded, problem.quantities, self.shared)
        return encoded, e_q

    def problem_losses(self, problem, want_t2b=True, want_b2t=True,
                       want_align=True):
        """Teacher-forced loss terms, keyed t2b / b2t / align.

        Only requested, computable terms appear: an equation with no
        operator node produces no aligned pairs, so "align" is absent
        there.  Gold steps that pair a pool row with itself raise
        DataError; the caller decides whether to keep the top-down term
        alone.
        """
        if problem.expression is None:
            raise DataError("problem %r has no gold equation" % problem.pid)
        encoded, e_q = self.encode_problem(problem)
        m = len(problem.quantities)
        out = {}
        if want_t2b:
            out["t2b"] = self.topdown.teacher_forced_loss(
                encoded, e_q, to_preorder(problem.expression), m)
        bu_trace = None
        if want_b2t or want_align:
            loss_b, bu_trace = self.bottomup.training_loss(
                e_q, to_postorder(problem.expression), m,
                rep_mode=self.cfg.bu_rep)
            if want_b2t:
                out["b2t"] = loss_b
        if want_align:
            td_trace = self.topdown.subtree_representations(
                problem.expression, e_q, m, mode=self.cfg.td_rep)
            pairs = pair_traces(td_trace, bu_trace)
            if pairs:
                out["align"] = self.align.contrastive_loss(pairs)
        return out

    def traces(self, problem):
        """Aligned (top-down, bottom-up) pairs for the gold equation."""
        encoded, e_q = self.encode_problem(problem)
        m = len(problem.quantities)
        td = self.topdown.subtree_representations(
            problem.expression, e_q, m, mode=self.cfg.td_rep)
        _, bu = self.bottomup.training_loss(
            e_q, to_postorder(problem.expression), m,
            rep_mode=self.cfg.bu_rep)
        return pair_traces(td, bu)

    # -- inference -------------------------------------------------------

    def build_cap(self, m):
        # largest sub-expression count the bottom-up pool may reach; the
        # pre-order token budget for the same tree size is 2*cap + 1
        return m + len(self.shared.constants) + self.cfg.max_steps_margin

    def predict(self, problem, phase=1, beam=None):
        if phase not in (1, 2):
            raise ConfigError("phase must be 1 or 2, got %r" % (phase,))
        encoded, e_q = self.encode_problem(problem)
        m = len(problem.quantities)
        cap = self.build_cap(m)
        found = self.topdown.beam_search(encoded, e_q, m,
                                         beam=beam or self.cfg.beam_size,
                                         max_len=2 * cap + 1)
        y_t2b = found[0] if found else Prediction(view=T2B, tokens=[],
                                                  score=0.0, abstained=True)
        if phase == 1:
            return y_t2b
        y_b2t, _ = self.bottomup.greedy_construct(e_q, m, max_steps=cap)
        return self.disc.select_second_phase(encoded, e_q, m, y_t2b, y_b2t)

    # -- persistence -----------------------------------------------------

    def save(self, path):
        meta = {"format": 1,
                "config": asdict(self.cfg),
                "vocab": self.vocab.to_json()}
        checkpoint.save(path, self.params(), meta)

    @classmethod
    def load(cls, path):
        params, meta = checkpoint.load(path)
        if meta.get("format") != 1:
            raise CheckpointError("%s: unsupported format %r"
                                  % (path, meta.get("format")))
        blob = dict(meta["config"])
        blob["constants"] = tuple(blob.get("constants", ()))
        cfg = TrainConfig(**blob).validated()
        model = cls(cfg, Vocab.from_json(meta["vocab"]))
        own = model.params()
        if set(own) != set(params):
            missing = sorted(set(own) - set(params))[:3]
            extra = sorted(set(params) - set(own))[:3]
            raise CheckpointError("%s: parameter names do not match the "
                                  "config (missing %s, extra %s)"
                                  % (path, missing, extra))
        for name, arr in params.items():
            t = own[name]
            if t.data.shape != arr.shape:
                raise CheckpointError("%s: %r has shape %s, expected %s"
                                      % (path, name, arr.shape, t.data.shape))
            t.data[...] = arr
        return model
