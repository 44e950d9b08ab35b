"""Dataset I/O and the synthetic word-problem generator.

Records travel as JSON lines with id / text / equation / answer fields;
texts are pre-tokenized (whitespace), equations use N0.. placeholders in
reading order.  The loader enforces the answer-consistency invariant and
drops what fails it, mirroring the usual "unsolvable problem" filter.
"""

import json
import logging

import numpy as np

from .encoder import MAX_QUANTITIES, tokenize
from .expression import (
    EvaluationError, ParseError, Problem, evaluate, iter_nodes, parse_infix,
    to_infix,
)

log = logging.getLogger("mvsolver.data")

ANSWER_RTOL = 1e-4


def answers_match(predicted, gold, rtol=ANSWER_RTOL):
    return abs(predicted - gold) <= rtol * max(1.0, abs(gold))


def load_dataset(path, tokenizer="whitespace"):
    """Parse a JSONL file into validated Problems.

    Malformed records are skipped with a warning; records whose equation
    does not reproduce the stated answer are dropped and counted.
    """
    problems = []
    skipped = 0
    dropped = 0
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                pid = str(rec["id"])
                text = rec["text"]
                answer = float(rec["answer"])
                expr = parse_infix(rec["equation"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError,
                    ParseError) as exc:
                log.warning("%s:%d: skipping malformed record (%s)",
                            path, lineno, exc)
                skipped += 1
                continue
            try:
                tokens, quantities = tokenize(text, tokenizer)
            except ValueError as exc:
                log.warning("%s:%d: skipping record %s (%s)",
                            path, lineno, pid, exc)
                skipped += 1
                continue
            if len(quantities) > MAX_QUANTITIES:
                log.warning("%s:%d: skipping record %s (%d quantities, cap %d)",
                            path, lineno, pid, len(quantities), MAX_QUANTITIES)
                skipped += 1
                continue
            p = Problem(text=text, tokens=tokens, quantities=quantities,
                        expression=expr, answer=answer, pid=pid)
            try:
                p.validate()
                value = evaluate(expr, p.bindings())
            except (ValueError, EvaluationError) as exc:
                log.info("%s:%d: dropping %s, equation unusable (%s)",
                         path, lineno, pid, exc)
                dropped += 1
                continue
            if not answers_match(value, answer):
                log.info("%s:%d: dropping %s, equation gives %g not %g",
                         path, lineno, pid, value, answer)
                dropped += 1
                continue
            problems.append(p)
    if not problems:
        log.warning("%s: no usable records", path)
    log.info("%s: %d records loaded, %d dropped as inconsistent, %d skipped",
             path, len(problems), dropped, skipped)
    return problems


def dump_dataset(problems, path):
    with open(path, "w") as f:
        for p in problems:
            f.write(json.dumps({
                "id": p.pid,
                "text": p.text,
                "equation": " ".join(to_infix(p.expression)),
                "answer": p.answer,
            }, sort_keys=True) + "\n")


# -- synthetic corpus ----------------------------------------------------

_NAMES = ("tom", "lily", "sam", "mia")
_ITEMS = ("apples", "pens", "marbles", "stickers", "books")

# text slots fill left to right so N indices match reading order; wording
# recycles a small common word pool to keep the lexicon near 50 words
SYNTH_TEMPLATES = (
    {"text": "{name} had {n0} {item} and bought {n1} more . "
             "how many {item} now ?",
     "equation": "N0 + N1"},
    {"text": "{name} had {n0} {item} and gave away {n1} . "
             "how many are left ?",
     "equation": "N0 - N1"},
    {"text": "{name} filled {n0} boxes with {n1} {item} each . "
             "how many {item} in all ?",
     "equation": "N0 * N1"},
    {"text": "{name} split {n0} {item} equally among {n1} friends . "
             "how many for each friend ?",
     "equation": "N0 / N1"},
    {"text": "a pile of {item} grows {n0} times larger each day . "
             "how many times larger after {n1} days ?",
     "equation": "N0 ^ N1", "ranges": {0: (2, 5), 1: (2, 4)}},
    {"text": "{name} bought {n0} {item} and {n1} {item2} for {n2} "
             "dollars each . how many dollars in all ?",
     "equation": "( N0 + N1 ) * N2", "ranges": {2: (2, 9)}},
    {"text": "a box holds {n0} {item} and {n1} {item2} . "
             "how many in {n2} boxes ?",
     "equation": "( N0 + N1 ) * N2", "ranges": {2: (2, 9)}},
    {"text": "{name} had {n0} {item} , gave away {n1} , and sold the "
             "rest for {n2} dollars each . how many dollars ?",
     "equation": "( N0 - N1 ) * N2",
     "ranges": {0: (50, 99), 1: (2, 49), 2: (2, 9)}},
    {"text": "{name} bought {n0} boxes of {n1} {item} and {n2} more "
             "{item} . how many in all ?",
     "equation": "N0 * N1 + N2", "ranges": {0: (2, 9)}},
    {"text": "{name} had {n0} dollars and bought {n1} {item} for {n2} "
             "dollars each . how many dollars are left ?",
     "equation": "N0 - N1 * N2",
     "ranges": {0: (50, 99), 1: (2, 7), 2: (2, 7)}},
    {"text": "{name} and {friend} pooled {n0} and {n1} {item} and split "
             "them equally among {n2} friends . how many for each ?",
     "equation": "( N0 + N1 ) / N2", "ranges": {2: (2, 9)}},
    {"text": "{name} split {n0} {item} into boxes of {n1} and sold {n2} "
             "boxes . how many boxes are left ?",
     "equation": "N0 / N1 - N2",
     "ranges": {0: (20, 99), 1: (2, 9), 2: (2, 5)}},
    {"text": "{name} bought {n0} , {n1} and {n2} {item} . "
             "how many in all ?",
     "equation": "N0 + N1 + N2"},
    {"text": "a box had {n0} {item} , {name} put in {n1} and took out "
             "{n2} . how many {item} now ?",
     "equation": "N0 + N1 - N2"},
    {"text": "{name} made {n0} {item} a day for {n1} days and put {n2} "
             "in each box . how many boxes ?",
     "equation": "N0 * N1 / N2", "ranges": {1: (2, 9), 2: (2, 9)}},
    {"text": "{name} bought {n0} , {n1} , {n2} and {n3} {item} . "
             "how many in all ?",
     "equation": "N0 + N1 + N2 + N3"},
    {"text": "a box holds {n0} {item} and {n1} {item2} . {name} filled "
             "{n2} boxes and took out {n3} . how many are left ?",
     "equation": "( N0 + N1 ) * N2 - N3", "ranges": {2: (2, 9)}},
    {"text": "a wheel is {n0} meters across . how many meters around ?",
     "equation": "N0 * 3.14"},
    {"text": "{name} had {n0} {item} and lost one . how many are left ?",
     "equation": "N0 - 1"},
)


def generate_synthetic(size, seed):
    """Deterministic toy corpus drawn from SYNTH_TEMPLATES."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(size):
        t = SYNTH_TEMPLATES[rng.integers(0, len(SYNTH_TEMPLATES))]
        expr = parse_infix(t["equation"])
        qidxs = [n.qidx for n in iter_nodes(expr) if n.qidx is not None]
        arity = max(qidxs, default=-1) + 1
        ranges = t.get("ranges", {})
        values = []
        for k in range(arity):
            lo, hi = ranges.get(k, (2, 99))
            values.append(int(rng.integers(lo, hi + 1)))
        name, friend = rng.choice(_NAMES, size=2, replace=False)
        item, item2 = rng.choice(_ITEMS, size=2, replace=False)
        slots = {"n%d" % k: (values[k] if k < arity else "")
                 for k in range(4)}
        text = t["text"].format(
            name=str(name), friend=str(friend), item=str(item),
            item2=str(item2), **slots)
        tokens, quantities = tokenize(text)
        assert len(quantities) == arity, t["text"]
        answer = evaluate(expr, {k: float(v) for k, v in enumerate(values)})
        out.append(Problem(text=text, tokens=tokens, quantities=quantities,
                           expression=expr, answer=answer,
                           pid="syn-%05d" % i))
    return out
