"""Answer metrics with an exact precision/diversity decomposition."""

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .alignment import alignment_report
from .augmentation import deformation_bucket
from .config import DataError
from .data import answers_match
from .expression import (
    EvaluationError, ParseError, evaluate, operator_count, structural_equal,
)

log = logging.getLogger("mvsolver.evaluate")


def prediction_expression(pred):
    """Parsed tree for a prediction, None when absent or malformed."""
    try:
        return pred.expression()
    except (ParseError, ValueError):
        return None


def prediction_answer(pred, problem):
    expr = prediction_expression(pred)
    if expr is None:
        return None
    try:
        value = evaluate(expr, problem.bindings())
    except EvaluationError:
        return None
    return value if np.isfinite(value) else None


def answer_correct(pred, problem):
    value = prediction_answer(pred, problem)
    return value is not None and answers_match(value, problem.answer)


@dataclass
class EvalReport:
    n: int
    n_correct: int
    n_exact: int
    n_diverse: int
    abstained: int = 0
    buckets: dict = field(default_factory=dict)      # op count -> n/correct
    deformation: dict = field(default_factory=dict)  # pattern -> count
    alignment: dict = field(default_factory=dict)

    # accuracy is defined as the sum of its decomposition so the
    # identity holds bit-exactly in floating point; it equals
    # n_correct / n up to one rounding
    @property
    def precision(self):
        return self.n_exact / self.n if self.n else 0.0

    @property
    def diversity(self):
        return self.n_diverse / self.n if self.n else 0.0

    @property
    def accuracy(self):
        return self.precision + self.diversity


def evaluate_model(model, problems, phase=1):
    """Score model predictions; returns (EvalReport, record list).

    A prediction that cannot be parsed or evaluated counts as wrong and
    never aborts the run.  Diversity means answer-correct with a tree
    that differs structurally from the label, so every correct problem
    lands in exactly one of the two metric halves.
    """
    n_correct = n_exact = n_diverse = abstained = 0
    buckets = {}
    deformation = {}
    records = []
    for p in problems:
        pred = model.predict(p, phase=phase)
        expr = prediction_expression(pred)
        value = None
        if expr is not None:
            try:
                got = evaluate(expr, p.bindings())
                value = float(got) if np.isfinite(got) else None
            except EvaluationError:
                value = None
        correct = value is not None and answers_match(value, p.answer)
        exact = False
        if pred.abstained:
            abstained += 1
        if correct:
            n_correct += 1
            exact = structural_equal(expr, p.expression)
            if exact:
                n_exact += 1
            else:
                n_diverse += 1
                name = deformation_bucket(expr, p.expression)
                deformation[name] = deformation.get(name, 0) + 1
        k = operator_count(p.expression)
        slot = buckets.setdefault(k, {"n": 0, "correct": 0})
        slot["n"] += 1
        slot["correct"] += int(correct)
        rec = pred.to_record()
        rec.update({"id": p.pid, "gold_answer": p.answer,
                    "answer": value, "correct": bool(correct),
                    "exact": bool(exact)})
        records.append(rec)

    pairs = []
    skipped = 0
    for p in problems:
        try:
            pairs.extend(model.traces(p))
        except DataError:
            skipped += 1
    if skipped:
        log.info("alignment stats skip %d problems without usable "
                 "gold mappings", skipped)
    report = EvalReport(n=len(problems), n_correct=n_correct,
                        n_exact=n_exact, n_diverse=n_diverse,
                        abstained=abstained, buckets=buckets,
                        deformation=deformation,
                        alignment=alignment_report(pairs, model.align))
    return report, records


def report_text(report):
    """Flat key = value rendering, keys sorted within each section."""
    lines = [
        "problems = %d" % report.n,
        "correct = %d" % report.n_correct,
        "answer_accuracy = %r" % report.accuracy,
        "equation_precision = %r" % report.precision,
        "diversity = %r" % report.diversity,
        "abstained = %d" % report.abstained,
    ]
    for k in sorted(report.buckets):
        slot = report.buckets[k]
        lines.append("bucket.%d.n = %d" % (k, slot["n"]))
        lines.append("bucket.%d.correct = %d" % (k, slot["correct"]))
    for name in sorted(report.deformation):
        lines.append("deformation.%s = %d" % (name, report.deformation[name]))
    stats = report.alignment
    lines.append("alignment.count = %d" % stats.get("count", 0))
    if stats.get("count"):
        lines.append("alignment.mean = %r" % stats["mean"])
        lines.append("alignment.std = %r" % stats["std"])
        for depth in sorted(stats["by_depth"]):
            sub = stats["by_depth"][depth]
            lines.append("alignment.depth.%d.count = %d"
                         % (depth, sub["count"]))
            lines.append("alignment.depth.%d.mean = %r"
                         % (depth, sub["mean"]))
    return "\n".join(lines) + "\n"


def dump_predictions(records, path):
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
