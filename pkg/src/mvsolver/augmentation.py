"""Equation rewriting by arithmetic laws, plus the equivalence oracle.

Rewrite rules are tree templates with metavariables (nested tuples,
strings as metavariables).  Training augmentation uses the distributive
expansion (q1 +/- q2) * q3 -> q1*q3 +/- q2*q3 at one site per output;
commutative and division-distributive rules exist for analysing how a
predicted equation deviates from its label.
"""

import collections
from dataclasses import dataclass

import numpy as np

from .expression import (
    EvaluationError, Node, evaluate, iter_nodes, structural_equal,
    to_preorder,
)


class IndeterminateEquivalence(RuntimeError):
    """The oracle ran out of retries before collecting enough clean trials."""


@dataclass(frozen=True)
class RewriteRule:
    name: str
    pattern: object        # template: nested tuples, str = metavariable
    replacement: object
    direction: str = "both"   # expand | factor | both

    def forms(self, direction):
        """(pattern, replacement) pairs legal in the requested direction."""
        out = []
        if direction == "expand" and self.direction in ("expand", "both"):
            out.append((self.pattern, self.replacement))
        if direction == "factor" and self.direction in ("factor", "both"):
            out.append((self.replacement, self.pattern))
        return out


def match(template, node, bindings=None):
    """Bind metavariables to subtrees; repeated names must match equal trees."""
    if bindings is None:
        bindings = {}
    if isinstance(template, str):
        if template in bindings:
            return bindings if structural_equal(bindings[template], node) else None
        bindings[template] = node
        return bindings
    op, lt, rt = template
    if not node.is_op or node.op != op:
        return None
    if match(lt, node.left, bindings) is None:
        return None
    return match(rt, node.right, bindings)


def substitute(template, bindings):
    if isinstance(template, str):
        return bindings[template].clone()
    op, lt, rt = template
    return Node.operator(op, substitute(lt, bindings),
                         substitute(rt, bindings))


MULTIPLICATIVE_DISTRIBUTIVE = [
    RewriteRule("mul-dist-plus",
                ("*", ("+", "a", "b"), "c"),
                ("+", ("*", "a", "c"), ("*", "b", "c"))),
    RewriteRule("mul-dist-minus",
                ("*", ("-", "a", "b"), "c"),
                ("-", ("*", "a", "c"), ("*", "b", "c"))),
]

# inferred counterpart for (q1 +/- q2) / q3; analysis-only
DIVISION_DISTRIBUTIVE = [
    RewriteRule("div-dist-plus",
                ("/", ("+", "a", "b"), "c"),
                ("+", ("/", "a", "c"), ("/", "b", "c"))),
    RewriteRule("div-dist-minus",
                ("/", ("-", "a", "b"), "c"),
                ("-", ("/", "a", "c"), ("/", "b", "c"))),
]

ADDITIVE_COMMUTATIVE = [
    RewriteRule("add-comm", ("+", "a", "b"), ("+", "b", "a"), "expand"),
]

MULTIPLICATIVE_COMMUTATIVE = [
    RewriteRule("mul-comm", ("*", "a", "b"), ("*", "b", "a"), "expand"),
]


def _sites(root):
    """Pre-order (node, parent, side) triples; root first."""
    out = []

    def walk(n, parent, side):
        out.append((n, parent, side))
        if n.is_op:
            walk(n.left, n, "left")
            walk(n.right, n, "right")

    walk(root, None, None)
    return out


def rewrite_sites(e, rules, direction="expand"):
    """One rewritten clone per (site, rule form) match, outermost-first.

    The input tree is never mutated.
    """
    out = []
    for k, (node, _, _) in enumerate(_sites(e)):
        for rule in rules:
            for pattern, replacement in rule.forms(direction):
                if match(pattern, node) is None:
                    continue
                fresh = e.clone()
                site, parent, side = _sites(fresh)[k]
                new_sub = substitute(replacement, match(pattern, site))
                if parent is None:
                    fresh = new_sub
                else:
                    setattr(parent, side, new_sub)
                # swapping equal operands etc. must not emit a no-op clone
                if not structural_equal(fresh, e):
                    out.append(fresh)
    return out


def apply_distributive(e):
    return rewrite_sites(e, MULTIPLICATIVE_DISTRIBUTIVE, "expand")


def apply_commutative(e):
    return rewrite_sites(e, ADDITIVE_COMMUTATIVE + MULTIPLICATIVE_COMMUTATIVE,
                         "expand")


def _quantity_indices(e):
    return {n.qidx for n in iter_nodes(e) if n.qidx is not None}


def numerically_equivalent(a, b, trials=100, tol=1e-9, rng=None):
    """Randomized equivalence: equal on `trials` clean bindings in [0.5, 10].

    Bindings raising evaluation errors (or overflowing) in either tree
    are resampled; the retry budget is 20 draws per requested trial, and
    exhausting it raises IndeterminateEquivalence.
    """
    if rng is None:
        rng = np.random.default_rng(0xE9)
    indices = sorted(_quantity_indices(a) | _quantity_indices(b))
    budget = 20 * trials
    done = 0
    while done < trials:
        if budget <= 0:
            raise IndeterminateEquivalence(
                "no clean bindings after %d draws" % (20 * trials))
        budget -= 1
        bindings = {i: float(rng.uniform(0.5, 10.0)) for i in indices}
        try:
            va = evaluate(a, bindings)
            vb = evaluate(b, bindings)
        except EvaluationError:
            continue
        if not (np.isfinite(va) and np.isfinite(vb)):
            continue
        if abs(va - vb) > tol * max(1.0, abs(va)):
            return False
        done += 1
    return True


def augment_dataset(problems, rules=None):
    """Originals plus one clone per distributive match, same text/answer."""
    if rules is None:
        rules = MULTIPLICATIVE_DISTRIBUTIVE
    out = []
    for p in problems:
        out.append(p)
        if p.expression is None:
            continue
        for j, rewritten in enumerate(rewrite_sites(p.expression, rules,
                                                    "expand")):
            out.append(type(p)(
                text=p.text, tokens=p.tokens, quantities=p.quantities,
                expression=rewritten, answer=p.answer,
                pid="%s-aug%d" % (p.pid, j)))
    return out


DEFORMATION_PATTERNS = (
    "additive-commutative",
    "multiplicative-commutative",
    "multiplicative-distributive",
    "division-distributive",
    "different-solving-idea",
    "other",
)

_PATTERN_RULES = (
    ("additive-commutative", ADDITIVE_COMMUTATIVE, ("expand",)),
    ("multiplicative-commutative", MULTIPLICATIVE_COMMUTATIVE, ("expand",)),
    ("multiplicative-distributive", MULTIPLICATIVE_DISTRIBUTIVE,
     ("expand", "factor")),
    ("division-distributive", DIVISION_DISTRIBUTIVE, ("expand", "factor")),
)


def _closure_reaches(start, goal, rules, directions, max_steps=3):
    seen = {tuple(to_preorder(start))}
    frontier = [start]
    for _ in range(max_steps):
        nxt = []
        for tree in frontier:
            for direction in directions:
                for rewritten in rewrite_sites(tree, rules, direction):
                    key = tuple(to_preorder(rewritten))
                    if key in seen:
                        continue
                    if structural_equal(rewritten, goal):
                        return True
                    seen.add(key)
                    nxt.append(rewritten)
        frontier = nxt
    return False


def _leaf_usage(e):
    return collections.Counter(n.token() for n in iter_nodes(e)
                               if not n.is_op)


def classify_deformation(predicted, labeled):
    """Name the law (if any) connecting a diverse prediction to its label.

    Requires the pair to be numerically equivalent but not structurally
    equal; tries each law's rewrite closure (up to 3 steps from the
    label) in a fixed priority order.
    """
    if structural_equal(predicted, labeled):
        raise ValueError("pair is structurally identical; nothing to classify")
    if not numerically_equivalent(predicted, labeled):
        raise ValueError("pair is not numerically equivalent")
    for label, rules, directions in _PATTERN_RULES:
        if _closure_reaches(labeled, predicted, rules, directions):
            return label
    if _leaf_usage(predicted) != _leaf_usage(labeled):
        return "different-solving-idea"
    return "other"


def deformation_bucket(predicted, labeled):
    """Histogram bucket for an answer-correct, structurally diverse pair.

    Unlike classify_deformation this never raises on pairs that are only
    equivalent under the problem's concrete numbers: those used different
    quantities or constants and get binned accordingly.
    """
    try:
        return classify_deformation(predicted, labeled)
    except (ValueError, IndeterminateEquivalence):
        if _leaf_usage(predicted) != _leaf_usage(labeled):
            return "different-solving-idea"
        return "other"
