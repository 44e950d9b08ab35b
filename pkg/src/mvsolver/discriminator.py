"""Second-phase candidate scorer: P(text, equation) in (0, 1).

Candidates arrive as expression trees, are re-serialized to minimal
parenthesis infix, embedded through the shared tables (plus two learned
parenthesis vectors), run through a 2-layer unidirectional GRU, fused
with the text states by one cross-attention block, mean-pooled and
squashed.  Trained on gold/equivalent positives against oracle-verified
wrong negatives; at eval time it arbitrates between the two views.
"""

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .augmentation import IndeterminateEquivalence, numerically_equivalent
from .config import DataError
from .expression import (
    OPS, EvaluationError, evaluate, iter_nodes, structural_equal, to_infix,
    to_preorder,
)
from .layers import GRUCell, Linear, MLP
from .prediction import T2B, Prediction
from .tensor import Tensor

PROB_FLOOR = 1e-7


@dataclass
class CandidateBatch:
    encoded: object          # encoder output for the problem text
    e_q: object              # quantity/constant rows for the same problem
    m: int
    positives: list = field(default_factory=list)   # Expressions
    negatives: list = field(default_factory=list)


class Discriminator:
    def __init__(self, rng, shared):
        d = shared.d
        scale = 1.0 / np.sqrt(d)
        self.shared = shared
        self.d = d
        self.gru1 = GRUCell(rng, d, d)
        self.gru2 = GRUCell(rng, d, d)
        self.paren_open = Tensor(rng.normal(0.0, scale, size=(1, d)),
                                 requires_grad=True)
        self.paren_close = Tensor(rng.normal(0.0, scale, size=(1, d)),
                                  requires_grad=True)
        self.wq = Linear(rng, d, d)
        self.wk = Linear(rng, d, d)
        self.wv = Linear(rng, d, d)
        self.ff = MLP(rng, d, d, d)
        self.head = MLP(rng, d, d, 1)

    def params(self, prefix="disc"):
        out = self.gru1.params(prefix + ".gru1")
        out.update(self.gru2.params(prefix + ".gru2"))
        out[prefix + ".paren_open"] = self.paren_open
        out[prefix + ".paren_close"] = self.paren_close
        out.update(self.wq.params(prefix + ".wq"))
        out.update(self.wk.params(prefix + ".wk"))
        out.update(self.wv.params(prefix + ".wv"))
        out.update(self.ff.params(prefix + ".ff"))
        out.update(self.head.params(prefix + ".head"))
        return out

    def _token_rows(self, expr, e_q, m):
        rows = []
        for tok in to_infix(expr):
            if tok == "(":
                rows.append(self.paren_open)
            elif tok == ")":
                rows.append(self.paren_close)
            elif tok in OPS:
                rows.append(self.shared.E_op.narrow(0, OPS.index(tok), 1))
            elif tok.startswith("N") and tok[1:].isdigit():
                k = int(tok[1:])
                if k >= m:
                    raise DataError("candidate uses %s but problem has %d "
                                    "quantities" % (tok, m))
                rows.append(e_q.narrow(0, k, 1))
            else:
                ci = self.shared.constant_index(float(tok))
                if ci is None:
                    raise DataError("candidate constant %s not configured"
                                    % tok)
                rows.append(e_q.narrow(0, m + ci, 1))
        return rows

    def score_joint(self, encoded, e_q, m, expr):
        """Joint probability that `expr` solves the encoded problem."""
        if expr is None:
            raise ValueError("cannot score an empty candidate")
        rows = self._token_rows(expr, e_q, m)

        h1 = self.gru1.initial_state()
        h2 = self.gru2.initial_state()
        states = []
        for x in rows:
            h1 = self.gru1(x, h1)
            h2 = self.gru2(h1, h2)
            states.append(h2)
        h = states[0] if len(states) == 1 else T.concat(states, axis=0)

        s = encoded.word_states
        att = T.matmul(self.wq(h), self.wk(s).transpose())
        att = att.scale(1.0 / np.sqrt(self.d)).softmax()
        fused = h + T.matmul(att, self.wv(s))
        fused = fused + self.ff(fused)
        return self.head(fused.mean_rows()).sigmoid()

    def loss(self, batch):
        """-mean log P over positives + mean log P over negatives."""
        if not batch.positives or not batch.negatives:
            raise ValueError("need at least one positive and one negative")

        def logp(expr):
            p = self.score_joint(batch.encoded, batch.e_q, batch.m, expr)
            return p.clip(PROB_FLOOR, 1.0 - PROB_FLOOR).log()

        pos = [logp(e) for e in batch.positives]
        neg = [logp(e) for e in batch.negatives]
        total = pos[0].scale(-1.0 / len(pos))
        for t in pos[1:]:
            total = total + t.scale(-1.0 / len(pos))
        for t in neg:
            total = total + t.scale(1.0 / len(neg))
        return total.sum()

    def select_second_phase(self, encoded, e_q, m, y_t2b, y_b2t):
        """Arbitrate between the two views' predictions.

        Missing or abstained candidates fall through to the other view;
        ties (including structurally identical candidates) keep the
        top-down answer.
        """
        def absent(p):
            return p is None or p.abstained or not p.tokens

        if absent(y_t2b) and absent(y_b2t):
            return Prediction(view=T2B, tokens=[], score=0.0, abstained=True)
        if absent(y_b2t):
            return y_t2b
        if absent(y_t2b):
            return y_b2t
        e_t = y_t2b.expression()
        e_b = y_b2t.expression()
        if structural_equal(e_t, e_b):
            return y_t2b
        p_t = self.score_joint(encoded, e_q, m, e_t).item()
        p_b = self.score_joint(encoded, e_q, m, e_b).item()
        return y_t2b if p_t >= p_b else y_b2t


def _operator_substitutions(gold):
    n_ops = sum(1 for n in iter_nodes(gold) if n.is_op)
    for k in range(n_ops):
        for op in OPS:
            c = gold.clone()
            target = [n for n in iter_nodes(c) if n.is_op][k]
            if target.op == op:
                continue
            target.op = op
            yield c


def _quantity_swaps(gold):
    n_leaves = sum(1 for n in iter_nodes(gold) if n.qidx is not None)
    for a in range(n_leaves):
        for b in range(a + 1, n_leaves):
            c = gold.clone()
            leaves = [n for n in iter_nodes(c) if n.qidx is not None]
            if leaves[a].qidx == leaves[b].qidx:
                continue
            leaves[a].qidx, leaves[b].qidx = leaves[b].qidx, leaves[a].qidx
            yield c


def build_negatives(gold, candidates, bindings, limit=8, tol=1e-4):
    """Wrong-equation set: wrong beam outputs, operator substitutions,
    quantity swaps; structurally deduplicated, each oracle-verified
    non-equivalent to gold, capped at `limit`."""
    try:
        gold_answer = evaluate(gold, bindings)
    except EvaluationError:
        gold_answer = None
    seen = {tuple(to_preorder(gold))}
    out = []

    def admit(e):
        key = tuple(to_preorder(e))
        if key in seen:
            return
        seen.add(key)
        try:
            if not numerically_equivalent(e, gold):
                out.append(e)
        except IndeterminateEquivalence:
            pass    # cannot certify it wrong, leave it out

    for c in candidates:
        if len(out) >= limit:
            return out[:limit]
        try:
            v = evaluate(c, bindings)
            wrong = gold_answer is None or \
                abs(v - gold_answer) > tol * max(1.0, abs(gold_answer))
        except EvaluationError:
            wrong = True
        if wrong:
            admit(c)
    for source in (_operator_substitutions(gold), _quantity_swaps(gold)):
        for c in source:
            if len(out) >= limit:
                return out[:limit]
            admit(c)
    return out[:limit]
