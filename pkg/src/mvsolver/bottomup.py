"""Bottom-up decoder: compose quantity pairs with operators in post-order.

The pool starts as the problem's quantity rows plus constants; every
accepted (i, j, op) mapping appends the mapping's embedding as a new,
reusable row.  Candidates at each step are all ordered pairs i != j
crossed with the five operators, ranked (i, j, op) lexicographically,
plus one trailing STOP pseudo-candidate scored from the pool mean.
Training is perceptron-style: push the gold candidate's score above the
current argmax's.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .config import DataError
from .expression import (
    OPS, Node, ParseError, operator_depths_postorder, from_postorder,
    to_postorder,
)
from .layers import MLP
from .prediction import B2T, Prediction, ViewTrace

STOP = "STOP"


@dataclass
class RelationMapping:
    i: int
    j: int
    op: str                 # operator symbol, or STOP for the sentinel
    embedding: object       # (1, d) tensor; None for STOP
    score: float
    provenance: object = None   # Expression for the composed sub-tree


class Pool:
    """Growing quantity pool: (1, d) rows plus provenance expressions."""

    def __init__(self, rows, provenances):
        self.rows = list(rows)
        self.provs = list(provenances)

    @classmethod
    def from_quantities(cls, e_q, m, constants):
        rows = [e_q.narrow(0, k, 1) for k in range(e_q.shape[0])]
        provs = [Node.quantity(k) for k in range(m)]
        provs += [Node.constant(c) for c in constants]
        assert len(rows) == len(provs), "pool rows disagree with provenance"
        return cls(rows, provs)

    def append(self, row, prov):
        self.rows.append(row)
        self.provs.append(prov)

    def tensor(self):
        return T.concat(self.rows, axis=0) if len(self.rows) > 1 else self.rows[0]

    def __len__(self):
        return len(self.rows)


def pair_rank(i, j, p):
    return i * (p - 1) + (j if j < i else j - 1)


def candidate_rank(i, j, op_index, p):
    return pair_rank(i, j, p) * len(OPS) + op_index


def ordered_pairs(p):
    return [(i, j) for i in range(p) for j in range(p) if j != i]


def gold_mappings(postorder_tokens, m, shared):
    """Stack-simulate the gold post-order into (i, j, op_index) triples.

    Built sub-expressions get pool indices m + |constants| + t in build
    order, mirroring gold-driven pool extension during training.
    """
    base = m + len(shared.constants)
    stack = []
    out = []
    for pos, tok in enumerate(postorder_tokens):
        if tok in OPS:
            if len(stack) < 2:
                raise ParseError("operator %r lacks operands" % tok, pos)
            j = stack.pop()
            i = stack.pop()
            out.append((i, j, OPS.index(tok)))
            stack.append(base + len(out) - 1)
        elif tok.startswith("N") and tok[1:].isdigit():
            k = int(tok[1:])
            if k >= m:
                raise DataError("equation uses %s but problem has %d "
                                "quantities" % (tok, m))
            stack.append(k)
        else:
            try:
                ci = None
                value = float(tok)
            except ValueError:
                raise DataError("unknown equation token %r" % tok)
            ci = shared.constant_index(value)
            if ci is None:
                raise DataError("constant %s not in configured constant set"
                                % tok)
            stack.append(m + ci)
    if len(stack) != 1:
        raise ParseError("sequence leaves %d detached subtrees" % len(stack),
                         len(postorder_tokens))
    return out


class BottomUpView:
    def __init__(self, rng, shared):
        d = shared.d
        self.shared = shared
        self.d = d
        self.mlp_h = MLP(rng, 3 * d, d, d)
        self.mlp_m = MLP(rng, 3 * d, d, d)
        self.mlp_r = MLP(rng, d, d, 1)
        self.mlp_stop = MLP(rng, d, d, 1)

    def params(self, prefix="bottomup"):
        out = self.mlp_h.params(prefix + ".mlp_h")
        out.update(self.mlp_m.params(prefix + ".mlp_m"))
        out.update(self.mlp_r.params(prefix + ".mlp_r"))
        out.update(self.mlp_stop.params(prefix + ".mlp_stop"))
        return out

    # -- scoring ---------------------------------------------------------

    def candidate_scores(self, pool):
        """Batched scores for every candidate at this step.

        Returns (scores (5P+1, 1), mapping embeddings M (5P, d), pair
        embeddings H (P, d), pairs).  Row k of the first 5P scores is
        pair k//5 with operator k%5; the last row is STOP.
        """
        p = len(pool)
        if p < 2:
            raise ValueError("pool must hold at least 2 rows, has %d" % p)
        pairs = ordered_pairs(p)
        pool_t = pool.tensor()
        e_i = T.index_rows(pool_t, [a for a, _ in pairs])
        e_j = T.index_rows(pool_t, [b for _, b in pairs])
        h = self.mlp_h(T.concat([e_i, e_j, e_i * e_j], axis=1))
        n_pairs = len(pairs)
        h5 = T.index_rows(h, [k for k in range(n_pairs)
                              for _ in range(len(OPS))])
        op5 = T.index_rows(self.shared.E_op, list(range(len(OPS))) * n_pairs)
        m_emb = self.mlp_m(T.concat([h5, op5, h5 * op5], axis=1))
        scores = self.mlp_r(m_emb)
        s_stop = self.mlp_stop(pool_t.mean_rows())
        return T.concat([scores, s_stop], axis=0), m_emb, h, pairs

    def score_mapping(self, pool, i, j, op):
        """One candidate's RelationMapping (slow path; tests and tools)."""
        if i == j:
            raise ValueError("mapping needs two distinct rows, got i=j=%d" % i)
        op_index = OPS.index(op) if op in OPS else op
        scores, m_emb, _, _ = self.candidate_scores(pool)
        k = candidate_rank(i, j, op_index, len(pool))
        prov = Node.operator(OPS[op_index], pool.provs[i].clone(),
                             pool.provs[j].clone())
        return RelationMapping(i=i, j=j, op=OPS[op_index],
                               embedding=m_emb.narrow(0, k, 1),
                               score=float(scores.data[k, 0]),
                               provenance=prov)

    def enumerate_candidates(self, pool):
        """All ordered-pair x operator mappings plus the STOP sentinel."""
        scores, m_emb, _, pairs = self.candidate_scores(pool)
        out = []
        for k in range(len(pairs) * len(OPS)):
            i, j = pairs[k // len(OPS)]
            op = OPS[k % len(OPS)]
            out.append(RelationMapping(
                i=i, j=j, op=op, embedding=m_emb.narrow(0, k, 1),
                score=float(scores.data[k, 0]),
                provenance=Node.operator(op, pool.provs[i].clone(),
                                         pool.provs[j].clone())))
        out.append(RelationMapping(i=-1, j=-1, op=STOP, embedding=None,
                                   score=float(scores.data[-1, 0])))
        return out

    # -- training --------------------------------------------------------

    def training_loss(self, e_q, gold_postorder, m, rep_mode="mapping_embedding",
                      signature=None):
        """Perceptron loss over gold mappings plus a final STOP decision.

        Returns (loss, ViewTrace of gold-step embeddings).  signature,
        when a list, collects each step's argmax rank (used to detect
        argmax flips when finite-differencing this piecewise loss).
        """
        mappings = gold_mappings(gold_postorder, m, self.shared)
        depths = operator_depths_postorder(from_postorder(gold_postorder))
        pool = Pool.from_quantities(e_q, m, self.shared.constants)
        trace = ViewTrace()
        loss = None
        for t, (i, j, op_index) in enumerate(mappings):
            if i == j:
                raise DataError("gold equation pairs pool row %d with itself; "
                                "candidates need two distinct rows" % i)
            scores, m_emb, h, pairs = self.candidate_scores(pool)
            gold = candidate_rank(i, j, op_index, len(pool))
            arg = int(np.argmax(scores.data.reshape(-1)))
            if signature is not None:
                signature.append(arg)
            if arg != gold:
                term = scores.pick(arg) - scores.pick(gold)
                loss = term if loss is None else loss + term
            row = m_emb.narrow(0, gold, 1)
            if rep_mode == "triples_fusion":
                trace.append(h.narrow(0, pair_rank(i, j, len(pool)), 1),
                             depths[t])
            else:
                trace.append(row, depths[t])
            prov = Node.operator(OPS[op_index], pool.provs[i].clone(),
                                 pool.provs[j].clone())
            pool.append(row, prov)

        scores, _, _, _ = self.candidate_scores(pool)
        stop_rank = scores.shape[0] - 1
        arg = int(np.argmax(scores.data.reshape(-1)))
        if signature is not None:
            signature.append(arg)
        if arg != stop_rank:
            term = scores.pick(arg) - scores.pick(stop_rank)
            loss = term if loss is None else loss + term
        if loss is None:
            loss = T.Tensor(np.zeros(()))
        return loss, trace

    # -- inference -------------------------------------------------------

    def greedy_construct(self, e_q, m, max_steps=None,
                         rep_mode="mapping_embedding"):
        """Argmax mappings until STOP wins; returns (Prediction, ViewTrace).

        STOP winning before anything is built is an abstention.  Hitting
        max_steps keeps the last built expression.
        """
        if max_steps is None:
            max_steps = e_q.shape[0]
        pool = Pool.from_quantities(e_q, m, self.shared.constants)
        trace = ViewTrace()
        total = 0.0
        for step in range(max_steps):
            scores, m_emb, h, pairs = self.candidate_scores(pool)
            flat = scores.data.reshape(-1)
            arg = int(np.argmax(flat))
            if arg == flat.size - 1:
                if step == 0:
                    return (Prediction(view=B2T, tokens=[], score=float(flat[arg]),
                                       abstained=True), trace)
                break
            i, j = pairs[arg // len(OPS)]
            op = OPS[arg % len(OPS)]
            row = m_emb.narrow(0, arg, 1)
            prov = Node.operator(op, pool.provs[i].clone(),
                                 pool.provs[j].clone())
            if rep_mode == "triples_fusion":
                trace.append(h.narrow(0, arg // len(OPS), 1), -1)
            else:
                trace.append(row, -1)
            total += float(flat[arg])
            pool.append(row, prov)
        if len(trace) == 0:
            return (Prediction(view=B2T, tokens=[], score=0.0,
                               abstained=True), trace)
        tokens = to_postorder(pool.provs[-1])
        return Prediction(view=B2T, tokens=tokens, score=total), trace
