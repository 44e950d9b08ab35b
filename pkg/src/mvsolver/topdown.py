"""Top-down decoder: expand goals in pre-order, score ops and quantities.

Candidate index space for one problem with m quantities:
    [0..4]               operators, in +,-,*,/,^ order
    [5..5+m)             quantity mentions N0..N{m-1}
    [5+m..5+m+|C|)       configured constants
Both decoding views and the prediction dumps share this numbering.
"""

import numpy as np

from . import tensor as T
from .config import DataError
from .expression import OPS, operator_count
from .layers import MLP, Linear, make_param
from .prediction import Prediction, T2B, ViewTrace


def candidate_count(m, shared):
    return len(OPS) + m + len(shared.constants)


def candidate_index(token, m, shared):
    """Gold token -> candidate index; unknown tokens are data errors."""
    if token in OPS:
        return OPS.index(token)
    if token.startswith("N") and token[1:].isdigit():
        k = int(token[1:])
        if k >= m:
            raise DataError("equation uses %s but problem has %d quantities"
                            % (token, m))
        return len(OPS) + k
    try:
        value = float(token)
    except ValueError:
        raise DataError("unknown equation token %r" % token)
    ci = shared.constant_index(value)
    if ci is None:
        raise DataError("constant %s not in configured constant set" % token)
    return len(OPS) + m + ci


def token_for(index, m, shared):
    if index < len(OPS):
        return OPS[index]
    index -= len(OPS)
    if index < m:
        return "N%d" % index
    return shared.constant_token(index - m)


class TopDownView:
    def __init__(self, rng, shared, attention="dot"):
        d = shared.d
        self.shared = shared
        self.d = d
        self.attention = attention
        self.mlp_e = MLP(rng, d, d, d)
        if attention == "additive":
            self.attn_q = Linear(rng, d, d)
            self.attn_k = Linear(rng, d, d)
            self.attn_v = make_param(rng, (d, 1))
        self.mlp_s = MLP(rng, 3 * d, d, 1)
        self.mlp_d = MLP(rng, 2 * d, d, 2 * d)
        self.mlp_f = MLP(rng, 3 * d, d, d)

    def params(self, prefix="topdown"):
        out = self.mlp_e.params(prefix + ".mlp_e")
        out.update(self.mlp_s.params(prefix + ".mlp_s"))
        out.update(self.mlp_d.params(prefix + ".mlp_d"))
        out.update(self.mlp_f.params(prefix + ".mlp_f"))
        if self.attention == "additive":
            out.update(self.attn_q.params(prefix + ".attn_q"))
            out.update(self.attn_k.params(prefix + ".attn_k"))
            out[prefix + ".attn_v"] = self.attn_v
        return out

    # -- node prediction -------------------------------------------------

    def _attend(self, query, word_states):
        n = word_states.shape[0]
        if self.attention == "dot":
            scores = T.matmul(query, word_states.transpose())
            scores = scores.scale(1.0 / np.sqrt(self.d))
        else:
            qp = self.attn_q(query)
            kp = self.attn_k(word_states)
            qrep = T.matmul(T.Tensor(np.ones((n, 1))), qp)
            scores = T.matmul((qrep + kp).tanh(), self.attn_v).transpose()
        weights = scores.softmax()
        return T.matmul(weights, word_states)

    def predict_node(self, goal, encoded, e_q):
        """Distribution over ops + quantities + constants, and e_n."""
        e_n = self._attend(self.mlp_e(goal), encoded.word_states)
        cands = T.concat([self.shared.E_op, e_q], axis=0)
        v = cands.shape[0]
        e_rep = T.matmul(T.Tensor(np.ones((v, 1))), e_n)
        feats = T.concat([e_rep, cands, e_rep * cands], axis=1)
        dist = self.mlp_s(feats).transpose().softmax()
        return dist, e_n

    def decompose_node(self, goal, op_index):
        if op_index >= len(OPS):
            raise ValueError("decompose_node needs an operator, got candidate "
                             "index %d" % op_index)
        op_row = T.index_rows(self.shared.E_op, [op_index])
        both = self.mlp_d(T.concat([goal, op_row], axis=1))
        return both.narrow(1, 0, self.d), both.narrow(1, self.d, self.d)

    # -- training --------------------------------------------------------

    def teacher_forced_loss(self, encoded, e_q, gold_preorder, m):
        """Sum of per-node NLL; gold tokens drive the goal stack."""
        idxs = [candidate_index(tok, m, self.shared) for tok in gold_preorder]
        stack = [encoded.t_root]
        loss = None
        for y in idxs:
            goal = stack.pop()
            dist, _ = self.predict_node(goal, encoded, e_q)
            term = dist.pick(y).log()
            loss = term if loss is None else loss + term
            if y < len(OPS):
                t_l, t_r = self.decompose_node(goal, y)
                stack.append(t_r)
                stack.append(t_l)
        assert not stack, "gold pre-order did not close the goal stack"
        return -loss

    def subtree_representations(self, expr, e_q, m, mode="subtree_fusion"):
        """r per operator node, post-order; child e is the E_q row for
        leaves and the child's own r for operator children."""
        trace = ViewTrace()

        def leaf_row(node):
            if node.qidx is not None:
                if node.qidx >= m:
                    raise DataError("N%d out of range" % node.qidx)
                return T.index_rows(e_q, [node.qidx])
            ci = self.shared.constant_index(node.value)
            if ci is None:
                raise DataError("constant %s not configured"
                                % node.token())
            return T.index_rows(e_q, [m + ci])

        def walk(node, depth):
            if not node.is_op:
                return leaf_row(node)
            e_l = walk(node.left, depth + 1)
            e_r = walk(node.right, depth + 1)
            op_row = T.index_rows(self.shared.E_op,
                                  [self.shared.op_index(node.op)])
            r = self.mlp_f(T.concat([op_row, e_l, e_r], axis=1))
            trace.append(op_row if mode == "parent_embedding" else r, depth)
            return r

        if expr.is_op:
            walk(expr, 0)
        return trace

    # -- inference -------------------------------------------------------

    def beam_search(self, encoded, e_q, m, beam=4, max_len=31):
        """Complete pre-order candidates, best log-prob first.

        Ties break on the token-id sequence so equal-probability models
        decode identically across runs.  Returns [] when nothing
        completes within max_len.
        """
        v = candidate_count(m, self.shared)
        active = [(0.0, (), [encoded.t_root])]
        finished = []
        while active:
            grown = []
            for logp, toks, stack in active:
                if len(toks) >= max_len:
                    continue
                dist, _ = self.predict_node(stack[-1], encoded, e_q)
                logs = np.log(dist.data.reshape(-1))
                for c in range(v):
                    grown.append((logp + logs[c], toks + (c,),
                                  stack, c))
            grown.sort(key=lambda g: (-g[0], g[1]))
            active = []
            for logp, toks, stack, c in grown:
                if len(active) >= beam:
                    break
                base = stack[:-1]
                if c < len(OPS):
                    t_l, t_r = self.decompose_node(stack[-1], c)
                    active.append((logp, toks, base + [t_r, t_l]))
                elif base:
                    active.append((logp, toks, base))
                else:
                    finished.append((logp, toks))
        finished.sort(key=lambda f: (-f[0], f[1]))
        return [Prediction(view=T2B,
                           tokens=[token_for(c, m, self.shared) for c in toks],
                           score=float(logp))
                for logp, toks in finished[:beam]]
