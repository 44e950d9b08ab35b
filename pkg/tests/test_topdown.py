import itertools
import math

import numpy as np
import pytest

from helpers import gradcheck

import mvsolver.tensor as T
from mvsolver.config import DataError
from mvsolver.encoder import Encoder, SharedEmbeddings, Vocab, gather_quantities, tokenize
from mvsolver.expression import from_preorder, operator_count, parse_infix, to_preorder
from mvsolver.optim import Adam
from mvsolver.tensor import Tape
from mvsolver.topdown import TopDownView, candidate_count, candidate_index, token_for


def setup(seed=0, d=8, text="pick 2 apples and 3 pears", attention="dot"):
    rng = np.random.default_rng(seed)
    toks, qs = tokenize(text)
    vocab = Vocab.build([toks])
    shared = SharedEmbeddings(rng, vocab, d)
    enc = Encoder(rng, shared)
    td = TopDownView(rng, shared, attention=attention)
    encoded = enc.encode(toks)
    e_q = gather_quantities(encoded, qs, shared)
    return rng, shared, enc, td, encoded, e_q, len(qs)


def test_candidate_index_space():
    rng = np.random.default_rng(0)
    shared = SharedEmbeddings(rng, Vocab(["x"]), 8)
    assert candidate_count(2, shared) == 9
    assert candidate_index("*", 2, shared) == 2
    assert candidate_index("N1", 2, shared) == 6
    assert candidate_index("3.14", 2, shared) == 8
    assert token_for(8, 2, shared) == "3.14"
    assert [token_for(i, 2, shared) for i in range(9)] == \
        ["+", "-", "*", "/", "^", "N0", "N1", "1", "3.14"]
    with pytest.raises(DataError):
        candidate_index("N2", 2, shared)
    with pytest.raises(DataError):
        candidate_index("7", 2, shared)
    with pytest.raises(DataError):
        candidate_index("frog", 2, shared)


def test_distribution_shape_and_normalization():
    _, _, _, td, encoded, e_q, m = setup()
    dist, e_n = td.predict_node(encoded.t_root, encoded, e_q)
    assert dist.shape == (1, 9)  # 5 ops + 2 quantities + 2 constants
    assert dist.data.sum() == pytest.approx(1.0, abs=1e-12)
    assert e_n.shape == (1, 8)


def test_zero_scorer_gives_uniform():
    _, _, _, td, encoded, e_q, m = setup()
    for p in td.mlp_s.params("s").values():
        p.data[...] = 0.0
    dist, _ = td.predict_node(encoded.t_root, encoded, e_q)
    assert np.allclose(dist.data, 1.0 / 9.0)


def test_argmax_invariant_to_score_shift():
    _, _, _, td, encoded, e_q, m = setup(seed=3)
    d1, _ = td.predict_node(encoded.t_root, encoded, e_q)
    td.mlp_s.outer.b.data[...] += 7.5
    d2, _ = td.predict_node(encoded.t_root, encoded, e_q)
    assert np.argmax(d1.data) == np.argmax(d2.data)


def test_attention_sharpens_to_argmax_state():
    _, _, _, td, encoded, e_q, _ = setup(seed=1)
    states = encoded.word_states
    k = 3
    query = T.Tensor(states.data[k:k + 1] * 500.0)  # tau -> inf
    out = td._attend(query, states)
    assert np.allclose(out.data, states.data[k], atol=1e-4)


def test_additive_attention_config():
    _, _, _, td, encoded, e_q, m = setup(attention="additive")
    dist, _ = td.predict_node(encoded.t_root, encoded, e_q)
    assert dist.data.sum() == pytest.approx(1.0, abs=1e-12)
    assert any("attn_v" in k for k in td.params())


def test_decompose_shapes_and_distinctness():
    _, _, _, td, encoded, e_q, _ = setup(seed=2)
    t_l, t_r = td.decompose_node(encoded.t_root, 0)
    assert t_l.shape == (1, 8) and t_r.shape == (1, 8)
    u_l, u_r = td.decompose_node(encoded.t_root, 2)
    assert not np.allclose(t_l.data, u_l.data)
    assert not np.allclose(t_r.data, u_r.data)
    with pytest.raises(ValueError):
        td.decompose_node(encoded.t_root, 5)


def test_uniform_loss_value():
    _, _, _, td, encoded, e_q, m = setup()
    for p in td.mlp_s.params("s").values():
        p.data[...] = 0.0
    gold = to_preorder(parse_infix("( N0 + N1 ) * 1"))
    loss = td.teacher_forced_loss(encoded, e_q, gold, m)
    assert loss.item() == pytest.approx(5 * math.log(9), rel=1e-12)


def test_single_leaf_loss():
    _, _, _, td, encoded, e_q, m = setup()
    loss = td.teacher_forced_loss(encoded, e_q, ["N0"], m)
    dist, _ = td.predict_node(encoded.t_root, encoded, e_q)
    assert loss.item() == pytest.approx(-math.log(dist.data[0, 5]))


def test_gold_outside_vocab_errors():
    _, _, _, td, encoded, e_q, m = setup()
    with pytest.raises(DataError):
        td.teacher_forced_loss(encoded, e_q, ["N7"], m)
    with pytest.raises(DataError):
        td.teacher_forced_loss(encoded, e_q, ["42"], m)


def test_gold_drives_stack_for_random_trees():
    from test_expression import random_tree
    rng = np.random.default_rng(8)
    _, _, _, td, encoded, e_q, m = setup()
    leaves = ["N0", "N1", "1", "3.14"]
    for _ in range(30):
        tree = random_tree(rng, int(rng.integers(0, 5)), leaves)
        gold = to_preorder(tree)
        loss = td.teacher_forced_loss(encoded, e_q, gold, m)
        assert np.isfinite(loss.item())


def test_loss_gradients_match_finite_differences():
    rng, shared, enc, td, encoded, e_q, m = setup(d=8)
    gold = to_preorder(parse_infix("( N0 + N1 ) * 3.14"))
    params = {}
    params.update(shared.params())
    params.update(enc.params())
    params.update(td.params())

    def build():
        encoded = enc.encode(["pick", "N0", "apples", "and", "N1", "pears"])
        e_q = gather_quantities(encoded, tokenize("pick 2 apples and 3 pears")[1],
                                shared)
        return td.teacher_forced_loss(encoded, e_q, gold, m)

    check_rng = np.random.default_rng(99)
    err = gradcheck(build, list(params.values()), rng=check_rng, n_coords=3)
    assert err < 1e-4


def test_overfit_single_example():
    rng, shared, enc, td, _, _, m = setup(seed=4)
    toks, qs = tokenize("pick 2 apples and 3 pears")
    gold = to_preorder(parse_infix("N0 + N1"))
    params = {}
    params.update(shared.params())
    params.update(enc.params())
    params.update(td.params())
    opt = Adam(params, lr=5e-3, weight_decay=0.0)
    losses = []
    for _ in range(50):
        opt.zero_grad()
        with Tape() as tape:
            encoded = enc.encode(toks)
            e_q = gather_quantities(encoded, qs, shared)
            loss = td.teacher_forced_loss(encoded, e_q, gold, m)
            tape.backward(loss)
        opt.step()
        losses.append(loss.item())
    assert losses[-1] < losses[0] * 0.5
    assert all(l2 < l1 * 1.05 for l1, l2 in zip(losses, losses[1:]))


def test_subtree_representations_structure():
    _, shared, _, td, encoded, e_q, m = setup()
    one = td.subtree_representations(parse_infix("N0 + N1"), e_q, m)
    assert len(one) == 1 and one.depths == [0]

    fig = parse_infix("( 1 + N0 ) * N1 - 3.14")
    trace = td.subtree_representations(fig, e_q, m)
    assert len(trace) == 3
    assert trace.depths == [2, 1, 0]  # post-order: +, *, -
    # root fuses the * subtree's r as its left child embedding
    op_row = lambda s: T.index_rows(shared.E_op, [shared.op_index(s)])
    leaf = lambda i: T.index_rows(e_q, [i])
    r_plus = td.mlp_f(T.concat([op_row("+"), leaf(m + 0), leaf(0)], axis=1))
    r_mul = td.mlp_f(T.concat([op_row("*"), r_plus, leaf(1)], axis=1))
    r_root = td.mlp_f(T.concat([op_row("-"), r_mul, leaf(m + 1)], axis=1))
    assert np.allclose(trace.reps[2].data, r_root.data)

    leaf_only = td.subtree_representations(parse_infix("N0"), e_q, m)
    assert len(leaf_only) == 0


def test_subtree_representation_count_fuzz():
    from test_expression import random_tree
    rng = np.random.default_rng(14)
    _, _, _, td, encoded, e_q, m = setup()
    for _ in range(50):
        tree = random_tree(rng, int(rng.integers(0, 6)), ["N0", "N1", "1"])
        trace = td.subtree_representations(tree, e_q, m)
        assert len(trace) == operator_count(tree)


def test_beam_one_equals_greedy():
    _, shared, _, td, encoded, e_q, m = setup(seed=6)
    preds = td.beam_search(encoded, e_q, m, beam=1, max_len=15)
    assert len(preds) >= 1
    stack = [encoded.t_root]
    greedy_tokens = []
    while stack and len(greedy_tokens) < 15:
        goal = stack.pop()
        dist, _ = td.predict_node(goal, encoded, e_q)
        c = int(np.argmax(dist.data))
        greedy_tokens.append(token_for(c, m, shared))
        if c < 5:
            t_l, t_r = td.decompose_node(goal, c)
            stack.extend([t_r, t_l])
    assert preds[0].tokens == greedy_tokens


def test_beam_outputs_parse_and_dominate_greedy():
    # seed chosen so greedy decoding happens to terminate on this
    # untrained model; empty-on-timeout is covered separately
    _, _, _, td, encoded, e_q, m = setup(seed=5)
    wide = td.beam_search(encoded, e_q, m, beam=4, max_len=15)
    narrow = td.beam_search(encoded, e_q, m, beam=1, max_len=15)
    assert wide and narrow
    for p in wide:
        tree = from_preorder(p.tokens)  # no arity errors
        assert p.view == "T2B"
    assert wide[0].score >= narrow[0].score - 1e-12
    scores = [p.score for p in wide]
    assert scores == sorted(scores, reverse=True)


def test_beam_matches_exhaustive_enumeration():
    _, shared, _, td, encoded, e_q, m = setup(seed=9)
    v = candidate_count(m, shared)
    leaves = list(range(5, v))

    def seq_logp(idxs):
        total = 0.0
        stack = [encoded.t_root]
        for c in idxs:
            goal = stack.pop()
            dist, _ = td.predict_node(goal, encoded, e_q)
            total += math.log(dist.data[0, c])
            if c < 5:
                t_l, t_r = td.decompose_node(goal, c)
                stack.extend([t_r, t_l])
        assert not stack
        return total

    exhaustive = []
    for leaf in leaves:
        exhaustive.append(((leaf,), seq_logp((leaf,))))
    for op in range(5):
        for l1 in leaves:
            for l2 in leaves:
                s = (op, l1, l2)
                exhaustive.append((s, seq_logp(s)))
    exhaustive.sort(key=lambda e: (-e[1], e[0]))

    preds = td.beam_search(encoded, e_q, m, beam=20, max_len=3)
    want = [[token_for(c, m, shared) for c in s] for s, _ in exhaustive[:len(preds)]]
    got = [p.tokens for p in preds]
    assert got == want
    for (s, lp), p in zip(exhaustive, preds):
        assert p.score == pytest.approx(lp, abs=1e-9)


def test_beam_empty_when_nothing_completes():
    _, _, _, td, encoded, e_q, m = setup(seed=10)
    assert td.beam_search(encoded, e_q, m, beam=2, max_len=0) == []
    # a cap of 2 can only fit op+leaf (incomplete) or a bare leaf; if the
    # model's best two-token prefixes are operator-led, pruning may still
    # leave the leaf, so only the zero cap is guaranteed empty
    preds = td.beam_search(encoded, e_q, m, beam=2, max_len=2)
    for p in preds:
        from_preorder(p.tokens)
