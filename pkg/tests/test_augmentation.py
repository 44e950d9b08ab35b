import numpy as np
import pytest

from mvsolver.augmentation import (
    IndeterminateEquivalence, apply_commutative, apply_distributive,
    augment_dataset, classify_deformation, deformation_bucket,
    numerically_equivalent, rewrite_sites, MULTIPLICATIVE_DISTRIBUTIVE,
)
from mvsolver.expression import (
    Node, Problem, evaluate, extract_quantities, parse_infix,
    structural_equal, to_infix,
)


def infix(e):
    return " ".join(to_infix(e))


def test_distributive_expand_basic():
    outs = apply_distributive(parse_infix("( N0 + N1 ) * N2"))
    assert len(outs) == 1
    assert infix(outs[0]) == "N0 * N2 + N1 * N2"


def test_distributive_case6():
    outs = apply_distributive(parse_infix("( 57 + 43 ) * 24"))
    assert len(outs) == 1
    assert infix(outs[0]) == "57 * 24 + 43 * 24"
    assert evaluate(outs[0]) == 2400


def test_distributive_no_match():
    assert apply_distributive(parse_infix("N0 + N1")) == []
    assert apply_distributive(parse_infix("N0 * N1")) == []


def test_distributive_minus_form_and_input_unchanged():
    e = parse_infix("( N0 - N1 ) * N2")
    outs = apply_distributive(e)
    assert [infix(o) for o in outs] == ["N0 * N2 - N1 * N2"]
    assert infix(e) == "( N0 - N1 ) * N2"


def test_distributive_multi_site_outermost_first():
    e = parse_infix("( N0 + N1 ) * N2 + ( N3 - N4 ) * N5")
    outs = apply_distributive(e)
    assert len(outs) == 2
    # one site rewritten per output, outer (left) site first
    assert infix(outs[0]) == "N0 * N2 + N1 * N2 + ( N3 - N4 ) * N5"
    assert infix(outs[1]) == "( N0 + N1 ) * N2 + ( N3 * N5 - N4 * N5 )"


def test_distributive_right_factor_not_matched():
    # the law targets (a +/- b) * c; a left factor stays put
    assert apply_distributive(parse_infix("N2 * ( N0 + N1 )")) == []


def test_factor_direction_exists_but_not_default():
    e = parse_infix("N0 * N2 + N1 * N2")
    assert apply_distributive(e) == []
    factored = rewrite_sites(e, MULTIPLICATIVE_DISTRIBUTIVE, "factor")
    assert len(factored) == 1
    assert infix(factored[0]) == "( N0 + N1 ) * N2"


def test_commutative_basic():
    assert [infix(o) for o in apply_commutative(parse_infix("N0 + N1"))] \
        == ["N1 + N0"]
    assert apply_commutative(parse_infix("N0 - N1")) == []
    outs = apply_commutative(parse_infix("( N0 + N1 ) * N2"))
    assert len(outs) == 2
    for o in outs:
        assert numerically_equivalent(o, parse_infix("( N0 + N1 ) * N2"))


def test_equivalence_oracle():
    a = parse_infix("( N0 + N1 ) * N2")
    b = parse_infix("N0 * N2 + N1 * N2")
    assert numerically_equivalent(a, b)
    assert numerically_equivalent(a, a)
    assert not numerically_equivalent(parse_infix("N0 + N1"),
                                      parse_infix("N0 * N1"))


def test_equivalence_oracle_is_deterministic():
    a = parse_infix("N0 / ( N1 - N2 )")
    b = parse_infix("N0 / ( N1 - N2 ) * 1")
    assert numerically_equivalent(a, b) == numerically_equivalent(a, b)


def test_equivalence_indeterminate_on_hopeless_tree():
    # 1/0 errors on every binding, so no clean trial ever lands
    bad = parse_infix("N0 / ( N1 - N1 )")
    with pytest.raises(IndeterminateEquivalence):
        numerically_equivalent(bad, bad, trials=5)


def test_rewrites_pass_oracle_and_change_structure():
    rng = np.random.default_rng(21)
    from test_expression import random_tree

    leaves = ["2", "3", "N0", "N1", "N2"]
    verified = 0
    for _ in range(200):
        tree = random_tree(rng, int(rng.integers(1, 5)), leaves)
        for out in apply_distributive(tree) + apply_commutative(tree):
            assert not structural_equal(out, tree)
            try:
                ok = numerically_equivalent(out, tree, trials=100)
            except IndeterminateEquivalence:
                continue  # e.g. division by a self-cancelling subtree
            assert ok
            verified += 1
    assert verified > 100


def _mk_problem(pid, text, equation):
    tokens = text.split()
    q = extract_quantities(tokens)
    e = parse_infix(equation)
    return Problem(text=text, tokens=tokens, quantities=q,
                   expression=e, answer=evaluate(e, {i: x.value for i, x in
                                                     enumerate(q)}), pid=pid)


def test_augment_dataset():
    p1 = _mk_problem("a", "buy 3 and 4 boxes of 5", "( N0 + N1 ) * N2")
    p2 = _mk_problem("b", "take 7 minus 2", "N0 - N1")
    out = augment_dataset([p1, p2])
    assert len(out) == 3
    assert out[0] is p1 and out[2] is p2
    clone = out[1]
    assert clone.text == p1.text and clone.answer == p1.answer
    assert clone.pid == "a-aug0"
    assert numerically_equivalent(clone.expression, p1.expression)
    bindings = p1.bindings()
    assert evaluate(clone.expression, bindings) == pytest.approx(p1.answer)
    # zero matches -> identical corpus
    assert augment_dataset([p2]) == [p2]


def test_classify_additive_commutative():
    assert classify_deformation(parse_infix("N1 + N0"),
                                parse_infix("N0 + N1")) == "additive-commutative"


def test_classify_multiplicative_commutative():
    assert classify_deformation(parse_infix("N1 * N0"),
                                parse_infix("N0 * N1")) \
        == "multiplicative-commutative"


def test_classify_distributive_both_directions():
    lab = parse_infix("( 57 + 43 ) * 24")
    pred = parse_infix("57 * 24 + 43 * 24")
    assert classify_deformation(pred, lab) == "multiplicative-distributive"
    assert classify_deformation(lab, pred) == "multiplicative-distributive"


def test_classify_division_distributive():
    assert classify_deformation(parse_infix("N0 / N2 + N1 / N2"),
                                parse_infix("( N0 + N1 ) / N2")) \
        == "division-distributive"


def test_classify_different_solving_idea():
    # same value everywhere, different quantity usage
    assert classify_deformation(parse_infix("N0 + N0"),
                                parse_infix("N0 * 2")) \
        == "different-solving-idea"


def test_classify_other_unreachable_in_three_steps():
    # mirroring all four + nodes takes four swaps, one more than the
    # closure's 3-step budget; same leaves, so "other"
    lab = parse_infix("( N0 + N1 ) + ( N2 + N3 ) + N4")
    pred = parse_infix("N4 + ( ( N3 + N2 ) + ( N1 + N0 ) )")
    assert classify_deformation(pred, lab) == "other"


def test_classify_rejects_bad_pairs():
    with pytest.raises(ValueError):
        classify_deformation(parse_infix("N0 + N1"), parse_infix("N0 + N1"))
    with pytest.raises(ValueError):
        classify_deformation(parse_infix("N0 + N1"), parse_infix("N0 * N1"))


def test_deformation_bucket_tolerates_coincidence():
    # equivalent only because both quantities happen to be 12 in the text
    assert deformation_bucket(parse_infix("N1 + 1"), parse_infix("N0 + 1")) \
        == "different-solving-idea"
    assert deformation_bucket(parse_infix("N1 + N0"), parse_infix("N0 + N1")) \
        == "additive-commutative"
