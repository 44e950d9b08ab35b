import itertools
import math

import numpy as np
import pytest

from mvsolver.expression import (
    EvaluationError, Node, ParseError, evaluate, extract_quantities,
    from_postorder, from_preorder, operator_count, parse_infix,
    structural_equal, to_infix, to_postorder, to_preorder,
)

# -- independent reference implementations -------------------------------
# shunting-yard parser and a postfix stack evaluator, deliberately written
# with a different algorithm than the production code

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def shunting_yard(tokens):
    """Infix token list -> postfix token list (all ops left-associative)."""
    out, stack = [], []
    for tok in tokens:
        if tok in _PREC:
            while stack and stack[-1] in _PREC and _PREC[stack[-1]] >= _PREC[tok]:
                out.append(stack.pop())
            stack.append(tok)
        elif tok == "(":
            stack.append(tok)
        elif tok == ")":
            while stack and stack[-1] != "(":
                out.append(stack.pop())
            assert stack, "unbalanced"
            stack.pop()
        else:
            out.append(tok)
    while stack:
        assert stack[-1] != "(", "unbalanced"
        out.append(stack.pop())
    return out


def stack_eval(postfix, bindings):
    st = []
    for tok in postfix:
        if tok in _PREC:
            b, a = st.pop(), st.pop()
            if tok == "+":
                st.append(a + b)
            elif tok == "-":
                st.append(a - b)
            elif tok == "*":
                st.append(a * b)
            elif tok == "/":
                st.append(a / b)
            else:
                st.append(math.pow(a, b))
        elif tok.startswith("N"):
            st.append(bindings[int(tok[1:])])
        else:
            st.append(float(tok))
    assert len(st) == 1
    return st[0]


def random_tree(rng, n_ops, leaves):
    if n_ops == 0:
        tok = leaves[rng.integers(0, len(leaves))]
        return Node.quantity(int(tok[1:])) if tok.startswith("N") \
            else Node.constant(float(tok))
    k = int(rng.integers(0, n_ops))
    op = "+-*/^"[rng.integers(0, 5)]
    return Node.operator(op, random_tree(rng, k, leaves),
                         random_tree(rng, n_ops - 1 - k, leaves))


# -- parsing -------------------------------------------------------------

def test_parse_figure_tree():
    e = parse_infix("( 2 + 3 ) * 4 - 5")
    assert to_preorder(e) == ["-", "*", "+", "2", "3", "4", "5"]
    assert to_postorder(e) == ["2", "3", "+", "4", "*", "5", "-"]
    assert operator_count(e) == 3
    assert evaluate(e) == 15


def test_parse_single_atom():
    e = parse_infix("5")
    assert not e.is_op and e.value == 5.0
    assert to_preorder(e) == to_postorder(e) == to_infix(e) == ["5"]
    assert operator_count(e) == 0


def test_precedence_mul_over_add():
    e = parse_infix("2 + 3 * 4")
    assert e.op == "+" and not e.left.is_op and e.right.op == "*"


def test_left_associativity_including_power():
    assert evaluate(parse_infix("10 - 3 - 2")) == 5
    assert evaluate(parse_infix("2 ^ 3 ^ 2")) == 64  # (2^3)^2, left-assoc
    assert evaluate(parse_infix("8 / 4 / 2")) == 1


def test_parse_errors_are_positioned():
    with pytest.raises(ParseError) as ei:
        parse_infix("( 2 + 3")
    assert ei.value.position == 4
    with pytest.raises(ParseError):
        parse_infix("2 + + 3")
    with pytest.raises(ParseError):
        parse_infix("2 + foo")
    with pytest.raises(ParseError):
        parse_infix("2 3")
    with pytest.raises(ParseError):
        parse_infix("")


def test_parse_agrees_with_shunting_yard_reference():
    rng = np.random.default_rng(11)
    leaves = ["2", "3", "5", "N0", "N1", "0.5"]
    bindings = {0: 7.0, 1: 1.5}
    checked = 0
    while checked < 1000:
        tree = random_tree(rng, int(rng.integers(1, 5)), leaves)
        infix = to_infix(tree)
        try:
            ours = evaluate(parse_infix(infix), bindings)
            ref = stack_eval(shunting_yard(infix), bindings)
        except (EvaluationError, ZeroDivisionError, ValueError, OverflowError):
            continue
        if not (math.isfinite(ours) and math.isfinite(ref)):
            continue
        assert ours == pytest.approx(ref, rel=1e-12, abs=1e-12)
        assert structural_equal(parse_infix(infix), tree)
        checked += 1


# -- traversals and reconstruction ---------------------------------------

def test_figure_tree_reconstruction():
    pre = ["-", "*", "+", "2", "3", "4", "5"]
    post = ["2", "3", "+", "4", "*", "5", "-"]
    assert structural_equal(from_preorder(pre), from_postorder(post))
    assert to_postorder(from_preorder(pre)) == post


def test_roundtrip_properties_random_trees():
    rng = np.random.default_rng(12)
    leaves = ["1", "2", "N0", "N1", "N2", "3.14"]
    for _ in range(300):
        tree = random_tree(rng, int(rng.integers(0, 10)), leaves)
        k = operator_count(tree)
        pre = to_preorder(tree)
        post = to_postorder(tree)
        assert len(pre) == len(post) == 2 * k + 1
        assert structural_equal(from_preorder(pre), tree)
        assert structural_equal(from_postorder(post), tree)
        assert structural_equal(parse_infix(to_infix(tree)), tree)


def test_malformed_sequences():
    with pytest.raises(ParseError):
        from_preorder(["+", "2"])
    with pytest.raises(ParseError):
        from_preorder(["2", "3"])
    with pytest.raises(ParseError):
        from_postorder(["2", "+"])
    with pytest.raises(ParseError):
        from_postorder(["2", "3"])
    with pytest.raises(ParseError):
        from_postorder([])


# -- evaluation ----------------------------------------------------------

def test_evaluate_known_values():
    assert evaluate(parse_infix("( 57 + 43 ) * 24")) == 2400
    assert evaluate(parse_infix("2 ^ 10")) == 1024
    assert evaluate(parse_infix("N0 * N1"), {0: 6, 1: 7}) == 42


def test_evaluate_division_guard():
    with pytest.raises(EvaluationError):
        evaluate(parse_infix("3 / 0"))
    with pytest.raises(EvaluationError):
        evaluate(parse_infix("N0 / N1"), {0: 1.0, 1: 1e-13})


def test_evaluate_unbound_quantity():
    with pytest.raises(EvaluationError):
        evaluate(parse_infix("N0 + N3"), {0: 1.0})


def test_evaluate_matches_stack_machine():
    rng = np.random.default_rng(13)
    leaves = ["2", "3", "N0", "N1", "N2"]
    checked = 0
    while checked < 1000:
        tree = random_tree(rng, int(rng.integers(1, 6)), leaves)
        bindings = {i: float(rng.uniform(0.5, 10.0)) for i in range(3)}
        try:
            ours = evaluate(tree, bindings)
        except EvaluationError:
            continue
        if not math.isfinite(ours):
            continue
        ref = stack_eval(to_postorder(tree), bindings)
        assert ours == ref  # bit-identical: same operation order
        checked += 1


# -- structure helpers ---------------------------------------------------

def test_structural_equality_is_exact():
    a = parse_infix("( N0 + N1 ) * N2")
    b = parse_infix("N0 * N2 + N1 * N2")
    assert structural_equal(a, a.clone())
    assert not structural_equal(a, b)  # numerically equal, shapes differ
    assert not structural_equal(parse_infix("N0 - N1"), parse_infix("N1 - N0"))


def test_exhaustive_small_tree_roundtrip():
    # every shape with <=3 operators, every leaf/op labeling over small
    # alphabets, pre and post reconstruction both ways
    leaves = ["2", "N0", "3.14"]
    shapes = {0: [None]}
    for k in range(1, 4):
        shapes[k] = []
        for kl in range(0, k):
            for ls in shapes[kl]:
                for rs in shapes[k - 1 - kl]:
                    shapes[k].append((ls, rs))

    def instantiate(shape):
        if shape is None:
            for tok in leaves:
                yield from_preorder([tok])
            return
        ls, rs = shape
        for op in ("+", "-", "*"):
            for lt in instantiate(ls):
                for rt in instantiate(rs):
                    yield Node.operator(op, lt.clone(), rt.clone())

    seen = 0
    for k in range(0, 4):
        for shape in shapes[k]:
            for tree in instantiate(shape):
                assert structural_equal(from_preorder(to_preorder(tree)), tree)
                assert structural_equal(from_postorder(to_postorder(tree)), tree)
                seen += 1
    assert seen > 1000


# -- quantity extraction -------------------------------------------------

def test_extract_quantities_reading_order_and_forms():
    toks = "Tom has 12 apples and gives 3.5 away , 50% of 3/4 remain 12".split()
    qs = extract_quantities(toks)
    assert [q.value for q in qs] == [12.0, 3.5, 0.5, 0.75, 12.0]
    assert [q.position for q in qs] == [2, 6, 9, 11, 13]
    assert qs[0].value == qs[4].value and qs[0].position != qs[4].position


def test_extract_ignores_words():
    assert extract_quantities("no numbers here".split()) == []
