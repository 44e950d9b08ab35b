"""Expression trees: infix parsing, traversals, reconstruction, evaluation.

Equations are binary trees over {+, -, *, /, ^} with quantity leaves
(N0, N1, ... referencing a problem's extracted numbers) and literal
constant leaves.  Serialized forms are space-tokenized strings; the
infix form uses minimal parentheses.
"""

import math
import re
from dataclasses import dataclass

OPS = ("+", "-", "*", "/", "^")
PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}

_QUANTITY_RE = re.compile(r"N(\d+)")
_INT_RE = re.compile(r"\d+")
_DECIMAL_RE = re.compile(r"\d+\.\d+")
_PERCENT_RE = re.compile(r"(\d+(?:\.\d+)?)%")
_FRACTION_RE = re.compile(r"(\d+)/(\d+)")

DIV_EPS = 1e-12


class ParseError(ValueError):
    def __init__(self, message, position):
        super().__init__("%s (at token %d)" % (message, position))
        self.position = position


class EvaluationError(ArithmeticError):
    pass


class Node:
    """One tree node: operator with two children, or a leaf.

    Leaves are either a quantity reference (qidx set) or a literal
    constant (value set).  Immutable by convention; rewrites clone.
    """

    __slots__ = ("op", "left", "right", "qidx", "value")

    def __init__(self, op=None, left=None, right=None, qidx=None, value=None):
        self.op = op
        self.left = left
        self.right = right
        self.qidx = qidx
        self.value = value

    @staticmethod
    def operator(op, left, right):
        if op not in PRECEDENCE:
            raise ValueError("unknown operator %r" % op)
        return Node(op=op, left=left, right=right)

    @staticmethod
    def quantity(i):
        return Node(qidx=int(i))

    @staticmethod
    def constant(v):
        return Node(value=float(v))

    @property
    def is_op(self):
        return self.op is not None

    def clone(self):
        if self.is_op:
            return Node(op=self.op, left=self.left.clone(),
                        right=self.right.clone())
        return Node(qidx=self.qidx, value=self.value)

    def token(self):
        """Leaf token string; operators use .op directly."""
        if self.is_op:
            return self.op
        if self.qidx is not None:
            return "N%d" % self.qidx
        return format_number(self.value)

    def __repr__(self):
        return "Node(%s)" % " ".join(to_infix(self))


def format_number(v):
    """Stable token form: integers bare, everything else via repr."""
    if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _leaf_from_token(tok):
    m = _QUANTITY_RE.fullmatch(tok)
    if m:
        return Node.quantity(int(m.group(1)))
    try:
        v = float(tok)
    except ValueError:
        return None
    if not math.isfinite(v):
        return None
    return Node.constant(v)


def _tokens(text_or_tokens):
    if isinstance(text_or_tokens, str):
        return text_or_tokens.split()
    return list(text_or_tokens)


def parse_infix(text):
    """Precedence-climbing parse of space-tokenized infix.

    ^ binds tightest; all operators are left-associative, including ^.
    """
    toks = _tokens(text)
    pos = 0

    def atom():
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of input", pos)
        tok = toks[pos]
        if tok == "(":
            pos += 1
            node = binary(1)
            if pos >= len(toks) or toks[pos] != ")":
                raise ParseError("unbalanced parenthesis", pos)
            pos += 1
            return node
        if tok == ")":
            raise ParseError("unexpected ')'", pos)
        if tok in PRECEDENCE:
            raise ParseError("dangling operator %r" % tok, pos)
        leaf = _leaf_from_token(tok)
        if leaf is None:
            raise ParseError("unknown token %r" % tok, pos)
        pos += 1
        return leaf

    def binary(min_prec):
        nonlocal pos
        lhs = atom()
        while pos < len(toks) and toks[pos] in PRECEDENCE \
                and PRECEDENCE[toks[pos]] >= min_prec:
            op = toks[pos]
            pos += 1
            rhs = binary(PRECEDENCE[op] + 1)
            lhs = Node.operator(op, lhs, rhs)
        return lhs

    root = binary(1)
    if pos != len(toks):
        raise ParseError("trailing input %r" % toks[pos], pos)
    return root


def to_infix(e):
    """Minimal-parenthesis infix token list; re-parses to the same tree."""
    out = []

    def walk(n, parent_prec, is_right):
        if not n.is_op:
            out.append(n.token())
            return
        prec = PRECEDENCE[n.op]
        need = prec < parent_prec or (prec == parent_prec and is_right)
        if need:
            out.append("(")
        walk(n.left, prec, False)
        out.append(n.op)
        walk(n.right, prec, True)
        if need:
            out.append(")")

    walk(e, 0, False)
    return out


def to_preorder(e):
    out = []

    def walk(n):
        out.append(n.token())
        if n.is_op:
            walk(n.left)
            walk(n.right)

    walk(e)
    return out


def to_postorder(e):
    out = []

    def walk(n):
        if n.is_op:
            walk(n.left)
            walk(n.right)
        out.append(n.token())

    walk(e)
    return out


def from_preorder(tokens):
    toks = _tokens(tokens)
    pos = 0

    def build():
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("truncated sequence: operator missing operands", pos)
        tok = toks[pos]
        pos += 1
        if tok in PRECEDENCE:
            left = build()
            right = build()
            return Node.operator(tok, left, right)
        leaf = _leaf_from_token(tok)
        if leaf is None:
            raise ParseError("unknown token %r" % tok, pos - 1)
        return leaf

    root = build()
    if pos != len(toks):
        raise ParseError("sequence continues past a complete tree", pos)
    return root


def from_postorder(tokens):
    toks = _tokens(tokens)
    stack = []
    for i, tok in enumerate(toks):
        if tok in PRECEDENCE:
            if len(stack) < 2:
                raise ParseError("operator %r lacks operands" % tok, i)
            right = stack.pop()
            left = stack.pop()
            stack.append(Node.operator(tok, left, right))
        else:
            leaf = _leaf_from_token(tok)
            if leaf is None:
                raise ParseError("unknown token %r" % tok, i)
            stack.append(leaf)
    if not stack:
        raise ParseError("empty sequence", 0)
    if len(stack) > 1:
        raise ParseError("sequence leaves %d detached subtrees" % len(stack),
                         len(toks))
    return stack[0]


def evaluate(e, bindings=None):
    """Numeric value of the tree; quantity leaves look up bindings[i]."""
    def ev(n):
        if not n.is_op:
            if n.qidx is not None:
                if bindings is None or n.qidx not in bindings:
                    raise EvaluationError("unbound quantity N%d" % n.qidx)
                return float(bindings[n.qidx])
            return n.value
        a = ev(n.left)
        b = ev(n.right)
        if n.op == "+":
            return a + b
        if n.op == "-":
            return a - b
        if n.op == "*":
            return a * b
        if n.op == "/":
            if abs(b) < DIV_EPS:
                raise EvaluationError("division by zero")
            return a / b
        try:
            return math.pow(a, b)
        except (ValueError, OverflowError) as exc:
            raise EvaluationError("exponentiation failed: %s" % exc) from None

    return ev(e)


def operator_count(e):
    if not e.is_op:
        return 0
    return 1 + operator_count(e.left) + operator_count(e.right)


def structural_equal(a, b):
    """Exact node-by-node equality; no commutative or other canonicalization."""
    if a.is_op != b.is_op:
        return False
    if a.is_op:
        return (a.op == b.op and structural_equal(a.left, b.left)
                and structural_equal(a.right, b.right))
    return a.qidx == b.qidx and a.value == b.value


def iter_nodes(e):
    """Pre-order iterator over all nodes."""
    yield e
    if e.is_op:
        yield from iter_nodes(e.left)
        yield from iter_nodes(e.right)


def operator_depths_postorder(e):
    """Depth (root=0) of each operator node, in post-order."""
    out = []

    def walk(n, depth):
        if n.is_op:
            walk(n.left, depth + 1)
            walk(n.right, depth + 1)
            out.append(depth)

    walk(e, 0)
    return out


@dataclass
class Quantity:
    position: int          # token index in the problem text
    surface: str
    value: float


@dataclass
class Problem:
    text: str
    tokens: list
    quantities: list
    expression: object = None
    answer: float = None
    pid: str = ""

    def bindings(self):
        return {i: q.value for i, q in enumerate(self.quantities)}

    def validate(self):
        if len(self.tokens) < 1:
            raise ValueError("problem %r has no text tokens" % self.pid)
        if len(self.quantities) < 1:
            raise ValueError("problem %r has no quantities" % self.pid)
        if self.expression is not None:
            for n in iter_nodes(self.expression):
                if n.qidx is not None and n.qidx >= len(self.quantities):
                    raise ValueError(
                        "problem %r: equation uses N%d but only %d quantities"
                        % (self.pid, n.qidx, len(self.quantities)))
        return self


def extract_quantities(tokens):
    """Numeric tokens in reading order; duplicates keep distinct indices.

    Recognized forms: integers, decimals, percents (x% -> x/100) and
    fractions (a/b as one token).
    """
    out = []
    for pos, tok in enumerate(tokens):
        m = _PERCENT_RE.fullmatch(tok)
        if m:
            out.append(Quantity(pos, tok, float(m.group(1)) / 100.0))
            continue
        m = _FRACTION_RE.fullmatch(tok)
        if m:
            den = float(m.group(2))
            if den != 0:
                out.append(Quantity(pos, tok, float(m.group(1)) / den))
            continue
        if _DECIMAL_RE.fullmatch(tok) or _INT_RE.fullmatch(tok):
            out.append(Quantity(pos, tok, float(tok)))
    return out
