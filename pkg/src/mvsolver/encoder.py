"""Tokenization, shared embedding tables, bidirectional text encoder.

The three embedding tables (words, operators, constants) are created
once and the very same Tensor objects are referenced by both decoding
views and the discriminator, so one gradient step moves everyone.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .expression import OPS, extract_quantities, format_number
from .layers import GRUCell, Linear, make_param

from .config import ConfigError

PAD = "<pad>"
UNK = "<unk>"

DEFAULT_CONSTANTS = (1.0, 3.14)
MAX_QUANTITIES = 12


def tokenize(text, mode="whitespace"):
    """Split text, replace numbers with N0.. placeholders in reading order.

    Returns (tokens, quantities).  Character mode explodes non-numeric
    tokens into characters after the numeric pass, keeping quantity
    placeholders whole.
    """
    words = text.split()
    if not words:
        raise ValueError("empty problem text")
    quantities = extract_quantities(words)
    by_pos = {q.position: i for i, q in enumerate(quantities)}
    tokens = [("N%d" % by_pos[i]) if i in by_pos else w
              for i, w in enumerate(words)]
    if mode == "char":
        out = []
        for i, tok in enumerate(tokens):
            if i in by_pos:
                out.append(tok)
            else:
                out.extend(tok)
        # positions refer to the exploded stream now
        fixed = []
        qi = 0
        for i, tok in enumerate(out):
            if qi < len(quantities) and tok == "N%d" % qi:
                q = quantities[qi]
                fixed.append(type(q)(i, q.surface, q.value))
                qi += 1
        tokens, quantities = out, fixed
    elif mode != "whitespace":
        raise ConfigError("unknown tokenizer mode %r" % mode)
    return tokens, quantities


class Vocab:
    """Dense word-id map, first-seen order after the reserved block."""

    def __init__(self, words=None, max_quantities=MAX_QUANTITIES):
        self.max_quantities = max_quantities
        self._ids = {PAD: 0, UNK: 1}
        for i in range(max_quantities):
            self._ids["N%d" % i] = len(self._ids)
        for w in words or ():
            self.add(w)

    def add(self, word):
        if word not in self._ids:
            self._ids[word] = len(self._ids)
        return self._ids[word]

    def id(self, word):
        return self._ids.get(word, self._ids[UNK])

    def ids(self, tokens):
        return [self.id(t) for t in tokens]

    def __len__(self):
        return len(self._ids)

    def __contains__(self, word):
        return word in self._ids

    def to_json(self):
        ordered = sorted(self._ids, key=self._ids.get)
        return {"max_quantities": self.max_quantities, "words": ordered}

    @classmethod
    def from_json(cls, blob):
        v = cls(max_quantities=blob["max_quantities"])
        for w in blob["words"]:
            v.add(w)
        return v

    @classmethod
    def build(cls, token_lists, max_quantities=MAX_QUANTITIES):
        v = cls(max_quantities=max_quantities)
        for toks in token_lists:
            for t in toks:
                v.add(t)
        return v


class SharedEmbeddings:
    """E_w / E_op / E_const: single-storage tables shared across heads."""

    def __init__(self, rng, vocab, d, constants=DEFAULT_CONSTANTS):
        self.vocab = vocab
        self.d = d
        self.constants = tuple(float(c) for c in constants)
        scale = 1.0 / np.sqrt(d)
        self.E_w = T.Tensor(rng.normal(0.0, scale, size=(len(vocab), d)),
                            requires_grad=True)
        self.E_op = T.Tensor(rng.normal(0.0, scale, size=(len(OPS), d)),
                             requires_grad=True)
        self.E_const = T.Tensor(rng.normal(0.0, scale,
                                           size=(len(self.constants), d)),
                                requires_grad=True)

    def op_index(self, op):
        return OPS.index(op)

    def constant_index(self, value):
        for i, c in enumerate(self.constants):
            if c == value:
                return i
        return None

    def constant_token(self, i):
        return format_number(self.constants[i])

    def params(self, prefix="shared"):
        return {prefix + ".E_w": self.E_w, prefix + ".E_op": self.E_op,
                prefix + ".E_const": self.E_const}


@dataclass
class EncodedProblem:
    word_states: object    # (n, d) contextual states
    t_root: object         # (1, d) root goal


class Encoder:
    """Embedding lookup + 1-layer bidirectional GRU + root-goal fusion."""

    def __init__(self, rng, shared):
        d = shared.d
        if d % 2 != 0:
            raise ConfigError("model width must be even, got %d" % d)
        self.shared = shared
        self.fwd = GRUCell(rng, d, d // 2)
        self.bwd = GRUCell(rng, d, d // 2)
        self.fuse = Linear(rng, d, d)

    def encode(self, tokens):
        ids = self.shared.vocab.ids(tokens)
        x = T.index_rows(self.shared.E_w, ids)
        n = len(ids)
        steps = [x.narrow(0, t, 1) for t in range(n)]

        h = self.fwd.initial_state()
        fwd_states = []
        for t in range(n):
            h = self.fwd(steps[t], h)
            fwd_states.append(h)
        h = self.bwd.initial_state()
        bwd_states = [None] * n
        for t in reversed(range(n)):
            h = self.bwd(steps[t], h)
            bwd_states[t] = h

        rows = [T.concat([fwd_states[t], bwd_states[t]], axis=1)
                for t in range(n)]
        word_states = rows[0] if n == 1 else T.concat(rows, axis=0)
        t_root = self.fuse(T.concat([fwd_states[-1], bwd_states[0]], axis=1))
        return EncodedProblem(word_states=word_states, t_root=t_root)

    def params(self, prefix="encoder"):
        out = self.fwd.params(prefix + ".fwd")
        out.update(self.bwd.params(prefix + ".bwd"))
        out.update(self.fuse.params(prefix + ".fuse"))
        return out


def gather_quantities(encoded, quantities, shared):
    """E_q: contextual state per quantity mention, constants appended."""
    n = encoded.word_states.shape[0]
    for q in quantities:
        if not 0 <= q.position < n:
            raise ValueError("quantity position %d outside text of length %d"
                             % (q.position, n))
    rows = T.index_rows(encoded.word_states, [q.position for q in quantities])
    return T.concat([rows, shared.E_const], axis=0)
