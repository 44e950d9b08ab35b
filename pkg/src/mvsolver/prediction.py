"""Containers passed between decoders, alignment, and evaluation."""

from dataclasses import dataclass, field

from .expression import from_postorder, from_preorder

T2B = "T2B"
B2T = "B2T"


@dataclass
class Prediction:
    view: str              # T2B | B2T (wire-format view tags)
    tokens: list           # pre-order for T2B, post-order for B2T
    score: float           # total log-prob (T2B) or perceptron score (B2T)
    abstained: bool = False

    def expression(self):
        if self.abstained or not self.tokens:
            return None
        if self.view == T2B:
            return from_preorder(self.tokens)
        return from_postorder(self.tokens)

    def to_record(self):
        return {"view": self.view, "tokens": list(self.tokens),
                "score": float(self.score), "abstained": self.abstained}


@dataclass
class ViewTrace:
    """Per-operator-node representations, in post-order of operator nodes."""
    reps: list = field(default_factory=list)    # (1, d) tensors
    depths: list = field(default_factory=list)  # operator-node depth, root=0

    def append(self, rep, depth):
        self.reps.append(rep)
        self.depths.append(depth)

    def __len__(self):
        return len(self.reps)
