"""Cross-view consistency: project per-node representations from both
decoders into one latent space and pull matched pairs together.

Both views emit one representation per operator node, in post-order, so
the t-th entries of the two teacher-forced traces describe the same
sub-expression; the last pair is always the whole equation.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .config import ConfigError
from .layers import MLP


@dataclass
class AlignedPair:
    t: int              # position in post-order over operator nodes
    r_td: object        # (1, d) top-down representation, unprojected
    r_bu: object        # (1, d) bottom-up representation, unprojected
    depth: int          # operator-node depth, root = 0


def pair_traces(td_trace, bu_trace):
    """Zip the two teacher-forced traces node-for-node."""
    if len(td_trace) != len(bu_trace):
        raise ValueError("trace lengths differ: %d vs %d"
                         % (len(td_trace), len(bu_trace)))
    out = []
    for t in range(len(td_trace)):
        depth = td_trace.depths[t]
        if depth < 0:
            depth = bu_trace.depths[t]
        out.append(AlignedPair(t=t, r_td=td_trace.reps[t],
                               r_bu=bu_trace.reps[t], depth=depth))
    return out


class Alignment:
    """Two projection heads plus the contrastive objective."""

    def __init__(self, rng, d, d_p=None, metric="cosine"):
        if metric not in ("cosine", "l2"):
            raise ConfigError("unknown alignment metric %r" % metric)
        d_p = d if d_p in (None, 0) else d_p
        self.metric = metric
        self.d_p = d_p
        self.proj_td = MLP(rng, d, d, d_p)
        self.proj_bu = MLP(rng, d, d, d_p)

    def params(self, prefix="align"):
        out = self.proj_td.params(prefix + ".proj_td")
        out.update(self.proj_bu.params(prefix + ".proj_bu"))
        return out

    def project(self, pair):
        return self.proj_td(pair.r_td), self.proj_bu(pair.r_bu)

    def contrastive_loss(self, pairs):
        """Sum over pairs of -cos(h_T, h_B), or squared distance for l2."""
        if not pairs:
            raise ValueError("contrastive loss needs at least one pair")
        loss = None
        for pair in pairs:
            h_t, h_b = self.project(pair)
            if self.metric == "l2":
                diff = h_t - h_b
                term = (diff * diff).sum()
            else:
                term = T.cosine_similarity(h_t, h_b).scale(-1.0)
            loss = term if loss is None else loss + term
        return loss


def alignment_report(pairs, align):
    """Projected-cosine statistics by operator depth.

    Cosine here regardless of the training metric: it is the comparable
    number across configurations.  Returns {"count", "mean", "std",
    "by_depth": {depth: {...}}}; an empty input gives count 0 and no
    moment keys.
    """
    cos_by_depth = {}
    all_cos = []
    for pair in pairs:
        h_t, h_b = align.project(pair)
        c = T.cosine_similarity(h_t, h_b).item()
        all_cos.append(c)
        cos_by_depth.setdefault(pair.depth, []).append(c)

    def stats(xs):
        a = np.asarray(xs)
        return {"count": len(xs), "mean": float(a.mean()),
                "std": float(a.std())}

    if not all_cos:
        return {"count": 0, "by_depth": {}}
    out = stats(all_cos)
    out["by_depth"] = {d: stats(xs) for d, xs in sorted(cos_by_depth.items())}
    return out
