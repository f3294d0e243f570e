"""Manifold distance activation and batch-hard manifold triplet loss.

Euclidean distances are passed through a piecewise-linear activation that
scales long distances up by k and short ones down by k. This breaks the
triangle inequality on purpose, which is what lets mining find harder
positives/negatives than plain Euclidean neighborhoods.
"""

from dataclasses import dataclass

import torch

# Substituted for the batch threshold when all embeddings coincide, so the
# activation stays total.
DEGENERATE_THRESHOLD = 1e-6


@dataclass
class ManifoldParams:
    k: float = 3.0
    gamma: float = 0.3

    def __post_init__(self):
        if self.k < 1.0:
            raise ValueError(f"k must be >= 1 (mining-index invariance requires it), got {self.k}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")


def manifold_distance(x, k: float, r: float):
    """Piecewise activation: k*x where x > r, x/k where x <= r.

    Works elementwise on tensors and on plain floats.
    """
    if k < 1.0:
        raise ValueError(f"k must be >= 1, got {k}")
    t = torch.as_tensor(x)
    if (t < 0).any():
        raise ValueError("distances must be non-negative")
    out = torch.where(t > r, k * t, t / k)
    return out if isinstance(x, torch.Tensor) else float(out)


def pairwise_distances(vectors: torch.Tensor) -> torch.Tensor:
    """Euclidean distance matrix of a B x D batch (zero diagonal).

    sqrt has an infinite slope at 0, and the diagonal is exactly 0; the
    zero entries are routed around the sqrt so backward stays finite.
    """
    diff = vectors.unsqueeze(1) - vectors.unsqueeze(0)
    sq = diff.pow(2).sum(-1)
    zero = sq == 0
    safe = torch.where(zero, torch.ones_like(sq), sq)
    return torch.where(zero, torch.zeros_like(sq), safe.sqrt())


def batch_threshold(vectors: torch.Tensor) -> float:
    """Mean Euclidean distance over unordered pairs i < j."""
    b = vectors.shape[0]
    if b < 2:
        raise ValueError(f"need at least 2 embeddings, got {b}")
    dmat = pairwise_distances(vectors)
    iu, ju = torch.triu_indices(b, b, offset=1)
    return float(dmat[iu, ju].mean())


def manifold_triplet_loss(vectors: torch.Tensor, labels, params: ManifoldParams) -> torch.Tensor:
    """Batch-hard triplet loss under the manifold distance activation.

    Per anchor: hardest positive = max activated distance to a same-class
    sample, hardest negative = min activated distance to a different-class
    sample, loss = max(d_p - d_n + gamma, 0). Averaged over anchors that
    have both a positive and a negative. The threshold r is the batch mean
    pairwise distance.
    """
    labels = torch.as_tensor(labels)
    b = vectors.shape[0]
    if b < 2:
        raise ValueError(f"need at least 2 embeddings, got {b}")

    dmat = pairwise_distances(vectors)
    iu, ju = torch.triu_indices(b, b, offset=1)
    r = dmat[iu, ju].mean().detach()
    if float(r) == 0.0:
        r = torch.as_tensor(DEGENERATE_THRESHOLD, dtype=vectors.dtype)

    act = manifold_distance(dmat, params.k, r)

    same = labels.unsqueeze(0) == labels.unsqueeze(1)
    eye = torch.eye(b, dtype=torch.bool, device=vectors.device)
    pos_mask = same & ~eye
    neg_mask = ~same

    valid = pos_mask.any(1) & neg_mask.any(1)
    if not valid.any():
        raise ValueError("no anchor has both a positive and a negative in this batch")

    neg_inf = torch.tensor(float("-inf"), dtype=act.dtype)
    pos_inf = torch.tensor(float("inf"), dtype=act.dtype)
    d_pos = torch.where(pos_mask, act, neg_inf).max(1).values
    d_neg = torch.where(neg_mask, act, pos_inf).min(1).values
    per_anchor = torch.clamp(d_pos - d_neg + params.gamma, min=0.0)
    return per_anchor[valid].mean()
