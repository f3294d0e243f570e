import numpy as np
import pytest
import torch

from farnet.metric import (
    DEGENERATE_THRESHOLD,
    ManifoldParams,
    batch_threshold,
    manifold_distance,
    manifold_triplet_loss,
    pairwise_distances,
)


def brute_force_loss(emb: np.ndarray, labels: np.ndarray, k: float, gamma: float) -> float:
    """Scalar-loop reference: threshold, piecewise warp, hardest mining."""
    b = len(emb)
    d = np.zeros((b, b))
    for i in range(b):
        for j in range(b):
            d[i, j] = np.linalg.norm(emb[i] - emb[j])
    pairs = [d[i, j] for i in range(b) for j in range(i + 1, b)]
    r = float(np.mean(pairs))
    if r == 0.0:
        r = DEGENERATE_THRESHOLD
    act = np.where(d > r, k * d, d / k)
    terms = []
    for a in range(b):
        pos = [act[a, j] for j in range(b) if j != a and labels[j] == labels[a]]
        neg = [act[a, j] for j in range(b) if labels[j] != labels[a]]
        if not pos or not neg:
            continue
        terms.append(max(0.0, max(pos) - min(neg) + gamma))
    if not terms:
        raise ValueError("no valid anchors")
    return float(np.mean(terms))


def test_piecewise_warp_fixtures():
    # k=3, r=1: far pairs stretch, near pairs shrink, boundary sits in the near branch
    assert manifold_distance(2.0, k=3.0, r=1.0) == pytest.approx(6.0)
    assert manifold_distance(0.9, k=3.0, r=1.0) == pytest.approx(0.3)
    assert manifold_distance(1.0, k=3.0, r=1.0) == pytest.approx(1.0 / 3.0)


def test_piecewise_warp_identity_at_k_one():
    xs = torch.tensor([0.0, 0.4, 1.0, 2.7])
    out = manifold_distance(xs, k=1.0, r=1.0)
    assert torch.allclose(out, xs)


def test_piecewise_warp_tensor_and_errors():
    xs = torch.tensor([0.5, 1.5])
    out = manifold_distance(xs, k=2.0, r=1.0)
    assert torch.allclose(out, torch.tensor([0.25, 3.0]))
    with pytest.raises(ValueError):
        manifold_distance(1.0, k=0.5, r=1.0)
    with pytest.raises(ValueError):
        manifold_distance(-0.1, k=2.0, r=1.0)


def test_warp_is_monotone_for_k_at_least_one():
    rng = np.random.default_rng(3)
    for _ in range(200):
        k = rng.uniform(1.0, 5.0)
        r = rng.uniform(0.1, 3.0)
        xs = np.sort(rng.uniform(0.0, 6.0, size=32))
        ys = manifold_distance(torch.tensor(xs), k=k, r=r).numpy()
        assert (np.diff(ys) >= -1e-12).all()


def test_batch_threshold_fixture():
    emb = torch.tensor([[0.0], [1.0], [3.0]])
    # pairwise distances 1, 3, 2 -> mean 2
    assert batch_threshold(emb) == pytest.approx(2.0)


def test_batch_threshold_identical_embeddings_is_zero():
    emb = torch.ones(5, 3)
    assert batch_threshold(emb) == 0.0


def test_batch_threshold_needs_two():
    with pytest.raises(ValueError):
        batch_threshold(torch.ones(1, 4))


def test_pairwise_distances_matches_norm():
    rng = np.random.default_rng(5)
    emb = torch.tensor(rng.standard_normal((6, 4)))
    dmat = pairwise_distances(emb)
    for i in range(6):
        for j in range(6):
            want = torch.linalg.vector_norm(emb[i] - emb[j]).item()
            assert dmat[i, j].item() == pytest.approx(want, abs=1e-10)


def test_warped_distances_can_break_triangle_inequality():
    # raw legs 0.6 + 0.6 >= 1.2 holds; after the warp 0.2 + 0.2 < 3.6
    emb = torch.tensor([[0.0], [0.6], [1.2]])
    r = batch_threshold(emb)
    assert r == pytest.approx(0.8)
    d = manifold_distance(pairwise_distances(emb), k=3.0, r=r)
    assert d[0, 1].item() == pytest.approx(0.2)
    assert d[1, 2].item() == pytest.approx(0.2)
    assert d[0, 2].item() == pytest.approx(3.6)
    assert d[0, 1] + d[1, 2] < d[0, 2]


def test_interleaved_two_class_fixture():
    emb = torch.tensor([[0.0], [1.0], [0.5], [1.5]], dtype=torch.float64)
    labels = torch.tensor([0, 0, 1, 1])
    loss = manifold_triplet_loss(emb, labels, ManifoldParams(k=3.0, gamma=0.3))
    assert loss.item() == pytest.approx(47.0 / 15.0, abs=1e-9)


def test_degenerate_batch_collapses_to_margin():
    emb = torch.zeros(6, 3)
    labels = torch.tensor([0, 0, 0, 1, 1, 1])
    loss = manifold_triplet_loss(emb, labels, ManifoldParams(k=3.0, gamma=0.3))
    assert loss.item() == pytest.approx(0.3)


def test_no_valid_anchor_raises():
    emb = torch.randn(4, 3)
    with pytest.raises(ValueError):
        manifold_triplet_loss(emb, torch.tensor([0, 0, 0, 0]), ManifoldParams())
    with pytest.raises(ValueError):
        # one sample per class: every anchor lacks a positive
        manifold_triplet_loss(emb, torch.tensor([0, 1, 2, 3]), ManifoldParams())


def test_params_defaults_and_validation():
    p = ManifoldParams()
    assert p.k == 3.0 and p.gamma == 0.3
    with pytest.raises(ValueError):
        ManifoldParams(k=0.9)
    with pytest.raises(ValueError):
        ManifoldParams(gamma=-0.1)


def test_mining_indices_match_euclidean_mining():
    """The warp never reorders pairs, so hardest picks agree with raw distances."""
    rng = np.random.default_rng(101)
    for _ in range(1000):
        b = int(rng.integers(4, 17))
        dim = int(rng.integers(2, 9))
        labels = rng.integers(0, int(rng.integers(2, 5)), size=b)
        if len(np.unique(labels)) < 2:
            labels[0] = labels[0] + 1
        emb = torch.tensor(rng.standard_normal((b, dim)))
        k = float(rng.uniform(1.0, 4.0))
        lab = torch.tensor(labels)

        dmat = pairwise_distances(emb)
        r = batch_threshold(emb)
        act = manifold_distance(dmat, k=k, r=r)

        same = lab[:, None] == lab[None, :]
        eye = torch.eye(b, dtype=torch.bool)
        pos_mask = same & ~eye
        neg_mask = ~same
        ninf = torch.tensor(float("-inf"), dtype=dmat.dtype)
        pinf = torch.tensor(float("inf"), dtype=dmat.dtype)
        for mat_a, mat_b in [(dmat, act)]:
            pa = torch.where(pos_mask, mat_a, ninf).argmax(1)
            pb = torch.where(pos_mask, mat_b, ninf).argmax(1)
            na = torch.where(neg_mask, mat_a, pinf).argmin(1)
            nb = torch.where(neg_mask, mat_b, pinf).argmin(1)
            valid = pos_mask.any(1) & neg_mask.any(1)
            assert (pa[valid] == pb[valid]).all()
            assert (na[valid] == nb[valid]).all()


def test_matches_brute_force_reference():
    rng = np.random.default_rng(202)
    checked = 0
    for _ in range(500):
        b = int(rng.integers(3, 17))
        dim = int(rng.integers(1, 6))
        labels = rng.integers(0, 3, size=b)
        if len(np.unique(labels)) < 2:
            labels[0] += 1
        emb = rng.standard_normal((b, dim))
        k = float(rng.uniform(1.0, 4.0))
        gamma = float(rng.uniform(0.0, 1.0))
        try:
            want = brute_force_loss(emb, labels, k, gamma)
        except ValueError:
            with pytest.raises(ValueError):
                manifold_triplet_loss(torch.tensor(emb), torch.tensor(labels),
                                      ManifoldParams(k=k, gamma=gamma))
            continue
        got = manifold_triplet_loss(torch.tensor(emb), torch.tensor(labels),
                                    ManifoldParams(k=k, gamma=gamma)).item()
        assert got == pytest.approx(want, abs=1e-9)
        checked += 1
    assert checked >= 400
