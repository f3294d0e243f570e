"""Central-difference checks of every hand-rolled loss and the block forward.

All checks run in float64 with eps 1e-6 and require the relative error
between the analytic gradient and the numeric one to stay below 1e-3.
"""

import pytest
import torch

from farnet.augnet import aug_init, augment, loss_amp, loss_aug, loss_pha
from farnet.fsim import fsim_init
from farnet.metric import ManifoldParams, batch_threshold, manifold_triplet_loss, pairwise_distances
from farnet.recognizer import cross_entropy

EPS = 1e-6
TOL = 1e-3


def numeric_grad(fn, x: torch.Tensor) -> torch.Tensor:
    grad = torch.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + EPS
        hi = fn(x).item()
        flat[i] = orig - EPS
        lo = fn(x).item()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * EPS)
    return grad


def rel_error(fn, x: torch.Tensor) -> float:
    leaf = x.clone().requires_grad_(True)
    fn(leaf).backward()
    analytic = leaf.grad
    numeric = numeric_grad(fn, x.clone())
    return (analytic - numeric).norm().item() / max(numeric.norm().item(), 1e-12)


def randn64(shape, seed):
    gen = torch.Generator().manual_seed(seed)
    return torch.randn(*shape, dtype=torch.float64, generator=gen)


def test_loss_amp_gradient():
    target = randn64((2, 1, 8, 2), 1)
    x = randn64((2, 1, 8, 2), 2)
    assert rel_error(lambda t: loss_amp(t, target), x) < TOL


@pytest.mark.parametrize("mode", ["literal", "wrapped"])
def test_loss_pha_gradient(mode):
    target = randn64((2, 1, 8, 2), 3)
    x = randn64((2, 1, 8, 2), 4)
    assert rel_error(lambda t: loss_pha(t, target, mode), x) < TOL


def test_triplet_gradient_away_from_branch_boundary():
    labels = torch.tensor([0, 0, 1, 1, 2, 2])
    params = ManifoldParams(k=3.0, gamma=0.3)
    checked = 0
    for seed in range(30):
        emb = randn64((6, 4), seed)
        dmat = pairwise_distances(emb)
        r = batch_threshold(emb)
        iu, ju = torch.triu_indices(6, 6, offset=1)
        if (dmat[iu, ju] - r).abs().min().item() < 1e-2:
            continue  # too close to the piecewise boundary for finite differences
        if manifold_triplet_loss(emb, labels, params).item() < 1e-2:
            continue  # hinge flat region, nothing to compare
        assert rel_error(lambda e: manifold_triplet_loss(e, labels, params), emb) < TOL
        checked += 1
        if checked >= 5:
            break
    assert checked >= 5


def test_cross_entropy_gradient():
    labels = torch.tensor([0, 1, 2, 3, 0])
    logits = randn64((5, 4), 5)
    assert rel_error(lambda l: cross_entropy(l, labels), logits) < TOL


@pytest.mark.parametrize("variant", ["amplitude", "phase"])
def test_fsim_input_gradient(variant):
    blk = fsim_init(2, 3, variant, "none", seed=11).double()
    x = randn64((1, 2, 8, 1), 5)
    assert rel_error(lambda t: blk(t).pow(2).sum(), x) < TOL


def test_fsim_weight_gradient():
    blk = fsim_init(1, 2, "amplitude", "none", seed=13).double()
    x = randn64((1, 1, 8, 1), 6)

    blk(x).pow(2).sum().backward()
    analytic = blk.entry.weight.grad.clone()

    numeric = torch.zeros_like(analytic)
    with torch.no_grad():
        flat = blk.entry.weight.reshape(-1)
        nflat = numeric.reshape(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + EPS
            hi = blk(x).pow(2).sum().item()
            flat[i] = orig - EPS
            lo = blk(x).pow(2).sum().item()
            flat[i] = orig
            nflat[i] = (hi - lo) / (2 * EPS)
    rel = (analytic - numeric).norm().item() / max(numeric.norm().item(), 1e-12)
    assert rel < TOL


def test_full_augmentation_step_gradient():
    model = aug_init(1, seed=3).double()
    x = randn64((1, 1, 8, 1), 9)
    target = randn64((1, 1, 8, 1), 10)

    def fn(t):
        res = augment(model, t)
        return loss_aug(loss_amp(res.amp_out, target), loss_pha(res.out, target))

    assert rel_error(fn, x) < TOL
