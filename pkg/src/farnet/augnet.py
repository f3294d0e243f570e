"""Two-stage augmentation network built from frequency-spatial blocks.

The amplitude sub-net is a five-block encoder-decoder (lengths H, H/2,
H/4, H/4, H/2, H) that rewrites a signal's amplitude spectrum. Its
output contributes amplitude only: the phase sub-net starts from a
signal rebuilt with that new amplitude and the original phase, and
refines the phase through four constant-resolution blocks. The first
two refinement steps mix the rebuilt signal back in through 1x1 fusion
maps, so zeroing those maps recovers a plain block chain.

Reconstruction quality is scored in polar form: a mean absolute
amplitude gap, a mean absolute phase gap (on principal values by
default, optionally on the wrapped difference), and their weighted sum.
"""

from typing import NamedTuple, Union

import torch
import torch.nn as nn

from .fsim import FsimParams, fsim_init
from .spectral import dft2, polar, recompose

AMP_WIDTHS = (16, 32, 32, 16)
AMP_RESAMPLES = ("down2", "down2", "none", "up2", "up2")
PHASE_WIDTH = 16
PHASE_DEPTH = 4
N_FUSED = 2

Scalar = Union[float, torch.Tensor]


class AugmentResult(NamedTuple):
    amp_out: torch.Tensor    # amplitude sub-net output signal
    phase_in: torch.Tensor   # rebuilt signal handed to the phase sub-net
    out: torch.Tensor        # final augmented signal


class AugmentationModel(nn.Module):
    def __init__(self, in_channels: int = 1):
        super().__init__()
        if in_channels < 1:
            raise ValueError("in_channels must be positive")
        self.in_channels = in_channels

        chans = (in_channels,) + AMP_WIDTHS + (in_channels,)
        self.amp_blocks = nn.ModuleList([
            FsimParams(chans[i], chans[i + 1], "amplitude", AMP_RESAMPLES[i])
            for i in range(len(AMP_RESAMPLES))
        ])
        pchans = (in_channels,) + (PHASE_WIDTH,) * (PHASE_DEPTH - 1) + (in_channels,)
        self.phase_blocks = nn.ModuleList([
            FsimParams(pchans[i], pchans[i + 1], "phase", "none")
            for i in range(PHASE_DEPTH)
        ])
        self.fuse = nn.ModuleList([
            nn.Conv2d(PHASE_WIDTH + in_channels, PHASE_WIDTH, 1)
            for _ in range(N_FUSED)
        ])

    def forward(self, x: torch.Tensor) -> "AugmentResult":
        return augment(self, x)


def aug_init(in_channels: int = 1, seed: int = 0) -> AugmentationModel:
    """Build an augmentation model with seeded weights."""
    model = AugmentationModel(in_channels)
    gen = torch.Generator().manual_seed(seed)

    def sub_seed():
        return int(torch.randint(0, 2 ** 31 - 1, (1,), generator=gen).item())

    for i, block in enumerate(model.amp_blocks):
        fresh = fsim_init(block.in_channels, block.out_channels,
                          block.variant, block.resample, seed=sub_seed())
        block.load_state_dict(fresh.state_dict())
    for block in model.phase_blocks:
        fresh = fsim_init(block.in_channels, block.out_channels,
                          block.variant, block.resample, seed=sub_seed())
        block.load_state_dict(fresh.state_dict())
    with torch.no_grad():
        for conv in model.fuse:
            bound = conv.in_channels ** -0.5
            conv.weight.uniform_(-bound, bound, generator=gen)
            conv.bias.zero_()
    return model


def _check_signal(model: AugmentationModel, x: torch.Tensor, op: str) -> None:
    if x.ndim != 4:
        raise ValueError(f"{op} expects (B, C, H, W) input, got shape {tuple(x.shape)}")
    if x.shape[1] != model.in_channels:
        raise ValueError(f"{op} expects {model.in_channels} channels, got {x.shape[1]}")


def amp_subnet_forward(model: AugmentationModel, x: torch.Tensor) -> torch.Tensor:
    _check_signal(model, x, "amp_subnet_forward")
    if x.shape[2] % 4 != 0:
        raise ValueError(f"signal length must be divisible by 4, got {x.shape[2]}")
    out = x
    for block in model.amp_blocks:
        out = block(out)
    return out


def phase_input(amp_out: torch.Tensor, x_in: torch.Tensor) -> torch.Tensor:
    """Rebuild a signal from the new amplitude and the original phase.

    Both arguments are real signals, so the mixed spectrum keeps conjugate
    symmetry and the strict inverse transform applies.
    """
    if amp_out.shape != x_in.shape:
        raise ValueError(f"shape mismatch: {tuple(amp_out.shape)} vs {tuple(x_in.shape)}")
    amp, _ = polar(dft2(amp_out))
    _, pha = polar(dft2(x_in))
    return recompose(amp, pha)


def phase_subnet_forward(model: AugmentationModel, p_in: torch.Tensor) -> torch.Tensor:
    _check_signal(model, p_in, "phase_subnet_forward")
    f = model.phase_blocks[0](p_in)
    f = f + model.fuse[0](torch.cat([f, p_in], dim=1))
    f = model.phase_blocks[1](f)
    f = f + model.fuse[1](torch.cat([f, p_in], dim=1))
    f = model.phase_blocks[2](f)
    return model.phase_blocks[3](f)


def augment(model: AugmentationModel, x: torch.Tensor) -> AugmentResult:
    """Full pipeline: amplitude rewrite, rebuild, phase refinement."""
    amp_out = amp_subnet_forward(model, x)
    p_in = phase_input(amp_out, x)
    out = phase_subnet_forward(model, p_in)
    return AugmentResult(amp_out, p_in, out)


def loss_amp(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute amplitude-spectrum gap between two signals."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    amp_p, _ = polar(dft2(pred))
    amp_t, _ = polar(dft2(target))
    return (amp_p - amp_t).abs().mean()


def loss_pha(pred: torch.Tensor, target: torch.Tensor, mode: str = "literal") -> torch.Tensor:
    """Mean absolute phase-spectrum gap.

    "literal" differences the principal values directly; "wrapped" maps
    each difference to (-pi, pi] first so +pi and -pi phases agree.
    """
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    if mode not in ("literal", "wrapped"):
        raise ValueError(f"mode must be 'literal' or 'wrapped', got {mode!r}")
    _, pha_p = polar(dft2(pred))
    _, pha_t = polar(dft2(target))
    delta = pha_p - pha_t
    if mode == "wrapped":
        delta = torch.remainder(delta + torch.pi, 2 * torch.pi) - torch.pi
    return delta.abs().mean()


def loss_aug(l_amp: Scalar, l_pha: Scalar,
             lambda1: float = 0.1, lambda2: float = 0.2) -> Scalar:
    """Weighted reconstruction loss."""
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("loss weights must be non-negative")
    return lambda1 * l_amp + lambda2 * l_pha
