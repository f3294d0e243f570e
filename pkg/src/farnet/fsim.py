"""Frequency-spatial interaction block.

Each block runs two flows over a feature map and lets them exchange
information twice. The frequency flow lifts the input with a 1x1 conv,
moves it to the frequency domain, warps one polar component (amplitude
or phase, the block's variant) with a small 1x1 stack and returns to the
signal domain. The spatial flow applies plain 3x3 convs. After each of
the two stages, 3x3 maps inject each flow into the other. A final 1x1
conv merges the two flows.

Warping the phase breaks the conjugate symmetry a real signal's spectrum
has, so the internal inverse transform keeps the real part without
complaining (``check_residue=False``); the amplitude variant preserves
the symmetry and would pass the strict check anyway.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .spectral import dft2, polar, recompose

LEAK = 0.1
VARIANTS = ("amplitude", "phase")
RESAMPLES = ("none", "down2", "up2")


class FsimParams(nn.Module):
    """Parameter container for one block; ``forward`` runs it."""

    def __init__(self, in_channels: int, out_channels: int,
                 variant: str = "amplitude", resample: str = "none"):
        super().__init__()
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
        if resample not in RESAMPLES:
            raise ValueError(f"resample must be one of {RESAMPLES}, got {resample!r}")
        if in_channels < 1 or out_channels < 1:
            raise ValueError("channel counts must be positive")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.variant = variant
        self.resample = resample

        w = out_channels
        stride = (2, 1) if resample == "down2" else (1, 1)
        self.entry = nn.Conv2d(in_channels, w, 1)
        self.freq1 = nn.Conv2d(w, w, 1)
        self.freq2 = nn.Conv2d(w, w, 1)
        self.spat1 = nn.Conv2d(in_channels, w, 3, stride=stride, padding=1)
        self.spat2 = nn.Conv2d(w, w, 3, padding=1)
        self.cross_fs1 = nn.Conv2d(w, w, 3, padding=1)  # frequency flow -> spatial flow
        self.cross_sf1 = nn.Conv2d(w, w, 3, padding=1)  # spatial flow -> frequency flow
        self.cross_fs2 = nn.Conv2d(w, w, 3, padding=1)
        self.cross_sf2 = nn.Conv2d(w, w, 3, padding=1)
        self.exit = nn.Conv2d(w, w, 1)

    def _freq_step(self, g: torch.Tensor) -> torch.Tensor:
        # the 1x1 stack perturbs the component rather than replacing it, so a
        # fresh block starts near identity instead of scrambling the spectrum;
        # the ReLU keeps the warped amplitude valid for recomposition
        amp, pha = polar(dft2(g))
        if self.variant == "amplitude":
            amp = F.relu(amp + self.freq2(F.leaky_relu(self.freq1(amp), LEAK)))
        else:
            pha = pha + self.freq2(F.leaky_relu(self.freq1(pha), LEAK))
        return recompose(amp, pha, check_residue=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4:
            raise ValueError(f"expected (B, C, H, W) input, got shape {tuple(x.shape)}")
        if x.shape[1] != self.in_channels:
            raise ValueError(f"expected {self.in_channels} channels, got {x.shape[1]}")
        if self.resample == "down2" and x.shape[2] % 2 != 0:
            raise ValueError(f"down2 needs an even signal length, got {x.shape[2]}")

        if self.resample == "up2":
            x = F.interpolate(x, scale_factor=(2, 1), mode="nearest")
        xf = F.avg_pool2d(x, (2, 1)) if self.resample == "down2" else x

        f = F.leaky_relu(self.entry(xf), LEAK)
        s = F.leaky_relu(self.spat1(x), LEAK)

        f1 = self._freq_step(f)
        f1x = f1 + self.cross_sf1(s)
        s1x = s + self.cross_fs1(f1)

        f2 = self._freq_step(f1x)
        s2 = F.leaky_relu(self.spat2(s1x), LEAK)
        f2x = f2 + self.cross_sf2(s2)
        s2x = s2 + self.cross_fs2(f2)

        return self.exit(f2x + s2x)


# uniform init bound multiplier; calibrated so one block roughly preserves
# feature scale (lower collapses deep chains toward zero, higher blows up)
INIT_GAIN = 1.5


def fsim_init(in_channels: int, out_channels: int, variant: str = "amplitude",
              resample: str = "none", seed: int = 0) -> FsimParams:
    """Build a block with seeded fan-in-scaled uniform weights, zero biases."""
    params = FsimParams(in_channels, out_channels, variant, resample)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for mod in params.modules():
            if isinstance(mod, nn.Conv2d):
                fan_in = mod.in_channels * mod.kernel_size[0] * mod.kernel_size[1]
                bound = INIT_GAIN * fan_in ** -0.5
                mod.weight.uniform_(-bound, bound, generator=gen)
                mod.bias.zero_()
    return params


def fsim_forward(params: FsimParams, x: torch.Tensor) -> torch.Tensor:
    return params(x)
