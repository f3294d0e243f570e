"""Discrete Fourier analysis of vibration signals.

Signals are real tensors whose last two axes are height (time) and width.
The forward transform is unnormalized; the inverse carries the 1/(H*W)
factor, so ``recompose(polar(dft2(x)))`` is the identity.
"""

from typing import NamedTuple

import torch


class PolarSpectrum(NamedTuple):
    """Amplitude/phase view of a complex spectrum."""

    amplitude: torch.Tensor
    phase: torch.Tensor


def _as_float_tensor(x) -> torch.Tensor:
    t = torch.as_tensor(x)
    if not t.is_floating_point():
        t = t.to(torch.get_default_dtype())
    return t


def dft2(signal) -> torch.Tensor:
    """Unnormalized 2-D DFT over the last two axes, per channel.

    X(c,u,v) = sum_h sum_w x(c,h,w) * exp(-j*2*pi*(h*u/H + w*v/W))
    """
    x = _as_float_tensor(signal)
    if x.ndim < 2:
        raise ValueError(f"signal must have at least 2 dims, got shape {tuple(x.shape)}")
    if not torch.isfinite(x).all():
        raise ValueError("signal contains non-finite values")
    return torch.fft.fft2(x, norm="backward")


def polar(spectrum: torch.Tensor) -> PolarSpectrum:
    """Split a complex spectrum into amplitude and full-quadrant phase.

    Phase uses atan2(I, R), so it lives in (-pi, pi] and is 0 at bins
    where R = I = 0.
    """
    if not torch.is_complex(spectrum):
        raise ValueError("expected a complex spectrum")
    return PolarSpectrum(torch.abs(spectrum), torch.angle(spectrum))


def recompose(amplitude, phase, check_residue: bool = True) -> torch.Tensor:
    """Inverse transform of (A*cos P, A*sin P) with 1/(H*W) normalization.

    An arbitrary (amplitude, phase) pair need not come from a real signal;
    by default the imaginary residue of the inverse transform is asserted
    to be below 1e-4 * max(1, max|A|) before being discarded. Learned
    phase maps legitimately produce non-symmetric spectra, so callers that
    expect that pass check_residue=False to take the real part silently.
    """
    amp = _as_float_tensor(amplitude)
    pha = _as_float_tensor(phase)
    if amp.shape != pha.shape:
        raise ValueError(f"amplitude/phase shape mismatch: {tuple(amp.shape)} vs {tuple(pha.shape)}")
    if (amp < 0).any():
        raise ValueError("amplitude must be non-negative")
    spec = torch.complex(amp * torch.cos(pha), amp * torch.sin(pha))
    out = torch.fft.ifft2(spec, norm="backward")
    if check_residue:
        limit = 1e-4 * max(1.0, float(amp.detach().abs().max()))
        residue = float(out.imag.detach().abs().max())
        if residue >= limit:
            raise ValueError(
                f"imaginary residue {residue:.3e} exceeds {limit:.3e}; "
                "amplitude/phase pair does not describe a real signal"
            )
    return out.real


def amplitude_swap(x_a, x_b) -> torch.Tensor:
    """Rebuild x_a's phase under x_b's amplitude spectrum."""
    a = _as_float_tensor(x_a)
    b = _as_float_tensor(x_b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    amp_b = torch.abs(dft2(b))
    pha_a = torch.angle(dft2(a))
    return recompose(amp_b, pha_a)
