"""Residual recognition backbone for (B, C, H, W) vibration signals.

A narrow ResNet: 3x3 stem at stride (2, 1), four stages of two basic
blocks with widths 16/32/64/128, global average pooling into a 128-d
embedding, and an affine class head. Striding only the signal axis keeps
single-column inputs (W = 1) valid end to end.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

STAGE_BLOCKS = 2
N_STAGES = 4


class BasicBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride=(1, 1)):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        if stride != (1, 1) or in_ch != out_ch:
            self.skip = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )
        else:
            self.skip = nn.Identity()

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.skip(x))


class Recognizer(nn.Module):
    def __init__(self, in_channels: int = 1, n_classes: int = 4, base_width: int = 16):
        super().__init__()
        if in_channels < 1 or n_classes < 2 or base_width < 1:
            raise ValueError("need in_channels >= 1, n_classes >= 2, base_width >= 1")
        self.in_channels = in_channels
        self.n_classes = n_classes
        self.embed_dim = base_width * 2 ** (N_STAGES - 1)

        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, base_width, 3, stride=(2, 1), padding=1, bias=False),
            nn.BatchNorm2d(base_width),
            nn.ReLU(inplace=True),
        )
        stages = []
        ch = base_width
        for i in range(N_STAGES):
            out_ch = base_width * 2 ** i
            stride = (1, 1) if i == 0 else (2, 1)
            blocks = [BasicBlock(ch, out_ch, stride)]
            blocks += [BasicBlock(out_ch, out_ch) for _ in range(STAGE_BLOCKS - 1)]
            stages.append(nn.Sequential(*blocks))
            ch = out_ch
        self.stages = nn.Sequential(*stages)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(self.embed_dim, n_classes)

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4:
            raise ValueError(f"expected (B, C, H, W) input, got shape {tuple(x.shape)}")
        if x.shape[1] != self.in_channels:
            raise ValueError(f"expected {self.in_channels} channels, got {x.shape[1]}")
        out = self.stages(self.stem(x))
        return self.pool(out).flatten(1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.embed(x))


def rec_init(in_channels: int = 1, n_classes: int = 4, base_width: int = 16,
             seed: int = 0) -> Recognizer:
    """Build a recognizer with seeded fan-in-scaled uniform weights."""
    model = Recognizer(in_channels, n_classes, base_width)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for mod in model.modules():
            if isinstance(mod, nn.Conv2d):
                fan_in = mod.in_channels * mod.kernel_size[0] * mod.kernel_size[1]
                mod.weight.uniform_(-(fan_in ** -0.5), fan_in ** -0.5, generator=gen)
                if mod.bias is not None:
                    mod.bias.zero_()
            elif isinstance(mod, nn.Linear):
                fan_in = mod.in_features
                mod.weight.uniform_(-(fan_in ** -0.5), fan_in ** -0.5, generator=gen)
                mod.bias.zero_()
            elif isinstance(mod, nn.BatchNorm2d):
                mod.weight.fill_(1.0)
                mod.bias.zero_()
    return model


def embed(model: Recognizer, x: torch.Tensor) -> torch.Tensor:
    return model.embed(x)


def softmax(logits: torch.Tensor) -> torch.Tensor:
    """Row-wise softmax with max subtraction for stability."""
    if logits.ndim != 2:
        raise ValueError(f"expected (B, n_classes) logits, got shape {tuple(logits.shape)}")
    shifted = logits - logits.max(dim=1, keepdim=True).values
    num = shifted.exp()
    return num / num.sum(dim=1, keepdim=True)


def predict_proba(model: Recognizer, x: torch.Tensor) -> torch.Tensor:
    return softmax(model(x))


def cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean negative log-likelihood, computed through logsumexp."""
    if logits.ndim != 2:
        raise ValueError(f"expected (B, n_classes) logits, got shape {tuple(logits.shape)}")
    if labels.shape != logits.shape[:1]:
        raise ValueError("labels must be a vector matching the batch size")
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("label out of range")
    lse = torch.logsumexp(logits, dim=1)
    picked = logits[torch.arange(logits.shape[0]), labels]
    return (lse - picked).mean()
