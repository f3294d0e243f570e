"""Joint training of the augmentation network and the recognizer.

Each step draws a class-balanced PK batch from the source domains and
rotates a ground-truth domain g through the sources. Samples outside g
are pushed through the augmentation network; the amplitude target is a
donor sample from g (same class when the batch has one), the phase
target is the sample itself. Originals plus augmented signals form the
recognition batch for the classification and manifold triplet terms,
and one total loss drives both models through separate SGD groups.
"""

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from .augnet import AugmentationModel, aug_init, augment, loss_amp, loss_aug, loss_pha
from .dataset import DatasetManifest, load_split, pk_batches
from .metric import ManifoldParams, manifold_triplet_loss
from .recognizer import Recognizer, cross_entropy, rec_init

GT_DOMAIN_MODES = ("rotate", "fixed")
ABLATION_VARIANTS = ("m1", "m2", "m3", "m4")


@dataclass
class TrainConfig:
    epochs: int = 50
    p_classes: int = 4
    k_per_class: int = 32
    lr_aug: float = 0.001
    lr_rec: float = 0.01
    momentum: float = 0.9
    lambda1: float = 0.1
    lambda2: float = 0.2
    alpha: float = 0.01
    gamma: float = 0.3
    manifold_k: float = 3.0
    base_width: int = 16
    use_augmentation: bool = True
    use_triplet: bool = True
    gt_domain_mode: str = "rotate"
    fixed_gt_domain: Optional[int] = None
    phase_wrap_mode: str = "literal"
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1 or self.p_classes < 1 or self.k_per_class < 1:
            raise ValueError("epochs, p_classes and k_per_class must be positive")
        if min(self.lr_aug, self.lr_rec) <= 0:
            raise ValueError("learning rates must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if min(self.lambda1, self.lambda2, self.alpha, self.gamma) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.manifold_k < 1:
            raise ValueError("manifold_k must be >= 1")
        if self.gt_domain_mode not in GT_DOMAIN_MODES:
            raise ValueError(f"gt_domain_mode must be one of {GT_DOMAIN_MODES}")
        if self.gt_domain_mode == "fixed" and self.fixed_gt_domain is None:
            raise ValueError("fixed gt_domain_mode needs fixed_gt_domain")
        if self.phase_wrap_mode not in ("literal", "wrapped"):
            raise ValueError("phase_wrap_mode must be 'literal' or 'wrapped'")


@dataclass
class StepStats:
    loss_aug: float
    loss_clf: float
    loss_triplet: float
    loss_total: float
    n_augmented: int
    batch_size: int


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # rows true class, columns predicted
    per_class: List[float]
    n_samples: int


@dataclass
class TrainResult:
    accuracy: float
    confusion: np.ndarray
    history: List[Dict[str, float]]
    config: TrainConfig
    sources: List[int]
    target: int
    seconds: float
    aug_model: Optional[AugmentationModel]
    rec_model: Recognizer
    input_scale: float = 1.0


def total_loss(l_aug, l_clf, l_triplet, alpha: float):
    """Single training objective: reconstruction + classification + alpha * metric."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return l_aug + l_clf + alpha * l_triplet


def _pick_donors(labels: np.ndarray, domains: np.ndarray, selected: np.ndarray,
                 g: int, rng: np.random.Generator) -> np.ndarray:
    """Donor index in domain g for each selected sample, same class preferred.

    Falls back to any g sample, then to the whole batch, so the step stays
    total even when the batch missed domain g entirely.
    """
    g_pool = np.flatnonzero(domains == g)
    donors = np.empty(len(selected), dtype=np.int64)
    for row, i in enumerate(selected):
        pool = g_pool[labels[g_pool] == labels[i]] if len(g_pool) else g_pool
        if len(pool) == 0:
            pool = g_pool
        if len(pool) == 0:
            pool = np.arange(len(labels))
        donors[row] = pool[rng.integers(0, len(pool))]
    return donors


def train_step(aug_model: Optional[AugmentationModel], rec_model: Recognizer,
               optimizers: Sequence[torch.optim.Optimizer],
               x: torch.Tensor, y: torch.Tensor, d: torch.Tensor,
               g: int, cfg: TrainConfig, rng: np.random.Generator) -> StepStats:
    """One joint update on a batch; returns the loss breakdown."""
    params = ManifoldParams(k=cfg.manifold_k, gamma=cfg.gamma)
    zero = torch.zeros((), dtype=x.dtype)

    if cfg.use_augmentation:
        if aug_model is None:
            raise ValueError("use_augmentation is set but no augmentation model given")
        labels_np = y.numpy()
        domains_np = d.numpy()
        selected = np.flatnonzero(domains_np != g)
    else:
        selected = np.array([], dtype=np.int64)

    if len(selected):
        donors = _pick_donors(labels_np, domains_np, selected, g, rng)
        sel_idx = torch.from_numpy(selected)
        res = augment(aug_model, x[sel_idx])
        l_amp = loss_amp(res.amp_out, x[torch.from_numpy(donors)])
        l_pha = loss_pha(res.out, x[sel_idx], cfg.phase_wrap_mode)
        l_aug = loss_aug(l_amp, l_pha, cfg.lambda1, cfg.lambda2)
        rec_in = torch.cat([x, res.out], dim=0)
        rec_y = torch.cat([y, y[sel_idx]], dim=0)
    else:
        l_aug = zero
        rec_in = x
        rec_y = y

    emb = rec_model.embed(rec_in)
    logits = rec_model.head(emb)
    l_clf = cross_entropy(logits, rec_y)
    l_trip = manifold_triplet_loss(emb, rec_y, params) if cfg.use_triplet else zero
    total = total_loss(l_aug, l_clf, l_trip, cfg.alpha)

    for opt in optimizers:
        opt.zero_grad()
    total.backward()
    for opt in optimizers:
        opt.step()

    return StepStats(float(torch.as_tensor(l_aug).detach()),
                     float(torch.as_tensor(l_clf).detach()),
                     float(torch.as_tensor(l_trip).detach()),
                     float(torch.as_tensor(total).detach()),
                     len(selected), int(rec_in.shape[0]))


def evaluate(rec_model: Recognizer, x: np.ndarray, y: np.ndarray,
             batch_size: int = 64) -> EvalResult:
    """Accuracy and confusion matrix of the recognizer on held-out samples."""
    n_classes = rec_model.n_classes
    if len(x) == 0:
        raise ValueError("no samples to evaluate")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError("label out of range for this model")
    rec_model.eval()
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    with torch.no_grad():
        for lo in range(0, len(x), batch_size):
            xb = torch.from_numpy(x[lo:lo + batch_size])
            pred = rec_model(xb).argmax(dim=1).numpy()
            for t, p in zip(y[lo:lo + batch_size], pred):
                confusion[t, p] += 1
    correct = np.trace(confusion)
    per_class = [
        float(confusion[c, c] / confusion[c].sum()) if confusion[c].sum() else 0.0
        for c in range(n_classes)
    ]
    return EvalResult(float(correct / len(x)), confusion, per_class, len(x))


def train_run(manifest: DatasetManifest, sources: Sequence[int], target: int,
              cfg: TrainConfig = TrainConfig(),
              out_dir: Optional[Union[str, Path]] = None) -> TrainResult:
    """Train on the source domains' train split, test on the target's test split."""
    cfg.validate()
    sources = sorted(int(s) for s in sources)
    target = int(target)
    known = set(manifest.domain_ids())
    if not sources:
        raise ValueError("need at least one source domain")
    if not set(sources) <= known:
        raise ValueError(f"unknown source domain in {sources}; dataset has {sorted(known)}")
    if target not in known:
        raise ValueError(f"unknown target domain {target}; dataset has {sorted(known)}")
    if target in sources:
        raise ValueError("target domain must be held out from the sources")
    if cfg.gt_domain_mode == "fixed" and cfg.fixed_gt_domain not in sources:
        raise ValueError("fixed_gt_domain must be one of the sources")

    t0 = time.time()
    x_np, y_np, d_np = load_split(manifest, "train", domains=sources)
    c = manifest.sample_shape[0]

    # one scalar scale from the source train data keeps activations near
    # unit size regardless of how the signals were recorded; the pinned
    # learning rates assume that regime, and evaluation must reuse it
    scale = float(x_np.std())
    if scale <= 0:
        scale = 1.0
    x_np = x_np / np.float32(scale)

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    aug_model = aug_init(c, seed=cfg.seed) if cfg.use_augmentation else None
    rec_model = rec_init(c, manifest.n_classes, cfg.base_width, seed=cfg.seed + 1)

    optimizers = [torch.optim.SGD(rec_model.parameters(), lr=cfg.lr_rec,
                                  momentum=cfg.momentum)]
    if aug_model is not None:
        optimizers.append(torch.optim.SGD(aug_model.parameters(), lr=cfg.lr_aug,
                                          momentum=cfg.momentum))

    x_all = torch.from_numpy(x_np)
    y_all = torch.from_numpy(y_np)
    d_all = torch.from_numpy(d_np)

    history: List[Dict[str, float]] = []
    rec_model.train()
    for epoch in range(cfg.epochs):
        # the ground-truth domain rotates per epoch, not per step: a stable
        # reconstruction target for a whole pass keeps the momentum buffers
        # of the augmentation optimizer from whipsawing between the domains'
        # very different spectral magnitudes
        if cfg.gt_domain_mode == "fixed":
            g = int(cfg.fixed_gt_domain)
        else:
            g = sources[epoch % len(sources)]
        # two PK passes per epoch: the balanced sampler repeats samples
        # anyway, and the extra coverage lets the augmentation pressure
        # unlock shortcut solutions within a short epoch budget
        n_batches = 2 * max(1, math.ceil(len(y_np) / (cfg.p_classes * cfg.k_per_class)))
        batches = pk_batches(y_np, cfg.p_classes, cfg.k_per_class,
                             seed=int(rng.integers(0, 2 ** 31 - 1)),
                             n_batches=n_batches, domains=d_np)
        sums = {"loss_aug": 0.0, "loss_clf": 0.0, "loss_triplet": 0.0, "loss_total": 0.0}
        for batch in batches:
            idx = torch.from_numpy(batch)
            stats = train_step(aug_model, rec_model, optimizers,
                               x_all[idx], y_all[idx], d_all[idx], g, cfg, rng)
            for key in sums:
                sums[key] += getattr(stats, key)
        row = {"epoch": float(epoch), **{k: v / len(batches) for k, v in sums.items()}}
        history.append(row)

    x_test, y_test, _ = load_split(manifest, "test", domains=[target])
    result = evaluate(rec_model, x_test / np.float32(scale), y_test)
    out = TrainResult(result.accuracy, result.confusion, history, cfg,
                      list(sources), target, time.time() - t0, aug_model, rec_model,
                      input_scale=scale)
    if out_dir is not None:
        save_run(out, out_dir)
    return out


def history_csv(history: List[Dict[str, float]]) -> str:
    buf = io.StringIO()
    fields = list(history[0]) if history else ["epoch"]
    writer = csv.DictWriter(buf, fieldnames=fields)
    writer.writeheader()
    writer.writerows(history)
    return buf.getvalue()


def confusion_csv(confusion: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    n = confusion.shape[0]
    writer.writerow(["true\\pred"] + [f"pred_{j}" for j in range(n)])
    for i in range(n):
        writer.writerow([f"true_{i}"] + confusion[i].tolist())
    return buf.getvalue()


def save_run(result: TrainResult, out_dir: Union[str, Path]) -> Path:
    """Write history.csv, confusion.csv, metrics.json and checkpoint.npz."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "history.csv").write_text(history_csv(result.history))
    (out / "confusion.csv").write_text(confusion_csv(result.confusion))
    metrics = {
        "accuracy": result.accuracy,
        "sources": result.sources,
        "target": result.target,
        "seconds": result.seconds,
        "input_scale": result.input_scale,
        "config": asdict(result.config),
    }
    (out / "metrics.json").write_text(json.dumps(metrics, indent=1))
    save_checkpoint(result, out / "checkpoint.npz")
    return out


def save_checkpoint(result: TrainResult, path: Union[str, Path]) -> None:
    """Single-file npz checkpoint: tensors keyed by module path plus JSON meta."""
    arrays = {}
    for name, tensor in result.rec_model.state_dict().items():
        arrays[f"rec.{name}"] = tensor.numpy()
    if result.aug_model is not None:
        for name, tensor in result.aug_model.state_dict().items():
            arrays[f"aug.{name}"] = tensor.numpy()
    meta = {
        "in_channels": result.rec_model.in_channels,
        "n_classes": result.rec_model.n_classes,
        "base_width": result.rec_model.embed_dim // 8,
        "has_aug": result.aug_model is not None,
        "config": asdict(result.config),
        "sources": result.sources,
        "target": result.target,
        "accuracy": result.accuracy,
        "input_scale": result.input_scale,
    }
    arrays["meta.json"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path: Union[str, Path]):
    """Rebuild (aug_model or None, rec_model, meta) from an npz checkpoint."""
    with np.load(path) as data:
        if "meta.json" not in data:
            raise ValueError(f"{path} is not a checkpoint archive (missing meta)")
        meta = json.loads(bytes(data["meta.json"]).decode())
        rec_model = Recognizer(meta["in_channels"], meta["n_classes"], meta["base_width"])
        rec_state = {k[len("rec."):]: torch.from_numpy(v)
                     for k, v in data.items() if k.startswith("rec.")}
        rec_model.load_state_dict(rec_state)
        aug_model = None
        if meta["has_aug"]:
            aug_model = AugmentationModel(meta["in_channels"])
            aug_state = {k[len("aug."):]: torch.from_numpy(v)
                         for k, v in data.items() if k.startswith("aug.")}
            aug_model.load_state_dict(aug_state)
    rec_model.eval()
    if aug_model is not None:
        aug_model.eval()
    return aug_model, rec_model, meta


def ablation_config(variant: str, base: TrainConfig) -> TrainConfig:
    """m1: recognizer only. m2: + augmentation. m3: + metric at k=1. m4: full."""
    if variant not in ABLATION_VARIANTS:
        raise ValueError(f"variant must be one of {ABLATION_VARIANTS}, got {variant!r}")
    if variant == "m1":
        return replace(base, use_augmentation=False, use_triplet=False)
    if variant == "m2":
        return replace(base, use_augmentation=True, use_triplet=False)
    if variant == "m3":
        return replace(base, use_augmentation=True, use_triplet=True, manifold_k=1.0)
    return replace(base, use_augmentation=True, use_triplet=True)


def summarize_accuracies(accuracies: Sequence[float]) -> Dict[str, float]:
    arr = np.asarray(accuracies, dtype=np.float64)
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return {"mean": float(arr.mean()), "std": std,
            "runs": [float(a) for a in arr]}


def repeated_runs(manifest: DatasetManifest, sources: Sequence[int], target: int,
                  cfg: TrainConfig, runs: int = 5) -> Dict[str, float]:
    """Mean and sample standard deviation of accuracy over seeded repeats."""
    if runs < 1:
        raise ValueError("runs must be positive")
    accs = []
    for i in range(runs):
        result = train_run(manifest, sources, target, replace(cfg, seed=cfg.seed + i))
        accs.append(result.accuracy)
    return summarize_accuracies(accs)


def run_ablation(manifest: DatasetManifest, sources: Sequence[int], target: int,
                 cfg: TrainConfig = TrainConfig(),
                 variants: Sequence[str] = ABLATION_VARIANTS,
                 runs: int = 5) -> Dict[str, Dict[str, float]]:
    return {
        variant: repeated_runs(manifest, sources, target,
                               ablation_config(variant, cfg), runs)
        for variant in variants
    }


def lambda_sweep(manifest: DatasetManifest, sources: Sequence[int], target: int,
                 cfg: TrainConfig = TrainConfig(),
                 pairs: Sequence[Tuple[float, float]] = ((0.1, 0.2), (0.2, 0.4),
                                                         (0.3, 0.6), (0.4, 0.8),
                                                         (0.5, 1.0)),
                 runs: int = 1) -> Dict[str, Dict[str, float]]:
    return {
        f"lambda1={l1:g},lambda2={l2:g}": repeated_runs(
            manifest, sources, target,
            replace(cfg, lambda1=l1, lambda2=l2, use_augmentation=True), runs)
        for l1, l2 in pairs
    }


def k_sweep(manifest: DatasetManifest, sources: Sequence[int], target: int,
            cfg: TrainConfig = TrainConfig(),
            ks: Sequence[float] = (1.0, 1.5, 2.0, 2.5, 3.0),
            runs: int = 1) -> Dict[str, Dict[str, float]]:
    return {
        f"k={k:g}": repeated_runs(manifest, sources, target,
                                  replace(cfg, manifold_k=k, use_triplet=True), runs)
        for k in ks
    }
