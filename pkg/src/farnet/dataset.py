"""Portable sample/dataset model and a deterministic synthetic generator.

A dataset on disk is a directory with one raw binary file per record
(float32, little-endian, C-major then row-major H,W) plus a
``manifest.json`` describing shapes, classes, domains and the train/test
split. The synthetic generator stands in for a real multi-condition
bearing test bench: class identity is carried by the impulse repetition
structure, domain identity by the amplitude envelope and speed factor.
"""

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class RecordEntry:
    path: str  # relative to the dataset root
    class_id: int
    domain_id: int
    byte_length: int
    split: str  # "train" | "test"


@dataclass
class DatasetManifest:
    schema_version: int
    sample_shape: Tuple[int, int, int]  # (C, H, W)
    n_classes: int
    domains: List[Tuple[int, str]]
    records: List[RecordEntry]
    root: Optional[Path] = None  # set when loaded from / written to disk

    def to_json(self) -> str:
        doc = {
            "schema_version": self.schema_version,
            "sample_shape": list(self.sample_shape),
            "n_classes": self.n_classes,
            "domains": [[d, name] for d, name in self.domains],
            "records": [
                {
                    "path": r.path,
                    "class_id": r.class_id,
                    "domain_id": r.domain_id,
                    "byte_length": r.byte_length,
                    "split": r.split,
                }
                for r in self.records
            ],
        }
        return json.dumps(doc, indent=1)

    @staticmethod
    def from_json(text: str, root=None) -> "DatasetManifest":
        doc = json.loads(text)
        return DatasetManifest(
            schema_version=int(doc["schema_version"]),
            sample_shape=tuple(doc["sample_shape"]),
            n_classes=int(doc["n_classes"]),
            domains=[(int(d), str(name)) for d, name in doc["domains"]],
            records=[
                RecordEntry(
                    path=r["path"],
                    class_id=int(r["class_id"]),
                    domain_id=int(r["domain_id"]),
                    byte_length=int(r["byte_length"]),
                    split=r["split"],
                )
                for r in doc["records"]
            ],
            root=Path(root) if root is not None else None,
        )

    def domain_ids(self) -> List[int]:
        return [d for d, _ in self.domains]


@dataclass
class LabeledSample:
    signal: np.ndarray  # (C, H, W) float32
    class_id: int
    domain_id: int


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic multi-domain bearing-signal generator.

    Per record the signal is an impulse train at repetition frequency
    (base_fault_freq_hz + class_id * class_freq_step_hz) * speed_factor,
    each impulse an exponentially decaying sinusoid burst at the domain's
    resonance frequency. The train is globally scaled by the domain
    amplitude scale, then Gaussian noise of std noise_sigma is added.
    Domain identity therefore lives in the carrier band, the speed shift
    and the overall level, while class identity lives in the burst timing.
    """

    n_classes: int = 4
    n_domains: int = 3
    samples_per_cell: Tuple[int, int] = (50, 25)  # (train, test) per class x domain
    shape: Tuple[int, int, int] = (1, 2048, 1)
    base_fault_freq_hz: float = 20.0
    class_freq_step_hz: float = 30.0
    # the speed spread stays below the class-frequency ratios, so repetition
    # bands never overlap across working conditions; domain style lives in
    # the carrier band, the speed shift and the overall level, and domain 2
    # sits between the other two, the usual held-out middle condition
    domain_speed_factors: Tuple[float, ...] = (1.0, 1.06, 1.03)
    domain_amplitude_scales: Tuple[float, ...] = (0.8, 2.0, 1.3)
    domain_resonance_hz: Tuple[float, ...] = (180.0, 310.0, 240.0)
    domain_burst_decay_s: Tuple[float, ...] = (0.006, 0.006, 0.006)
    # optional per-record jitter adds heterogeneity inside each condition;
    # zero by default so domain style stays a crisp, condition-level cue
    speed_jitter: float = 0.0
    scale_jitter: float = 0.0
    burst_amplitude: float = 0.5
    noise_sigma: float = 0.12
    sample_rate_hz: float = 2048.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_classes <= 0 or self.n_domains <= 0:
            raise ValueError("n_classes and n_domains must be positive")
        if any(n <= 0 for n in self.samples_per_cell):
            raise ValueError("samples_per_cell entries must be positive")
        c, h, w = self.shape
        if c < 1 or h < 8 or w < 1:
            raise ValueError(f"shape must satisfy C>=1, H>=8, W>=1, got {self.shape}")
        if len(self.domain_speed_factors) != self.n_domains:
            raise ValueError("domain_speed_factors must have length n_domains")
        if len(self.domain_amplitude_scales) != self.n_domains:
            raise ValueError("domain_amplitude_scales must have length n_domains")
        if len(self.domain_resonance_hz) != self.n_domains:
            raise ValueError("domain_resonance_hz must have length n_domains")
        if len(self.domain_burst_decay_s) != self.n_domains:
            raise ValueError("domain_burst_decay_s must have length n_domains")
        if any(f <= 0 for f in self.domain_speed_factors):
            raise ValueError("speed factors must be positive")
        if any(s <= 0 for s in self.domain_amplitude_scales):
            raise ValueError("amplitude scales must be positive")
        if any(not 0 < r < self.sample_rate_hz / 2 for r in self.domain_resonance_hz):
            raise ValueError("resonance frequencies must lie below Nyquist")
        if any(d <= 0 for d in self.domain_burst_decay_s):
            raise ValueError("burst decay times must be positive")
        if not 0 <= self.speed_jitter < 1 or not 0 <= self.scale_jitter < 1:
            raise ValueError("jitter fractions must lie in [0, 1)")
        if self.base_fault_freq_hz <= 0 or self.class_freq_step_hz < 0:
            raise ValueError("base frequency must be positive, step non-negative")
        if self.burst_amplitude <= 0:
            raise ValueError("burst_amplitude must be positive")
        if self.noise_sigma < 0 or self.sample_rate_hz <= 0:
            raise ValueError("noise_sigma must be >= 0 and sample_rate_hz > 0")


def _synth_record(spec: SynthSpec, class_id: int, domain_id: int, sample_index: int,
                  split_tag: int) -> np.ndarray:
    """One (C, H, W) record, a pure function of (spec.seed, cell, index)."""
    rng = np.random.default_rng([spec.seed, class_id, domain_id, split_tag, sample_index])
    c, h, w = spec.shape
    fs = spec.sample_rate_hz
    rep_hz = (spec.base_fault_freq_hz + class_id * spec.class_freq_step_hz) \
        * spec.domain_speed_factors[domain_id] \
        * (1.0 + spec.speed_jitter * rng.uniform(-1.0, 1.0))
    scale = spec.domain_amplitude_scales[domain_id] \
        * (1.0 + spec.scale_jitter * rng.uniform(-1.0, 1.0))
    decay = spec.domain_burst_decay_s[domain_id]

    t = np.arange(h) / fs
    duration = h / fs
    period = 1.0 / rep_hz
    onset = rng.uniform(0.0, period)
    n_bursts = int(math.floor((duration - onset) / period)) + 1

    out = np.zeros((c, h, w), dtype=np.float64)
    tail = 5.0 * decay
    for ch in range(c):
        train = np.zeros(h, dtype=np.float64)
        for i in range(n_bursts):
            ti = onset + i * period
            amp = spec.burst_amplitude * (1.0 + 0.1 * rng.standard_normal())
            phase = rng.uniform(0.0, 2.0 * np.pi)
            lo = int(np.ceil(ti * fs))
            hi = min(h, int(np.ceil((ti + tail) * fs)))
            if lo >= h:
                break
            dt = t[lo:hi] - ti
            train[lo:hi] += amp * np.exp(-dt / decay) \
                * np.sin(2.0 * np.pi * spec.domain_resonance_hz[domain_id] * dt + phase)
        noise = rng.standard_normal((h, w))
        out[ch] = scale * train[:, None] + spec.noise_sigma * noise
    return out.astype(np.float32)


def generate_synthetic(spec: SynthSpec, out_dir) -> DatasetManifest:
    """Write a synthetic dataset (records + manifest.json) under out_dir."""
    spec.validate()
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    c, h, w = spec.shape
    byte_length = 4 * c * h * w
    n_train, n_test = spec.samples_per_cell

    records: List[RecordEntry] = []
    for split_tag, (split, count) in enumerate([("train", n_train), ("test", n_test)]):
        (root / split).mkdir(exist_ok=True)
        for class_id in range(spec.n_classes):
            for domain_id in range(spec.n_domains):
                for i in range(count):
                    values = _synth_record(spec, class_id, domain_id, i, split_tag)
                    rel = f"{split}/c{class_id}_d{domain_id}_{i:04d}.f32"
                    values.astype("<f4").tofile(root / rel)
                    records.append(RecordEntry(rel, class_id, domain_id, byte_length, split))

    domains = [
        (d, f"synthetic speed x{spec.domain_speed_factors[d]:g} amp x{spec.domain_amplitude_scales[d]:g}")
        for d in range(spec.n_domains)
    ]
    manifest = DatasetManifest(
        schema_version=SCHEMA_VERSION,
        sample_shape=spec.shape,
        n_classes=spec.n_classes,
        domains=domains,
        records=records,
        root=root,
    )
    (root / MANIFEST_NAME).write_text(manifest.to_json())
    return manifest


def load_manifest(dataset_dir) -> DatasetManifest:
    root = Path(dataset_dir)
    path = root / MANIFEST_NAME
    if not path.is_file():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {root}")
    return DatasetManifest.from_json(path.read_text(), root=root)


def load_sample(manifest: DatasetManifest, index: int) -> LabeledSample:
    """Read one record back, bit-exactly as written."""
    if manifest.root is None:
        raise ValueError("manifest has no root directory; load it via load_manifest")
    if not 0 <= index < len(manifest.records):
        raise IndexError(f"record index {index} out of range [0, {len(manifest.records)})")
    rec = manifest.records[index]
    path = Path(manifest.root) / rec.path
    if not path.is_file():
        raise FileNotFoundError(f"record file missing: {path}")
    actual = os.path.getsize(path)
    if actual != rec.byte_length:
        raise ValueError(
            f"record {rec.path} is corrupt: {actual} bytes on disk, manifest says {rec.byte_length}"
        )
    values = np.fromfile(path, dtype="<f4").reshape(manifest.sample_shape)
    return LabeledSample(values, rec.class_id, rec.domain_id)


def load_split(manifest: DatasetManifest, split: str,
               domains: Optional[Iterable[int]] = None):
    """Load every record of a split (optionally restricted to domains).

    Returns (values B x C x H x W float32, class_ids, domain_ids).
    """
    wanted = None if domains is None else set(domains)
    idx = [
        i for i, r in enumerate(manifest.records)
        if r.split == split and (wanted is None or r.domain_id in wanted)
    ]
    if not idx:
        raise ValueError(f"no records for split={split!r}, domains={domains}")
    values = np.stack([load_sample(manifest, i).signal for i in idx])
    class_ids = np.array([manifest.records[i].class_id for i in idx], dtype=np.int64)
    domain_ids = np.array([manifest.records[i].domain_id for i in idx], dtype=np.int64)
    return values, class_ids, domain_ids


def _class_ids_of(samples: Sequence) -> np.ndarray:
    if len(samples) and hasattr(samples[0], "class_id"):
        return np.array([s.class_id for s in samples], dtype=np.int64)
    return np.asarray(samples, dtype=np.int64)


def pk_batches(samples: Sequence, p: int, k: int, seed: int,
               n_batches: Optional[int] = None,
               domains: Optional[Sequence[int]] = None) -> List[np.ndarray]:
    """PK batch index lists: P' = min(p, #classes) classes, k indices each.

    Within each class, indices are drawn without replacement until the
    class is exhausted, then its pool is reshuffled; classes smaller than
    k therefore repeat indices within a batch. Deterministic given seed.

    When a domain id per sample is given, each class's k draws are spread
    as evenly as possible over that class's domains, so every batch shows
    every class under every working condition.
    """
    if p <= 0 or k <= 0:
        raise ValueError(f"p and k must be positive, got p={p}, k={k}")
    labels = _class_ids_of(samples)
    classes = np.unique(labels)
    if len(classes) == 0:
        raise ValueError("no samples")
    if domains is not None:
        domains = np.asarray(domains, dtype=np.int64)
        if domains.shape != labels.shape:
            raise ValueError("domains must align with samples")
    p_eff = min(p, len(classes))
    if n_batches is None:
        n_batches = max(1, math.ceil(len(labels) / (p * k)))

    rng = np.random.default_rng(seed)
    if domains is None:
        groups = {c: [np.flatnonzero(labels == c)] for c in classes}
    else:
        groups = {
            c: [np.flatnonzero((labels == c) & (domains == d))
                for d in np.unique(domains[labels == c])]
            for c in classes
        }
    pools = {c: [rng.permutation(g) for g in gs] for c, gs in groups.items()}
    cursors = {c: [0] * len(gs) for c, gs in groups.items()}

    def draw_pool(c, j, n):
        out = []
        while n > 0:
            pool, cur = pools[c][j], cursors[c][j]
            take = min(n, len(pool) - cur)
            out.append(pool[cur:cur + take])
            cursors[c][j] = cur + take
            n -= take
            if cursors[c][j] == len(pool):
                pools[c][j] = rng.permutation(pool)
                cursors[c][j] = 0
        return np.concatenate(out)

    def draw(c, n):
        n_pools = len(pools[c])
        base, rem = divmod(n, n_pools)
        extra = set(rng.permutation(n_pools)[:rem].tolist()) if rem else set()
        return np.concatenate([
            draw_pool(c, j, base + (j in extra)) for j in range(n_pools)
        ])

    batches = []
    for _ in range(n_batches):
        chosen = rng.choice(classes, size=p_eff, replace=False)
        batches.append(np.concatenate([draw(c, k) for c in chosen]))
    return batches
