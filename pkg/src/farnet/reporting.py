"""Dataset diagnostics and result export helpers."""

import csv
import io
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np
import torch

from .dataset import DatasetManifest, load_split
from .recognizer import Recognizer
from .spectral import dft2, polar


@dataclass
class DomainStats:
    """Where the domains differ: amplitude spectra or phase spectra.

    amp_divergence and pha_divergence are mean absolute gaps between the
    per-(class, domain) mean spectra of different domains, amplitude
    normalized by the overall mean amplitude and phase by pi. Their ratio
    rho > 1 means working conditions separate in amplitude much more than
    in phase, which is what makes amplitude-level augmentation worthwhile.
    """

    amp_divergence: float
    pha_divergence: float
    rho: float
    n_classes: int
    domains: List[int]
    per_class_rho: Dict[int, float]


def _mean_spectra(x: np.ndarray):
    spec = dft2(torch.from_numpy(x))
    amp, pha = polar(spec)
    return amp.mean(dim=0).numpy(), pha.mean(dim=0).numpy()


def domain_stats(manifest: DatasetManifest, split: str = "train",
                 domains: Sequence[int] = None) -> DomainStats:
    x, y, d = load_split(manifest, split, domains=domains)
    class_ids = sorted(set(y.tolist()))
    domain_ids = sorted(set(d.tolist()))
    if len(domain_ids) < 2:
        raise ValueError("need at least two domains to compare")

    mean_amp = {}
    mean_pha = {}
    for c in class_ids:
        for dom in domain_ids:
            cell = (y == c) & (d == dom)
            if not cell.any():
                raise ValueError(f"no samples for class {c} in domain {dom}")
            mean_amp[c, dom], mean_pha[c, dom] = _mean_spectra(x[cell])

    amp_base = float(np.mean([np.abs(a).mean() for a in mean_amp.values()]))
    amp_gaps, pha_gaps = [], []
    per_class_rho = {}
    for c in class_ids:
        a_gaps, p_gaps = [], []
        for i, d1 in enumerate(domain_ids):
            for d2 in domain_ids[i + 1:]:
                a_gaps.append(np.abs(mean_amp[c, d1] - mean_amp[c, d2]).mean())
                p_gaps.append(np.abs(mean_pha[c, d1] - mean_pha[c, d2]).mean())
        amp_gaps += a_gaps
        pha_gaps += p_gaps
        c_amp = float(np.mean(a_gaps)) / amp_base
        c_pha = float(np.mean(p_gaps)) / np.pi
        per_class_rho[int(c)] = c_amp / max(c_pha, 1e-12)

    amp_div = float(np.mean(amp_gaps)) / amp_base
    pha_div = float(np.mean(pha_gaps)) / np.pi
    rho = amp_div / max(pha_div, 1e-12)
    return DomainStats(amp_div, pha_div, rho, len(class_ids),
                       [int(v) for v in domain_ids], per_class_rho)


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int],
                     n_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have the same length")
    if len(y_true) and (min(y_true.min(), y_pred.min()) < 0
                        or max(y_true.max(), y_pred.max()) >= n_classes):
        raise ValueError("label out of range")
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(out, (y_true, y_pred), 1)
    return out


def embeddings_csv(rec_model: Recognizer, x: np.ndarray, y: np.ndarray,
                   d: np.ndarray, batch_size: int = 64) -> str:
    """Per-sample embedding rows with class and domain columns."""
    rec_model.eval()
    rows = []
    with torch.no_grad():
        for lo in range(0, len(x), batch_size):
            emb = rec_model.embed(torch.from_numpy(x[lo:lo + batch_size])).numpy()
            rows.append(emb)
    emb = np.concatenate(rows) if rows else np.zeros((0, rec_model.embed_dim))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["class_id", "domain_id"] + [f"e{i}" for i in range(emb.shape[1])])
    for i in range(len(emb)):
        writer.writerow([int(y[i]), int(d[i])] + [f"{v:.6g}" for v in emb[i]])
    return buf.getvalue()
