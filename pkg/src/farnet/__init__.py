"""Fourier augmentation and reconstruction pipeline for fault diagnosis
across working conditions.

The package trains a recognizer on vibration signals from several source
conditions and evaluates it on an unseen one. An augmentation network
rewrites each signal's amplitude spectrum toward a chosen condition while
keeping its phase, the recognizer learns from originals plus augmented
copies, and a piecewise-warped triplet loss pulls same-class embeddings
together across conditions.
"""

__version__ = "0.1.0"

from .augnet import AugmentationModel, aug_init, augment, loss_amp, loss_aug, loss_pha
from .dataset import (
    DatasetManifest,
    SynthSpec,
    generate_synthetic,
    load_manifest,
    load_sample,
    load_split,
    pk_batches,
)
from .fsim import FsimParams, fsim_forward, fsim_init
from .metric import ManifoldParams, manifold_distance, manifold_triplet_loss
from .recognizer import Recognizer, cross_entropy, predict_proba, rec_init
from .reporting import confusion_matrix, domain_stats, embeddings_csv
from .spectral import amplitude_swap, dft2, polar, recompose
from .trainer import (
    TrainConfig,
    TrainResult,
    ablation_config,
    evaluate,
    load_checkpoint,
    repeated_runs,
    run_ablation,
    save_checkpoint,
    train_run,
)

__all__ = [
    "__version__",
    "AugmentationModel", "aug_init", "augment", "loss_amp", "loss_aug", "loss_pha",
    "DatasetManifest", "SynthSpec", "generate_synthetic", "load_manifest",
    "load_sample", "load_split", "pk_batches",
    "FsimParams", "fsim_forward", "fsim_init",
    "ManifoldParams", "manifold_distance", "manifold_triplet_loss",
    "Recognizer", "cross_entropy", "predict_proba", "rec_init",
    "confusion_matrix", "domain_stats", "embeddings_csv",
    "amplitude_swap", "dft2", "polar", "recompose",
    "TrainConfig", "TrainResult", "ablation_config", "evaluate",
    "load_checkpoint", "repeated_runs", "run_ablation", "save_checkpoint",
    "train_run",
]
