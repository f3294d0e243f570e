"""Request and response bodies of the HTTP service."""

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field


class SynthRequest(BaseModel):
    out_dir: str
    n_classes: int = 4
    n_domains: int = 3
    samples_per_cell: Tuple[int, int] = (50, 25)
    shape: Tuple[int, int, int] = (1, 2048, 1)
    seed: int = 0
    noise_sigma: Optional[float] = None
    sample_rate_hz: Optional[float] = None
    domain_speed_factors: Optional[List[float]] = None
    domain_amplitude_scales: Optional[List[float]] = None
    domain_resonance_hz: Optional[List[float]] = None


class SynthResponse(BaseModel):
    out_dir: str
    n_records: int
    n_classes: int
    n_domains: int
    sample_shape: Tuple[int, int, int]


class TrainRequest(BaseModel):
    data_dir: str
    sources: List[int]
    target: int
    out_dir: Optional[str] = None
    epochs: int = 50
    p_classes: int = 4
    k_per_class: int = 32
    seed: int = 0
    variant: str = Field("m4", description="ablation variant m1..m4")
    lambda1: float = 0.1
    lambda2: float = 0.2
    alpha: float = 0.01
    gamma: float = 0.3
    manifold_k: float = 3.0


class TrainResponse(BaseModel):
    accuracy: float
    sources: List[int]
    target: int
    seconds: float
    input_scale: float
    confusion: List[List[int]]
    history: List[Dict[str, float]]
    out_dir: Optional[str] = None


class EvalRequest(BaseModel):
    checkpoint: str
    data_dir: str
    split: str = "test"
    domains: Optional[List[int]] = None


class EvalResponse(BaseModel):
    accuracy: float
    n_samples: int
    per_class: List[float]
    confusion: List[List[int]]


class AblateRequest(BaseModel):
    data_dir: str
    sources: List[int]
    target: int
    variants: List[str] = ["m1", "m2", "m3", "m4"]
    runs: int = 5
    epochs: int = 50
    p_classes: int = 4
    k_per_class: int = 32
    seed: int = 0


class VariantSummary(BaseModel):
    mean: float
    std: float
    runs: List[float]


class AblateResponse(BaseModel):
    results: Dict[str, VariantSummary]


class SwapRequest(BaseModel):
    data_dir: str
    index_a: int
    index_b: int


class SwapResponse(BaseModel):
    shape: Tuple[int, int, int]
    class_a: int
    domain_a: int
    class_b: int
    domain_b: int
    swapped_std: float
    amp_gap_to_b: float
    pha_gap_to_a: float


class DomainStatsResponse(BaseModel):
    amp_divergence: float
    pha_divergence: float
    rho: float
    n_classes: int
    domains: List[int]
    per_class_rho: Dict[int, float]


class EmbeddingsRequest(BaseModel):
    checkpoint: str
    data_dir: str
    out_path: str
    split: str = "test"
    domains: Optional[List[int]] = None


class EmbeddingsResponse(BaseModel):
    out_path: str
    n_rows: int


class HealthResponse(BaseModel):
    status: str
    version: str
