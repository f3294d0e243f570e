"""FastAPI application exposing the training pipeline over HTTP.

Every endpoint is stateless: datasets, runs and checkpoints live on the
filesystem and requests name them by path, so the service can be
restarted freely and multiple clients can share one machine.
"""

import numpy as np
import torch
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..dataset import SynthSpec, generate_synthetic, load_manifest, load_sample
from ..dataset import load_split
from ..reporting import domain_stats, embeddings_csv
from ..spectral import amplitude_swap, dft2, polar
from ..trainer import (
    TrainConfig,
    ablation_config,
    evaluate,
    load_checkpoint,
    repeated_runs,
    train_run,
)
from . import schemas


def _manifest_or_404(data_dir: str):
    try:
        return load_manifest(data_dir)
    except FileNotFoundError:
        raise HTTPException(404, f"no dataset manifest under {data_dir!r}")
    except ValueError as err:
        raise HTTPException(400, str(err))


def _bad_request(err: Exception) -> HTTPException:
    return HTTPException(400, str(err))


def create_app() -> FastAPI:
    app = FastAPI(title="farnet", version=__version__)

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/synth", response_model=schemas.SynthResponse)
    def synth(req: schemas.SynthRequest):
        overrides = {
            k: v for k, v in (
                ("noise_sigma", req.noise_sigma),
                ("sample_rate_hz", req.sample_rate_hz),
                ("domain_speed_factors", req.domain_speed_factors),
                ("domain_amplitude_scales", req.domain_amplitude_scales),
                ("domain_resonance_hz", req.domain_resonance_hz),
            ) if v is not None
        }
        for key in ("domain_speed_factors", "domain_amplitude_scales",
                    "domain_resonance_hz"):
            if key in overrides:
                overrides[key] = tuple(overrides[key])
        spec = SynthSpec(n_classes=req.n_classes, n_domains=req.n_domains,
                         samples_per_cell=tuple(req.samples_per_cell),
                         shape=tuple(req.shape), seed=req.seed, **overrides)
        try:
            manifest = generate_synthetic(spec, req.out_dir)
        except (ValueError, OSError) as err:
            raise _bad_request(err)
        return schemas.SynthResponse(out_dir=req.out_dir,
                                     n_records=len(manifest.records),
                                     n_classes=manifest.n_classes,
                                     n_domains=len(manifest.domain_ids()),
                                     sample_shape=manifest.sample_shape)

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest):
        manifest = _manifest_or_404(req.data_dir)
        cfg = TrainConfig(epochs=req.epochs, p_classes=req.p_classes,
                          k_per_class=req.k_per_class, seed=req.seed,
                          lambda1=req.lambda1, lambda2=req.lambda2,
                          alpha=req.alpha, gamma=req.gamma,
                          manifold_k=req.manifold_k)
        try:
            cfg = ablation_config(req.variant, cfg)
            result = train_run(manifest, req.sources, req.target, cfg,
                               out_dir=req.out_dir)
        except ValueError as err:
            raise _bad_request(err)
        return schemas.TrainResponse(accuracy=result.accuracy,
                                     sources=result.sources,
                                     target=result.target,
                                     seconds=result.seconds,
                                     input_scale=result.input_scale,
                                     confusion=result.confusion.tolist(),
                                     history=result.history,
                                     out_dir=req.out_dir)

    @app.post("/eval", response_model=schemas.EvalResponse)
    def eval_checkpoint(req: schemas.EvalRequest):
        manifest = _manifest_or_404(req.data_dir)
        try:
            _, rec_model, meta = load_checkpoint(req.checkpoint)
        except FileNotFoundError:
            raise HTTPException(404, f"no checkpoint at {req.checkpoint!r}")
        except (ValueError, OSError) as err:
            raise _bad_request(err)
        if manifest.n_classes != meta["n_classes"]:
            raise HTTPException(400, f"dataset has {manifest.n_classes} classes, "
                                     f"checkpoint was trained for {meta['n_classes']}")
        try:
            x, y, _ = load_split(manifest, req.split, domains=req.domains)
            x = x / np.float32(meta.get("input_scale", 1.0))
            result = evaluate(rec_model, x, y)
        except ValueError as err:
            raise _bad_request(err)
        return schemas.EvalResponse(accuracy=result.accuracy,
                                    n_samples=result.n_samples,
                                    per_class=result.per_class,
                                    confusion=result.confusion.tolist())

    @app.post("/ablate", response_model=schemas.AblateResponse)
    def ablate(req: schemas.AblateRequest):
        manifest = _manifest_or_404(req.data_dir)
        base = TrainConfig(epochs=req.epochs, p_classes=req.p_classes,
                           k_per_class=req.k_per_class, seed=req.seed)
        results = {}
        try:
            for variant in req.variants:
                cfg = ablation_config(variant, base)
                summary = repeated_runs(manifest, req.sources, req.target,
                                        cfg, runs=req.runs)
                results[variant] = schemas.VariantSummary(**summary)
        except ValueError as err:
            raise _bad_request(err)
        return schemas.AblateResponse(results=results)

    @app.post("/preview-swap", response_model=schemas.SwapResponse)
    def preview_swap(req: schemas.SwapRequest):
        manifest = _manifest_or_404(req.data_dir)
        n = len(manifest.records)
        if not (0 <= req.index_a < n and 0 <= req.index_b < n):
            raise HTTPException(400, f"record index out of range, dataset has {n}")
        a = load_sample(manifest, req.index_a)
        b = load_sample(manifest, req.index_b)
        xa = torch.from_numpy(a.signal)[None].to(torch.float64)
        xb = torch.from_numpy(b.signal)[None].to(torch.float64)
        swapped = amplitude_swap(xa, xb)
        amp_s, pha_s = polar(dft2(swapped))
        amp_b, _ = polar(dft2(xb))
        _, pha_a = polar(dft2(xa))
        # phase gap only where the swapped amplitude carries real mass,
        # wrapped so a 2 pi slip does not look like a mismatch
        mask = amp_s > 1e-2 * float(amp_s.max())
        gap = torch.remainder(pha_s - pha_a + torch.pi, 2 * torch.pi) - torch.pi
        return schemas.SwapResponse(shape=manifest.sample_shape,
                                    class_a=a.class_id, domain_a=a.domain_id,
                                    class_b=b.class_id, domain_b=b.domain_id,
                                    swapped_std=float(swapped.std()),
                                    amp_gap_to_b=float((amp_s - amp_b).abs().mean()),
                                    pha_gap_to_a=float(gap[mask].abs().mean()))

    @app.get("/domain-stats", response_model=schemas.DomainStatsResponse)
    def stats(data_dir: str, split: str = "train"):
        manifest = _manifest_or_404(data_dir)
        try:
            st = domain_stats(manifest, split=split)
        except ValueError as err:
            raise _bad_request(err)
        return schemas.DomainStatsResponse(amp_divergence=st.amp_divergence,
                                           pha_divergence=st.pha_divergence,
                                           rho=st.rho, n_classes=st.n_classes,
                                           domains=st.domains,
                                           per_class_rho=st.per_class_rho)

    @app.post("/export-embeddings", response_model=schemas.EmbeddingsResponse)
    def export_embeddings(req: schemas.EmbeddingsRequest):
        manifest = _manifest_or_404(req.data_dir)
        try:
            _, rec_model, meta = load_checkpoint(req.checkpoint)
        except FileNotFoundError:
            raise HTTPException(404, f"no checkpoint at {req.checkpoint!r}")
        except (ValueError, OSError) as err:
            raise _bad_request(err)
        try:
            x, y, d = load_split(manifest, req.split, domains=req.domains)
        except ValueError as err:
            raise _bad_request(err)
        x = x / np.float32(meta.get("input_scale", 1.0))
        text = embeddings_csv(rec_model, x, y, d)
        try:
            with open(req.out_path, "w") as fh:
                fh.write(text)
        except OSError as err:
            raise _bad_request(err)
        return schemas.EmbeddingsResponse(out_path=req.out_path, n_rows=len(x))

    return app
