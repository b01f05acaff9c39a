"""Evaluation: marginal MAE score, correlations, sampling statistics, reports."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ansatz import CircuitSpec, evaluate_batch, exact_distribution_batch
from .encoding import BinningScheme, Dataset, build_target, decode_samples, marginals
from .simulator import NoiseConfig, apply_noise, draw_counts
from .training import TrainingConfig, js_divergence, js_divergence_batch, train

log = logging.getLogger(__name__)


def mae_similarity(target_marginals: Sequence, model_marginals: Sequence) -> float:
    """Mean absolute per-bin difference over all features' marginals.

    Every feature must use the same number of bins, so the result is
    ``sum |p - p~| / (N * 2**q)``.
    """
    if len(target_marginals) != len(model_marginals) or not target_marginals:
        raise ValueError("need the same, non-zero number of target and model marginals")
    total = 0.0
    bins = None
    for p, pt in zip(target_marginals, model_marginals):
        p, pt = np.asarray(p, dtype=float), np.asarray(pt, dtype=float)
        if p.shape != pt.shape or p.ndim != 1:
            raise ValueError(f"marginal shapes differ: {p.shape} vs {pt.shape}")
        if bins is not None and p.size != bins:
            raise ValueError("all features must have the same number of bins")
        bins = p.size
        total += np.abs(p - pt).sum()
    return float(total / (len(target_marginals) * bins))


def statistical_error(n_samples: int) -> float:
    """1/sqrt(N) scale quoted alongside D; reported, never used as a threshold."""
    return 1.0 / math.sqrt(n_samples)


def correlation_matrix(data: Dataset) -> np.ndarray:
    values = data.values
    if values.shape[0] < 2:
        raise ValueError("correlation needs at least two events")
    std = values.std(axis=0)
    if np.any(std == 0):
        zero = [data.names[j] for j in np.flatnonzero(std == 0)]
        raise ValueError(f"zero-variance feature(s): {', '.join(zero)}")
    corr = np.corrcoef(values, rowvar=False)
    corr = np.clip(0.5 * (corr + corr.T), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def repeated_sampling_stats(
    spec: CircuitSpec,
    theta,
    target,
    n_shots: Optional[int],
    repetitions: int,
    seed=None,
    noise: Optional[NoiseConfig] = None,
) -> tuple[float, float]:
    """Mean and standard deviation of JS over independent shot samples."""
    if repetitions < 2:
        raise ValueError("need at least two repetitions")
    target = np.asarray(getattr(target, "probabilities", target), dtype=float)
    probs = exact_distribution_batch(spec, np.asarray(theta)[None, :])[0]
    if noise is not None:
        probs = apply_noise(probs, noise)
    if n_shots is None:
        js = js_divergence(target, probs)
        return js, 0.0
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    batch = np.broadcast_to(probs, (repetitions, probs.size))
    freqs = draw_counts(batch, n_shots, rng) / n_shots
    js = js_divergence_batch(target, freqs)
    return float(js.mean()), float(js.std(ddof=1))


@dataclass
class MarginalRow:
    feature: str
    bin: int
    lo: float
    hi: float
    target: float
    model: float
    ratio: float
    flag: str = ""


def marginal_report(target, model, scheme: BinningScheme) -> list[MarginalRow]:
    """Per-feature binned marginals and target/model ratios.

    0/0 gives ratio 1; x/0 gives an infinite ratio flagged ``"model-empty"``.
    """
    target = np.asarray(getattr(target, "probabilities", target), dtype=float)
    model = np.asarray(model, dtype=float)
    rows = []
    for feat, pm, qm in zip(scheme.features, marginals(target, scheme), marginals(model, scheme)):
        for b in range(feat.num_bins):
            p, q = float(pm[b]), float(qm[b])
            flag = ""
            if q == 0.0:
                ratio = 1.0 if p == 0.0 else math.inf
                flag = "" if p == 0.0 else "model-empty"
            else:
                ratio = p / q
            rows.append(MarginalRow(feat.name, b, feat.edges[b], feat.edges[b + 1], p, q, ratio, flag))
    return rows


@dataclass
class EvalReport:
    js: float
    js_mean: float
    js_std: float
    d_score: float
    d_uncertainty: float
    correlation: np.ndarray
    target_correlation: Optional[np.ndarray]
    feature_names: list[str]
    marginals: list[MarginalRow] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "js": self.js,
            "js_mean": self.js_mean,
            "js_std": self.js_std,
            "d_score": self.d_score,
            "d_uncertainty": self.d_uncertainty,
            "features": self.feature_names,
            "correlation": self.correlation.tolist(),
            "target_correlation": None if self.target_correlation is None else self.target_correlation.tolist(),
        }


def build_report(
    target,
    model,
    scheme: BinningScheme,
    synthetic: Dataset,
    js_mean: Optional[float] = None,
    js_std: float = 0.0,
    truth: Optional[Dataset] = None,
) -> EvalReport:
    """Assemble the evaluation of ``model`` against ``target``.

    ``synthetic`` holds decoded samples from the model; the correlation
    matrix is computed on those continuous values.
    """
    target = np.asarray(getattr(target, "probabilities", target), dtype=float)
    model = np.asarray(model, dtype=float)
    js = js_divergence(target, model)
    d = mae_similarity(marginals(target, scheme), marginals(model, scheme))
    return EvalReport(
        js=js,
        js_mean=js if js_mean is None else js_mean,
        js_std=js_std,
        d_score=d,
        d_uncertainty=statistical_error(synthetic.num_events),
        correlation=correlation_matrix(synthetic),
        target_correlation=None if truth is None else correlation_matrix(truth),
        feature_names=list(scheme.names),
        marginals=marginal_report(target, model, scheme),
    )


def write_report(report: EvalReport, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "report.json", out_dir / "marginals.csv", out_dir / "correlation.csv"]
    paths[0].write_text(json.dumps(report.to_dict(), indent=2))
    with paths[1].open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature", "bin", "lo", "hi", "target", "model", "ratio", "flag"])
        for r in report.marginals:
            writer.writerow([r.feature, r.bin, repr(r.lo), repr(r.hi), repr(r.target), repr(r.model), repr(r.ratio), r.flag])
    with paths[2].open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([""] + report.feature_names)
        for name, row in zip(report.feature_names, report.correlation):
            writer.writerow([name] + [repr(float(v)) for v in row])
    return paths


@dataclass
class FractionResult:
    fraction: float
    n_events: int
    js_mean: float
    js_std: float
    final_train_js: float


def data_fraction_study(
    data: Dataset,
    fractions: Sequence[float],
    spec: CircuitSpec,
    scheme: BinningScheme,
    config: TrainingConfig,
    repetitions: int,
    n_shots: Optional[int] = 8192,
    seed: int = 0,
    workers: int = 1,
) -> list[FractionResult]:
    """Train on subsamples and score each model against the full-data target.

    All fractions share the binning fitted on the full data so that their
    bitstrings mean the same thing.  A fraction whose subsample has fewer
    than two events or a constant feature is logged and skipped.
    """
    full_target = build_target(data, scheme)
    subsample_seq, eval_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(subsample_seq)
    eval_rngs = [np.random.default_rng(s) for s in eval_seq.spawn(len(fractions))]
    results = []
    for frac, eval_rng in zip(fractions, eval_rngs):
        if not 0 < frac <= 1:
            raise ValueError(f"fractions must lie in (0, 1], got {frac}")
        n = int(round(frac * data.num_events))
        rows = rng.choice(data.num_events, size=n, replace=False) if n < data.num_events else np.arange(n)
        if n < 2 or np.any(np.ptp(data.values[rows], axis=0) == 0):
            log.warning("fraction %g leaves a degenerate subsample (%d events); skipped", frac, n)
            continue
        target = build_target(data.subset(rows), scheme)
        state = train(spec, target, config, workers=workers)
        mean, std = repeated_sampling_stats(spec, state.theta, full_target, n_shots, repetitions, seed=eval_rng)
        results.append(FractionResult(frac, n, mean, std, state.loss_history[-1]))
    return results


def sample_model(spec: CircuitSpec, theta, n_shots: int, scheme: BinningScheme, seed=None,
                 noise: Optional[NoiseConfig] = None) -> tuple[np.ndarray, Dataset]:
    """Draw shot counts from the model and decode them into events."""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    shot_seq, decode_seq = seq.spawn(2)
    probs = evaluate_batch(spec, np.asarray(theta)[None, :], noise=noise)[0]
    counts = draw_counts(probs, n_shots, np.random.default_rng(shot_seq))
    return counts, decode_samples(counts, scheme, seed=np.random.default_rng(decode_seq))
