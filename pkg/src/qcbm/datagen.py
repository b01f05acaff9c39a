"""Training data: CSV ingestion and a di-jet-like synthetic surrogate.

The surrogate draws (pt, mass) from a Gaussian copula with log-normal
marginals and eta from an independent truncated normal.  The copula
correlation is solved numerically so that the Pearson correlation of the
transformed marginals hits ``rho_pt_mass``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, stats

from .encoding import Dataset
from .simulator import ConfigurationError


class IngestionError(ValueError):
    pass


@dataclass(frozen=True)
class SurrogateConfig:
    n_events: int = 100_000
    # log-normal location is the log of the median (GeV), scale is the log-space width
    pt_median: float = 500.0
    pt_sigma: float = 0.25
    mass_median: float = 80.0
    mass_sigma: float = 0.35
    eta_mean: float = 0.0
    eta_width: float = 1.0
    eta_limit: float = 2.5
    rho_pt_mass: float = 0.2
    include_eta: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_events < 1:
            raise ConfigurationError(f"datagen.n_events must be >= 1, got {self.n_events}")
        if not -1.0 < self.rho_pt_mass < 1.0:
            raise ConfigurationError(f"datagen.rho_pt_mass must lie in (-1, 1), got {self.rho_pt_mass}")
        for name in ("pt_median", "pt_sigma", "mass_median", "mass_sigma", "eta_width", "eta_limit"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"datagen.{name} must be > 0, got {getattr(self, name)}")

    def to_dict(self) -> dict:
        return asdict(self)


def lognormal_pearson(copula_rho: float, sigma_a: float, sigma_b: float) -> float:
    """Pearson correlation of exp(sigma_a Z_a) and exp(sigma_b Z_b) with corr(Z_a, Z_b)=copula_rho."""
    num = math.expm1(copula_rho * sigma_a * sigma_b)
    den = math.sqrt(math.expm1(sigma_a**2) * math.expm1(sigma_b**2))
    return num / den


def calibrate_copula(rho: float, sigma_a: float, sigma_b: float) -> float:
    """Copula correlation giving Pearson ``rho`` after the log-normal transforms."""
    lo = lognormal_pearson(-1 + 1e-12, sigma_a, sigma_b)
    hi = lognormal_pearson(1 - 1e-12, sigma_a, sigma_b)
    if not lo < rho < hi:
        raise ConfigurationError(
            f"rho_pt_mass={rho} is not reachable with these log-normal widths (range {lo:.3f}..{hi:.3f})"
        )
    return optimize.brentq(
        lambda r: lognormal_pearson(r, sigma_a, sigma_b) - rho, -1 + 1e-12, 1 - 1e-12, xtol=1e-14
    )


def synthesize(config: SurrogateConfig) -> Dataset:
    rng = np.random.default_rng(config.seed)
    r = calibrate_copula(config.rho_pt_mass, config.pt_sigma, config.mass_sigma)
    cov = np.array([[1.0, r], [r, 1.0]])
    z = rng.multivariate_normal(np.zeros(2), cov, size=config.n_events, method="cholesky")
    pt = config.pt_median * np.exp(config.pt_sigma * z[:, 0])
    mass = config.mass_median * np.exp(config.mass_sigma * z[:, 1])
    columns = [pt, mass]
    names, units = ["pt", "mass"], ["GeV", "GeV"]
    if config.include_eta:
        bound = config.eta_limit / config.eta_width
        eta = stats.truncnorm.rvs(
            -bound, bound, loc=config.eta_mean, scale=config.eta_width,
            size=config.n_events, random_state=rng,
        )
        columns.append(eta)
        names.append("eta")
        units.append("")
    return Dataset(np.column_stack(columns), names, units)


def load_csv(path, expected_features: Optional[Sequence[str]] = None) -> Dataset:
    """Read a CSV whose header row names the features.

    Rows containing NaN or infinite values are dropped; the number dropped is
    available as ``dataset.rejected`` afterwards.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"data file {path} does not exist")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestionError(f"{path}: no events (file is empty)")
        header = [h.strip() for h in header]
        if expected_features is not None:
            missing = [f for f in expected_features if f not in header]
            if missing:
                raise IngestionError(f"{path}: missing column(s) {', '.join(missing)}")
            columns = [header.index(f) for f in expected_features]
            names = list(expected_features)
        else:
            columns = list(range(len(header)))
            names = header
        rows = []
        rejected = 0
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestionError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                values = [float(row[c]) for c in columns]
            except ValueError:
                raise IngestionError(f"{path}:{lineno}: unparsable numeric value in row {row!r}") from None
            if not all(math.isfinite(v) for v in values):
                rejected += 1
                continue
            rows.append(values)
    if not rows:
        raise IngestionError(f"{path}: no events")
    return Dataset(np.array(rows), names, rejected=rejected)


def save_csv(data: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(data.names)
        for row in data.values:
            writer.writerow([repr(float(v)) for v in row])


def pearson(data: Dataset, i: int = 0, j: int = 1) -> float:
    return float(np.corrcoef(data.values[:, i], data.values[:, j])[0, 1])
