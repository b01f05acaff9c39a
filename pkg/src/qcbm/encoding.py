"""Binning of numeric events into bitstrings and back.

Each feature gets ``q`` qubits and ``2**q`` bins.  An event's bitstring is the
concatenation of the big-endian bin indices of its features, first feature
leftmost.  Bins are half-open ``[lo, hi)`` except the last, which is closed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .simulator import ConfigurationError, ShotHistogram, index_to_bitstring


class EncodingError(ValueError):
    pass


class DecodingError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureBinning:
    name: str
    num_qubits: int
    edges: tuple[float, ...]
    unit: str = ""

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(float(e) for e in self.edges))
        if self.num_qubits < 1:
            raise ConfigurationError(f"feature {self.name!r} needs at least one qubit")
        if len(self.edges) != 2**self.num_qubits + 1:
            raise ConfigurationError(
                f"feature {self.name!r}: expected {2**self.num_qubits + 1} edges, got {len(self.edges)}"
            )
        if not np.all(np.diff(self.edges) > 0):
            raise ConfigurationError(f"feature {self.name!r}: bin edges must be strictly increasing")

    @property
    def num_bins(self) -> int:
        return 2**self.num_qubits


@dataclass(frozen=True)
class BinningScheme:
    features: tuple[FeatureBinning, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))

    @property
    def num_qubits(self) -> int:
        return sum(f.num_qubits for f in self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def to_dict(self) -> dict:
        return {
            "features": [
                {"name": f.name, "unit": f.unit, "num_qubits": f.num_qubits, "edges": list(f.edges)}
                for f in self.features
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BinningScheme":
        return cls(tuple(FeatureBinning(**f) for f in d["features"]))


@dataclass
class Dataset:
    values: np.ndarray
    names: list[str]
    units: list[str] = field(default_factory=list)
    # rows dropped at ingestion for NaN/inf values
    rejected: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ValueError("a dataset needs at least one event")
        if self.values.shape[1] != len(self.names):
            raise ValueError(
                f"{self.values.shape[1]} feature columns but {len(self.names)} feature names"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("dataset contains NaN or infinite values")
        if not self.units:
            self.units = [""] * len(self.names)

    @property
    def num_events(self) -> int:
        return self.values.shape[0]

    @property
    def num_features(self) -> int:
        return self.values.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.values[rows], list(self.names), list(self.units))


@dataclass
class TargetDistribution:
    probabilities: np.ndarray
    scheme: BinningScheme

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.probabilities.shape != (2**self.scheme.num_qubits,):
            raise ValueError("target length does not match the scheme's qubit count")

    def to_dict(self) -> dict[str, float]:
        n = self.scheme.num_qubits
        return {index_to_bitstring(i, n): float(p) for i, p in enumerate(self.probabilities) if p}


def fit_binning(
    data: Dataset,
    q_per_feature: Union[int, Sequence[int]],
    edge_mode: str = "equal-width",
) -> BinningScheme:
    if isinstance(q_per_feature, int):
        q_per_feature = [q_per_feature] * data.num_features
    if len(q_per_feature) != data.num_features:
        raise ConfigurationError(
            f"{len(q_per_feature)} qubit counts given for {data.num_features} features"
        )
    features = []
    for j, (name, q) in enumerate(zip(data.names, q_per_feature)):
        if q < 1:
            raise ConfigurationError(f"feature {name!r}: qubits per feature must be >= 1")
        column = data.values[:, j]
        lo, hi = float(column.min()), float(column.max())
        if not hi > lo:
            raise ConfigurationError(f"feature {name!r} is constant; cannot bin a zero range")
        if edge_mode == "equal-width":
            edges = np.linspace(lo, hi, 2**q + 1)
        elif edge_mode == "quantile":
            edges = np.quantile(column, np.linspace(0.0, 1.0, 2**q + 1))
            edges[0], edges[-1] = lo, hi
            if np.any(np.diff(edges) <= 0):
                raise ConfigurationError(
                    f"feature {name!r}: quantile binning produced duplicate edges; "
                    "use fewer qubits or equal-width bins"
                )
        else:
            raise ConfigurationError(f"unknown edge mode {edge_mode!r}")
        features.append(FeatureBinning(name, q, tuple(edges), data.units[j]))
    return BinningScheme(tuple(features))


def bin_indices(values: np.ndarray, scheme: BinningScheme) -> np.ndarray:
    """Per-feature bin indices, shape (M, N)."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] != len(scheme.features):
        raise EncodingError(
            f"events have {values.shape[1]} features, scheme has {len(scheme.features)}"
        )
    out = np.empty(values.shape, dtype=np.int64)
    for j, feat in enumerate(scheme.features):
        edges = np.asarray(feat.edges)
        col = values[:, j]
        bad = ~((col >= edges[0]) & (col <= edges[-1]))
        if np.any(bad):
            first = int(np.argmax(bad))
            raise EncodingError(
                f"feature {feat.name!r}: value {col[first]!r} outside [{edges[0]}, {edges[-1]}]"
            )
        idx = np.searchsorted(edges, col, side="right") - 1
        out[:, j] = np.minimum(idx, feat.num_bins - 1)
    return out


def encode_indices(values: np.ndarray, scheme: BinningScheme) -> np.ndarray:
    """Basis-state index of each event (first feature in the high bits)."""
    bins = bin_indices(values, scheme)
    index = np.zeros(bins.shape[0], dtype=np.int64)
    for j, feat in enumerate(scheme.features):
        index = (index << feat.num_qubits) | bins[:, j]
    return index


def encode_event(event: Sequence[float], scheme: BinningScheme) -> str:
    index = encode_indices(np.asarray(event, dtype=float)[None, :], scheme)[0]
    return index_to_bitstring(int(index), scheme.num_qubits)


def split_index(indices: np.ndarray, scheme: BinningScheme) -> np.ndarray:
    """Inverse of the bin concatenation: basis indices -> per-feature bins (M, N)."""
    indices = np.asarray(indices, dtype=np.int64)
    out = np.empty((indices.shape[0], len(scheme.features)), dtype=np.int64)
    shift = scheme.num_qubits
    for j, feat in enumerate(scheme.features):
        shift -= feat.num_qubits
        out[:, j] = (indices >> shift) & (feat.num_bins - 1)
    return out


def build_target(data: Dataset, scheme: BinningScheme) -> TargetDistribution:
    counts = np.bincount(encode_indices(data.values, scheme), minlength=2**scheme.num_qubits)
    return TargetDistribution(counts / data.num_events, scheme)


def marginals(probs: np.ndarray, scheme: BinningScheme) -> list[np.ndarray]:
    """Per-feature marginals of joint distributions of shape (..., 2**Q)."""
    probs = np.asarray(probs, dtype=float)
    lead = probs.shape[:-1]
    shaped = probs.reshape(lead + tuple(f.num_bins for f in scheme.features))
    n = len(scheme.features)
    out = []
    for j in range(n):
        axes = tuple(len(lead) + k for k in range(n) if k != j)
        out.append(shaped.sum(axis=axes))
    return out


def _counts_from(hist, num_qubits: int) -> np.ndarray:
    if isinstance(hist, ShotHistogram):
        if hist.num_qubits != num_qubits:
            raise DecodingError(f"histogram has {hist.num_qubits} qubits, scheme has {num_qubits}")
        return hist.counts
    if isinstance(hist, dict):
        counts = np.zeros(2**num_qubits, dtype=np.int64)
        for key, value in hist.items():
            if len(key) != num_qubits or set(key) - {"0", "1"}:
                raise DecodingError(f"malformed bitstring {key!r} for a {num_qubits}-qubit scheme")
            if value < 0 or int(value) != value:
                raise DecodingError(f"count for {key!r} must be a non-negative integer, got {value!r}")
            counts[int(key, 2)] += int(value)
        return counts
    counts = np.asarray(hist)
    if counts.shape != (2**num_qubits,) or np.any(counts < 0) or np.any(counts != np.round(counts)):
        raise DecodingError("dense counts must be non-negative integers of length 2**Q")
    return counts.astype(np.int64)


def decode_samples(
    hist,
    scheme: BinningScheme,
    seed: Union[int, np.random.Generator, None] = None,
    shuffle: bool = True,
) -> Dataset:
    """Expand sampled bitstrings into numeric events.

    ``hist`` is a :class:`ShotHistogram`, a ``{bitstring: count}`` mapping or
    a dense count vector.  Each value is drawn uniformly inside its bin.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = _counts_from(hist, scheme.num_qubits)
    if counts.sum() == 0:
        raise DecodingError("histogram holds no samples")
    indices = np.repeat(np.arange(counts.shape[0]), counts)
    if shuffle:
        indices = rng.permutation(indices)
    bins = split_index(indices, scheme)
    values = np.empty(bins.shape, dtype=float)
    for j, feat in enumerate(scheme.features):
        edges = np.asarray(feat.edges)
        lo, hi = edges[bins[:, j]], edges[bins[:, j] + 1]
        drawn = rng.uniform(lo, hi)
        # rounding in lo + u*(hi-lo) can land on hi, which belongs to the next bin
        values[:, j] = np.minimum(drawn, np.nextafter(hi, lo))
    units = [f.unit for f in scheme.features]
    return Dataset(values, scheme.names, units)


def rebin_counts(data: Dataset, scheme: BinningScheme) -> np.ndarray:
    return np.bincount(encode_indices(data.values, scheme), minlength=2**scheme.num_qubits)


def describe_bins(scheme: BinningScheme, feature: Optional[int] = None):
    """(feature name, bin, lo, hi) tuples for reporting."""
    feats = scheme.features if feature is None else [scheme.features[feature]]
    for f in feats:
        for b in range(f.num_bins):
            yield f.name, b, f.edges[b], f.edges[b + 1]
