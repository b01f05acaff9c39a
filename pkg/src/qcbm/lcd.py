"""Layer-wise coordinate descent for noisy backends.

Every scalar angle of a rotation layer is swept over a symmetric grid of
offsets around its current value.  The grid spacing is ``2*epsilon/n`` with
``n = max_batch / num_qubits`` (not rounded), and the offsets are the integer
multiples of the spacing that fit inside ``[-epsilon, epsilon]``, so the
incumbent (offset 0) is always a candidate.  The candidate with the lowest
backend loss is adopted; ties go to the smallest ``|offset|``.  A coordinate
whose noiseless loss barely changes across the sweep is skipped without
touching the backend.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .ansatz import CircuitSpec, evaluate_batch, exact_distribution_batch, rotation_layers
from .simulator import ConfigurationError, NoiseConfig, apply_noise
from .training import js_divergence_batch

Backend = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LcdConfig:
    epsilon: float = math.pi / 4
    max_batch: int = 300
    n_shots: Optional[int] = 20000
    flatness_threshold: float = 5e-7
    order: Union[str, tuple[int, ...]] = "last-first"
    passes: int = 1
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError(f"lcd.epsilon must be > 0, got {self.epsilon}")
        if self.max_batch < 1:
            raise ConfigurationError(f"lcd.max_batch must be >= 1, got {self.max_batch}")
        if self.n_shots is not None and self.n_shots < 1:
            raise ConfigurationError(f"lcd.n_shots must be >= 1, got {self.n_shots}")
        if self.flatness_threshold < 0:
            raise ConfigurationError("lcd.flatness_threshold must be >= 0")
        if self.passes < 1:
            raise ConfigurationError(f"lcd.passes must be >= 1, got {self.passes}")
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", NoiseConfig(**self.noise))
        if isinstance(self.order, str):
            if self.order not in ("last-first", "first-last"):
                raise ConfigurationError(
                    f"lcd.order must be 'last-first', 'first-last' or a list of layers, got {self.order!r}"
                )
        else:
            object.__setattr__(self, "order", tuple(int(x) for x in self.order))

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "max_batch": self.max_batch,
            "n_shots": self.n_shots,
            "flatness_threshold": self.flatness_threshold,
            "order": self.order if isinstance(self.order, str) else list(self.order),
            "passes": self.passes,
            "noise": self.noise.to_dict(),
            "seed": self.seed,
        }


@dataclass
class LcdStep:
    """One coordinate sweep."""

    iteration: int
    layer: int
    coordinate: int
    incumbent: float
    offsets: np.ndarray
    reference_js: np.ndarray
    noisy_js: Optional[np.ndarray]
    adopted_offset: float
    skipped: bool
    best_so_far: float

    @property
    def adopted_value(self) -> float:
        return self.incumbent + self.adopted_offset

    @property
    def reference_variance(self) -> float:
        return float(np.var(self.reference_js))

    def quartiles(self) -> tuple[float, float, float]:
        values = self.noisy_js if self.noisy_js is not None else self.reference_js
        values = values[np.isfinite(values)]
        if values.size == 0:
            return (math.nan,) * 3
        q1, q2, q3 = np.quantile(values, [0.25, 0.5, 0.75])
        return float(q1), float(q2), float(q3)


@dataclass
class LcdResult:
    theta: np.ndarray
    best_theta: np.ndarray
    steps: list[LcdStep]
    grid: np.ndarray

    @property
    def trace_rows(self) -> int:
        return sum(len(s.offsets) for s in self.steps if not s.skipped)


def sweep_grid(config: LcdConfig, num_qubits: int) -> np.ndarray:
    if config.max_batch < num_qubits:
        raise ConfigurationError(
            f"lcd.max_batch ({config.max_batch}) must be at least the qubit count ({num_qubits})"
        )
    n = config.max_batch / num_qubits
    spacing = 2 * config.epsilon / n
    ratio = config.epsilon / spacing
    kmax = int(round(ratio)) if abs(ratio - round(ratio)) < 1e-9 else int(math.floor(ratio))
    return spacing * np.arange(-kmax, kmax + 1)


def grid_spacing(config: LcdConfig, num_qubits: int) -> float:
    return float(np.diff(sweep_grid(config, num_qubits))[0])


def make_backend(
    spec: CircuitSpec,
    noise: Optional[NoiseConfig] = None,
    n_shots: Optional[int] = None,
    seed=None,
    workers: int = 1,
) -> Backend:
    """Simulated device: exact probabilities -> noise channel -> shot sampling."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def run(thetas: np.ndarray) -> np.ndarray:
        return evaluate_batch(spec, thetas, n_shots=n_shots, noise=noise, rng=rng, workers=workers)

    return run


def noisy_loss(spec: CircuitSpec, theta, target, noise: Optional[NoiseConfig]) -> float:
    """JS of the infinite-shot distribution seen through ``noise``."""
    probs = exact_distribution_batch(spec, np.asarray(theta)[None, :])
    if noise is not None:
        probs = apply_noise(probs, noise)
    return float(js_divergence_batch(target, probs)[0])


def _choose(offsets: np.ndarray, losses: np.ndarray) -> Optional[int]:
    ok = np.flatnonzero(np.isfinite(losses))
    if ok.size == 0:
        return None
    best = losses[ok].min()
    tied = ok[losses[ok] == best]
    return int(min(tied, key=lambda i: (abs(offsets[i]), offsets[i])))


def sweep_coordinate(
    spec: CircuitSpec,
    theta: np.ndarray,
    target: np.ndarray,
    coordinate: int,
    grid: np.ndarray,
    config: LcdConfig,
    backend: Backend,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray], Optional[int]]:
    """Evaluate one coordinate's sweep; returns candidates, reference/noisy losses and argmin."""
    candidates = np.repeat(theta[None, :], len(grid), axis=0)
    candidates[:, coordinate] += grid
    reference = js_divergence_batch(target, exact_distribution_batch(spec, candidates, workers=workers))
    if np.var(reference) < config.flatness_threshold:
        return candidates, reference, None, None
    try:
        probs = np.asarray(backend(candidates), dtype=float)
        noisy = js_divergence_batch(target, probs)
        noisy = np.where(np.all(np.isfinite(probs), axis=-1), noisy, np.nan)
    except (ArithmeticError, ValueError, RuntimeError):
        # evaluate point by point so one bad circuit does not sink the sweep
        noisy = np.full(len(grid), np.nan)
        for i, cand in enumerate(candidates):
            try:
                row = np.asarray(backend(cand[None, :]), dtype=float)[0]
            except (ArithmeticError, ValueError, RuntimeError):
                continue
            if np.all(np.isfinite(row)):
                noisy[i] = js_divergence_batch(target, row)
    return candidates, reference, noisy, _choose(grid, noisy)


def layer_order(spec: CircuitSpec, order) -> list[int]:
    n = spec.num_layers + 1
    if order == "last-first":
        return list(range(n - 1, -1, -1))
    if order == "first-last":
        return list(range(n))
    bad = [layer for layer in order if not 0 <= layer < n]
    if bad:
        raise ConfigurationError(f"lcd.order names layers {bad} but the circuit has layers 0..{n - 1}")
    return list(order)


def lcd_iteration(
    spec: CircuitSpec,
    theta,
    target,
    layer: int,
    config: LcdConfig,
    backend: Backend,
    first_iteration: int = 0,
    best_so_far: float = math.inf,
    workers: int = 1,
) -> tuple[np.ndarray, list[LcdStep]]:
    """Sweep every angle of one rotation layer in turn, adopting each minimizer."""
    layers = rotation_layers(spec)
    if not 0 <= layer < len(layers):
        raise ConfigurationError(f"layer {layer} does not exist (circuit has {len(layers)} rotation layers)")
    target = np.asarray(getattr(target, "probabilities", target), dtype=float)
    theta = np.array(theta, dtype=float)
    grid = sweep_grid(config, spec.num_qubits)
    steps = []
    for i, k in enumerate(layers[layer]):
        k = int(k)
        incumbent = float(theta[k])
        _, reference, noisy, choice = sweep_coordinate(spec, theta, target, k, grid, config, backend, workers)
        skipped = noisy is None or choice is None
        offset = 0.0 if skipped else float(grid[choice])
        if not skipped:
            theta[k] = incumbent + offset
            best_so_far = min(best_so_far, float(noisy[choice]))
        steps.append(
            LcdStep(
                iteration=first_iteration + i,
                layer=layer,
                coordinate=k,
                incumbent=incumbent,
                offsets=grid,
                reference_js=reference,
                noisy_js=noisy,
                adopted_offset=offset,
                skipped=skipped,
                best_so_far=best_so_far,
            )
        )
    return theta, steps


def run_lcd(
    spec: CircuitSpec,
    theta0,
    target,
    config: LcdConfig,
    backend: Optional[Backend] = None,
    workers: int = 1,
) -> LcdResult:
    target = np.asarray(getattr(target, "probabilities", target), dtype=float)
    if backend is None:
        backend = make_backend(spec, config.noise, config.n_shots, seed=config.seed, workers=workers)
    theta = np.array(theta0, dtype=float)
    best_theta, best = theta.copy(), math.inf
    steps: list[LcdStep] = []
    for _ in range(config.passes):
        for layer in layer_order(spec, config.order):
            start = theta
            theta, new_steps = lcd_iteration(
                spec, theta, target, layer, config, backend,
                first_iteration=len(steps), best_so_far=best, workers=workers,
            )
            replay = start.copy()
            for step in new_steps:
                if step.skipped:
                    continue
                replay[step.coordinate] = step.adopted_value
                if step.best_so_far < best:
                    best, best_theta = step.best_so_far, replay.copy()
            steps.extend(new_steps)
    return LcdResult(theta, best_theta, steps, sweep_grid(config, spec.num_qubits))


TRACE_HEADER = ["iteration", "layer", "coordinate", "offset", "value", "noisy_js", "reference_js", "adopted"]
SUMMARY_HEADER = [
    "iteration", "layer", "coordinate", "skipped", "reference_variance",
    "adopted_offset", "q1", "median", "q3", "best_so_far",
]


def write_trace_csv(path, result: LcdResult) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for step in result.steps:
            if step.skipped:
                continue
            for off, noisy, ref in zip(step.offsets, step.noisy_js, step.reference_js):
                writer.writerow([
                    step.iteration, step.layer, step.coordinate, repr(float(off)),
                    repr(step.incumbent + float(off)), repr(float(noisy)), repr(float(ref)),
                    int(off == step.adopted_offset),
                ])


def write_summary_csv(path, result: LcdResult) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for step in result.steps:
            q1, q2, q3 = step.quartiles()
            writer.writerow([
                step.iteration, step.layer, step.coordinate, int(step.skipped),
                repr(step.reference_variance), repr(step.adopted_offset),
                repr(q1), repr(q2), repr(q3), repr(step.best_so_far),
            ])
