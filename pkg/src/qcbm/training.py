"""Gradient training of the Born machine.

Loss is the base-2 Jensen-Shannon divergence between target and model
distributions.  Its gradient is chained through parameter-shift Jacobian
columns ``[P(theta_k + pi/2) - P(theta_k - pi/2)] / 2`` and applied with Adam.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .ansatz import PARAMETER_LAYOUT, CircuitSpec, evaluate_batch, parameter_count
from .encoding import BinningScheme
from .simulator import ConfigurationError

CHECKPOINT_FORMAT = "qcbm-checkpoint"
CHECKPOINT_VERSION = 1
SHIFT = np.pi / 2


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.01
    max_steps: int = 300
    n_shots: Optional[int] = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    eps_prob: float = 1e-12
    init: str = "uniform"
    seed: int = 0
    checkpoint_every: Optional[int] = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError(f"training.learning_rate must be > 0, got {self.learning_rate}")
        if self.max_steps < 1:
            raise ConfigurationError(f"training.max_steps must be >= 1, got {self.max_steps}")
        if self.n_shots is not None and self.n_shots < 1:
            raise ConfigurationError(f"training.n_shots must be >= 1, got {self.n_shots}")
        if not self.eps_prob > 0:
            raise ConfigurationError(f"training.eps_prob must be > 0, got {self.eps_prob}")
        if self.init not in ("uniform", "zeros"):
            raise ConfigurationError(f"training.init must be 'uniform' or 'zeros', got {self.init!r}")
        if self.checkpoint_every is not None and self.checkpoint_every < 1:
            raise ConfigurationError("training.checkpoint_every must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainingState:
    theta: np.ndarray
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    loss_history: list = field(default_factory=list)
    rng_state: Optional[dict] = None

    @classmethod
    def fresh(cls, theta) -> "TrainingState":
        theta = np.array(theta, dtype=float)
        return cls(theta, np.zeros_like(theta), np.zeros_like(theta))


# --- loss ----------------------------------------------------------------

def _check_pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"distributions have different supports: {p.shape} vs {q.shape}")
    for name, d in (("target", p), ("model", q)):
        if np.any(d < 0) or abs(d.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} distribution must be non-negative and sum to 1")
    return p, q


def js_divergence_batch(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """JS divergence (bits) of ``p`` against each row of ``q``; no validation."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m = 0.5 * (p + q)
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = np.where(p > 0, p * np.log2(p / m), 0.0)
        tq = np.where(q > 0, q * np.log2(q / m), 0.0)
    js = 0.5 * (tp + tq).sum(axis=-1)
    return np.clip(js, 0.0, 1.0)


def js_divergence(p, q) -> float:
    p, q = _check_pair(p, q)
    return float(js_divergence_batch(p, q))


def js_gradient_wrt_model(p, q, eps_prob: float = 1e-12) -> np.ndarray:
    """d JS / d q_x = 0.5 * log2(q_x / m_x), probabilities clamped at ``eps_prob``."""
    p, q = _check_pair(p, q)
    m = 0.5 * (p + q)
    return 0.5 * np.log2(np.maximum(q, eps_prob) / np.maximum(m, eps_prob))


# --- gradients -----------------------------------------------------------

def _rng(seed) -> Optional[np.random.Generator]:
    if seed is None or isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def shifted_batch(theta: np.ndarray, indices=None) -> np.ndarray:
    """Rows theta + SHIFT*e_k for each k, followed by rows theta - SHIFT*e_k."""
    theta = np.asarray(theta, dtype=float)
    indices = np.arange(theta.size) if indices is None else np.asarray(indices)
    plus = np.repeat(theta[None, :], len(indices), axis=0)
    minus = plus.copy()
    rows = np.arange(len(indices))
    plus[rows, indices] += SHIFT
    minus[rows, indices] -= SHIFT
    return np.concatenate([plus, minus])


def probability_jacobian(
    spec: CircuitSpec, theta, n_shots: Optional[int] = None, seed=None, workers: int = 1, indices=None
) -> np.ndarray:
    """Parameter-shift Jacobian, shape (n_params, 2**Q); row k is dP/dtheta_k."""
    batch = shifted_batch(theta, indices)
    probs = evaluate_batch(spec, batch, n_shots=n_shots, rng=_rng(seed), workers=workers)
    half = len(batch) // 2
    return 0.5 * (probs[:half] - probs[half:])


def probability_jacobian_column(spec: CircuitSpec, theta, k: int, n_shots: Optional[int] = None, seed=None) -> np.ndarray:
    if not 0 <= k < parameter_count(spec):
        raise IndexError(f"parameter index {k} out of range")
    return probability_jacobian(spec, theta, n_shots=n_shots, seed=seed, indices=[k])[0]


def loss_and_gradient(
    spec: CircuitSpec,
    theta,
    target,
    n_shots: Optional[int] = None,
    seed=None,
    eps_prob: float = 1e-12,
    workers: int = 1,
) -> tuple[float, np.ndarray, np.ndarray]:
    """JS loss, its parameter gradient and the model distribution at ``theta``.

    Uses one batch of 1 + 2*n_params circuit evaluations; in shot mode each
    evaluation draws its own fresh samples.  In shot mode the gradient clamp
    is raised to ``1/n_shots``: an empty bin only says the probability is
    below the histogram's resolution, and clamping it at 1e-12 produces
    log-ratios that swamp the gradient.
    """
    theta = np.asarray(theta, dtype=float)
    batch = np.concatenate([theta[None, :], shifted_batch(theta)])
    probs = evaluate_batch(spec, batch, n_shots=n_shots, rng=_rng(seed), workers=workers)
    model = probs[0]
    half = theta.size
    jac = 0.5 * (probs[1 : 1 + half] - probs[1 + half :])
    loss = js_divergence(target, model)
    if n_shots is not None:
        eps_prob = max(eps_prob, 1.0 / n_shots)
    dloss = js_gradient_wrt_model(target, model, eps_prob)
    return loss, jac @ dloss, model


def loss_gradient(spec: CircuitSpec, theta, target, n_shots: Optional[int] = None, seed=None, eps_prob: float = 1e-12) -> np.ndarray:
    return loss_and_gradient(spec, theta, target, n_shots=n_shots, seed=seed, eps_prob=eps_prob)[1]


def exact_loss(spec: CircuitSpec, theta, target) -> float:
    return js_divergence(target, evaluate_batch(spec, np.asarray(theta)[None, :])[0])


# --- optimizer -----------------------------------------------------------

def adam_step(state: TrainingState, grad, config: TrainingConfig) -> TrainingState:
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.theta.shape:
        raise ValueError("gradient and parameter vector lengths differ")
    t = state.step + 1
    m = config.beta1 * state.m + (1 - config.beta1) * grad
    v = config.beta2 * state.v + (1 - config.beta2) * grad**2
    m_hat = m / (1 - config.beta1**t)
    v_hat = v / (1 - config.beta2**t)
    theta = state.theta - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps_adam)
    return replace(state, theta=theta, m=m, v=v, step=t, loss_history=list(state.loss_history))


def initial_parameters(spec: CircuitSpec, init: str, rng: np.random.Generator) -> np.ndarray:
    n = parameter_count(spec)
    if init == "zeros":
        return np.zeros(n)
    if init == "uniform":
        return rng.uniform(-np.pi, np.pi, size=n)
    raise ConfigurationError(f"unknown initialization {init!r}")


def train(
    spec: CircuitSpec,
    target,
    config: TrainingConfig,
    theta0=None,
    checkpoint_path=None,
    workers: int = 1,
    callback: Optional[Callable[[TrainingState, float], None]] = None,
    checkpoint_extra: Optional[dict] = None,
) -> TrainingState:
    """Run ``config.max_steps`` Adam iterations on the JS loss.

    ``loss_history[i]`` is the loss measured at the start of step ``i``.
    """
    target = np.asarray(getattr(target, "probabilities", target), dtype=float)
    if target.shape != (2**spec.num_qubits,):
        raise ConfigurationError(
            f"target has {target.size} entries, circuit produces {2**spec.num_qubits}"
        )
    init_seq, shot_seq = np.random.SeedSequence(config.seed).spawn(2)
    if theta0 is None:
        theta0 = initial_parameters(spec, config.init, np.random.default_rng(init_seq))
    state = TrainingState.fresh(theta0)
    if state.theta.size != parameter_count(spec):
        raise ConfigurationError(
            f"initial parameters have length {state.theta.size}, circuit expects {parameter_count(spec)}"
        )
    rng = np.random.default_rng(shot_seq)
    for _ in range(config.max_steps):
        loss, grad, _ = loss_and_gradient(
            spec, state.theta, target, n_shots=config.n_shots, seed=rng,
            eps_prob=config.eps_prob, workers=workers,
        )
        if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
            raise TrainingError(
                f"non-finite loss or gradient at step {state.step} (loss={loss!r}, "
                f"max |theta|={np.max(np.abs(state.theta)):.3g})"
            )
        history = state.loss_history + [loss]
        state = adam_step(state, grad, config)
        state.loss_history = history
        state.rng_state = rng.bit_generator.state
        if callback is not None:
            callback(state, loss)
        if checkpoint_path and config.checkpoint_every and state.step % config.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, spec, state, config, **(checkpoint_extra or {}))
    if checkpoint_path:
        save_checkpoint(checkpoint_path, spec, state, config, **(checkpoint_extra or {}))
    return state


# --- persistence ---------------------------------------------------------

@dataclass
class Checkpoint:
    spec: CircuitSpec
    state: TrainingState
    config: Optional[TrainingConfig] = None
    scheme: Optional[BinningScheme] = None
    target: Optional[np.ndarray] = None


def save_checkpoint(
    path,
    spec: CircuitSpec,
    state: TrainingState,
    config: Optional[TrainingConfig] = None,
    scheme: Optional[BinningScheme] = None,
    target=None,
) -> None:
    record = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "parameter_layout": PARAMETER_LAYOUT,
        "rotation_convention": "RZ(omega) then RY(theta) then RZ(phi)",
        "spec": spec.to_dict(),
        "step": state.step,
        "theta": state.theta.tolist(),
        "adam_m": state.m.tolist(),
        "adam_v": state.v.tolist(),
        "loss_history": [float(x) for x in state.loss_history],
        "rng_state": state.rng_state,
        "training": config.to_dict() if config is not None else None,
        "scheme": scheme.to_dict() if scheme is not None else None,
        "target": np.asarray(target, dtype=float).tolist() if target is not None else None,
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(record, indent=1))
    tmp.replace(path)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint {path} does not exist")
    record = json.loads(path.read_text())
    if record.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a checkpoint file")
    if record.get("version") != CHECKPOINT_VERSION or record.get("parameter_layout") != PARAMETER_LAYOUT:
        raise ValueError(
            f"{path}: unsupported checkpoint version {record.get('version')} / layout "
            f"{record.get('parameter_layout')}"
        )
    spec = CircuitSpec.from_dict(record["spec"])
    state = TrainingState(
        theta=np.array(record["theta"], dtype=float),
        m=np.array(record["adam_m"], dtype=float),
        v=np.array(record["adam_v"], dtype=float),
        step=record["step"],
        loss_history=list(record["loss_history"]),
        rng_state=record.get("rng_state"),
    )
    if state.theta.size != parameter_count(spec):
        raise ValueError(f"{path}: parameter vector does not match the stored circuit")
    config = TrainingConfig(**record["training"]) if record.get("training") else None
    scheme = BinningScheme.from_dict(record["scheme"]) if record.get("scheme") else None
    target = np.array(record["target"], dtype=float) if record.get("target") is not None else None
    return Checkpoint(spec, state, config, scheme, target)


def write_loss_csv(path, loss_history) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "js"])
        for i, value in enumerate(loss_history):
            writer.writerow([i, repr(float(value))])


class StepTimer:
    """Callback recording wall-clock seconds since training started, per step."""

    def __init__(self):
        self.start = time.perf_counter()
        self.elapsed: list[float] = []

    def __call__(self, state, loss):
        self.elapsed.append(time.perf_counter() - self.start)
