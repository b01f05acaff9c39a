"""Dense statevector engine.

Bit ordering: qubit 0 is the most significant bit of the basis-state index,
so it is also the leftmost character of a bitstring.

The single-qubit rotation ``Rot(omega, theta, phi)`` applies RZ(omega), then
RY(theta), then RZ(phi); its matrix is ``RZ(phi) @ RY(theta) @ RZ(omega)``.
Saved parameter vectors depend on this convention.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np


class ConfigurationError(ValueError):
    """Raised for invalid user-facing configuration values."""


class InitialState(str, enum.Enum):
    ALL_ZERO = "all_zero"
    BELL = "bell"
    GHZ = "ghz"
    ALL_PLUS = "all_plus"


@dataclass(frozen=True)
class Rot:
    target: int
    omega: float
    theta: float
    phi: float


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int


@dataclass(frozen=True)
class H:
    target: int


GateOp = Union[Rot, CNOT, H]


@dataclass
class Statevector:
    amplitudes: np.ndarray
    num_qubits: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2**self.num_qubits,):
            raise ValueError(
                f"expected {2**self.num_qubits} amplitudes for {self.num_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass
class ShotHistogram:
    """Measurement counts stored densely, indexed by basis state."""

    counts: np.ndarray
    num_qubits: int
    total_shots: int = field(init=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (2**self.num_qubits,):
            raise ValueError("counts must have length 2**num_qubits")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        self.total_shots = int(self.counts.sum())

    def frequencies(self) -> np.ndarray:
        return self.counts / self.total_shots

    def to_dict(self) -> dict[str, int]:
        return {
            index_to_bitstring(i, self.num_qubits): int(c)
            for i, c in enumerate(self.counts)
            if c
        }

    @classmethod
    def from_dict(cls, counts: dict[str, int], num_qubits: int) -> "ShotHistogram":
        dense = np.zeros(2**num_qubits, dtype=np.int64)
        for key, value in counts.items():
            dense[bitstring_to_index(key, num_qubits)] += value
        return cls(dense, num_qubits)


@dataclass(frozen=True)
class NoiseConfig:
    """Readout confusion per qubit plus a global depolarizing mixture.

    ``p01`` is the probability of reading 1 when the qubit is 0, ``p10`` the
    reverse. Either may be a scalar (shared by all qubits) or one value per
    qubit.
    """

    p01: Union[float, tuple[float, ...]] = 0.0
    p10: Union[float, tuple[float, ...]] = 0.0
    depolarizing: float = 0.0

    def __post_init__(self):
        for name in ("p01", "p10"):
            value = getattr(self, name)
            if not np.isscalar(value):
                object.__setattr__(self, name, tuple(float(v) for v in value))
            values = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(~np.isfinite(values)) or np.any(values < 0) or np.any(values > 1):
                raise ConfigurationError(f"noise.{name} must lie in [0, 1], got {value!r}")
        lam = self.depolarizing
        if not (np.isfinite(lam) and 0.0 <= lam <= 1.0):
            raise ConfigurationError(f"noise.depolarizing must lie in [0, 1], got {lam!r}")

    def flips(self, num_qubits: int) -> tuple[np.ndarray, np.ndarray]:
        p01 = np.broadcast_to(np.asarray(self.p01, dtype=float), (num_qubits,))
        p10 = np.broadcast_to(np.asarray(self.p10, dtype=float), (num_qubits,))
        return p01, p10

    @property
    def is_trivial(self) -> bool:
        return (
            self.depolarizing == 0.0
            and not np.any(np.asarray(self.p01))
            and not np.any(np.asarray(self.p10))
        )

    def to_dict(self) -> dict:
        as_plain = lambda v: list(v) if isinstance(v, tuple) else v  # noqa: E731
        return {"p01": as_plain(self.p01), "p10": as_plain(self.p10), "depolarizing": self.depolarizing}


def index_to_bitstring(index: int, num_qubits: int) -> str:
    return format(index, f"0{num_qubits}b")


def bitstring_to_index(bits: str, num_qubits: int) -> int:
    if len(bits) != num_qubits or set(bits) - {"0", "1"}:
        raise ValueError(f"malformed {num_qubits}-qubit bitstring {bits!r}")
    return int(bits, 2)


def distribution_to_dict(probs: np.ndarray, num_qubits: int, keep_zeros: bool = False) -> dict[str, float]:
    return {
        index_to_bitstring(i, num_qubits): float(p)
        for i, p in enumerate(probs)
        if keep_zeros or p
    }


# --- gate matrices -------------------------------------------------------

_HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)


def rot_matrix(omega, theta, phi) -> np.ndarray:
    """Matrix of Rot for scalar or array angles; arrays give shape (..., 2, 2)."""
    omega, theta, phi = np.broadcast_arrays(
        np.asarray(omega, dtype=float), np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)
    )
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    plus = np.exp(-0.5j * (phi + omega))
    minus = np.exp(-0.5j * (phi - omega))
    out = np.empty(omega.shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = plus * c
    out[..., 0, 1] = -minus * s
    out[..., 1, 0] = np.conj(minus) * s
    out[..., 1, 1] = np.conj(plus) * c
    return out


@lru_cache(maxsize=None)
def _cnot_permutation(num_qubits: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2**num_qubits)
    cbit = 1 << (num_qubits - 1 - control)
    tbit = 1 << (num_qubits - 1 - target)
    perm = np.where(idx & cbit, idx ^ tbit, idx)
    perm.setflags(write=False)
    return perm


def _check_qubit(q: int, num_qubits: int) -> None:
    if not 0 <= q < num_qubits:
        raise IndexError(f"qubit index {q} out of range for {num_qubits} qubits")


def apply_single_qubit(amps: np.ndarray, matrix: np.ndarray, target: int, num_qubits: int) -> np.ndarray:
    """Apply a 2x2 matrix on ``target`` to states of shape (B, 2**Q).

    ``matrix`` is either (2, 2) or batched (B, 2, 2).
    """
    batch = amps.shape[0]
    psi = amps.reshape(batch, 2**target, 2, 2 ** (num_qubits - target - 1))
    if matrix.ndim == 3:
        out = matrix[:, None] @ psi
    else:
        out = matrix @ psi
    return out.reshape(batch, -1)


def apply_cnot(amps: np.ndarray, control: int, target: int, num_qubits: int) -> np.ndarray:
    return amps[:, _cnot_permutation(num_qubits, control, target)]


def apply_gate(state: Statevector, gate: GateOp) -> Statevector:
    """Return a new statevector with ``gate`` applied."""
    n = state.num_qubits
    amps = state.amplitudes[None, :]
    if isinstance(gate, Rot):
        _check_qubit(gate.target, n)
        amps = apply_single_qubit(amps, rot_matrix(gate.omega, gate.theta, gate.phi), gate.target, n)
    elif isinstance(gate, H):
        _check_qubit(gate.target, n)
        amps = apply_single_qubit(amps, _HADAMARD, gate.target, n)
    elif isinstance(gate, CNOT):
        _check_qubit(gate.control, n)
        _check_qubit(gate.target, n)
        if gate.control == gate.target:
            raise ValueError("CNOT control and target must differ")
        amps = apply_cnot(amps, gate.control, gate.target, n)
    else:
        raise TypeError(f"unknown gate {gate!r}")
    return Statevector(amps[0], n)


# --- initial states ------------------------------------------------------

def _group_state(size: int) -> np.ndarray:
    # (|0...0> + |1...1>)/sqrt(2) on `size` qubits
    v = np.zeros(2**size, dtype=np.complex128)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return v


def prepare_initial(tag: Union[InitialState, str], num_qubits: int) -> Statevector:
    tag = InitialState(tag)
    if num_qubits < 1:
        raise ConfigurationError(f"need at least one qubit, got {num_qubits}")
    if tag is InitialState.ALL_ZERO:
        amps = np.zeros(2**num_qubits, dtype=np.complex128)
        amps[0] = 1.0
    elif tag is InitialState.ALL_PLUS:
        amps = np.full(2**num_qubits, 2 ** (-num_qubits / 2), dtype=np.complex128)
    else:
        size = 2 if tag is InitialState.BELL else 3
        if num_qubits % size:
            raise ConfigurationError(
                f"initial state {tag.value!r} needs a qubit count divisible by {size}, got {num_qubits}"
            )
        block = _group_state(size)
        amps = np.ones(1, dtype=np.complex128)
        for _ in range(num_qubits // size):
            amps = np.kron(amps, block)
    return Statevector(amps, num_qubits)


def exact_probabilities(state: Statevector) -> np.ndarray:
    """Born probabilities indexed by basis state (qubit 0 = leftmost bit)."""
    return np.abs(state.amplitudes) ** 2


# --- sampling and noise --------------------------------------------------

def _clean(probs: np.ndarray) -> np.ndarray:
    p = np.clip(probs, 0.0, None)
    return p / p.sum(axis=-1, keepdims=True)


def draw_counts(probs: np.ndarray, n_shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial counts for one distribution or a batch of shape (B, K)."""
    if n_shots < 1:
        raise ConfigurationError(f"n_shots must be >= 1, got {n_shots}")
    return rng.multinomial(n_shots, _clean(np.asarray(probs, dtype=float)))


def sample_shots(state: Statevector, n_shots: int, seed=None) -> ShotHistogram:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = draw_counts(exact_probabilities(state), n_shots, rng)
    return ShotHistogram(counts, state.num_qubits)


def apply_noise(probs: np.ndarray, noise: NoiseConfig) -> np.ndarray:
    """Push distributions of shape (..., 2**Q) through the readout/depolarizing channel."""
    probs = np.asarray(probs, dtype=float)
    num_qubits = int(np.log2(probs.shape[-1]))
    if 2**num_qubits != probs.shape[-1]:
        raise ValueError("distribution length must be a power of two")
    lead = probs.shape[:-1]
    p01, p10 = noise.flips(num_qubits)
    out = probs.reshape(lead + (2,) * num_qubits)
    for q in range(num_qubits):
        if p01[q] == 0.0 and p10[q] == 0.0:
            continue
        # columns: true value, rows: read value
        confusion = np.array([[1 - p01[q], p10[q]], [p01[q], 1 - p10[q]]])
        out = np.moveaxis(np.tensordot(confusion, out, axes=([1], [len(lead) + q])), 0, len(lead) + q)
    out = out.reshape(probs.shape)
    lam = noise.depolarizing
    if lam:
        out = (1 - lam) * out + lam / probs.shape[-1]
    return out


def run_program(
    initial: np.ndarray,
    program: Sequence[tuple],
    thetas: np.ndarray,
    num_qubits: int,
) -> np.ndarray:
    """Simulate a parameterized program for a batch of parameter vectors.

    ``program`` entries are ``("rot", qubit, offset)`` with the three angles at
    ``thetas[:, offset:offset + 3]``, ``("cnot", control, target)`` or
    ``("h", qubit)``. Returns amplitudes of shape (B, 2**Q).
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    batch = thetas.shape[0]
    amps = np.broadcast_to(initial, (batch, initial.shape[0])).copy()
    for op in program:
        kind = op[0]
        if kind == "rot":
            _, q, k = op
            mats = rot_matrix(thetas[:, k], thetas[:, k + 1], thetas[:, k + 2])
            amps = apply_single_qubit(amps, mats, q, num_qubits)
        elif kind == "cnot":
            amps = apply_cnot(amps, op[1], op[2], num_qubits)
        elif kind == "h":
            amps = apply_single_qubit(amps, _HADAMARD, op[1], num_qubits)
        else:
            raise ValueError(f"unknown program op {op!r}")
    return amps
