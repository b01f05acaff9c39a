"""Layered circuit templates.

Two templates share a parameter layout of layer-major, then qubit-major, then
(omega, theta, phi) order:

* ``brick`` (Ansatz 1): every layer has two brick sub-layers.  Sub-layer A
  rotates every qubit and entangles pairs (0,1), (2,3), ...; sub-layer B
  rotates the qubits of the offset pairs (1,2), (3,4), ... and entangles them.
  This gives 2Q-2 rotations per layer for even Q and 2Q-1 for odd Q.
* ``tree`` (Ansatz 2): every layer rotates all qubits, then entangles each
  block of ``block_size`` qubits with a CNOT star rooted at the block's first
  qubit.  Blocks never interact.

Both close with a final rotation layer on every qubit.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .simulator import (
    CNOT,
    ConfigurationError,
    GateOp,
    InitialState,
    NoiseConfig,
    Rot,
    apply_noise,
    draw_counts,
    prepare_initial,
    run_program,
)

PARAMETER_LAYOUT = "layer-qubit-angle/v1"


class AnsatzKind(str, enum.Enum):
    BRICK = "brick"
    TREE = "tree"


@dataclass(frozen=True)
class CircuitSpec:
    kind: AnsatzKind
    num_qubits: int
    num_layers: int
    initial_state: InitialState = InitialState.ALL_ZERO
    block_size: int = 4

    def __post_init__(self):
        object.__setattr__(self, "kind", AnsatzKind(self.kind))
        object.__setattr__(self, "initial_state", InitialState(self.initial_state))
        if self.num_qubits < 1:
            raise ConfigurationError(f"circuit.num_qubits must be >= 1, got {self.num_qubits}")
        if self.num_layers < 1:
            raise ConfigurationError(f"circuit.num_layers must be >= 1, got {self.num_layers}")
        if self.kind is AnsatzKind.TREE:
            if self.block_size < 1 or self.num_qubits % self.block_size:
                raise ConfigurationError(
                    f"tree ansatz needs num_qubits ({self.num_qubits}) divisible by "
                    f"block_size ({self.block_size})"
                )
        # fails early on Bell/GHZ divisibility
        if self.initial_state in (InitialState.BELL, InitialState.GHZ):
            size = 2 if self.initial_state is InitialState.BELL else 3
            if self.num_qubits % size:
                raise ConfigurationError(
                    f"initial state {self.initial_state.value!r} needs a qubit count "
                    f"divisible by {size}, got {self.num_qubits}"
                )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["initial_state"] = self.initial_state.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitSpec":
        return cls(**d)


def parameter_count(spec: CircuitSpec) -> int:
    q, d = spec.num_qubits, spec.num_layers
    if spec.kind is AnsatzKind.BRICK:
        per_layer = 2 * q - 1 if q % 2 else 2 * q - 2
        return 3 * d * per_layer + 3 * q
    return 3 * (d + 1) * q


def _brick_layer(q: int) -> tuple[list[int], list[tuple[int, int]], list[int], list[tuple[int, int]]]:
    pairs_a = [(i, i + 1) for i in range(0, q - 1, 2)]
    pairs_b = [(i, i + 1) for i in range(1, q - 1, 2)]
    rot_b = [k for pair in pairs_b for k in pair]
    return list(range(q)), pairs_a, rot_b, pairs_b


@lru_cache(maxsize=None)
def circuit_template(spec: CircuitSpec) -> tuple[tuple, ...]:
    """Parameterized program consumed by :func:`qcbm.simulator.run_program`."""
    q = spec.num_qubits
    ops: list[tuple] = []
    offset = 0

    def rotate(qubits):
        nonlocal offset
        for i in qubits:
            ops.append(("rot", i, offset))
            offset += 3

    for _ in range(spec.num_layers):
        if spec.kind is AnsatzKind.BRICK:
            rot_a, pairs_a, rot_b, pairs_b = _brick_layer(q)
            rotate(rot_a)
            ops.extend(("cnot", c, t) for c, t in pairs_a)
            rotate(rot_b)
            ops.extend(("cnot", c, t) for c, t in pairs_b)
        else:
            rotate(range(q))
            for start in range(0, q, spec.block_size):
                ops.extend(("cnot", start, t) for t in range(start + 1, start + spec.block_size))
    rotate(range(q))
    assert offset == parameter_count(spec)
    return tuple(ops)


def rotation_layers(spec: CircuitSpec) -> list[np.ndarray]:
    """Parameter indices of each rotation layer, first layer first.

    The last entry is the final rotation layer next to the measurement.
    """
    layers = []
    start = 0
    per_layer = (parameter_count(spec) - 3 * spec.num_qubits) // spec.num_layers
    for _ in range(spec.num_layers):
        layers.append(np.arange(start, start + per_layer))
        start += per_layer
    layers.append(np.arange(start, start + 3 * spec.num_qubits))
    return layers


def _check_theta(spec: CircuitSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    expected = parameter_count(spec)
    if theta.shape[-1] != expected:
        raise ConfigurationError(
            f"parameter vector has length {theta.shape[-1]}, circuit expects {expected}"
        )
    if not np.all(np.isfinite(theta)):
        raise ConfigurationError("parameter vector contains non-finite angles")
    return theta


def build_circuit(spec: CircuitSpec, theta) -> list[GateOp]:
    theta = _check_theta(spec, theta)
    gates: list[GateOp] = []
    for op in circuit_template(spec):
        if op[0] == "rot":
            _, q, k = op
            gates.append(Rot(q, *map(float, theta[k : k + 3])))
        else:
            gates.append(CNOT(op[1], op[2]))
    return gates


def exact_distribution_batch(spec: CircuitSpec, thetas, workers: int = 1) -> np.ndarray:
    """Exact Born distributions for a batch of parameter vectors, shape (B, 2**Q)."""
    thetas = np.atleast_2d(_check_theta(spec, thetas))
    initial = prepare_initial(spec.initial_state, spec.num_qubits).amplitudes
    program = circuit_template(spec)

    def run(chunk):
        return np.abs(run_program(initial, program, chunk, spec.num_qubits)) ** 2

    if workers <= 1 or len(thetas) < 2 * workers:
        return run(thetas)
    chunks = np.array_split(thetas, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.concatenate(list(pool.map(run, chunks)))


def evaluate_batch(
    spec: CircuitSpec,
    thetas,
    n_shots: Optional[int] = None,
    noise: Optional[NoiseConfig] = None,
    rng: Optional[np.random.Generator] = None,
    workers: int = 1,
) -> np.ndarray:
    """Model distributions for a batch of parameter vectors.

    Exact probabilities, optionally pushed through ``noise``; when ``n_shots``
    is given every row is replaced by the empirical frequencies of a fresh
    multinomial draw.
    """
    probs = exact_distribution_batch(spec, thetas, workers=workers)
    if noise is not None and not noise.is_trivial:
        probs = apply_noise(probs, noise)
    if n_shots is not None:
        if rng is None:
            raise ValueError("shot sampling needs an explicit random generator")
        probs = draw_counts(probs, n_shots, rng) / n_shots
    return probs


def evaluate(
    spec: CircuitSpec,
    theta,
    n_shots: Optional[int] = None,
    noise: Optional[NoiseConfig] = None,
    seed: Union[int, np.random.Generator, None] = None,
) -> np.ndarray:
    """Model distribution over the 2**Q basis states for one parameter vector."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return evaluate_batch(spec, np.asarray(theta)[None, :], n_shots, noise, rng)[0]
