"""Thermal noise for transmon qutrits (and qubits).

A wire exposed for time ``T`` suffers amplitude damping followed by
dephasing, with ``1 - p_damp = exp(-T/T1)`` and ``1 - 2 p_phase = exp(-T/T2)``
per manifold.  Gates are promoted to superoperators ``noise o (V . V^dag)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from functools import lru_cache, reduce
from typing import Sequence

import numpy as np

from .circuit import Op, QuditCircuit
from .gates import Gate, sx01, x01

COMPLETENESS_ATOL = 1e-12


@dataclass(frozen=True)
class NoiseParams:
    """Coherence times in microseconds, gate times in nanoseconds.

    ``noise_rate`` divides all coherence times (1.0 = device values, 0 turns
    noise off).  ``dd_strength`` moves the idle-wire T2 linearly from the
    measured value (0) to ``2 * T1`` (1).
    """

    T1_01: float = 100.0
    T1_12: float = 100.0
    T2_01: float = 75.0
    T2_12: float = 75.0
    gate_time_1q: float = 40.0
    gate_time_2q: float = 500.0
    noise_rate: float = 1.0
    dd_strength: float = 0.0

    def __post_init__(self):
        for name in ("T1_01", "T1_12", "T2_01", "T2_12"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.gate_time_1q < 0 or self.gate_time_2q < 0:
            raise ValueError("gate times must be non-negative")
        if self.noise_rate < 0:
            raise ValueError("noise_rate must be non-negative")
        if not 0.0 <= self.dd_strength <= 1.0:
            raise ValueError("dd_strength must lie in [0, 1]")
        if self.T2_01 > 2 * self.T1_01 or self.T2_12 > 2 * self.T1_12:
            raise ValueError("T2 cannot exceed 2 * T1")

    def t2_eff(self, manifold: str = "01", idle: bool = True) -> float:
        t1 = self.T1_01 if manifold == "01" else self.T1_12
        t2 = self.T2_01 if manifold == "01" else self.T2_12
        if not idle:
            return t2
        return t2 + self.dd_strength * (2 * t1 - t2)

    def duration(self, gate: Gate) -> float:
        """Gate duration in ns; virtual gates take no time."""
        if gate.is_virtual:
            return 0.0
        return gate.n_entanglers * self.gate_time_2q + gate.n_pulses * self.gate_time_1q

    def with_(self, **kw) -> NoiseParams:
        return replace(self, **kw)


NOISELESS = NoiseParams(noise_rate=0.0)


@dataclass(frozen=True)
class NoiseChannel:
    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "kraus", tuple(np.asarray(k, dtype=complex) for k in self.kraus))

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    def completeness_error(self) -> float:
        s = sum(k.conj().T @ k for k in self.kraus)
        return float(np.max(np.abs(s - np.eye(self.dim))))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def then(self, other: NoiseChannel) -> NoiseChannel:
        """Channel ``other o self`` (self first)."""
        return NoiseChannel(tuple(b @ a for b in other.kraus for a in self.kraus))

    def superop(self) -> np.ndarray:
        """Row-major superoperator: vec(K rho K^dag) = (K kron conj(K)) vec(rho)."""
        return sum(np.kron(k, k.conj()) for k in self.kraus)


def _check_prob(name, p):
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"{name}={p} outside [0, 1]")


def amp_damp_channel(p01: float, p12: float = 0.0, dim: int = 3) -> NoiseChannel:
    """Relaxation 1->0 with probability p01 and 2->1 with probability p12."""
    _check_prob("p01", p01)
    _check_prob("p12", p12)
    if dim == 2:
        k0 = np.diag([1.0, np.sqrt(1 - p01)])
        k1 = np.zeros((2, 2))
        k1[0, 1] = np.sqrt(p01)
        return NoiseChannel((k0, k1))
    k0 = np.diag([1.0, np.sqrt(1 - p01), np.sqrt(1 - p12)])
    k1 = np.zeros((3, 3))
    k1[0, 1] = np.sqrt(p01)
    k2 = np.zeros((3, 3))
    k2[1, 2] = np.sqrt(p12)
    return NoiseChannel((k0, k1, k2))


Z01 = np.diag([1.0, -1.0, 1.0])
Z12 = np.diag([1.0, 1.0, -1.0])


def dephasing_channel(p01: float, p12: float = 0.0, dim: int = 3) -> NoiseChannel:
    _check_prob("p01", p01)
    _check_prob("p12", p12)
    if p01 + p12 > 1.0 + 1e-15:
        raise ValueError("p01 + p12 must not exceed 1")
    if dim == 2:
        return NoiseChannel((np.sqrt(p01) * np.diag([1.0, -1.0]), np.sqrt(1 - p01) * np.eye(2)))
    rest = max(0.0, 1.0 - p01 - p12)
    return NoiseChannel((np.sqrt(p01) * Z01, np.sqrt(p12) * Z12, np.sqrt(rest) * np.eye(3)))


def params_to_probs(params: NoiseParams, duration: float, idle: bool = False) -> tuple[float, float, float, float]:
    """(p_damp_01, p_damp_12, p_phase_01, p_phase_12) for ``duration`` ns."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if duration == 0 or params.noise_rate == 0:
        return 0.0, 0.0, 0.0, 0.0
    t = duration * 1e-3 * params.noise_rate  # ns -> us, rate shortens coherence times
    pd01 = -np.expm1(-t / params.T1_01)
    pd12 = -np.expm1(-t / params.T1_12)
    pp01 = -np.expm1(-t / params.t2_eff("01", idle)) / 2
    pp12 = -np.expm1(-t / params.t2_eff("12", idle)) / 2
    return float(pd01), float(pd12), float(pp01), float(pp12)


def thermal_channel(params: NoiseParams, duration: float, dim: int = 3, idle: bool = False) -> NoiseChannel:
    """Amplitude damping then dephasing (9 Kraus operators for a qutrit)."""
    pd01, pd12, pp01, pp12 = params_to_probs(params, duration, idle)
    return amp_damp_channel(pd01, pd12, dim).then(dephasing_channel(pp01, pp12, dim))


def t2_echo_probability(p01: float, p_damp01: float, k: int) -> float:
    """Closed form P(0) of the 0-1 echo experiment with k noise steps per arm."""
    return 0.5 * (1 + (1 - 2 * p01) ** (2 * k) * (1 - p_damp01) ** k)


def t2_echo_simulated(p01: float, p_damp01: float, k: int, p12: float = 0.0, p_damp12: float = 0.0) -> float:
    """Same quantity obtained by running the echo sequence through the channels."""
    step = amp_damp_channel(p_damp01, p_damp12).then(dephasing_channel(p01, p12))
    rho = np.zeros((3, 3), dtype=complex)
    rho[0, 0] = 1.0

    def conj(u, r):
        return u @ r @ u.conj().T

    rho = conj(sx01().matrix, rho)
    for _ in range(k):
        rho = step.apply(rho)
    rho = conj(x01().matrix, rho)
    for _ in range(k):
        rho = step.apply(rho)
    rho = conj(sx01().matrix, rho)
    return float(rho[0, 0].real)


# superoperators ------------------------------------------------------------------

def pair_order(superop: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Reshape a row-major superoperator on (kets..., bras...) into per-wire
    (ket, bra) pairs: result has shape ``(d1*d1, ..., dk*dk) * 2``."""
    k = len(dims)
    t = superop.reshape(tuple(dims) * 4)
    # axes: out kets 0..k-1, out bras k..2k-1, in kets 2k..3k-1, in bras 3k..4k-1
    out_axes = [a for w in range(k) for a in (w, k + w)]
    in_axes = [a for w in range(k) for a in (2 * k + w, 3 * k + w)]
    t = np.transpose(t, out_axes + in_axes)
    return t.reshape(tuple(d * d for d in dims) * 2)


@dataclass(frozen=True)
class Superoperator:
    """Pair-ordered superoperator tensor for a gate on ``len(dims)`` wires."""

    tensor: np.ndarray
    dims: tuple[int, ...]
    duration: float

    def matrix(self) -> np.ndarray:
        d2 = int(np.prod([d * d for d in self.dims]))
        return self.tensor.reshape(d2, d2)


@lru_cache(maxsize=4096)
def _wire_channel(params: NoiseParams, duration: float, dim: int, idle: bool) -> NoiseChannel:
    return thermal_channel(params, duration, dim, idle)


def gate_channel(gate: Gate, params: NoiseParams) -> list[NoiseChannel]:
    """Per-wire thermal channels accompanying ``gate``."""
    t = params.duration(gate)
    return [_wire_channel(params, t, d, False) for d in gate.dims]


def promote_superop(gate: Gate, params: NoiseParams) -> Superoperator:
    """(sum_i K_i (x) conj K_i) . (V (x) conj V), with the K's built from the
    gate duration and applied independently on every wire of the gate."""
    v = gate.matrix
    unitary_part = np.kron(v, v.conj())
    noise = reduce(np.kron, [ch.superop() for ch in gate_channel(gate, params)])
    # noise is a kron over wires of per-wire row-major superops: reorder to (kets, bras)
    k = gate.arity
    dims = gate.dims
    t = noise.reshape(tuple(d for w in dims for d in (w, w)) * 2)
    out_axes = [2 * w for w in range(k)] + [2 * w + 1 for w in range(k)]
    in_axes = [2 * k + a for a in out_axes]
    noise = np.transpose(t, out_axes + in_axes).reshape(unitary_part.shape)
    full = noise @ unitary_part
    return Superoperator(pair_order(full, dims), tuple(dims), params.duration(gate))


_SUPEROP_CACHE: dict = {}
_SUPEROP_CACHE_SIZE = 2048


def cached_superop(gate: Gate, params: NoiseParams) -> Superoperator:
    """``promote_superop`` memoized on the gate's matrix and bookkeeping."""
    key = (gate.label, gate.dims, gate.n_pulses, gate.n_entanglers, gate.matrix.tobytes(), params)
    hit = _SUPEROP_CACHE.get(key)
    if hit is None:
        if len(_SUPEROP_CACHE) >= _SUPEROP_CACHE_SIZE:
            _SUPEROP_CACHE.clear()
        hit = _SUPEROP_CACHE[key] = promote_superop(gate, params)
    return hit


# layered schedule ------------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleStep:
    op: Op | None
    wire: int | None = None
    idle_time: float = 0.0


def schedule(circuit: QuditCircuit, params: NoiseParams) -> list[ScheduleStep]:
    """Gate steps plus idle steps: each layer lasts as long as its slowest gate
    and every wire decoheres for the part of the layer it is not driven."""
    steps: list[ScheduleStep] = []
    for layer in circuit.layers():
        durations = {op: params.duration(op.gate) for op in layer}
        t_layer = max(durations.values(), default=0.0)
        busy = {}
        for op in layer:
            steps.append(ScheduleStep(op))
            for s in op.sites:
                busy[s] = durations[op]
        if t_layer > 0:
            for w in range(circuit.n_sites):
                idle = t_layer - busy.get(w, 0.0)
                if idle > 0:
                    steps.append(ScheduleStep(None, w, idle))
    return steps


def idle_channel(params: NoiseParams, idle_time: float, dim: int) -> NoiseChannel:
    return _wire_channel(params, idle_time, dim, True)


# dense reference ---------------------------------------------------------------------

def _apply_kraus_dense(rho: np.ndarray, kraus: Sequence[np.ndarray], dims, sites) -> np.ndarray:
    from .statevector import apply_matrix

    n = len(dims)
    t = rho.reshape(tuple(dims) * 2)
    gdims = [dims[s] for s in sites]
    bra_sites = [n + s for s in sites]
    out = np.zeros_like(t)
    for k in kraus:
        x = apply_matrix(t, k, gdims, sites)
        out += apply_matrix(x, k.conj(), gdims, bra_sites)
    return out.reshape(rho.shape)


def run_dense_noisy(circuit: QuditCircuit, params: NoiseParams, rho0: np.ndarray | None = None) -> np.ndarray:
    """Dense density-matrix evolution under the same schedule (small n only)."""
    dims = circuit.dims
    dim = int(np.prod(dims))
    if rho0 is None:
        rho0 = np.zeros((dim, dim), dtype=complex)
        rho0[0, 0] = 1.0
    rho = rho0.astype(complex)
    for step in schedule(circuit, params):
        if step.op is not None:
            g = step.op.gate
            chans = gate_channel(g, params)
            kraus = [reduce(np.kron, ks) @ g.matrix for ks in itertools.product(*[c.kraus for c in chans])]
            rho = _apply_kraus_dense(rho, kraus, dims, step.op.sites)
        else:
            ch = idle_channel(params, step.idle_time, dims[step.wire])
            rho = _apply_kraus_dense(rho, ch.kraus, dims, (step.wire,))
    return rho


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))
