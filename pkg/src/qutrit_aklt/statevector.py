"""Dense statevector engine (site 0 most significant)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import QuditCircuit
from .gates import Gate

NORM_ATOL = 1e-10


def apply_matrix(tensor: np.ndarray, matrix: np.ndarray, dims: Sequence[int], sites: Sequence[int]) -> np.ndarray:
    """Contract ``matrix`` into the listed leading axes of ``tensor``."""
    k = len(sites)
    m = np.asarray(matrix).reshape(tuple(dims) * 2)
    out = np.tensordot(m, tensor, axes=(list(range(k, 2 * k)), list(sites)))
    return np.moveaxis(out, list(range(k)), list(sites))


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    dims: tuple[int, ...]

    @classmethod
    def zero(cls, n_sites: int, dims: Sequence[int] | None = None) -> StateVector:
        dims = tuple(dims) if dims is not None else (3,) * n_sites
        amps = np.zeros(int(np.prod(dims)), dtype=complex)
        amps[0] = 1.0
        return cls(amps, dims)

    @classmethod
    def basis(cls, digits: Sequence[int], dims: Sequence[int] | None = None) -> StateVector:
        dims = tuple(dims) if dims is not None else (3,) * len(digits)
        amps = np.zeros(int(np.prod(dims)), dtype=complex)
        amps[np.ravel_multi_index(tuple(digits), dims)] = 1.0
        return cls(amps, dims)

    @classmethod
    def from_amplitudes(cls, amps, dims: Sequence[int] | None = None, normalize: bool = False) -> StateVector:
        amps = np.asarray(amps, dtype=complex).ravel()
        if dims is None:
            n = int(round(np.log(len(amps)) / np.log(3)))
            dims = (3,) * n
        dims = tuple(dims)
        if int(np.prod(dims)) != len(amps):
            raise ValueError("amplitude count does not match dims")
        if normalize:
            nrm = np.linalg.norm(amps)
            if nrm == 0:
                raise ValueError("cannot normalize a zero vector")
            amps = amps / nrm
        return cls(amps, dims)

    @property
    def n_sites(self) -> int:
        return len(self.dims)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def inner(self, other: StateVector) -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def apply_gate(state: StateVector, gate: Gate, sites: int | Sequence[int]) -> StateVector:
    sites = (sites,) if isinstance(sites, (int, np.integer)) else tuple(sites)
    if len(sites) != gate.arity:
        raise ValueError(f"{gate.label} has arity {gate.arity} but {len(sites)} sites were given")
    if any(not 0 <= s < state.n_sites for s in sites) or len(set(sites)) != len(sites):
        raise ValueError(f"invalid sites {sites}")
    if tuple(state.dims[s] for s in sites) != gate.dims:
        raise ValueError(f"{gate.label} dims {gate.dims} do not match wires {sites}")
    t = apply_matrix(state.tensor(), gate.matrix, gate.dims, sites)
    return StateVector(t.reshape(-1), state.dims)


def run_circuit(circuit: QuditCircuit, initial: StateVector | None = None) -> StateVector:
    if initial is None:
        initial = StateVector.zero(circuit.n_sites, circuit.dims)
    if circuit.n_sites > initial.n_sites:
        raise ValueError("circuit is wider than the state")
    if tuple(initial.dims[:circuit.n_sites]) != circuit.dims:
        raise ValueError("circuit dims do not match the state")
    t = initial.tensor()
    for op in circuit.ops:
        t = apply_matrix(t, op.gate.matrix, op.gate.dims, op.sites)
    amps = t.reshape(-1)
    if circuit.global_phase:
        amps = amps * np.exp(1j * circuit.global_phase)
    return StateVector(amps, initial.dims)


def measure_probabilities(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def marginal_probabilities(state: StateVector, sites: Sequence[int]) -> np.ndarray:
    """Joint outcome distribution of the listed wires, shaped by their dims."""
    p = measure_probabilities(state).reshape(state.dims)
    others = tuple(k for k in range(state.n_sites) if k not in sites)
    p = p.sum(axis=others)
    # remaining axes are in increasing site order; reorder to the requested order
    order = np.argsort(np.argsort(sites))
    return np.transpose(p, order) if len(sites) > 1 else p


def project(state: StateVector, sites: Sequence[int], values: Sequence[int]) -> np.ndarray:
    """Unnormalized amplitudes of the remaining wires after fixing ``sites``."""
    t = state.tensor()
    index = [slice(None)] * state.n_sites
    for s, v in zip(sites, values):
        index[s] = v
    return t[tuple(index)]
