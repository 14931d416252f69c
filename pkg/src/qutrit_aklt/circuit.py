"""Circuit IR shared by the statevector and density-MPO engines."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .gates import Gate, gate_from_label, unitary_gate

_CATALOG = {"X01", "X12", "SX01", "SX12", "RZ01", "RZ12", "U01", "H01", "H12",
            "SDG01", "CNOT", "RZ", "SX", "X", "H", "SDG", "CX"}


@dataclass(frozen=True)
class Op:
    gate: Gate
    sites: tuple[int, ...]


@dataclass
class QuditCircuit:
    """Ordered gate list over ``n_sites`` wires.

    ``dims`` gives the local dimension per wire (3 unless stated).  A scalar
    ``global_phase`` is tracked because controlled copies of a circuit turn it
    into a relative phase.
    """

    n_sites: int
    ops: list[Op] = field(default_factory=list)
    measurements: list[tuple[int, int]] = field(default_factory=list)
    dims: tuple[int, ...] | None = None
    global_phase: float = 0.0

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")
        if self.dims is None:
            self.dims = (3,) * self.n_sites
        self.dims = tuple(self.dims)
        if len(self.dims) != self.n_sites:
            raise ValueError("dims length must equal n_sites")
        ops, self.ops = list(self.ops), []
        for op in ops:
            self.append(op.gate, op.sites)

    def append(self, gate: Gate, sites: int | Sequence[int]) -> QuditCircuit:
        sites = (sites,) if isinstance(sites, (int, np.integer)) else tuple(int(s) for s in sites)
        if len(sites) != gate.arity:
            raise ValueError(f"{gate.label} acts on {gate.arity} sites, got {sites}")
        if len(set(sites)) != len(sites):
            raise ValueError(f"repeated site in {sites}")
        for s in sites:
            if not 0 <= s < self.n_sites:
                raise ValueError(f"site {s} out of range for {self.n_sites} sites")
        if tuple(self.dims[s] for s in sites) != gate.dims:
            raise ValueError(f"{gate.label} dims {gate.dims} do not match wires {sites}")
        self.ops.append(Op(gate, sites))
        return self

    def extend(self, ops: Iterable[Op]) -> QuditCircuit:
        for op in ops:
            self.append(op.gate, op.sites)
        return self

    def measure(self, site: int, bit: int | None = None) -> QuditCircuit:
        self.measurements.append((site, len(self.measurements) if bit is None else bit))
        return self

    def copy(self) -> QuditCircuit:
        return QuditCircuit(self.n_sites, list(self.ops), list(self.measurements), self.dims, self.global_phase)

    def inverse(self) -> QuditCircuit:
        ops = [Op(op.gate.dagger(), op.sites) for op in reversed(self.ops)]
        return QuditCircuit(self.n_sites, ops, [], self.dims, -self.global_phase)

    def remapped(self, mapping: Sequence[int], n_sites: int, dims: Sequence[int] | None = None) -> QuditCircuit:
        """Same gates with wire ``k`` moved to ``mapping[k]`` of a wider register."""
        if dims is None:
            dims = [3] * n_sites
            for k, m in enumerate(mapping):
                dims[m] = self.dims[k]
        out = QuditCircuit(n_sites, dims=tuple(dims), global_phase=self.global_phase)
        for op in self.ops:
            out.append(op.gate, tuple(mapping[s] for s in op.sites))
        return out

    def count_entanglers(self) -> int:
        return sum(op.gate.n_entanglers for op in self.ops)

    def layers(self) -> list[list[Op]]:
        """As-soon-as-possible layering; ops inside a layer touch disjoint wires."""
        front = [0] * self.n_sites
        out: list[list[Op]] = []
        for op in self.ops:
            k = max(front[s] for s in op.sites)
            if k == len(out):
                out.append([])
            out[k].append(op)
            for s in op.sites:
                front[s] = k + 1
        return out

    def unitary(self) -> np.ndarray:
        """Dense matrix of the whole circuit (small registers only)."""
        from .statevector import apply_matrix

        dim = int(np.prod(self.dims))
        u = np.eye(dim, dtype=complex).reshape(self.dims + (dim,))
        for op in self.ops:
            u = apply_matrix(u, op.gate.matrix, op.gate.dims, op.sites)
        return np.exp(1j * self.global_phase) * u.reshape(dim, dim)

    # JSON IR -----------------------------------------------------------------

    def to_dict(self) -> dict:
        ops = []
        for op in self.ops:
            entry = {"gate": op.gate.label, "params": [float(p) for p in op.gate.params],
                     "sites": list(op.sites)}
            if op.gate.label not in _CATALOG:
                m = op.gate.matrix
                entry["matrix"] = [[m.real.tolist()], [m.imag.tolist()]]
                entry["dims"] = list(op.gate.dims)
                entry["n_pulses"] = op.gate.n_pulses
                entry["n_entanglers"] = op.gate.n_entanglers
            ops.append(entry)
        d = {"n_sites": self.n_sites, "ops": ops}
        if any(x != 3 for x in self.dims):
            d["dims"] = list(self.dims)
        if self.measurements:
            d["measurements"] = [list(m) for m in self.measurements]
        if self.global_phase:
            d["global_phase"] = self.global_phase
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> QuditCircuit:
        circ = cls(int(d["n_sites"]), dims=tuple(d.get("dims", [3] * int(d["n_sites"]))),
                   global_phase=float(d.get("global_phase", 0.0)))
        for entry in d["ops"]:
            label = entry["gate"]
            if "matrix" in entry:
                re, im = entry["matrix"]
                m = np.asarray(re[0]) + 1j * np.asarray(im[0])
                g = unitary_gate(m, tuple(entry["dims"]), label, entry.get("n_pulses"),
                                 entry.get("n_entanglers", 0))
            elif label.endswith("_dg"):
                g = gate_from_label(label[:-3], tuple(-p for p in entry["params"])
                                    if label[:-3] in ("RZ01", "RZ12", "RZ") else entry["params"]).dagger()
            else:
                g = gate_from_label(label, entry.get("params", ()))
            circ.append(g, entry["sites"])
        for site, bit in d.get("measurements", []):
            circ.measure(site, bit)
        return circ

    @classmethod
    def from_json(cls, text: str) -> QuditCircuit:
        return cls.from_dict(json.loads(text))
