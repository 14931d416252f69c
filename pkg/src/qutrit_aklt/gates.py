"""Native qutrit (and qubit) gate catalog.

Every gate is a small frozen record carrying its matrix together with the
local dimensions of the wires it acts on.  Multi-site matrices are ordered
with the first wire most significant, i.e. the matrix of a two-site gate on
``(control, target)`` is indexed by ``3 * control + target``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

UNITARY_ATOL = 1e-12

# (a, b, c, delta) of the control-|2> block of the CNOT used for simulation
CNOT_PARAMS = (1 / np.sqrt(2), -1 / np.sqrt(2), -1 / np.sqrt(2), -np.pi / 2)


@dataclass(frozen=True, eq=False)
class Gate:
    """A gate together with the bookkeeping the noise model needs.

    ``n_pulses`` and ``n_entanglers`` count the native single-site pulses and
    native two-site gates the gate stands for; they fix its duration.
    """

    label: str
    matrix: np.ndarray
    dims: tuple[int, ...] = (3,)
    params: tuple[float, ...] = ()
    is_virtual: bool = False
    n_pulses: int = 0
    n_entanglers: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dim = int(np.prod(self.dims))
        if m.shape != (dim, dim):
            raise ValueError(f"{self.label}: matrix shape {m.shape} does not match dims {self.dims}")
        if self.is_virtual and not np.allclose(m, np.diag(np.diag(m)), atol=UNITARY_ATOL):
            raise ValueError(f"{self.label}: virtual gates must be diagonal")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def arity(self) -> int:
        return len(self.dims)

    def is_unitary(self, atol: float = UNITARY_ATOL) -> bool:
        m = self.matrix
        return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= atol)

    def dagger(self) -> Gate:
        label = self.label[:-3] if self.label.endswith("_dg") else self.label + "_dg"
        params = tuple(-p for p in self.params) if self.label in ("RZ01", "RZ12", "RZ") else self.params
        return Gate(label, self.matrix.conj().T, self.dims, params, self.is_virtual,
                    self.n_pulses, self.n_entanglers, dict(self.meta))

    def __repr__(self) -> str:
        ps = ", ".join(f"{p:.6g}" for p in self.params)
        return f"Gate({self.label}({ps}) on dims {self.dims})"


def _embed01(u2: np.ndarray) -> np.ndarray:
    m = np.eye(3, dtype=complex)
    m[:2, :2] = u2
    return m


def _embed12(u2: np.ndarray) -> np.ndarray:
    m = np.eye(3, dtype=complex)
    m[1:, 1:] = u2
    return m


_X2 = np.array([[0, -1j], [-1j, 0]])
_SX2 = np.array([[1, -1j], [-1j, 1]]) / np.sqrt(2)
_H2 = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def x01() -> Gate:
    return Gate("X01", _embed01(_X2), n_pulses=1)


def x12() -> Gate:
    return Gate("X12", _embed12(_X2), n_pulses=1)


def sx01() -> Gate:
    return Gate("SX01", _embed01(_SX2), n_pulses=1)


def sx12() -> Gate:
    return Gate("SX12", _embed12(_SX2), n_pulses=1)


def rz01(phi: float) -> Gate:
    return Gate("RZ01", np.diag([1, np.exp(1j * phi), 1]), params=(float(phi),), is_virtual=True)


def rz12(phi: float) -> Gate:
    return Gate("RZ12", np.diag([1, 1, np.exp(1j * phi)]), params=(float(phi),), is_virtual=True)


def u01(theta: float, phi: float, lam: float) -> Gate:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    u2 = np.array([[c, -np.exp(1j * lam) * s],
                   [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]])
    return Gate("U01", _embed01(u2), params=(float(theta), float(phi), float(lam)), n_pulses=2)


def h01() -> Gate:
    return Gate("H01", _embed01(_H2), n_pulses=1)


def h12() -> Gate:
    return Gate("H12", _embed12(_H2), n_pulses=1)


def s01_dagger() -> Gate:
    return Gate("SDG01", np.diag([1, -1j, 1]), is_virtual=True)


def cnot(a: float = CNOT_PARAMS[0], b: float = CNOT_PARAMS[1],
         c: float = CNOT_PARAMS[2], delta: float = CNOT_PARAMS[3]) -> Gate:
    """Qutrit CNOT from the default IBM truth table.

    Control |0> is the identity, control |1> swaps target 0 and 1 and puts a
    phase ``i`` on target 2, control |2> mixes target 0 and 1 with the block
    ``[[a, b*], [b, c]]`` and puts ``exp(i delta)`` on target 2.
    """
    m = np.zeros((9, 9), dtype=complex)
    cols = {
        (0, 0): {(0, 0): 1}, (0, 1): {(0, 1): 1}, (0, 2): {(0, 2): 1},
        (1, 0): {(1, 1): 1}, (1, 1): {(1, 0): 1}, (1, 2): {(1, 2): 1j},
        (2, 0): {(2, 0): a, (2, 1): b},
        (2, 1): {(2, 0): np.conj(b), (2, 1): c},
        (2, 2): {(2, 2): np.exp(1j * delta)},
    }
    for (ci, ti), out in cols.items():
        for (co, to), amp in out.items():
            m[3 * co + to, 3 * ci + ti] = amp
    return Gate("CNOT", m, dims=(3, 3), params=(a, b, c, delta), n_entanglers=1)


# qubit gate set (CNOT + ZSX), used for the two-qubit encoding of a qutrit

def qubit_rz(phi: float) -> Gate:
    return Gate("RZ", np.diag([1, np.exp(1j * phi)]), dims=(2,), params=(float(phi),), is_virtual=True)


def qubit_sx() -> Gate:
    return Gate("SX", _SX2, dims=(2,), n_pulses=1)


def qubit_x() -> Gate:
    return Gate("X", _X2, dims=(2,), n_pulses=1)


def qubit_h() -> Gate:
    return Gate("H", _H2, dims=(2,), n_pulses=1)


def qubit_sdg() -> Gate:
    return Gate("SDG", np.diag([1, -1j]), dims=(2,), is_virtual=True)


def qubit_cnot() -> Gate:
    m = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
    return Gate("CX", m, dims=(2, 2), n_entanglers=1)


def unitary_gate(matrix: np.ndarray, dims: tuple[int, ...], label: str = "U",
                 n_pulses: int | None = None, n_entanglers: int = 0) -> Gate:
    """Wrap an arbitrary unitary.

    A generic single qutrit unitary is charged six pulses (the shortest
    RZ/SX sequence reaching all of U(3)), a generic single qubit unitary two.
    """
    if n_pulses is None:
        n_pulses = {3: 6, 2: 2}.get(dims[0], 6) if len(dims) == 1 else 0
    return Gate(label, np.asarray(matrix, dtype=complex), dims=tuple(dims),
                n_pulses=n_pulses, n_entanglers=n_entanglers)


def controlled(gate: Gate, control_dim: int = 3) -> Gate:
    """Gate controlled on |1> of an extra leading wire.

    The control wire is only ever populated in its 0-1 manifold; level 2 of a
    qutrit control acts trivially.  Durations: a controlled gate is charged two
    more native entanglers than its target plus twice its own.
    """
    d = int(np.prod(gate.dims))
    m = np.eye(control_dim * d, dtype=complex)
    m[d:2 * d, d:2 * d] = gate.matrix
    return Gate("C" + gate.label, m, dims=(control_dim,) + gate.dims, params=gate.params,
                n_pulses=gate.n_pulses, n_entanglers=2 * gate.n_entanglers + 2,
                meta={"base": gate})


def swap_gate(d: int = 3) -> Gate:
    m = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            m[j * d + i, i * d + j] = 1
    return Gate("SWAP", m, dims=(d, d), n_entanglers=3)


_FACTORIES: dict[str, Callable[..., Gate]] = {
    "X01": x01, "X12": x12, "SX01": sx01, "SX12": sx12,
    "RZ01": rz01, "RZ12": rz12, "U01": u01,
    "H01": h01, "H12": h12, "SDG01": s01_dagger, "CNOT": cnot,
    "RZ": qubit_rz, "SX": qubit_sx, "X": qubit_x, "H": qubit_h, "SDG": qubit_sdg, "CX": qubit_cnot,
}


def make_standard_gates() -> dict[str, Callable[..., Gate]]:
    """Return the named gate constructors of the qutrit and qubit gate sets."""
    return dict(_FACTORIES)


def gate_from_label(label: str, params=()) -> Gate:
    if label not in _FACTORIES:
        raise KeyError(f"unknown gate label {label!r}")
    return _FACTORIES[label](*params)
