"""Isometry synthesis by CNOT-structure search and environment-tensor sweeps.

Only the listed input actions constrain a solution, so the compiled circuit is
free on the complement of the input span.  Structures are tried in order of
CNOT count, then lexicographically; the first one whose optimized cost drops
below ``tol`` wins.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.optimize as so

from . import gates as G
from .circuit import QuditCircuit
from .statevector import apply_matrix

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_RESTARTS = 8
DEFAULT_BUDGET = 4


class CompileError(RuntimeError):
    pass


class SearchExhaustedError(CompileError):
    """No structure within the CNOT budget reached the tolerance."""

    def __init__(self, msg: str, best_cost: float, best_structure: AnsatzStructure | None):
        super().__init__(msg)
        self.best_cost = best_cost
        self.best_structure = best_structure


@dataclass(frozen=True)
class IsometryTarget:
    input_states: tuple[tuple[int, ...], ...]
    target_states: tuple[np.ndarray, ...]
    wire_dims: tuple[int, ...]

    def __post_init__(self):
        dim = int(np.prod(self.wire_dims))
        vs = np.array([np.asarray(v, dtype=complex).reshape(-1) for v in self.target_states])
        if len(self.input_states) != len(vs):
            raise ValueError("one target state per input state is required")
        if vs.shape[1] != dim:
            raise ValueError("target states do not match wire_dims")
        for ket in self.input_states:
            if len(ket) != len(self.wire_dims) or any(not 0 <= k < d for k, d in zip(ket, self.wire_dims)):
                raise ValueError(f"bad input ket {ket}")
        gram = vs.conj() @ vs.T
        if np.max(np.abs(gram - np.eye(len(vs)))) > 1e-10:
            raise ValueError("target states are not orthonormal")
        object.__setattr__(self, "target_states", tuple(vs))
        object.__setattr__(self, "input_states", tuple(tuple(int(k) for k in s) for s in self.input_states))
        object.__setattr__(self, "wire_dims", tuple(self.wire_dims))

    def inputs(self) -> np.ndarray:
        """Input kets stacked as (J, *dims)."""
        out = np.zeros((len(self.input_states),) + self.wire_dims, dtype=complex)
        for j, ket in enumerate(self.input_states):
            out[(j,) + ket] = 1.0
        return out

    def targets(self) -> np.ndarray:
        return np.array(self.target_states).reshape((-1,) + self.wire_dims)

    def to_json(self) -> str:
        return json.dumps({
            "wire_dims": list(self.wire_dims),
            "inputs": [list(k) for k in self.input_states],
            "targets": [[v.real.tolist(), v.imag.tolist()] for v in self.target_states],
        })

    @classmethod
    def from_json(cls, text: str) -> IsometryTarget:
        d = json.loads(text)
        return cls(tuple(tuple(k) for k in d["inputs"]),
                   tuple(np.asarray(re) + 1j * np.asarray(im) for re, im in d["targets"]),
                   tuple(d["wire_dims"]))


@dataclass(frozen=True)
class AnsatzStructure:
    """CNOT placements; a single-site slot sits on every wire at the start and
    on both wires after each CNOT."""

    cnot_placements: tuple[tuple[int, int], ...]
    n_wires: int

    def __post_init__(self):
        for c, t in self.cnot_placements:
            if c == t or not (0 <= c < self.n_wires and 0 <= t < self.n_wires):
                raise ValueError(f"invalid placement {(c, t)} for {self.n_wires} wires")

    @property
    def n_cnots(self) -> int:
        return len(self.cnot_placements)

    def elements(self) -> list[tuple]:
        out: list[tuple] = [("u", w) for w in range(self.n_wires)]
        for c, t in self.cnot_placements:
            out.append(("cx", c, t))
            out.append(("u", c))
            out.append(("u", t))
        return out

    def n_slots(self) -> int:
        return self.n_wires + 2 * self.n_cnots


def aklt_ladder_target(encoding: str = "qutrit") -> IsometryTarget:
    """Ladder isometry: fresh wire on top, carrier below."""
    a, b = np.sqrt(1 / 3), np.sqrt(2 / 3)
    if encoding == "qutrit":
        def ket(*digits):
            v = np.zeros((3, 3), dtype=complex)
            v[digits] = 1.0
            return v.reshape(-1)
        return IsometryTarget(((0, 0), (0, 1)),
                              (-a * ket(0, 1) - b * ket(1, 2), b * ket(0, 0) + a * ket(1, 1)), (3, 3))
    if encoding == "qubit":
        enc = {0: (0, 0), 1: (0, 1), 2: (1, 0)}

        def ket(v, sigma):
            x = np.zeros((2, 2, 2), dtype=complex)
            x[(v,) + enc[sigma]] = 1.0
            return x.reshape(-1)
        return IsometryTarget(((0, 0, 0), (0, 0, 1)),
                              (-a * ket(0, 1) - b * ket(1, 2), b * ket(0, 0) + a * ket(1, 1)), (2, 2, 2))
    raise ValueError(f"unknown encoding {encoding!r}")


def _entangler(dims: tuple[int, ...]) -> G.Gate:
    return G.cnot() if dims == (3, 3) else G.qubit_cnot()


def _evolve(states: np.ndarray, mat: np.ndarray, gdims, wires) -> np.ndarray:
    # states carry a leading batch axis
    return apply_matrix(states, mat, gdims, [w + 1 for w in wires])


def cost(outputs: np.ndarray, target: IsometryTarget) -> float:
    """Sum over inputs of the 2-norm of U|j> - V|j>."""
    diff = np.asarray(outputs).reshape(len(target.target_states), -1) - np.array(target.target_states)
    return float(np.sum(np.linalg.norm(diff, axis=1)))


class _Ansatz:
    def __init__(self, structure: AnsatzStructure, target: IsometryTarget):
        self.structure = structure
        self.target = target
        self.dims = target.wire_dims
        self.elements = structure.elements()
        self.slots = [k for k, e in enumerate(self.elements) if e[0] == "u"]
        self.cx = {}
        for e in self.elements:
            if e[0] == "cx":
                d = (self.dims[e[1]], self.dims[e[2]])
                self.cx[d] = _entangler(d).matrix

    def _mat(self, e, gates: dict[int, np.ndarray], k: int):
        if e[0] == "u":
            return gates[k], (self.dims[e[1]],), (e[1],)
        d = (self.dims[e[1]], self.dims[e[2]])
        return self.cx[d], d, (e[1], e[2])

    def outputs(self, gates: dict[int, np.ndarray]) -> np.ndarray:
        s = self.target.inputs()
        for k, e in enumerate(self.elements):
            m, d, w = self._mat(e, gates, k)
            s = _evolve(s, m, d, w)
        return s

    def sweep(self, gates: dict[int, np.ndarray]) -> None:
        """One forward environment-tensor sweep updating every slot in place."""
        n = len(self.elements)
        back = [None] * (n + 1)
        b = self.target.targets()
        back[n] = b
        for k in range(n - 1, -1, -1):
            m, d, w = self._mat(self.elements[k], gates, k)
            b = _evolve(b, m.conj().T, d, w)
            back[k] = b
        a = self.target.inputs()
        for k, e in enumerate(self.elements):
            m, d, w = self._mat(e, gates, k)
            if e[0] == "u":
                ax = e[1] + 1
                others = [i for i in range(a.ndim) if i != ax]
                # env[beta, alpha] = sum a[beta, rest] conj(b[alpha, rest])
                env = np.tensordot(a, back[k + 1].conj(), axes=(others, others))
                x, _, yh = np.linalg.svd(env)
                gates[k] = (x @ yh).conj().T
                m = gates[k]
            a = _evolve(a, m, d, w)


def _random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _hermitian_basis(d: int) -> np.ndarray:
    basis = []
    for i in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[i, i] = 1
        basis.append(m)
    for i, j in itertools.combinations(range(d), 2):
        m = np.zeros((d, d), dtype=complex)
        m[i, j] = m[j, i] = 1 / np.sqrt(2)
        basis.append(m)
        m = np.zeros((d, d), dtype=complex)
        m[i, j], m[j, i] = -1j / np.sqrt(2), 1j / np.sqrt(2)
        basis.append(m)
    return np.array(basis)


def _polish(ansatz: _Ansatz, gates: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    """Levenberg-Marquardt refinement in exponential coordinates around ``gates``."""
    slots = ansatz.slots
    bases = {k: _hermitian_basis(ansatz.dims[ansatz.elements[k][1]]) for k in slots}
    sizes = [len(bases[k]) for k in slots]
    ref = np.array(ansatz.target.target_states)

    def unpack(x):
        out, i = {}, 0
        for k, s in zip(slots, sizes):
            h = np.tensordot(x[i:i + s], bases[k], axes=1)
            out[k] = gates[k] @ sla.expm(1j * h)
            i += s
        return out

    def resid(x):
        d = ansatz.outputs(unpack(x)).reshape(len(ref), -1) - ref
        return np.concatenate([d.real.ravel(), d.imag.ravel()])

    res = so.least_squares(resid, np.zeros(sum(sizes)), method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return unpack(res.x)


@dataclass
class OptimizeResult:
    gates: dict[int, np.ndarray]
    cost: float
    sweep_costs: list[float] = field(default_factory=list)


def optimize_structure(structure: AnsatzStructure, target: IsometryTarget, tol: float = DEFAULT_TOL,
                       restarts: int = DEFAULT_RESTARTS, seed: int = 0, max_sweeps: int = 300,
                       polish: bool = True) -> OptimizeResult:
    """Best single-site dressing of a fixed CNOT structure.

    Environment sweeps maximize Re sum_j <V_j|U|j>, which is equivalent to
    minimizing the squared cost; the squared cost is asserted non-increasing
    per sweep.  A least-squares polish finishes the descent.
    """
    ansatz = _Ansatz(structure, target)
    rng = np.random.default_rng(seed)
    best: OptimizeResult | None = None
    for _ in range(restarts):
        gates = {k: _random_unitary(target.wire_dims[ansatz.elements[k][1]], rng) for k in ansatz.slots}
        sq = []
        for _ in range(max_sweeps):
            ansatz.sweep(gates)
            diff = ansatz.outputs(gates).reshape(len(target.target_states), -1) - np.array(target.target_states)
            sq.append(float(np.sum(np.abs(diff) ** 2)))
            if len(sq) > 1 and sq[-1] > sq[-2] + 1e-12:
                raise CompileError(f"environment sweep increased the cost ({sq[-2]:.3e} -> {sq[-1]:.3e})")
            if sq[-1] < 1e-20 or (len(sq) > 10 and sq[-11] - sq[-1] < 1e-3 * sq[-1]):
                break
        if polish and sq[-1] < 1e-2 and cost(ansatz.outputs(gates), target) >= tol:
            gates = _polish(ansatz, gates)
        c = cost(ansatz.outputs(gates), target)
        if best is None or c < best.cost:
            best = OptimizeResult(gates, c, sq)
        if c < tol:
            break
    return best


def enumerate_structures(n_wires: int, max_cnots: int, placements: Sequence[tuple[int, int]] | None = None):
    """Yield structures by CNOT count, then lexicographic placement order.

    Sequences repeating the same placement back to back are skipped since the
    pair can be absorbed by a shorter structure for involutive entanglers.
    """
    if placements is None:
        placements = [(c, c + 1) for c in range(n_wires - 1)] + [(c + 1, c) for c in range(n_wires - 1)]
    placements = sorted(placements)
    for k in range(max_cnots + 1):
        for seq in itertools.product(placements, repeat=k):
            if any(a == b for a, b in zip(seq, seq[1:])):
                continue
            yield AnsatzStructure(tuple(seq), n_wires)


def _circuit_from(structure: AnsatzStructure, gates: dict[int, np.ndarray], dims, decompose: bool) -> QuditCircuit:
    circ = QuditCircuit(len(dims), dims=tuple(dims))
    for k, e in enumerate(structure.elements()):
        if e[0] == "cx":
            circ.append(_entangler((dims[e[1]], dims[e[2]])), (e[1], e[2]))
            continue
        u = gates[k]
        if np.allclose(u, u[0, 0] * np.eye(len(u)), atol=1e-13):
            circ.global_phase += float(np.angle(u[0, 0]))
            continue
        if decompose:
            seq, phase = decompose_single_site(u)
            for g in seq:
                circ.append(g, e[1])
            circ.global_phase += phase
        elif dims[e[1]] == 3:
            seq, _ = decompose_single_site(u)
            circ.append(G.unitary_gate(u, (3,), n_pulses=sum(g.n_pulses for g in seq)), e[1])
        else:
            circ.append(G.unitary_gate(u, (dims[e[1]],)), e[1])
    return circ


@dataclass
class CompileResult:
    circuit: QuditCircuit
    structure: AnsatzStructure
    cost: float
    structures_tried: int


def compile_isometry(target: IsometryTarget, tol: float = DEFAULT_TOL, max_cnots: int | None = None,
                     restarts: int = DEFAULT_RESTARTS, seed: int = 0, decompose: bool = False,
                     placements: Sequence[tuple[int, int]] | None = None) -> CompileResult:
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_cnots is None:
        max_cnots = DEFAULT_BUDGET
    n = len(target.wire_dims)
    best_cost, best_struct = np.inf, None
    tried = 0
    for structure in enumerate_structures(n, max_cnots, placements):
        tried += 1
        res = optimize_structure(structure, target, tol, restarts, seed)
        log.debug("structure %s cost %.3e", structure.cnot_placements, res.cost)
        if res.cost < best_cost:
            best_cost, best_struct = res.cost, structure
        if res.cost < tol:
            circ = _circuit_from(structure, res.gates, target.wire_dims, decompose)
            final = verify(circ, target)
            if final >= tol:
                raise CompileError(f"verification cost {final:.3e} exceeds tol after circuit assembly")
            return CompileResult(circ, structure, final, tried)
    raise SearchExhaustedError(
        f"no structure with <= {max_cnots} CNOTs reached tol={tol:g} (best {best_cost:.3e})",
        best_cost, best_struct)


def verify(circuit: QuditCircuit, target: IsometryTarget) -> float:
    """Phase-sensitive cost of a finished circuit on the target inputs."""
    u = circuit.unitary()
    dims = target.wire_dims
    cols = [int(np.ravel_multi_index(k, dims)) for k in target.input_states]
    return cost(u[:, cols].T, target)


# single-site pulse decomposition --------------------------------------------------

_SX01 = G.sx01().matrix
_SX12 = G.sx12().matrix
_K_PULSES = ("SX01", "SX01", "SX12", "SX12", "SX01")
_TEMPLATES = {
    "diag": (),
    "01x1": ("SX01",),
    "01x2": ("SX01", "SX01"),
    "12x1": ("SX12",),
    "12x2": ("SX12", "SX12"),
    "K": _K_PULSES,
    # the five-pulse K form does not cover all of U(3); one more SX01 pulse does
    "K6": _K_PULSES + ("SX01",),
}


def _rz(a: float, b: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * a), np.exp(1j * b)])


def _template_matrix(pulses, angles) -> np.ndarray:
    m = _rz(angles[0], angles[1])
    for i, p in enumerate(pulses):
        m = (_SX01 if p == "SX01" else _SX12) @ m
        m = _rz(angles[2 * i + 2], angles[2 * i + 3]) @ m
    return m


def _phase_distance(m: np.ndarray, g: np.ndarray) -> tuple[float, float]:
    ov = np.trace(g.conj().T @ m)
    phase = float(np.angle(ov)) if abs(ov) > 0 else 0.0
    return float(np.linalg.norm(m - np.exp(1j * phase) * g)), phase


def _candidate_templates(off: np.ndarray) -> list[str]:
    """Templates worth fitting given the off-diagonal magnitudes."""
    if off.max() < 1e-12:
        return ["diag"]
    if off[:, 2].max() < 1e-12 and off[2].max() < 1e-12:
        return ["01x1", "01x2", "K", "K6"]
    if off[:, 0].max() < 1e-12 and off[0].max() < 1e-12:
        return ["12x1", "12x2", "K", "K6"]
    return ["K", "K6"]


def decompose_single_site(g: np.ndarray, atol: float = 1e-8, seed: int = 0, attempts: int = 20):
    """Pulse sequence over RZ01, RZ12, SX01, SX12 equal to ``g`` up to phase.

    Returns ``(gates, global_phase)`` with ``g = exp(i global_phase) * prod``.
    The shortest matching template is used.  The K template (five SX pulses
    between six RZ01/RZ12 pairs) is tried before the six-pulse generic form.
    """
    g = np.asarray(g, dtype=complex)
    if g.shape != (3, 3) or np.max(np.abs(g.conj().T @ g - np.eye(3))) > 1e-10:
        raise ValueError("expected a 3x3 unitary")
    rng = np.random.default_rng(seed)
    best = (np.inf, None, None)
    off = np.abs(g - np.diag(np.diag(g)))
    for name in _candidate_templates(off):
        pulses = _TEMPLATES[name]
        n_par = 2 * len(pulses) + 2

        def resid(x, pulses=pulses):
            m = _template_matrix(pulses, x)
            ov = np.trace(g.conj().T @ m)
            d = m - (ov / abs(ov) if abs(ov) > 1e-14 else 1.0) * g
            return np.concatenate([d.real.ravel(), d.imag.ravel()])

        if name == "diag":
            d = np.diag(g)
            starts = [np.angle(d[1:] * np.conj(d[0]))]
        else:
            starts = [rng.uniform(-np.pi, np.pi, n_par) for _ in range(attempts if name == "K6" else 3)]
        for x0 in starts:
            res = so.least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
            err, _ = _phase_distance(_template_matrix(pulses, res.x), g)
            if err < best[0]:
                best = (err, pulses, res.x)
            if err < atol:
                break
        if best[0] < atol:
            break
    err, pulses, x = best
    if err >= atol:
        raise CompileError(f"single-site decomposition did not converge (residual {err:.3e})")
    m = _template_matrix(pulses, x)
    _, phase = _phase_distance(m, g)
    seq: list[G.Gate] = []

    def add_rz(a, b):
        a, b = (float(np.angle(np.exp(1j * v))) for v in (a, b))
        if abs(a) > 1e-12:
            seq.append(G.rz01(a))
        if abs(b) > 1e-12:
            seq.append(G.rz12(b))

    add_rz(x[0], x[1])
    for i, p in enumerate(pulses):
        seq.append(G.sx01() if p == "SX01" else G.sx12())
        add_rz(x[2 * i + 2], x[2 * i + 3])
    return seq, -phase
