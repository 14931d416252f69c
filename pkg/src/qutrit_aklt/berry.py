"""Ladder state preparation, discretized Berry phases and the Hadamard test.

The ladder runs bottom to top.  A Bell pair with a relative phase
``exp(i theta)`` sits on the bottom two wires; the compiled isometry V then
hands the virtual spin-1/2 upwards one site at a time.  Measuring the top and
bottom ancillas and keeping the outcomes 00 and 11 closes the chain into a
twisted periodic AKLT state.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable, Sequence

import numpy as np

from . import gates as G
from .aklt import DegenerateGroundStateError, HamiltonianSpec, ground_state_ed
from .circuit import QuditCircuit
from .compile import CompileError, aklt_ladder_target, verify
from .mpo import DensityMPO, run_noisy
from .noise import NOISELESS, NoiseParams, run_dense_noisy
from .statevector import StateVector, run_circuit

log = logging.getLogger(__name__)

ENCODINGS = ("qutrit", "qubit")
OVERLAP_FLOOR = 1e-12
DOMINANT_WEIGHT = 0.05
# qutrit value -> two-qubit pattern on (upper, lower) qubit of a site
QUBIT_CODE = {0: (0, 0), 1: (0, 1), 2: (1, 0)}
POSTSELECT = (0, 1)


class IllConditionedPartitionError(RuntimeError):
    """Two neighbouring ground states are (numerically) orthogonal."""


class GaugeError(RuntimeError):
    pass


@lru_cache(maxsize=None)
def ladder_isometry(encoding: str = "qutrit") -> QuditCircuit:
    """Compiled V shipped with the package, re-verified on load."""
    if encoding not in ENCODINGS:
        raise ValueError(f"unknown encoding {encoding!r}")
    try:
        text = resources.files("qutrit_aklt").joinpath(f"data/ladder_v_{encoding}.json").read_text()
    except FileNotFoundError as exc:
        raise CompileError(f"no compiled ladder isometry for {encoding}") from exc
    circ = QuditCircuit.from_json(text)
    c = verify(circ, aklt_ladder_target(encoding))
    if c >= 1e-8:
        raise CompileError(f"stored {encoding} isometry fails verification (cost {c:.2e})")
    return circ


@dataclass(frozen=True)
class LadderLayout:
    """Wire bookkeeping of a ladder register."""

    n: int
    encoding: str
    dims: tuple[int, ...]
    ancillas: tuple[int, int]
    site_wires: tuple[tuple[int, ...], ...]

    @property
    def n_wires(self) -> int:
        return len(self.dims)


def ladder_layout(n: int, encoding: str = "qutrit") -> LadderLayout:
    if encoding == "qutrit":
        return LadderLayout(n, encoding, (3,) * (n + 2), (0, n + 1), tuple((s,) for s in range(1, n + 1)))
    if encoding == "qubit":
        return LadderLayout(n, encoding, (2,) * (2 * n + 2), (0, 2 * n + 1),
                            tuple((2 * s - 1, 2 * s) for s in range(1, n + 1)))
    raise ValueError(f"unknown encoding {encoding!r}")


def ladder_prep_circuit(n: int, theta: float, encoding: str = "qutrit") -> QuditCircuit:
    """Bell pair with phase theta at the bottom, then V up the ladder."""
    if n < 2:
        raise ValueError("n must be at least 2")
    lay = ladder_layout(n, encoding)
    v = ladder_isometry(encoding)
    theta = float(theta) % (2 * np.pi)
    circ = QuditCircuit(lay.n_wires, dims=lay.dims)
    top, bottom = lay.ancillas
    if encoding == "qutrit":
        carrier = n
        circ.append(G.h01(), carrier).append(G.rz01(theta), carrier).append(G.cnot(), (carrier, bottom))
        for k in range(n - 1, -1, -1):
            circ.extend(v.remapped((k, k + 1), lay.n_wires, lay.dims).ops)
    else:
        carrier = 2 * n
        circ.append(G.qubit_h(), carrier).append(G.qubit_rz(theta), carrier)
        circ.append(G.qubit_cnot(), (carrier, bottom))
        for s in range(n, 0, -1):
            circ.extend(v.remapped((2 * s - 2, 2 * s - 1, 2 * s), lay.n_wires, lay.dims).ops)
    circ.global_phase += v.global_phase * n
    circ.measure(top, 0).measure(bottom, 1)
    return circ


def obc_prep_circuit(n: int, b_left: int, b_right: int, encoding: str = "qutrit") -> tuple[QuditCircuit, int]:
    """Ladder circuit for the OBC state with boundary vectors e_{b_left}, e_{b_right}.

    The carrier starts in a basis state instead of a Bell pair, so the bottom
    ancilla stays idle.  Returns the circuit and the top-ancilla outcome to
    post-select; with the sigma-plus/minus tensors both boundary labels come
    out flipped.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if b_left not in (0, 1) or b_right not in (0, 1):
        raise ValueError("boundary labels must be 0 or 1")
    lay = ladder_layout(n, encoding)
    v = ladder_isometry(encoding)
    circ = QuditCircuit(lay.n_wires, dims=lay.dims)
    if encoding == "qutrit":
        if b_right == 0:
            circ.append(G.x01(), n)
        for k in range(n - 1, -1, -1):
            circ.extend(v.remapped((k, k + 1), lay.n_wires, lay.dims).ops)
    else:
        if b_right == 0:
            circ.append(G.qubit_x(), 2 * n)
        for s in range(n, 0, -1):
            circ.extend(v.remapped((2 * s - 2, 2 * s - 1, 2 * s), lay.n_wires, lay.dims).ops)
    circ.global_phase += v.global_phase * n
    circ.measure(lay.ancillas[0], 0)
    return circ, 1 - b_left


def pbc2_pi_circuit() -> QuditCircuit:
    """Ancilla-free single-entangler circuit for the n=2 state at theta = pi.

    Prepares (|02> - |20>)/sqrt(2) up to a global sign.
    """
    c = QuditCircuit(2)
    c.append(G.h01(), 0).append(G.rz01(np.pi), 0).append(G.cnot(), (0, 1))
    c.append(G.x12(), 0).append(G.x01(), 1).append(G.x12(), 1)
    return c


def system_amplitudes(tensor: np.ndarray, lay: LadderLayout) -> np.ndarray:
    """Qutrit-basis amplitudes of the system wires of a (batched) ladder tensor.

    ``tensor`` carries the site wires only (ancillas already fixed), in wire
    order.  For the qubit encoding, amplitudes outside the code space are
    dropped.
    """
    if lay.encoding == "qutrit":
        return tensor.reshape(-1)
    t = tensor.reshape((2, 2) * lay.n)
    out = np.zeros((3,) * lay.n, dtype=complex)
    for digits in np.ndindex(*(3,) * lay.n):
        idx = tuple(b for d in digits for b in QUBIT_CODE[d])
        out[digits] = t[idx]
    return out.reshape(-1)


@dataclass
class PreparedState:
    """Post-selected ladder state.

    ``branches[x]`` is the unnormalized system state after the ancillas read
    ``xx``; ``probs[x]`` its probability.  The prepared state is the equal
    superposition of the normalized branches, renormalized.
    """

    theta: float
    n: int
    encoding: str
    circuit: QuditCircuit
    branches: dict[int, np.ndarray]
    probs: dict[int, float]
    all_outcomes: np.ndarray

    @property
    def normalizers(self) -> dict[int, float]:
        return {x: float(np.sqrt(p)) for x, p in self.probs.items()}

    def combined(self) -> np.ndarray:
        v = sum(self.branches[x] / np.sqrt(self.probs[x]) for x in POSTSELECT)
        return v / np.linalg.norm(v)

    def statevector(self) -> StateVector:
        return StateVector(self.combined(), (3,) * self.n)


def prepare_state(n: int, theta: float, encoding: str = "qutrit") -> PreparedState:
    """Noiseless ladder preparation followed by post-selection."""
    circ = ladder_prep_circuit(n, theta, encoding)
    lay = ladder_layout(n, encoding)
    t = run_circuit(circ).tensor()
    top, bottom = lay.ancillas
    # ancilla outcome table, rows top, columns bottom
    table = np.zeros((lay.dims[top], lay.dims[bottom]))
    branches, probs = {}, {}
    for a in range(lay.dims[top]):
        for b in range(lay.dims[bottom]):
            sub = t[a, ..., b]
            table[a, b] = float(np.sum(np.abs(sub) ** 2))
            if a == b and a in POSTSELECT:
                branches[a] = system_amplitudes(sub, lay)
                probs[a] = table[a, b]
    return PreparedState(float(theta), n, encoding, circ, branches, probs, table)


# discretized Berry phase ---------------------------------------------------------

def wrap_phase(x: float) -> float:
    """Map an angle into (-pi, pi]."""
    return float(np.pi - (np.pi - x) % (2 * np.pi))


def distance_to_quantized(gamma: float) -> float:
    """Distance of an angle from the nearest of {0, pi} (mod 2 pi)."""
    g = abs(wrap_phase(gamma))
    return float(min(g, np.pi - g))


def partition(N: int) -> np.ndarray:
    if N < 3:
        raise ValueError("need at least 3 partitions")
    return 2 * np.pi * np.arange(N) / N


def dominant_components(vec: np.ndarray, threshold: float = DOMINANT_WEIGHT) -> np.ndarray:
    """Keep amplitudes with weight >= threshold and renormalize."""
    v = np.where(np.abs(vec) ** 2 >= threshold, vec, 0.0)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("no component above the dominance threshold")
    return v / nrm


def link_overlaps(states: Sequence[np.ndarray]) -> np.ndarray:
    """<GS(theta_j)|GS(theta_{j+1})> around the closed loop."""
    n = len(states)
    return np.array([np.vdot(states[j], states[(j + 1) % n]) for j in range(n)])


def phase_from_overlaps(overlaps: Sequence[complex], floor: float = OVERLAP_FLOOR) -> tuple[float, np.ndarray]:
    """gamma_N = -sum Arg(overlap), with the running partial sums."""
    overlaps = np.asarray(overlaps)
    bad = np.flatnonzero(np.abs(overlaps) < floor)
    if bad.size:
        raise IllConditionedPartitionError(
            f"vanishing overlap on link(s) {bad.tolist()}; refine the partition")
    partial = -np.cumsum(np.angle(overlaps))
    return wrap_phase(partial[-1]), partial


def gauge_fix(states: Sequence[np.ndarray], g: np.ndarray | None = None, seed: int = 0,
              max_redraws: int = 10, floor: float = 1e-8) -> tuple[list[np.ndarray], np.ndarray]:
    """Replace each |GS> by <GS|g>|GS>/|<GS|g>| for a common random |g>."""
    rng = np.random.default_rng(seed)
    dim = len(states[0])
    given = g is not None
    for _ in range(max_redraws):
        if g is None:
            g = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            g = g / np.linalg.norm(g)
        ov = np.array([np.vdot(s, g) for s in states])
        if np.all(np.abs(ov) > floor):
            return [s * o / abs(o) for s, o in zip(states, ov)], g
        if given:
            break
        g = None
    raise GaugeError("gauge vector orthogonal to a ground state")


@dataclass
class BerryRun:
    n: int
    N: int
    thetas: np.ndarray
    overlaps: np.ndarray
    partial_sums: np.ndarray
    gamma: float
    encoding: str = "qutrit"
    backend: str = "ed"
    noise_rate: float = 0.0
    states: list | None = field(default=None, repr=False)
    gauge: np.ndarray | None = field(default=None, repr=False)

    @property
    def distance(self) -> float:
        return distance_to_quantized(self.gamma)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "N": self.N, "encoding": self.encoding, "backend": self.backend,
            "noise_rate": self.noise_rate,
            "partial_sums": [float(x) for x in self.partial_sums],
            "gamma": float(self.gamma),
            "distance_to_quantized": self.distance,
            "link_overlap_magnitudes": [float(abs(o)) for o in self.overlaps],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def ed_states(n: int, thetas: Sequence[float], epsilon: float = 1e-8, single_ion_d: float = 0.0,
              boundary: str = "PBC") -> list[np.ndarray]:
    out = []
    for th in thetas:
        spec = HamiltonianSpec(n, boundary, float(th) % (2 * np.pi), epsilon=epsilon, single_ion_d=single_ion_d)
        out.append(ground_state_ed(spec)[1].amplitudes)
    return out


def circuit_states(n: int, thetas: Sequence[float], encoding: str = "qutrit") -> list[np.ndarray]:
    return [prepare_state(n, th, encoding).combined() for th in thetas]


def berry_phase_exact(n: int, N: int, backend: str = "ed", encoding: str = "qutrit",
                      epsilon: float = 1e-8, single_ion_d: float = 0.0, gauge_seed: int | None = 0,
                      gauge: np.ndarray | None = None, dominant: bool = False) -> BerryRun:
    """Noiseless discretized Berry phase from ED or from simulated ladder circuits.

    ``epsilon`` only enters the ED backend; the default is small enough that
    ED and ladder states agree far below the comparison tolerance while the
    ground state stays non-degenerate.
    """
    thetas = partition(N)
    if backend == "ed":
        states = ed_states(n, thetas, epsilon, single_ion_d)
    elif backend == "circuit":
        if single_ion_d:
            raise ValueError("the ladder circuit only prepares the AKLT family")
        states = circuit_states(n, thetas, encoding)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if dominant:
        states = [dominant_components(s) for s in states]
    g = None
    if gauge_seed is not None or gauge is not None:
        states, g = gauge_fix(states, gauge, seed=gauge_seed or 0)
    ov = link_overlaps(states)
    gamma, partial = phase_from_overlaps(ov)
    return BerryRun(n, N, thetas, ov, partial, gamma, encoding, backend, 0.0, states, g)


# Hadamard test for post-selected states --------------------------------------------

@dataclass(frozen=True)
class HadamardLayout:
    """Wire assignment of the Hadamard-test register.

    The control h comes first, then the two top ancillas, the shared system
    and the two bottom ancillas, so each ancilla sits next to the end of the
    chain it is entangled with.
    """

    h: int
    a: tuple[int, int]
    b: tuple[int, int]
    phi_map: tuple[int, ...]
    psi_map: tuple[int, ...]
    dims: tuple[int, ...]


def hadamard_layout(prep_dims: Sequence[int], ancillas: tuple[int, int]) -> HadamardLayout:
    """Place two preparation circuits sharing their non-ancilla wires."""
    k = len(prep_dims)
    sys_wires = [w for w in range(k) if w not in ancillas]
    ns = len(sys_wires)
    a, b = (1, 3 + ns), (2, 4 + ns)
    phi_map, psi_map = [0] * k, [0] * k
    for i, w in enumerate(ancillas):
        phi_map[w], psi_map[w] = a[i], b[i]
    for i, w in enumerate(sys_wires):
        phi_map[w] = psi_map[w] = 3 + i
    top, bot = prep_dims[ancillas[0]], prep_dims[ancillas[1]]
    dims = (top, top, top) + tuple(prep_dims[w] for w in sys_wires) + (bot, bot)
    return HadamardLayout(0, a, b, tuple(phi_map), tuple(psi_map), dims)


def _flip(d: int) -> G.Gate:
    # phase-free |0> <-> |1>; X01 itself would attach a factor -i
    m = np.eye(d, dtype=complex)
    m[:2, :2] = [[0, 1], [1, 0]]
    return G.unitary_gate(m, (d,), "FLIP01" if d == 3 else "FLIP", n_pulses=1)


def _local_gates(d: int) -> dict[str, Callable]:
    if d == 3:
        return {"H": G.h01, "X": lambda: _flip(3), "SDG": G.s01_dagger, "RZ": G.rz01}
    return {"H": G.qubit_h, "X": lambda: _flip(2), "SDG": G.qubit_sdg, "RZ": G.qubit_rz}


def _controlled_circuit(circ: QuditCircuit, mapping: Sequence[int], out: QuditCircuit, h: int) -> None:
    dh = out.dims[h]
    for op in circ.ops:
        out.append(G.controlled(op.gate, dh), (h,) + tuple(mapping[s] for s in op.sites))
    if circ.global_phase:
        out.append(_local_gates(dh)["RZ"](circ.global_phase), h)


def hadamard_circuit(u_phi: QuditCircuit, u_psi: QuditCircuit, ancillas: tuple[int, int],
                     x: int, y: int, imag: bool = False, ending: bool = True) -> tuple[QuditCircuit, HadamardLayout]:
    """Interference circuit whose (h=0, a=xx) probability encodes <psi_y|phi_x>.

    Branch h=0 holds |x x>_a |0>_s |0 0>_b; branch h=1 holds
    U_psi^dag U_phi |0 0>_a |0>_s |y y>_b.  ``ending=False`` stops before the
    final (S^dag) H on h.
    """
    if u_phi.dims != u_psi.dims:
        raise ValueError("preparation circuits must act on the same register")
    lay = hadamard_layout(u_phi.dims, ancillas)
    out = QuditCircuit(len(lay.dims), dims=lay.dims)
    h = lay.h
    gh = _local_gates(lay.dims[h])
    out.append(gh["H"](), h)
    for w in lay.a:
        ga = _local_gates(lay.dims[w])
        if x:
            out.append(ga["X"](), w)
            out.append(G.controlled(ga["X"](), lay.dims[h]), (h, w))
    for w in lay.b:
        if y:
            out.append(G.controlled(_local_gates(lay.dims[w])["X"](), lay.dims[h]), (h, w))
    _controlled_circuit(u_phi, lay.phi_map, out, h)
    _controlled_circuit(u_psi.inverse(), lay.psi_map, out, h)
    if not ending:
        return out, lay
    out.extend(_ending(lay.dims[h], imag).remapped((h,), out.n_sites, out.dims).ops)
    out.measure(h, 0)
    for i, w in enumerate(lay.a):
        out.measure(w, i + 1)
    return out, lay


def _outcome_probs(circuit: QuditCircuit, wires: Sequence[int], noise: NoiseParams | None,
                   shots: int | None, rng: np.random.Generator | None, max_bond: int) -> np.ndarray:
    if noise is None or noise.noise_rate == 0:
        from .statevector import marginal_probabilities
        p = marginal_probabilities(run_circuit(circuit), list(wires))
    else:
        rho = run_noisy(circuit, noise, max_bond=max_bond, strict=False)
        p = rho.marginal(list(wires))
    return _sample(np.clip(p, 0.0, None), shots, rng or np.random.default_rng(0))


def postselection_probs(prep: QuditCircuit, ancillas: tuple[int, int], noise: NoiseParams | None = None,
                        shots: int | None = None, rng=None, max_bond: int = 64) -> dict[int, float]:
    """Probabilities of the retained ancilla outcomes xx of a preparation circuit."""
    p = _outcome_probs(prep, ancillas, noise, shots, rng, max_bond)
    return {x: float(p[x, x]) for x in POSTSELECT}


def _ending(dh: int, imag: bool) -> QuditCircuit:
    gh = _local_gates(dh)
    c = QuditCircuit(1, dims=(dh,))
    if imag:
        c.append(gh["SDG"](), 0)
    return c.append(gh["H"](), 0)


def hadamard_probabilities(u_phi: QuditCircuit, u_psi: QuditCircuit, ancillas: tuple[int, int],
                           x: int, y: int, noise: NoiseParams | None = None,
                           max_bond: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Joint (h, a_top, a_bottom) outcome tables of the real and imaginary variants.

    Both variants share everything up to the final basis change on h, so the
    shared prefix is simulated once and the two endings are applied to the
    reduced state of (h, a).  Every gate of the test touches h, so the ending
    occupies its own schedule layer and the split is exact.
    """
    prefix, lay = hadamard_circuit(u_phi, u_psi, ancillas, x, y, ending=False)
    wires = (lay.h,) + lay.a
    if noise is None or noise.noise_rate == 0:
        t = np.moveaxis(run_circuit(prefix).tensor(), list(wires), [0, 1, 2])
        t = t.reshape(int(np.prod(t.shape[:3])), -1)
        red = t @ t.conj().T
        params = NOISELESS
    else:
        red = run_noisy(prefix, noise, max_bond=max_bond, strict=False).reduced(wires)
        params = noise
    dims = tuple(lay.dims[w] for w in wires)
    out = []
    for imag in (False, True):
        end = _ending(dims[0], imag).remapped((0,), 3, dims)
        rho = run_dense_noisy(end, params, red)
        out.append(np.clip(np.real(np.diag(rho)), 0.0, None).reshape(dims))
    return out[0], out[1]


def _sample(p: np.ndarray, shots: int | None, rng: np.random.Generator) -> np.ndarray:
    if not shots:
        return p
    return rng.multinomial(shots, p.ravel() / p.sum()).reshape(p.shape) / shots


def hadamard_terms(u_phi: QuditCircuit, u_psi: QuditCircuit, ancillas: tuple[int, int],
                   noise: NoiseParams | None = None, shots: int | None = None, seed: int = 0,
                   p_phi: dict | None = None, q_psi: dict | None = None,
                   max_bond: int = 64) -> tuple[np.ndarray, dict, dict]:
    """Estimate T[x, y] = <psi_y|phi_x> for x, y in {0, 1} from probabilities.

    prob(h=0, a=xx) = (1 + p_x + 2 Re T) / 4, and the S^dag variant gives
    Im T the same way.
    """
    rng = np.random.default_rng(seed)
    if p_phi is None:
        p_phi = postselection_probs(u_phi, ancillas, noise, shots, rng, max_bond)
    if q_psi is None:
        q_psi = postselection_probs(u_psi, ancillas, noise, shots, rng, max_bond)
    t = np.zeros((2, 2), dtype=complex)
    for x in POSTSELECT:
        for y in POSTSELECT:
            p_re, p_im = hadamard_probabilities(u_phi, u_psi, ancillas, x, y, noise, max_bond)
            p_re, p_im = _sample(p_re, shots, rng), _sample(p_im, shots, rng)
            t[x, y] = (4 * p_re[0, x, x] - 1 - p_phi[x]) / 2 + 1j * (4 * p_im[0, x, x] - 1 - p_phi[x]) / 2
    return t, p_phi, q_psi


def _combine(t: np.ndarray, p: dict, q: dict) -> complex:
    total = 0j
    for x in POSTSELECT:
        for y in POSTSELECT:
            if p[x] <= 0 or q[y] <= 0:
                warnings.warn(f"non-positive post-selection estimate (p_{x}={p[x]:.3g}, q_{y}={q[y]:.3g});"
                              " dropping term", RuntimeWarning, stacklevel=3)
                continue
            total += t[x, y] / np.sqrt(p[x] * q[y])
    return complex(total)


def hadamard_overlap(u_phi: QuditCircuit, u_psi: QuditCircuit, ancillas: tuple[int, int],
                     noise: NoiseParams | None = None, shots: int | None = None, seed: int = 0,
                     normalize: bool = True, max_bond: int = 64) -> complex:
    """<psi_t|phi_t> of two post-selected states from Hadamard-test probabilities.

    Each post-selected state is the equal superposition of its normalized xx
    branches.  With ``normalize`` the branch-combination norms are estimated
    with the same machinery (self tests) so the result is a proper overlap of
    unit vectors.
    """
    t, p, q = hadamard_terms(u_phi, u_psi, ancillas, noise, shots, seed, max_bond=max_bond)
    raw = _combine(t, p, q)
    if not normalize:
        return raw / 2
    n_phi = _self_norm(u_phi, ancillas, noise, shots, seed + 1, p, max_bond)
    n_psi = _self_norm(u_psi, ancillas, noise, shots, seed + 2, q, max_bond)
    return raw / (n_phi * n_psi)


def _self_norm(u: QuditCircuit, ancillas, noise, shots, seed, p, max_bond) -> float:
    t, _, _ = hadamard_terms(u, u, ancillas, noise, shots, seed, p, p, max_bond)
    val = _combine(t, p, p).real
    if val <= 0:
        warnings.warn("estimated state norm is not positive; leaving the overlap unnormalized",
                      RuntimeWarning, stacklevel=3)
        return float(np.sqrt(2.0))
    return float(np.sqrt(val))


def direct_overlap(u_phi: QuditCircuit, u_psi: QuditCircuit, ancillas: tuple[int, int]) -> complex:
    """Statevector oracle for ``hadamard_overlap``."""
    def combined(u):
        t = run_circuit(u).tensor()
        idx = [slice(None)] * t.ndim
        vecs = []
        for x in POSTSELECT:
            idx[ancillas[0]] = idx[ancillas[1]] = x
            v = t[tuple(idx)].reshape(-1)
            vecs.append(v / np.linalg.norm(v))
        v = sum(vecs)
        return v / np.linalg.norm(v)
    return complex(np.vdot(combined(u_psi), combined(u_phi)))


def berry_phase_hadamard(n: int, N: int, noise: NoiseParams | None = None, encoding: str = "qutrit",
                         shots: int | None = None, seed: int = 0, max_bond: int = 64,
                         normalize: bool = False) -> BerryRun:
    """gamma_N with every link overlap measured by the post-selected Hadamard test.

    Only the phases of the link overlaps enter gamma_N.  Without
    ``normalize`` the reported magnitudes are those of the branch-weighted
    combination divided by two (exact overlaps up to the branch cross terms);
    ``normalize`` spends one extra self test per node to divide out the norms.
    """
    thetas = partition(N)
    preps = [ladder_prep_circuit(n, th, encoding) for th in thetas]
    anc = ladder_layout(n, encoding).ancillas
    rng = np.random.default_rng(seed)
    probs = [postselection_probs(c, anc, noise, shots, rng, max_bond) for c in preps]
    norms = [_self_norm(c, anc, noise, shots, seed + 100 + j, probs[j], max_bond) if normalize else 1.0
             for j, c in enumerate(preps)]
    overlaps = []
    for j in range(N):
        k = (j + 1) % N
        t, _, _ = hadamard_terms(preps[k], preps[j], anc, noise, shots, seed + j, probs[k], probs[j], max_bond)
        raw = _combine(t, probs[k], probs[j])
        overlaps.append(raw / (norms[j] * norms[k]) if normalize else raw / 2)
    gamma, partial = phase_from_overlaps(overlaps, floor=0.0)
    rate = 0.0 if noise is None else noise.noise_rate
    return BerryRun(n, N, thetas, np.array(overlaps), partial, gamma, encoding, "hadamard", rate)
