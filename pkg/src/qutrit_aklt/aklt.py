"""Spin-1 AKLT chains: Hamiltonians, exact diagonalization, MPS ground states.

Qutrit labels map onto spin projections as |0> = m=+1, |1> = m=0, |2> = m=-1.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .statevector import StateVector

DEGENERACY_GAP = 1e-9
DEFAULT_EPSILON = 1e-3


class DegenerateGroundStateError(RuntimeError):
    """Raised when the lowest two levels are closer than ``DEGENERACY_GAP``.

    Degenerate multiplets need the non-Abelian treatment of Hatsugai; a small
    positive ``epsilon`` usually lifts the degeneracy of short periodic chains.
    """


@dataclass(frozen=True)
class Spin1Ops:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray

    @property
    def splus(self) -> np.ndarray:
        return self.sx + 1j * self.sy

    @property
    def sminus(self) -> np.ndarray:
        return self.sx - 1j * self.sy


def spin1_ops() -> Spin1Ops:
    sp_ = np.sqrt(2) * np.diag([1.0, 1.0], 1).astype(complex)
    sm = sp_.conj().T
    return Spin1Ops(sx=(sp_ + sm) / 2, sy=(sp_ - sm) / 2j, sz=np.diag([1.0, 0.0, -1.0]).astype(complex))


@dataclass(frozen=True)
class HamiltonianSpec:
    """Parameters of a (possibly twisted) AKLT chain.

    ``perturbed_bond = j`` twists the bond between sites ``j`` and ``j + 1``
    (mod n for PBC); ``None`` picks the last bond.  ``single_ion_d`` adds
    ``D * sum_i (S^z_i)^2``, which drives the chain into the trivial phase.
    """

    n: int
    boundary: str = "PBC"
    theta: float = 0.0
    perturbed_bond: int | None = None
    epsilon: float = DEFAULT_EPSILON
    twist_quartic: bool = True
    single_ion_d: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("chain length must be at least 2")
        if self.boundary not in ("OBC", "PBC"):
            raise ValueError(f"boundary must be OBC or PBC, got {self.boundary!r}")
        if not 0 <= self.theta < 2 * np.pi + 1e-12:
            raise ValueError("theta must lie in [0, 2pi]")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        nb = self.n_bonds
        if self.perturbed_bond is not None and not 0 <= self.perturbed_bond < nb:
            raise ValueError(f"perturbed_bond must be in [0, {nb})")

    @property
    def n_bonds(self) -> int:
        return self.n if self.boundary == "PBC" else self.n - 1

    @property
    def twisted_bond(self) -> int:
        return self.n_bonds - 1 if self.perturbed_bond is None else self.perturbed_bond

    def bonds(self) -> list[tuple[int, int]]:
        return [(i, (i + 1) % self.n) for i in range(self.n_bonds)]

    def with_theta(self, theta: float) -> HamiltonianSpec:
        d = asdict(self)
        d["theta"] = float(theta) % (2 * np.pi)
        return HamiltonianSpec(**d)

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> HamiltonianSpec:
        return cls(**json.loads(text))


def _site_op(ops: dict[int, np.ndarray], n: int) -> sp.csr_matrix:
    eye = sp.identity(3, dtype=complex, format="csr")
    return reduce(lambda a, b: sp.kron(a, b, format="csr"),
                  [sp.csr_matrix(ops[k]) if k in ops else eye for k in range(n)])


def bond_bilinear(i: int, j: int, n: int, theta: float = 0.0) -> sp.csr_matrix:
    """S_i . S_j with the transverse part twisted by ``exp(+-i theta)``."""
    s = spin1_ops()
    return (np.exp(1j * theta) * _site_op({i: s.splus, j: s.sminus}, n)
            + np.exp(-1j * theta) * _site_op({i: s.sminus, j: s.splus}, n)) / 2 \
        + _site_op({i: s.sz, j: s.sz}, n)


def build_hamiltonian(spec: HamiltonianSpec, sparse: bool = False):
    """Sum over bonds of ``S.S + (1/3 - eps)(S.S)^2`` with one twisted bond."""
    n = spec.n
    h = sp.csr_matrix((3 ** n, 3 ** n), dtype=complex)
    quartic = 1.0 / 3.0 - spec.epsilon
    twist = spec.theta % (2 * np.pi)
    for b, (i, j) in enumerate(spec.bonds()):
        theta = twist if b == spec.twisted_bond else 0.0
        ss = bond_bilinear(i, j, n, theta)
        ss_q = ss if spec.twist_quartic else bond_bilinear(i, j, n, 0.0)
        h = h + ss + quartic * (ss_q @ ss_q)
    if spec.single_ion_d:
        sz2 = spin1_ops().sz @ spin1_ops().sz
        for i in range(n):
            h = h + spec.single_ion_d * _site_op({i: sz2}, n)
    h = (h + h.conj().T) / 2
    return h if sparse else h.toarray()


def fix_phase(vec: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Rotate so the first largest-magnitude amplitude is real positive."""
    mags = np.abs(vec)
    k = int(np.argmax(mags >= mags.max() * (1 - rtol)))
    return vec * np.exp(-1j * np.angle(vec[k]))


def ground_state_ed(spec: HamiltonianSpec) -> tuple[float, StateVector]:
    """Lowest eigenpair; raises on a degenerate ground space."""
    if spec.n > 10:
        raise ValueError("exact diagonalization is limited to n <= 10")
    if spec.n <= 6:
        w, v = np.linalg.eigh(build_hamiltonian(spec))
        w, v = w[:2], v[:, :2]
    else:
        w, v = spla.eigsh(build_hamiltonian(spec, sparse=True), k=2, which="SA", tol=1e-13)
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    if w[1] - w[0] < DEGENERACY_GAP:
        raise DegenerateGroundStateError(
            f"ground space degenerate (gap {w[1] - w[0]:.2e}) for {spec}; increase epsilon "
            "or see Hatsugai's treatment of degenerate multiplets")
    g = v[:, 0] / np.linalg.norm(v[:, 0])
    return float(w[0]), StateVector(fix_phase(g), (3,) * spec.n)


def time_reversal(n: int) -> np.ndarray:
    """Unitary part ``exp(-i pi sum S^y)`` of the antiunitary Theta = U K."""
    s = spin1_ops()
    w, v = np.linalg.eigh(s.sy)
    ry = v @ np.diag(np.exp(-1j * np.pi * w)) @ v.conj().T
    return reduce(np.kron, [ry] * n)


# matrix product states ---------------------------------------------------------

_SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
_SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
_TAU_Z = np.diag([1.0, -1.0]).astype(complex)


def aklt_tensors() -> np.ndarray:
    """A[sigma] stacked as shape (3, 2, 2); left-normalized (sum A^dag A = 1)."""
    return np.stack([-np.sqrt(2 / 3) * _SIGMA_MINUS, -np.sqrt(1 / 3) * _TAU_Z, np.sqrt(2 / 3) * _SIGMA_PLUS])


@dataclass(frozen=True)
class MpsState:
    tensors: tuple[np.ndarray, ...]
    boundary: str = "PBC"
    b_left: np.ndarray | None = None
    b_right: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.tensors)


def aklt_mps(n: int, boundary: str = "PBC", b_left=None, b_right=None,
             twist: float = 0.0, twist_bond: int | None = None) -> MpsState:
    """AKLT MPS; ``twist`` inserts diag(1, e^{-i twist}) on a virtual bond.

    The inserted matrix reproduces the ground state of the chain whose bond
    ``twist_bond`` (default: the closing bond) carries the spin twist.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    a = aklt_tensors()
    tensors = [a.copy() for _ in range(n)]
    if twist:
        bond = n - 1 if twist_bond is None else twist_bond
        r = np.diag([1.0, np.exp(-1j * twist)])
        tensors[bond] = np.einsum("sab,bc->sac", tensors[bond], r)
    if boundary == "OBC":
        b_left = np.array([1.0, 0.0]) if b_left is None else np.asarray(b_left, dtype=complex)
        b_right = np.array([1.0, 0.0]) if b_right is None else np.asarray(b_right, dtype=complex)
        return MpsState(tuple(tensors), "OBC", b_left, b_right)
    if boundary != "PBC":
        raise ValueError("boundary must be OBC or PBC")
    return MpsState(tuple(tensors), "PBC")


def mps_to_statevector(m: MpsState, normalize: bool = True) -> StateVector:
    if m.n > 12:
        raise ValueError("dense conversion limited to n <= 12")
    # carry an open (left, right) virtual pair through the chain
    env = m.tensors[0]  # (sigma..., a, b)
    for t in m.tensors[1:]:
        env = np.einsum("...ab,sbc->...sac", env, t)
    if m.boundary == "PBC":
        amps = np.trace(env, axis1=-2, axis2=-1)
    else:
        amps = np.einsum("a,...ab,b->...", m.b_left, env, m.b_right)
    amps = amps.reshape(-1)
    if normalize:
        nrm = np.linalg.norm(amps)
        if nrm < 1e-14:
            raise ValueError("MPS contraction has zero norm")
        amps = amps / nrm
    return StateVector(amps, (3,) * m.n)


def obc_boundary_states(n: int) -> list[StateVector]:
    """The four OBC ground states with boundary vectors in {e0, e1}^2."""
    e = np.eye(2)
    return [mps_to_statevector(aklt_mps(n, "OBC", e[l], e[r])) for l, r in itertools.product(range(2), repeat=2)]


def export_state_csv(state: StateVector, path) -> None:
    with open(path, "w") as fh:
        fh.write("index,re,im\n")
        for k, a in enumerate(state.amplitudes):
            fh.write(f"{k},{a.real:.17g},{a.imag:.17g}\n")
