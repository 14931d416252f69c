"""Density matrices as matrix product operators.

Each site tensor has shape ``(left, d*d, right)`` where the middle index is
the row-major pair ``ket * d + bra``.  The MPO is kept in mixed canonical
form with respect to the Hilbert-Schmidt inner product so SVD truncations are
optimal.

Non-adjacent gates are routed with noiseless swaps.  Routed wires stay where
they were moved, so ``order`` records which logical wire sits at each
position; every public method takes logical wire indices.
"""

from __future__ import annotations

import logging
from itertools import product
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .circuit import QuditCircuit
from .noise import NoiseParams, Superoperator, cached_superop, idle_channel, schedule

log = logging.getLogger(__name__)

DEFAULT_MAX_BOND = 64
DEFAULT_TRUNC_TOL = 1e-10


class TruncationError(RuntimeError):
    """Keeping ``trunc_tol`` would need a bond larger than ``max_bond``."""


def _swap_tensor(d1: int, d2: int) -> np.ndarray:
    # out (wire2, wire1) <- in (wire1, wire2)
    return np.einsum("ae,bc->abce", np.eye(d2 * d2), np.eye(d1 * d1))


def _svd(m: np.ndarray):
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # divide-and-conquer occasionally fails to converge; QR-based gesvd is slower but robust
        return sla.svd(m, full_matrices=False, lapack_driver="gesvd")


class DensityMPO:
    def __init__(self, tensors: Sequence[np.ndarray], dims: Sequence[int],
                 max_bond: int = DEFAULT_MAX_BOND, trunc_tol: float = DEFAULT_TRUNC_TOL,
                 strict: bool = True):
        self.tensors = [np.asarray(t, dtype=complex) for t in tensors]
        self.dims = tuple(dims)
        self.max_bond = max_bond
        self.trunc_tol = trunc_tol
        self.strict = strict
        # sites < _left are left-canonical, sites >= _right right-canonical
        self._left = 0
        self._right = len(self.tensors)
        self.order = list(range(len(self.tensors)))
        self.max_bond_hit = False
        self.max_discarded = 0.0

    @classmethod
    def product_state(cls, dims: Sequence[int], digits: Sequence[int] | None = None, **kw) -> DensityMPO:
        digits = [0] * len(dims) if digits is None else digits
        tensors = []
        for d, v in zip(dims, digits):
            t = np.zeros((1, d * d, 1), dtype=complex)
            t[0, v * d + v, 0] = 1.0
            tensors.append(t)
        out = cls(tensors, dims, **kw)
        out._left, out._right = 0, 1
        return out

    @classmethod
    def from_dense(cls, rho: np.ndarray, dims: Sequence[int], **kw) -> DensityMPO:
        n = len(dims)
        t = rho.reshape(tuple(dims) * 2)
        t = np.transpose(t, [a for w in range(n) for a in (w, n + w)]).reshape(1, -1)
        tensors = []
        for k, d in enumerate(dims[:-1]):
            t = t.reshape(t.shape[0] * d * d, -1)
            q, r = np.linalg.qr(t)
            tensors.append(q.reshape(-1, d * d, q.shape[1]))
            t = r
        tensors.append(t.reshape(t.shape[0], dims[-1] ** 2, 1))
        out = cls(tensors, dims, **kw)
        out._left, out._right = n - 1, n
        return out

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    def position(self, wire: int) -> int:
        return self.order.index(wire)

    def wire_dims(self) -> tuple[int, ...]:
        out = [0] * self.n_sites
        for p, w in enumerate(self.order):
            out[w] = self.dims[p]
        return tuple(out)

    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    # canonical form ------------------------------------------------------------

    def _orthogonalize(self, lo: int, hi: int) -> None:
        """Make every site outside [lo, hi] canonical towards the block."""
        while self._left < lo:
            k = self._left
            t = self.tensors[k]
            q, r = np.linalg.qr(t.reshape(-1, t.shape[2]))
            self.tensors[k] = q.reshape(t.shape[0], t.shape[1], q.shape[1])
            self.tensors[k + 1] = np.tensordot(r, self.tensors[k + 1], axes=(1, 0))
            self._left += 1
        while self._right > hi + 1:
            k = self._right - 1
            t = self.tensors[k]
            q, r = np.linalg.qr(t.reshape(t.shape[0], -1).conj().T)
            self.tensors[k] = q.conj().T.reshape(q.shape[1], t.shape[1], t.shape[2])
            self.tensors[k - 1] = np.tensordot(self.tensors[k - 1], r.conj().T, axes=(2, 0))
            self._right -= 1
        self._left = min(self._left, lo)
        self._right = max(self._right, hi + 1)

    def _split(self, theta: np.ndarray, lo: int, k: int) -> None:
        """Write the merged block ``theta`` (left, p_lo..p_{lo+k-1}, right) back."""
        dl = theta.shape[0]
        rest = theta
        for j in range(k - 1):
            p = rest.shape[1]
            m = rest.reshape(dl * p, -1)
            u, s, vh = _svd(m)
            chi = self._bond_size(s)
            u, s, vh = u[:, :chi], s[:chi], vh[:chi]
            self.tensors[lo + j] = u.reshape(dl, p, chi)
            rest = (s[:, None] * vh).reshape((chi,) + rest.shape[2:])
            dl = chi
        self.tensors[lo + k - 1] = rest.reshape(dl, rest.shape[1], -1)
        self._left = lo + k - 1
        self._right = lo + k

    def _bond_size(self, s: np.ndarray) -> int:
        total = float(np.sum(s ** 2))
        if total == 0.0:
            return 1
        # tail[c] = relative weight discarded when keeping c values
        tail = np.concatenate([np.cumsum((s ** 2)[::-1])[::-1], [0.0]]) / total
        chi = int(np.argmax(np.sqrt(tail) <= self.trunc_tol))
        chi = max(chi, 1)
        if chi > self.max_bond:
            if self.strict:
                raise TruncationError(
                    f"bond of {chi} needed for trunc_tol={self.trunc_tol:g}, max_bond={self.max_bond}")
            self.max_bond_hit = True
            chi = self.max_bond
            log.debug("bond capped at %d (discarded %.3e)", chi, np.sqrt(tail[chi]))
        self.max_discarded = max(self.max_discarded, float(np.sqrt(tail[chi])))
        return chi

    # operations ------------------------------------------------------------------

    def apply_local(self, superop: np.ndarray, wire: int) -> None:
        """Single-site superoperator (d*d, d*d) on ``wire``."""
        p = self.position(wire)
        self.tensors[p] = np.einsum("pq,aqb->apb", superop, self.tensors[p])
        self._left = min(self._left, p)
        self._right = max(self._right, p + 1)

    def _apply_block(self, tensor: np.ndarray, lo: int, k: int) -> None:
        self._orthogonalize(lo, lo + k - 1)
        theta = self.tensors[lo]
        for j in range(1, k):
            theta = np.tensordot(theta, self.tensors[lo + j], axes=(theta.ndim - 1, 0))
        # theta: (left, p1..pk, right); tensor: (p1'..pk', p1..pk)
        theta = np.tensordot(tensor, theta, axes=(list(range(k, 2 * k)), list(range(1, k + 1))))
        theta = np.moveaxis(theta, k, 0)
        self._split(theta, lo, k)

    def swap(self, pos: int) -> None:
        """Exchange the wires at positions pos and pos+1."""
        d1, d2 = self.dims[pos], self.dims[pos + 1]
        self._apply_block(_swap_tensor(d1, d2), pos, 2)
        dims = list(self.dims)
        dims[pos], dims[pos + 1] = d2, d1
        self.dims = tuple(dims)
        self.order[pos], self.order[pos + 1] = self.order[pos + 1], self.order[pos]

    def apply_superop(self, sop: Superoperator, sites: Sequence[int]) -> None:
        sites = list(sites)
        k = len(sites)
        if k == 1:
            self.apply_local(sop.tensor.reshape(sop.tensor.shape[0], -1), sites[0])
            return
        # gather the trailing wires around their median, then bring the
        # leading wire (a control, typically) next to them
        rest = sites[1:]
        pos = sorted(self.position(w) for w in rest)
        m = len(pos) // 2
        for j in range(m - 1, -1, -1):
            for p in range(pos[j], pos[m] - m + j):
                self.swap(p)
        for j in range(m + 1, len(pos)):
            for p in range(pos[j] - 1, pos[m] - m + j - 1, -1):
                self.swap(p)
        first = pos[m] - m
        last = first + len(pos) - 1
        p0 = self.position(sites[0])
        if p0 < first:
            for p in range(p0, first - 1):
                self.swap(p)
            lo = first - 1
        else:
            for p in range(p0 - 1, last, -1):
                self.swap(p)
            lo = first
        block = self.order[lo:lo + k]
        perm = [sites.index(w) for w in block]
        t = np.transpose(sop.tensor, perm + [k + p for p in perm])
        self._apply_block(t, lo, k)

    # contractions ------------------------------------------------------------------

    def contract_local(self, mats: Sequence[np.ndarray | None]) -> complex:
        """sum rho[kets, bras] * prod_s M_s[ket_s, bra_s] (None = identity)."""
        mats = [mats[w] for w in self.order]
        env = np.ones(1, dtype=complex)
        for t, d, m in zip(self.tensors, self.dims, mats):
            v = (np.eye(d) if m is None else np.asarray(m)).reshape(-1)
            env = env @ np.tensordot(t, v, axes=(1, 0))
        return complex(env[0])

    def trace(self) -> float:
        return float(self.contract_local([None] * self.n_sites).real)

    def marginal(self, sites: Sequence[int]) -> np.ndarray:
        """Joint outcome probabilities of the listed wires (shape by dims)."""
        wd = self.wire_dims()
        shape = tuple(wd[s] for s in sites)
        out = np.zeros(shape)
        for outcome in product(*[range(d) for d in shape]):
            mats: list = [None] * self.n_sites
            for s, v in zip(sites, outcome):
                m = np.zeros((wd[s], wd[s]))
                m[v, v] = 1.0
                mats[s] = m
            out[outcome] = self.contract_local(mats).real
        return out

    def reduced(self, wires: Sequence[int]) -> np.ndarray:
        """Dense reduced density matrix of the listed wires (in that order)."""
        keep = {w: i for i, w in enumerate(wires)}
        env = np.ones((1, 1), dtype=complex)  # (kept pair indices, bond)
        kept_dims = []
        kept_order = []
        for t, d, w in zip(self.tensors, self.dims, self.order):
            if w in keep:
                env = np.einsum("kl,lpr->kpr", env, t).reshape(-1, t.shape[2])
                kept_dims.append(d)
                kept_order.append(keep[w])
            else:
                env = env @ np.tensordot(t, np.eye(d).reshape(-1), axes=(1, 0))
        k = len(wires)
        r = env.reshape(tuple(x for d in kept_dims for x in (d, d)))
        where = [kept_order.index(i) for i in range(k)]
        r = np.transpose(r, [2 * p for p in where] + [2 * p + 1 for p in where])
        dim = int(np.prod(kept_dims))
        return r.reshape(dim, dim)

    def sandwich(self, bra: Sequence[np.ndarray], ket: Sequence[np.ndarray]) -> complex:
        """<bra| rho |ket> for MPS given as per-wire tensors (left, d, right).

        The MPS bonds must be open (dimension one) wherever the routing has
        reordered wires; call ``restore_order`` first otherwise.
        """
        bra = [bra[w] for w in self.order]
        ket = [ket[w] for w in self.order]
        env = np.ones((1, 1, 1), dtype=complex)
        for t, d, b, k in zip(self.tensors, self.dims, bra, ket):
            tt = t.reshape(t.shape[0], d, d, t.shape[2])
            env = np.einsum("xay,xsz->zsay", env, b.conj())
            env = np.einsum("zsay,asrb->zrby", env, tt)
            env = np.einsum("zrby,yrw->zbw", env, k)
        return complex(env[0, 0, 0])

    def restore_order(self) -> None:
        """Swap wires back into logical order."""
        for i in range(self.n_sites):
            p = self.position(i)
            for q in range(p - 1, i - 1, -1):
                self.swap(q)

    def to_dense(self) -> np.ndarray:
        """Dense matrix with wires in logical order."""
        n = self.n_sites
        t = self.tensors[0]
        for u in self.tensors[1:]:
            t = np.tensordot(t, u, axes=(t.ndim - 1, 0))
        t = t.reshape(tuple(d for w in self.dims for d in (w, w)))
        where = [self.position(w) for w in range(n)]
        t = np.transpose(t, [2 * p for p in where] + [2 * p + 1 for p in where])
        dim = int(np.prod(self.dims))
        return t.reshape(dim, dim)


def run_noisy(circuit: QuditCircuit, params: NoiseParams, max_bond: int = DEFAULT_MAX_BOND,
              trunc_tol: float = DEFAULT_TRUNC_TOL, strict: bool = True,
              initial: DensityMPO | None = None) -> DensityMPO:
    """Evolve |0..0><0..0| (or ``initial``) through the noisy circuit."""
    rho = initial if initial is not None else DensityMPO.product_state(
        circuit.dims, max_bond=max_bond, trunc_tol=trunc_tol, strict=strict)
    for step in schedule(circuit, params):
        if step.op is not None:
            rho.apply_superop(cached_superop(step.op.gate, params), step.op.sites)
        else:
            d = rho.dims[step.wire]
            rho.apply_local(idle_channel(params, step.idle_time, d).superop(), step.wire)
    if rho.max_bond_hit:
        log.info("run_noisy: bond capped at %d, max discarded weight %.2e", rho.max_bond, rho.max_discarded)
    return rho
