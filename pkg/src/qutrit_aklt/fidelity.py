"""Fidelity measures between states and between outcome distributions."""

from __future__ import annotations

import numpy as np

QUANTUM_MAX_DIM = 3 ** 6
SUM_ATOL = 1e-6


def _as_density(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        return np.outer(x, x.conj())
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"expected a state vector or square matrix, got shape {x.shape}")
    return x


def _check_dist(p, name) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if abs(p.sum() - 1.0) > SUM_ATOL:
        raise ValueError(f"{name} sums to {p.sum():.8f}, not 1")
    return p


def hellinger_fidelity(p, q) -> float:
    """(sum_i sqrt(p_i q_i))^2.

    Slightly negative entries (mitigated or reconstructed data) are treated
    as zero.
    """
    p, q = _check_dist(p, "p"), _check_dist(q, "q")
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(np.sum(np.sqrt(np.clip(p, 0, None) * np.clip(q, 0, None))) ** 2)


def two_norm_fidelity(rho, sigma) -> float:
    """tr(rho sigma); accepts state vectors or density matrices."""
    r, s = _as_density(rho), _as_density(sigma)
    if r.shape != s.shape:
        raise ValueError(f"dimension mismatch: {r.shape} vs {s.shape}")
    # tr(r s) without forming the product; both summation orders so that
    # swapping the arguments gives the identical float
    return float(np.real(np.sum(r * s.T) + np.sum(s * r.T)) / 2)


def quantum_fidelity(rho, sigma) -> float:
    """(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, dense, dimension <= 3^6."""
    r, s = _as_density(rho), _as_density(sigma)
    if r.shape != s.shape:
        raise ValueError(f"dimension mismatch: {r.shape} vs {s.shape}")
    if r.shape[0] > QUANTUM_MAX_DIM:
        raise ValueError(f"quantum fidelity limited to dimension {QUANTUM_MAX_DIM}")
    rho_vec, sig_vec = np.asarray(rho).ndim == 1, np.asarray(sigma).ndim == 1
    if rho_vec or sig_vec:
        # a pure argument reduces to an expectation value
        v = np.asarray(rho if rho_vec else sigma, dtype=complex)
        m = s if rho_vec else r
        return float(np.real(v.conj() @ m @ v))
    # eigen-decomposition keeps sqrt(rho) Hermitian and PSD
    w, u = np.linalg.eigh((r + r.conj().T) / 2)
    sq = (u * np.sqrt(np.clip(w, 0, None))) @ u.conj().T
    inner = sq @ s @ sq
    ev = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(np.sum(np.sqrt(np.clip(ev, 0, None))) ** 2)


def fidelities(rho, sigma, p=None, q=None) -> dict[str, float]:
    """All three measures.  ``p``/``q`` default to the diagonals of the states."""
    r, s = _as_density(rho), _as_density(sigma)
    if r.shape != s.shape:
        raise ValueError(f"dimension mismatch: {r.shape} vs {s.shape}")
    p = np.real(np.diag(r)) if p is None else p
    q = np.real(np.diag(s)) if q is None else q
    out = {"hellinger": hellinger_fidelity(p, q), "two_norm": two_norm_fidelity(rho, sigma)}
    if r.shape[0] <= QUANTUM_MAX_DIM:
        out["quantum"] = quantum_fidelity(rho, sigma)
    return out


def fidelity_per_site(f2: float, n: int) -> float:
    """n-th root of a two-norm fidelity."""
    if n < 1:
        raise ValueError("n must be positive")
    if f2 < 0:
        raise ValueError("fidelity must be non-negative")
    return float(f2 ** (1.0 / n))

