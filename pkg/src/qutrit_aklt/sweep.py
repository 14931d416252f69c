"""Noisy ladder preparation: post-selected two-norm fidelities and sweeps.

The post-selected state is obtained by applying the (non-unitary) map
``K = sum_x p_x^{-1/2} <xx|`` on the two ancillas, which coherently combines
the retained branches exactly as in the noiseless construction, then
renormalizing.  ``p_x`` are the branch probabilities under the same noise.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .aklt import aklt_mps, mps_to_statevector
from .berry import POSTSELECT, QUBIT_CODE, ladder_layout, ladder_prep_circuit, obc_prep_circuit
from .fidelity import fidelity_per_site, hellinger_fidelity
from .mpo import DEFAULT_MAX_BOND, DEFAULT_TRUNC_TOL, DensityMPO, run_noisy
from .noise import NoiseParams

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("n", "noise_rate", "dd_strength", "encoding", "f2", "fidelity_per_site", "max_bond_hit")


def _open_pbc_tensors(n: int, theta: float) -> list[np.ndarray]:
    """PBC AKLT MPS as an open chain: bonds carry (running, closing) pairs.

    Returns per-site tensors of shape (left, 3, right); not normalized.
    """
    a = list(aklt_mps(n, "PBC", twist=theta).tensors)
    eye = np.eye(2)
    out = []
    for s, t in enumerate(a):
        # (sigma, l, r) -> (l c, sigma, r c'), identity on the closing index c
        big = np.einsum("slr,cd->lcsrd", t, eye).reshape(4, 3, 4)
        if s == 0:
            big = np.einsum("lcsr,lc->sr", big.reshape(2, 2, 3, 4), eye)[None]
        if s == n - 1:
            big = np.einsum("lsrd,rd->ls", big.reshape(4, 3, 2, 2), eye)[..., None]
        out.append(big)
    return out


def _encode_qubit(tensors: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Split each qutrit tensor into two qubit tensors under QUBIT_CODE."""
    out = []
    for t in tensors:
        dl, _, dr = t.shape
        first = np.zeros((dl, 2, dl * 2), dtype=complex)
        for b in range(2):
            first[:, b, b::2] = np.eye(dl)
        second = np.zeros((dl * 2, 2, dr), dtype=complex)
        for sigma, (b1, b2) in QUBIT_CODE.items():
            second[b1::2, b2, :] += t[:, sigma, :]
        out.extend([first, second])
    return out


def _basis_tensor(d: int, x: int) -> np.ndarray:
    v = np.zeros((1, d, 1), dtype=complex)
    v[0, x, 0] = 1.0
    return v


def mps_norm_sq(tensors: Sequence[np.ndarray]) -> float:
    env = np.ones((1, 1), dtype=complex)
    for t in tensors:
        env = np.einsum("ab,asc,bsd->cd", env, t.conj(), t)
    return float(np.real(env[0, 0]))


@dataclass(frozen=True)
class LadderFidelity:
    n: int
    theta: float
    encoding: str
    f2: float
    postselect_probs: tuple[float, float]
    max_bond_hit: bool
    max_discarded: float


def postselected_f2(rho: DensityMPO, n: int, theta: float, encoding: str) -> tuple[float, tuple[float, float]]:
    """Two-norm fidelity of the post-selected system state with the AKLT target."""
    lay = ladder_layout(n, encoding)
    top, bottom = lay.ancillas
    d = lay.dims[top]
    rho.restore_order()
    r_anc = rho.reduced((top, bottom)).reshape(d, d, d, d)
    p = {x: float(np.real(r_anc[x, x, x, x])) for x in POSTSELECT}
    if min(p.values()) <= 0:
        raise ValueError("post-selected branch has vanishing probability")
    sys_t = _open_pbc_tensors(n, theta)
    if encoding == "qubit":
        sys_t = _encode_qubit(sys_t)
    t_norm = mps_norm_sq(sys_t)
    num, den = 0.0 + 0.0j, 0.0 + 0.0j
    for x in POSTSELECT:
        for y in POSTSELECT:
            w = 1.0 / np.sqrt(p[x] * p[y])
            bra = [_basis_tensor(d, x)] + list(sys_t) + [_basis_tensor(d, x)]
            ket = [_basis_tensor(d, y)] + list(sys_t) + [_basis_tensor(d, y)]
            num += w * rho.sandwich(bra, ket)
            den += w * r_anc[x, x, y, y]
    f2 = float(np.real(num / den)) / t_norm
    return f2, (p[POSTSELECT[0]], p[POSTSELECT[1]])


def ladder_fidelity(n: int, params: NoiseParams, encoding: str = "qutrit", theta: float = 0.0,
                    max_bond: int = DEFAULT_MAX_BOND, trunc_tol: float = DEFAULT_TRUNC_TOL) -> LadderFidelity:
    """Run the noisy ladder preparation and score it against the AKLT state."""
    circ = ladder_prep_circuit(n, theta, encoding)
    rho = run_noisy(circ, params, max_bond=max_bond, trunc_tol=trunc_tol, strict=False)
    f2, probs = postselected_f2(rho, n, theta, encoding)
    return LadderFidelity(n, float(theta), encoding, f2, probs, bool(rho.max_bond_hit), float(rho.max_discarded))


OBC_MAX_N = 6


def obc_hellinger(n: int, b_left: int, b_right: int, params: NoiseParams, encoding: str = "qutrit",
                  max_bond: int = DEFAULT_MAX_BOND) -> tuple[float, float]:
    """Hellinger fidelity of a noisy OBC preparation after post-selection.

    Returns (fidelity, post-selection probability).  In the qubit encoding
    the non-code outcome ``11`` on any site is lumped into one leakage bin
    with zero ideal weight.
    """
    if n > OBC_MAX_N:
        raise ValueError(f"OBC scoring enumerates outcomes; n <= {OBC_MAX_N}")
    circ, keep = obc_prep_circuit(n, b_left, b_right, encoding)
    lay = ladder_layout(n, encoding)
    rho = run_noisy(circ, params, max_bond=max_bond, strict=False)
    top = lay.ancillas[0]
    wires = [w for sw in lay.site_wires for w in sw]
    joint = rho.marginal([top] + wires)[keep]
    p_keep = float(joint.sum())
    if encoding == "qutrit":
        got = joint.reshape(-1)
    else:
        t = joint.reshape((2, 2) * n)
        code = np.zeros((3,) * n)
        for digits in np.ndindex(*code.shape):
            code[digits] = t[tuple(b for d in digits for b in QUBIT_CODE[d])]
        got = np.append(code.reshape(-1), max(t.sum() - code.sum(), 0.0))
    got = np.clip(got, 0, None) / p_keep
    e = np.eye(2)
    ideal = np.abs(mps_to_statevector(aklt_mps(n, "OBC", e[b_left], e[b_right])).amplitudes) ** 2
    if encoding == "qubit":
        ideal = np.append(ideal, 0.0)
    return hellinger_fidelity(got / got.sum(), ideal), p_keep


@dataclass(frozen=True)
class SweepRow:
    n: int
    noise_rate: float
    dd_strength: float
    encoding: str
    f2: float
    fidelity_per_site: float
    max_bond_hit: bool


def _point(args) -> SweepRow:
    n, rate, dd, enc, base, theta, max_bond = args
    params = base.with_(noise_rate=rate, dd_strength=dd)
    res = ladder_fidelity(n, params, enc, theta, max_bond=max_bond)
    return SweepRow(n, rate, dd, enc, res.f2, fidelity_per_site(max(res.f2, 0.0), n), res.max_bond_hit)


def fidelity_sweep(ns: Iterable[int], noise_rates: Iterable[float], dd_strengths: Iterable[float] = (0.0,),
                   encodings: Iterable[str] = ("qutrit", "qubit"), base: NoiseParams | None = None,
                   theta: float = 0.0, max_bond: int = DEFAULT_MAX_BOND, threads: int = 1) -> list[SweepRow]:
    """Grid of ladder fidelities; rows come back in grid order regardless of ``threads``."""
    base = NoiseParams() if base is None else base
    grid = [(n, float(r), float(dd), enc, base, theta, max_bond)
            for enc in encodings for n in ns for r in noise_rates for dd in dd_strengths]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_point, grid))
    return [_point(g) for g in grid]


def rows_to_csv(rows: Sequence[SweepRow], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        d = asdict(r)
        w.writerow([d["n"], repr(d["noise_rate"]), repr(d["dd_strength"]), d["encoding"],
                    f"{d['f2']:.12g}", f"{d['fidelity_per_site']:.12g}", int(d["max_bond_hit"])])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
