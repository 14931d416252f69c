"""Ternary outcome distributions from a binary (0 vs not-0) discriminator.

Each circuit variant appends X01 on a subset of sites and is read out with
the binary discriminator.  The full ternary vector follows from a recursion
over the last site:

    P_n(C, 0) = P_{n-1, c_n=0}(C)                    of the circuit as is
    P_n(C, 1) = P_{n-1, c_n=0}(C)                    with X01 on site n
    P_n(C, 2) = P_{n-1, c_n=1}(C) - P_n(C, 1)        of the circuit as is

down to a single site.  Branch probabilities are joint (not conditional),
so the reconstructed vector sums to one.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import gates as G
from .circuit import QuditCircuit
from .fidelity import hellinger_fidelity
from .noise import NoiseParams, run_dense_noisy
from .statevector import measure_probabilities, run_circuit

EXACT_ATOL = 1e-10
CLIP_SIGMAS = 3.0


class InconsistencyError(ValueError):
    """A reconstructed probability is negative beyond tolerance."""


@dataclass(frozen=True)
class BinaryReadoutModel:
    """Discriminator reporting 0 for |0> and 1 for both |1> and |2>.

    ``assignment_error`` flips each reported bit independently with that
    probability.  ``shots=None`` reads exact probabilities.
    """

    assignment_error: float = 0.0
    shots: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.assignment_error <= 0.5:
            raise ValueError("assignment_error must lie in [0, 0.5]")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive")


@dataclass
class TernaryDistribution:
    """Probabilities indexed by ternary strings, site 0 first."""

    probs: np.ndarray  # shape (3,) * n
    n_variants: int = 0
    sigma: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.probs.ndim

    def flat(self) -> np.ndarray:
        return self.probs.reshape(-1)

    def as_dict(self) -> dict[str, float]:
        return {"".join(map(str, idx)): float(self.probs[idx]) for idx in np.ndindex(self.probs.shape)}

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("string", "probability"))
        for s, p in self.as_dict().items():
            w.writerow((s, f"{p:.17g}"))
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def ternary_probabilities(circuit: QuditCircuit, noise: NoiseParams | None = None) -> np.ndarray:
    """Direct ternary outcome distribution, shape (3,) * n."""
    if noise is None:
        p = measure_probabilities(run_circuit(circuit))
    else:
        p = np.real(np.diag(run_dense_noisy(circuit, noise)))
    return np.clip(p, 0, None).reshape(circuit.dims)


def binary_probabilities(ternary: np.ndarray, assignment_error: float = 0.0) -> np.ndarray:
    """Merge outcomes 1 and 2 on every site, then apply symmetric bit flips."""
    b = ternary
    for ax in range(ternary.ndim):
        b = np.stack([np.take(b, 0, axis=ax), np.take(b, [1, 2], axis=ax).sum(axis=ax)], axis=ax)
    if assignment_error:
        e = assignment_error
        flip = np.array([[1 - e, e], [e, 1 - e]])
        for ax in range(b.ndim):
            b = np.moveaxis(np.tensordot(flip, b, axes=(1, ax)), 0, ax)
    return b


def with_x01(circuit: QuditCircuit, sites) -> QuditCircuit:
    out = circuit.copy()
    for s in sorted(sites):
        out.append(G.x01(), s)
    return out


def reconstruct_ternary(circuit: QuditCircuit, model: BinaryReadoutModel | None = None,
                        noise: NoiseParams | None = None,
                        runner: Callable[[QuditCircuit], np.ndarray] | None = None) -> TernaryDistribution:
    """Run the 2^n X01 variants through the binary readout and invert.

    ``runner`` maps a circuit to its ternary distribution; it defaults to the
    exact statevector (or dense noisy engine when ``noise`` is given).
    """
    model = BinaryReadoutModel() if model is None else model
    if any(d != 3 for d in circuit.dims):
        raise ValueError("readout reconstruction needs qutrit wires")
    n = circuit.n_sites
    rng = np.random.default_rng(model.seed)
    run = runner if runner is not None else (lambda c: ternary_probabilities(c, noise))
    cache: dict[frozenset, tuple[np.ndarray, np.ndarray]] = {}

    def variant(sites: frozenset):
        # binary distribution and its per-entry standard error
        if sites not in cache:
            b = binary_probabilities(run(with_x01(circuit, sites)), model.assignment_error)
            if model.shots is None:
                cache[sites] = (b, np.zeros_like(b))
            else:
                flat = b.reshape(-1)
                counts = rng.multinomial(model.shots, flat / flat.sum())
                f = (counts / model.shots).reshape(b.shape)
                cache[sites] = (f, np.sqrt(f * (1 - f) / model.shots))
        return cache[sites]

    def rec(k: int, appended: frozenset, tail: tuple[int, ...]):
        # ternary vector over sites < k, sites >= k post-selected on ``tail``
        if k == 0:
            b, s = variant(appended)
            return b[tail], s[tail] ** 2
        p0, v0 = rec(k - 1, appended, (0,) + tail)
        p1, v1 = rec(k - 1, appended | {k - 1}, (0,) + tail)
        q1, w1 = rec(k - 1, appended, (1,) + tail)
        return np.stack([p0, p1, q1 - p1], axis=-1), np.stack([v0, v1, w1 + v1], axis=-1)

    probs, var = rec(n, frozenset(), ())
    probs, sigma = np.asarray(probs, dtype=float), np.sqrt(np.asarray(var, dtype=float))
    if len(cache) != 2 ** n:
        raise AssertionError(f"recursion issued {len(cache)} variants, expected {2 ** n}")
    tol = EXACT_ATOL if model.shots is None else None
    if tol is not None:
        if probs.min() < -tol and not model.assignment_error:
            raise InconsistencyError(f"reconstructed probability {probs.min():.3e} < 0")
    else:
        bad = probs < -CLIP_SIGMAS * sigma - EXACT_ATOL
        if bad.any():
            raise InconsistencyError(f"{int(bad.sum())} entries below -{CLIP_SIGMAS:g} sigma")
        probs = np.clip(probs, 0, None)
        probs = probs / probs.sum()
    return TernaryDistribution(probs, len(cache), sigma)


def hellinger_score(p, q) -> float:
    """Hellinger fidelity of two distributions over the same strings."""
    p = p.flat() if isinstance(p, TernaryDistribution) else np.asarray(p).reshape(-1)
    q = q.flat() if isinstance(q, TernaryDistribution) else np.asarray(q).reshape(-1)
    if p.shape != q.shape:
        raise ValueError("distributions have different supports")
    return hellinger_fidelity(p, q)

