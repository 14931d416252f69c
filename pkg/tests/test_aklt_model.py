import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qutrit_aklt.aklt import (DegenerateGroundStateError, HamiltonianSpec, aklt_mps, aklt_tensors,
                              build_hamiltonian, export_state_csv, ground_state_ed, mps_to_statevector,
                              obc_boundary_states, spin1_ops, time_reversal)

IDX_02, IDX_11, IDX_20 = 2, 4, 6


def test_spin1_algebra():
    s = spin1_ops()
    comm = lambda a, b: a @ b - b @ a
    assert np.max(np.abs(comm(s.sx, s.sy) - 1j * s.sz)) < 1e-12
    assert np.max(np.abs(comm(s.sy, s.sz) - 1j * s.sx)) < 1e-12
    assert np.max(np.abs(comm(s.sz, s.sx) - 1j * s.sy)) < 1e-12
    assert np.max(np.abs(s.sx @ s.sx + s.sy @ s.sy + s.sz @ s.sz - 2 * np.eye(3))) < 1e-12
    # |0> is m=+1
    assert np.allclose(np.diag(s.sz), [1, 0, -1])


def test_n2_theta0_ground_state():
    _, psi = ground_state_ed(HamiltonianSpec(2, "PBC", 0.0, epsilon=1e-3))
    expected = np.zeros(9)
    expected[[IDX_02, IDX_11, IDX_20]] = np.array([1, -1, 1]) / np.sqrt(3)
    assert np.allclose(psi.amplitudes, expected, atol=1e-8)


def test_n2_theta_pi_ground_state():
    _, psi = ground_state_ed(HamiltonianSpec(2, "PBC", np.pi, epsilon=1e-3))
    expected = np.zeros(9)
    expected[[IDX_02, IDX_20]] = np.array([1, -1]) / np.sqrt(2)
    assert abs(abs(np.vdot(expected, psi.amplitudes)) - 1) < 1e-8
    assert abs(psi.amplitudes[IDX_11]) < 1e-8


@pytest.mark.parametrize("theta", np.linspace(0, 2 * np.pi, 13))
def test_alpha_equals_gamma(theta):
    _, psi = ground_state_ed(HamiltonianSpec(2, "PBC", theta % (2 * np.pi), epsilon=1e-3))
    a = psi.amplitudes
    assert abs(abs(a[IDX_02]) - abs(a[IDX_20])) < 1e-10


def test_obc_ground_energy():
    h = build_hamiltonian(HamiltonianSpec(4, "OBC", 0.0, epsilon=0.0))
    w = np.linalg.eigvalsh(h)
    assert w[0] == pytest.approx(-2.0, abs=1e-10)
    # four-fold degenerate
    assert np.allclose(w[:4], -2.0, atol=1e-10) and w[4] > -2.0 + 1e-3


def test_degeneracy_error():
    with pytest.raises(DegenerateGroundStateError):
        ground_state_ed(HamiltonianSpec(4, "OBC", 0.0, epsilon=0.0))


@pytest.mark.parametrize("spec", [
    HamiltonianSpec(2, "PBC", 0.3), HamiltonianSpec(3, "PBC", 2.0), HamiltonianSpec(3, "OBC", 1.0, perturbed_bond=0),
    HamiltonianSpec(4, "PBC", 4.0, twist_quartic=False), HamiltonianSpec(3, "PBC", 1.0, single_ion_d=2.0),
])
def test_hermitian(spec):
    h = build_hamiltonian(spec)
    assert np.max(np.abs(h - h.conj().T)) <= 1e-12


def test_theta_periodicity():
    h0 = build_hamiltonian(HamiltonianSpec(3, "PBC", 0.0))
    h2 = build_hamiltonian(HamiltonianSpec(3, "PBC", 2 * np.pi))
    assert np.array_equal(h0, h2)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("theta", [0.0, 0.9, np.pi, 5.1])
def test_time_reversal_symmetry(n, theta):
    h = build_hamiltonian(HamiltonianSpec(n, "PBC", theta))
    u = time_reversal(n)
    assert np.max(np.abs(u @ h.conj() @ u.conj().T - h)) < 1e-12


def test_spec_validation():
    with pytest.raises(ValueError):
        HamiltonianSpec(1)
    with pytest.raises(ValueError):
        HamiltonianSpec(3, "PBC", -0.1)
    with pytest.raises(ValueError):
        HamiltonianSpec(3, "OBC", perturbed_bond=2)
    with pytest.raises(ValueError):
        HamiltonianSpec(3, epsilon=-1)


def test_spec_json_roundtrip():
    spec = HamiltonianSpec(5, "OBC", 1.25, perturbed_bond=2, epsilon=1e-4)
    assert HamiltonianSpec.from_json(spec.to_json()) == spec
    assert json.loads(spec.to_json())["theta"] == 1.25


def test_mps_tensors_left_normalized():
    a = aklt_tensors()
    assert np.allclose(np.einsum("sab,sac->bc", a.conj(), a), np.eye(2), atol=1e-14)


def test_mps_n2_hand_contraction():
    v = mps_to_statevector(aklt_mps(2, "PBC")).amplitudes
    ratio = v[[IDX_02, IDX_11, IDX_20]] / v[IDX_02]
    assert np.allclose(ratio, [1, -1, 1], atol=1e-14)
    assert np.allclose(np.delete(v, [IDX_02, IDX_11, IDX_20]), 0)


def test_mps_n3_000_vanishes():
    v = mps_to_statevector(aklt_mps(3, "PBC"), normalize=False).amplitudes
    assert v[0] == 0


@pytest.mark.parametrize("n", range(2, 7))
def test_mps_matches_ed(n):
    _, psi = ground_state_ed(HamiltonianSpec(n, "PBC", 0.0, epsilon=1e-6))
    m = mps_to_statevector(aklt_mps(n, "PBC"))
    assert abs(np.vdot(psi.amplitudes, m.amplitudes)) >= 1 - 1e-9


@pytest.mark.parametrize("theta", [0.7, 2.5, 4.0])
def test_twisted_mps_matches_twisted_ed(theta):
    _, psi = ground_state_ed(HamiltonianSpec(3, "PBC", theta, epsilon=1e-7))
    m = mps_to_statevector(aklt_mps(3, "PBC", twist=theta))
    assert abs(np.vdot(psi.amplitudes, m.amplitudes)) >= 1 - 1e-9


def test_obc_boundary_states_independent_and_ground():
    states = obc_boundary_states(2)
    mat = np.array([s.amplitudes for s in states])
    assert np.linalg.matrix_rank(mat, tol=1e-10) == 4
    for n in (2, 3, 4):
        h = build_hamiltonian(HamiltonianSpec(n, "OBC", 0.0, epsilon=0.0))
        e0 = np.linalg.eigvalsh(h)[0]
        for s in obc_boundary_states(n):
            assert np.real(np.vdot(s.amplitudes, h @ s.amplitudes)) == pytest.approx(e0, abs=1e-10)


def test_zero_norm_mps_raises():
    with pytest.raises(ValueError):
        mps_to_statevector(aklt_mps(2, "OBC", np.zeros(2), np.array([1.0, 0.0])))


@given(st.floats(0, 2 * np.pi - 1e-9))
def test_ground_state_phase_convention(theta):
    _, psi = ground_state_ed(HamiltonianSpec(2, "PBC", theta, epsilon=1e-3))
    a = psi.amplitudes
    k = int(np.argmax(np.abs(a) >= np.abs(a).max() * (1 - 1e-9)))
    assert abs(a[k].imag) < 1e-12 and a[k].real > 0
    assert abs(np.linalg.norm(a) - 1) < 1e-12


def test_export_state_csv(tmp_path):
    _, psi = ground_state_ed(HamiltonianSpec(2, "PBC", 0.0))
    path = tmp_path / "gs.csv"
    export_state_csv(psi, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,re,im" and len(lines) == 10
    k, re, im = lines[1 + IDX_02].split(",")
    assert int(k) == IDX_02 and float(re) == pytest.approx(1 / np.sqrt(3), abs=1e-8)
