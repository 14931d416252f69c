import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import haar_unitary, random_circuit, random_state
from qutrit_aklt import gates as G
from qutrit_aklt.berry import pbc2_pi_circuit
from qutrit_aklt.circuit import QuditCircuit
from qutrit_aklt.statevector import StateVector, apply_gate, measure_probabilities, run_circuit

s2 = 1 / np.sqrt(2)

# literal catalog matrices, written out by hand
X01 = np.array([[0, -1j, 0], [-1j, 0, 0], [0, 0, 1]])
X12 = np.array([[1, 0, 0], [0, 0, -1j], [0, -1j, 0]])
SX01 = np.array([[s2, -1j * s2, 0], [-1j * s2, s2, 0], [0, 0, 1]])
SX12 = np.array([[1, 0, 0], [0, s2, -1j * s2], [0, -1j * s2, s2]])
H01 = np.array([[s2, s2, 0], [s2, -s2, 0], [0, 0, 1]])
H12 = np.array([[1, 0, 0], [0, s2, s2], [0, s2, -s2]])

# CNOT truth table, (control, target) in -> {out: amplitude}
CNOT_TABLE = {
    (0, 0): {(0, 0): 1}, (0, 1): {(0, 1): 1}, (0, 2): {(0, 2): 1},
    (1, 0): {(1, 1): 1}, (1, 1): {(1, 0): 1}, (1, 2): {(1, 2): 1j},
    (2, 0): {(2, 0): s2, (2, 1): -s2},
    (2, 1): {(2, 0): -s2, (2, 1): -s2},
    (2, 2): {(2, 2): -1j},
}


def ket(*digits):
    return StateVector.basis(digits)


@pytest.mark.parametrize("gate,expected", [
    (G.x01(), X01), (G.x12(), X12), (G.sx01(), SX01), (G.sx12(), SX12), (G.h01(), H01), (G.h12(), H12),
])
def test_fixed_catalog_matrices(gate, expected):
    assert np.max(np.abs(gate.matrix - expected)) <= 1e-12


def test_rz_and_u01_matrices():
    phi = 0.731
    assert np.allclose(G.rz01(phi).matrix, np.diag([1, np.exp(1j * phi), 1]), atol=1e-15)
    assert np.allclose(G.rz12(phi).matrix, np.diag([1, 1, np.exp(1j * phi)]), atol=1e-15)
    th, ph, la = 0.4, 1.1, -0.3
    u = G.u01(th, ph, la).matrix
    assert np.allclose(u[:2, :2], [[np.cos(th / 2), -np.exp(1j * la) * np.sin(th / 2)],
                                   [np.exp(1j * ph) * np.sin(th / 2), np.exp(1j * (ph + la)) * np.cos(th / 2)]])
    assert u[2, 2] == 1 and not u[2, :2].any()


@pytest.mark.parametrize("cin", sorted(CNOT_TABLE))
def test_cnot_truth_table(cin):
    out = apply_gate(ket(*cin), G.cnot(), (0, 1)).amplitudes
    expected = np.zeros(9, dtype=complex)
    for (c, t), amp in CNOT_TABLE[cin].items():
        expected[3 * c + t] = amp
    assert np.max(np.abs(out - expected)) <= 1e-12


def test_cnot_parameters():
    a, b, c, d = G.cnot().params
    assert (a, b, c) == pytest.approx((s2, -s2, -s2), abs=1e-15)
    assert d == pytest.approx(-np.pi / 2)


def test_catalog_unitary_and_virtual_flags():
    cat = G.make_standard_gates()
    assert {"X01", "X12", "SX01", "SX12", "RZ01", "RZ12", "U01", "H01", "H12", "CNOT"} <= set(cat)
    for label, fn in cat.items():
        params = {"RZ01": (0.3,), "RZ12": (0.3,), "RZ": (0.3,), "U01": (0.1, 0.2, 0.3)}.get(label, ())
        g = fn(*params)
        assert g.is_unitary(), label
        if g.is_virtual:
            assert np.allclose(g.matrix, np.diag(np.diag(g.matrix)))


def test_virtual_gate_must_be_diagonal():
    with pytest.raises(ValueError):
        G.Gate("bad", np.eye(3)[[1, 0, 2]], is_virtual=True)


def test_x01_examples():
    s = apply_gate(ket(0), G.x01(), 0)
    assert np.allclose(s.amplitudes, [0, -1j, 0])
    s = apply_gate(s, G.x01(), 0)
    assert np.allclose(s.amplitudes, [-1, 0, 0])
    s = apply_gate(apply_gate(ket(0), G.sx01(), 0), G.sx01(), 0)
    assert np.allclose(s.amplitudes, [0, -1j, 0])
    assert np.allclose(apply_gate(ket(0), G.rz01(1.2), 0).amplitudes, [1, 0, 0])


def test_apply_gate_errors():
    with pytest.raises(ValueError):
        apply_gate(ket(0, 0), G.cnot(), (0,))
    with pytest.raises(ValueError):
        apply_gate(ket(0), G.cnot(), (0, 1))


def test_run_circuit_examples():
    assert np.allclose(run_circuit(QuditCircuit(2), ket(0, 0)).amplitudes, ket(0, 0).amplitudes)
    c = QuditCircuit(2).append(G.h01(), 0).append(G.cnot(), (0, 1))
    expected = np.zeros(9)
    expected[[0, 4]] = s2
    assert np.allclose(run_circuit(c).amplitudes, expected, atol=1e-12)


def test_two_site_pi_state_single_entangler():
    c = pbc2_pi_circuit()
    assert c.count_entanglers() == 1
    out = run_circuit(c).amplitudes
    target = np.zeros(9)
    target[2], target[6] = s2, -s2
    assert abs(abs(np.vdot(target, out)) - 1) < 1e-12


def test_measure_probabilities_examples():
    assert np.allclose(measure_probabilities(ket(0, 0, 0)), np.eye(27)[0])
    v = np.zeros(9)
    v[[2, 4, 6]] = [1, -1, 1]
    p = measure_probabilities(StateVector.from_amplitudes(v, normalize=True))
    assert np.allclose(p[[2, 4, 6]], 1 / 3) and abs(p.sum() - 1) < 1e-12
    assert np.allclose(measure_probabilities(StateVector.from_amplitudes(np.ones(3), normalize=True)), 1 / 3)


@given(st.integers(0, 2 ** 32 - 1))
def test_linearity(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(2, 2, rng)
    psi, phi = random_state(9, rng), random_state(9, rng)
    a, b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    u = c.unitary()
    lhs = u @ (a * psi + b * phi)
    rhs = a * run_circuit(c, StateVector(psi, (3, 3))).amplitudes + b * run_circuit(c, StateVector(phi, (3, 3))).amplitudes
    assert np.allclose(lhs, rhs, atol=1e-12)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3))
def test_composition_matches_product(seed, n):
    rng = np.random.default_rng(seed)
    g1, g2 = haar_unitary(3, rng), haar_unitary(3, rng)
    site = int(rng.integers(n))
    psi = StateVector(random_state(3 ** n, rng), (3,) * n)
    two = apply_gate(apply_gate(psi, G.unitary_gate(g1, (3,)), site), G.unitary_gate(g2, (3,)), site)
    one = apply_gate(psi, G.unitary_gate(g2 @ g1, (3,)), site)
    assert np.allclose(two.amplitudes, one.amplitudes, atol=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_norm_preserved(seed):
    rng = np.random.default_rng(seed)
    out = run_circuit(random_circuit(3, 3, rng))
    assert abs(out.norm() - 1) < 1e-10


def test_site_zero_most_significant():
    s = apply_gate(ket(0, 0), G.x01(), 0)
    assert abs(s.amplitudes[3]) == pytest.approx(1)


def test_json_roundtrip():
    c = QuditCircuit(3)
    c.append(G.h01(), 0).append(G.rz12(0.25), 1).append(G.cnot(), (0, 1)).append(G.u01(0.1, 0.2, 0.3), 2)
    c.measure(0, 0)
    doc = json.loads(c.to_json())
    assert doc["n_sites"] == 3
    assert [op["gate"] for op in doc["ops"]] == ["H01", "RZ12", "CNOT", "U01"]
    assert doc["ops"][2]["sites"] == [0, 1]
    back = QuditCircuit.from_json(c.to_json())
    assert np.allclose(back.unitary(), c.unitary(), atol=1e-14)


def test_json_embeds_noncatalog_matrix(rng):
    c = random_circuit(2, 1, rng)
    back = QuditCircuit.from_json(c.to_json())
    assert np.allclose(back.unitary(), c.unitary(), atol=1e-14)


def test_invalid_sites():
    c = QuditCircuit(2)
    with pytest.raises(ValueError):
        c.append(G.x01(), 2)
    with pytest.raises(ValueError):
        c.append(G.cnot(), (1, 1))


def test_inverse(rng):
    c = random_circuit(2, 2, rng)
    assert np.allclose(c.inverse().unitary() @ c.unitary(), np.eye(9), atol=1e-12)
