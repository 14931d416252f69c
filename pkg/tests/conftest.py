import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def haar_unitary(d, rng):
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(dim, rng):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_circuit(n, depth, rng, two_site=True):
    from qutrit_aklt import gates as G
    from qutrit_aklt.circuit import QuditCircuit

    c = QuditCircuit(n)
    for _ in range(depth):
        for s in range(n):
            c.append(G.unitary_gate(haar_unitary(3, rng), (3,), n_pulses=6), s)
        if two_site and n > 1:
            a = int(rng.integers(n - 1))
            c.append(G.cnot(), (a, a + 1) if rng.random() < 0.5 else (a + 1, a))
    return c


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
