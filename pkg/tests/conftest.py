import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bangbang.spinsys import Species, SpinSystem

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_unitary(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def hetero_pair(offsets=(250.0, -150.0), j=100.0, amp=25e3):
    return SpinSystem(
        2,
        (Species("H", 2 * np.pi * amp, (0,)), Species("F", 2 * np.pi * amp, (1,))),
        2 * np.pi * np.asarray(offsets),
        [[0, j], [j, 0]],
        None,
        weak_coupling=True,
    )


def single_spin(offset_hz=0.0, amp=25e3):
    return SpinSystem(1, (Species("H", 2 * np.pi * amp, (0,)),), [2 * np.pi * offset_hz], [[0]])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
