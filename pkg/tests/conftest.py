import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def trig_poly(coeffs, x):
    """Real trigonometric polynomial sum a_j cos 2 pi j x + b_j sin 2 pi j x."""
    out = np.zeros_like(x, dtype=float)
    for j, (a, b) in enumerate(coeffs):
        out += a * np.cos(2 * np.pi * j * x) + b * np.sin(2 * np.pi * j * x)
    return out


def trig_poly_dx(coeffs, x):
    out = np.zeros_like(x, dtype=float)
    for j, (a, b) in enumerate(coeffs):
        w = 2 * np.pi * j
        out += -a * w * np.sin(w * x) + b * w * np.cos(w * x)
    return out


def random_unit(rng, n, modes=None):
    from m2hs.grid import nodes, norm
    if modes is None:
        q = rng.normal(size=n) + 1j * rng.normal(size=n)
    else:
        x = nodes(n)
        q = sum((rng.normal() + 1j * rng.normal()) * np.exp(2j * np.pi * k * x)
                for k in range(-modes, modes + 1))
    return q / norm(q)


def random_tangent(rng, f, modes=None):
    from m2hs.grid import hermitian_inner
    F = random_unit(rng, f.size, modes)
    return F - np.real(hermitian_inner(f, F)) * f


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


def record(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} [{name}]: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
