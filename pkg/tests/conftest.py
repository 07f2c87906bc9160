import numpy as np
import pytest

from stqg.grid import Field, TorusSpec

ACCEPTANCE_LINES = []


def band_limited(spec, n_modes=12, kmax=6, seed=0, amplitude=1.0, zero_mean=True):
    """Sum of random cosines with integer wavevectors up to ``kmax``."""
    rng = np.random.default_rng(seed)
    x, y = spec.coords
    out = np.zeros(spec.shape)
    for _ in range(n_modes):
        k1, k2 = rng.integers(-kmax, kmax + 1, 2)
        out += amplitude * rng.normal() * np.cos(k1 * x + k2 * y + rng.uniform(0, 2 * np.pi))
    if zero_mean:
        out -= out.mean()
    return Field(spec, out)


@pytest.fixture
def spec32():
    return TorusSpec(32, 32)


@pytest.fixture
def spec64():
    return TorusSpec(64, 64)


def report(number, passed, detail):
    line = f"acceptance {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
