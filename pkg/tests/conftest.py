import mpmath
import pytest

from noisegate.model import GateConfig
from noisegate.noise import NoiseSpec

# The operating point of the error-probability curves: tau = 1 ns, sigma = 1 V,
# b_u = 4.0 V, i_u = 4.2 V; b_d = 2.0 V is our own choice (c_e = -2.2 V).
REF_TAU = 1e-9


@pytest.fixture
def ref_gate():
    return GateConfig(b_u=4.0, b_d=2.0, i_u=4.2)


@pytest.fixture
def ref_noise():
    return NoiseSpec(sigma=1.0, tau=REF_TAU)


@pytest.fixture
def unit_noise():
    return NoiseSpec(sigma=1.0, tau=1.0)


def erf_series(x, dps=60):
    """Brute-force Maclaurin series for erf, summed in high precision."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        term = x
        total = x
        n = 0
        while True:
            n += 1
            term *= -x * x / n
            add = term / (2 * n + 1)
            total += add
            if abs(add) < mpmath.mpf(10) ** (-dps + 5) * max(1, abs(total)):
                break
        return 2 / mpmath.sqrt(mpmath.pi) * total


def phi_oracle(b_e, sigma):
    with mpmath.workdps(40):
        return float((1 + erf_series(mpmath.mpf(b_e) / (mpmath.sqrt(2) * sigma))) / 2)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def verdict(request, capsys):
    """Record one PASS/FAIL line for an acceptance check, then assert it."""

    def record(title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {title}: {detail}".rstrip(": ")
        request.config.stash[_ACCEPTANCE].append(line)
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
