import numpy as np
import pytest
from hypothesis import settings

from idfield import DomainPartition, FieldSpec, KernelFamily, LocalCharacteristics, PointMasses, Tempered

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def indicator(lo, hi):
    def f(t, x):
        return ((x[:, 0] >= lo) & (x[:, 0] < hi)).astype(float)

    return f


def unit_interval(n=8):
    return DomainPartition.grid([0.0], [1.0], [n])


@pytest.fixture
def gaussian_spec():
    return FieldSpec(
        KernelFamily(indicator(0.0, 1.0), "nonnegative"),
        LocalCharacteristics(a=0.0, sigma2=1.0),
        unit_interval(),
    )


@pytest.fixture
def poisson_spec():
    return FieldSpec(
        KernelFamily(indicator(0.0, 1.0), "nonnegative"),
        LocalCharacteristics(a=0.1, sigma2=0.0, rho=PointMasses(((1.0, 1.5), (-0.7, 0.5)))),
        unit_interval(),
    )


@pytest.fixture
def tempered_spec():
    return FieldSpec(
        KernelFamily(indicator(0.0, 1.0), "nonnegative"),
        LocalCharacteristics(a=0.0, sigma2=0.0, rho=Tempered(0.7, 1.0, 0.5, 1.0)),
        unit_interval(4),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
