import pytest

from stefan_lab import InitialData, ModelParams
from stefan_lab.model import capital_lambda

REF = dict(lam=1.0, b=0.5, m=1.0, d=1.0, nu=1.0, c=0.5, mu=1.0, rho=1.0, h0=0.5)


def ref_params(**changes):
    return ModelParams(**{**REF, **changes})


def ref_vanishing_setup():
    """Reference model with h0 = Lambda/2 and cosine data."""
    p = ref_params()
    h0 = 0.5 * capital_lambda(p)
    p = p.replace(h0=h0)
    return p, InitialData.cosine(h0)


@pytest.fixture
def ref():
    return ref_params()


@pytest.fixture
def small_setup():
    return ref_vanishing_setup()


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
