import numpy as np
import pytest
from hypothesis import settings

from corr2des.bath import PowerLaw, bath_correlation
from corr2des.dissipators import build_table
from corr2des.exciton import DimerParams, build_model
from corr2des.propagator import Dynamics, pulse_unitary
from corr2des.units import thermal_beta

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

PAPER = DimerParams(eps1=12410.0, eps2=12210.0, coupling=5.5, mu1=1.0, mu2=-0.8, temperature=77.0)


@pytest.fixture(scope="session")
def paper_model():
    return build_model(PAPER)


@pytest.fixture(scope="session")
def short_corr():
    """Sub-Ohmic correlation on a 0.25 fs grid out to 600 fs."""
    return bath_correlation(PowerLaw(0.14, 0.9, 0.01), thermal_beta(77.0), 0.25, 2400)


@pytest.fixture(scope="session")
def short_table(paper_model, short_corr):
    return build_table(paper_model.a0, paper_model.h_rot, short_corr)


def make_dynamics(model, table, mode="correlation_aware", variant="as_printed", dress=0.5, dt=0.5, eps=0.01):
    return Dynamics(model, table, pulse_unitary(model.mu, dress), mode, variant, dt, eps)


def random_hermitian(rng, d=4):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return a + a.conj().T


def random_density(rng, d=4):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


#: (criterion number, passed, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda r: (r[0], not r[1])):
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
