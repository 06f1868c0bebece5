"""Coupling-strength calibration against a target exciton-coherence lifetime."""

import numpy as np
from scipy.optimize import brentq

from .bath import bath_correlation
from .dissipators import COHERENCES, build_table, hamiltonian_generator, liouville_generator
from .units import thermal_beta


def coherence_lifetime(lam_sm, model):
    """1/e time (fs) of the exciton 1-2 coherence under a static dissipator.

    Uses the eigenmode of the full nonsecular generator that carries most of
    the rho_12 weight.
    """
    gen = hamiltonian_generator(model.h_rot) + liouville_generator(lam_sm, model.a0)
    evals, evecs = np.linalg.eig(gen)
    k = int(np.argmax(np.abs(evecs[COHERENCES[0]])))
    rate = -evals[k].real
    return np.inf if rate <= 0 else 1.0 / rate


def calibrate_coupling(model, spectral, dt, target_fs=200.0, n_steps=None, bracket=(1e-3, 10.0)):
    """Coupling lambda giving ``target_fs`` as the static-Markov coherence lifetime.

    ``spectral`` fixes the shape of J; its coupling value is ignored.  Lambda
    enters the dissipator as lambda^2, so one unit-coupling table suffices.
    Returns ``(lambda, unit_table_certificate)``.
    """
    beta = thermal_beta(model.params.temperature)
    step = 0.5 * dt
    n = int(round(2000.0 / step)) if n_steps is None else n_steps
    corr = bath_correlation(spectral.with_coupling(1.0), beta, step, n)
    unit = build_table(model.a0, model.h_rot, corr)

    def miss(lam):
        return np.log(coherence_lifetime(lam**2 * unit.lam_sm, model) / target_fs)

    lam = brentq(miss, *bracket, xtol=1e-12, rtol=1e-12)
    return float(lam), unit.certificate
