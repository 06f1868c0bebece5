"""Unit conversions between wavenumbers, angular frequency and temperature.

Internally hbar = 1, time is in fs and every energy is an angular frequency
in rad/fs.
"""

import math

import numpy as np

#: speed of light in cm/fs
SPEED_OF_LIGHT = 2.99792458e-5
#: Boltzmann constant in cm^-1/K
BOLTZMANN_CM1 = 0.6950348

_CM1_TO_RAD_FS = 2.0 * math.pi * SPEED_OF_LIGHT


def cm1_to_angular(nu):
    """Convert a wavenumber (cm^-1) to an angular frequency (rad/fs)."""
    return np.multiply(nu, _CM1_TO_RAD_FS)


def angular_to_cm1(omega):
    """Convert an angular frequency (rad/fs) to a wavenumber (cm^-1)."""
    return np.divide(omega, _CM1_TO_RAD_FS)


def thermal_energy_cm1(temperature):
    """k_B T in cm^-1."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature!r} K")
    return BOLTZMANN_CM1 * temperature


def thermal_beta(temperature):
    """Inverse temperature in fs, so that ``beta * omega`` is dimensionless.

    ``temperature = inf`` gives the classical limit ``beta = 0``.
    """
    if math.isinf(temperature) and temperature > 0:
        return 0.0
    return 1.0 / float(cm1_to_angular(thermal_energy_cm1(temperature)))
