"""Spectral densities and the equilibrium bath correlation function.

For a Gaussian bath with spectral density J(w) at inverse temperature beta

    C(t) = (1/pi) int_0^inf dw J(w) [coth(beta w / 2) cos(w t) - i sin(w t)].

The integrals are done with QUADPACK's oscillatory rule.  For power laws
with s <= 1 the integrable w^(s-1) singularity of J(w) coth(beta w / 2) is
subtracted and transformed in closed form.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

#: upper quadrature limit in units of the cutoff; exp(-40) < 1e-17
UPPER_CUTOFFS = 40.0
QUAD_EPSREL = 1e-8


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class PowerLaw:
    """J(w) = 2 pi lam^2 wc^(1-s) w^s exp(-w/wc)."""

    coupling: float
    s: float
    omega_c: float

    def __post_init__(self):
        _check_common(self.coupling, self.omega_c)
        if not self.s > 0:
            raise ValueError(f"bath exponent s must be positive, got {self.s!r}")

    def with_coupling(self, coupling):
        return PowerLaw(coupling, self.s, self.omega_c)


@dataclass(frozen=True)
class Structured:
    """Ohmic density plus a weak linear tail below ``tail_cut * omega_c``.

    J(w) = J_ohmic(w) + tail_weight * 2 pi lam^2 (w / wc) Theta(tail_cut wc - w),
    with Theta closed at the cut.
    """

    coupling: float
    omega_c: float
    tail_weight: float = 0.01
    tail_cut: float = 0.05

    def __post_init__(self):
        _check_common(self.coupling, self.omega_c)
        if self.tail_weight < 0 or not self.tail_cut > 0:
            raise ValueError("tail_weight must be >= 0 and tail_cut > 0")

    @property
    def s(self):
        return 1.0

    def with_coupling(self, coupling):
        return Structured(coupling, self.omega_c, self.tail_weight, self.tail_cut)


def _check_common(coupling, omega_c):
    if not coupling >= 0:
        raise ValueError(f"coupling must be non-negative, got {coupling!r}")
    if not omega_c > 0:
        raise ValueError(f"cutoff frequency must be positive, got {omega_c!r}")


def _power_law(lam, s, wc, w):
    return 2 * np.pi * lam**2 * wc ** (1 - s) * w**s * np.exp(-w / wc)


def spectral_density(sd, omega):
    """Evaluate J(w) for ``w >= 0`` (scalar or array)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("spectral density is defined for omega >= 0 only")
    if isinstance(sd, PowerLaw):
        out = _power_law(sd.coupling, sd.s, sd.omega_c, w)
    elif isinstance(sd, Structured):
        out = _power_law(sd.coupling, 1.0, sd.omega_c, w)
        tail = sd.tail_weight * 2 * np.pi * sd.coupling**2 * (w / sd.omega_c)
        out = out + np.where(w <= sd.tail_cut * sd.omega_c, tail, 0.0)
    else:
        raise TypeError(f"unknown spectral density {sd!r}")
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BathCorrelation:
    """C(k dt) for k = 0..K (t >= 0 only; C(-t) = C(t)*).

    ``delta_weight`` adds a singular part ``gamma * delta(t)`` on top of the
    regular samples; it is used to build memoryless reference baths.
    """

    samples: np.ndarray
    dt: float
    beta: float
    delta_weight: float = 0.0

    @property
    def times(self):
        return self.dt * np.arange(len(self.samples))

    def scaled(self, factor):
        return BathCorrelation(self.samples * factor, self.dt, self.beta, self.delta_weight * factor)


def delta_correlation(gamma, dt, n_samples, beta=1.0):
    """Memoryless bath C(t) = gamma delta(t)."""
    return BathCorrelation(np.zeros(n_samples, dtype=complex), dt, beta, delta_weight=gamma)


def _xcothx_minus_one(x):
    """x coth(x) - 1 without cancellation near 0."""
    if abs(x) < 1e-2:
        x2 = x * x
        return x2 / 3 - x2 * x2 / 45 + 2 * x2**3 / 945
    return x / math.tanh(x) - 1.0


def _quad(f, a, b, weight, t, scale):
    kw = dict(epsabs=QUAD_EPSREL * 1e-3 * scale, epsrel=QUAD_EPSREL, limit=400, full_output=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if t == 0.0:
            if weight == "sin":
                return 0.0
            res = integrate.quad(f, a, b, **kw)
        else:
            res = integrate.quad(f, a, b, weight=weight, wvar=t, **kw)
    if len(res) > 3 and res[1] > 10 * max(QUAD_EPSREL * abs(res[0]), kw["epsabs"]):
        raise QuadratureError(f"quadrature did not converge at t = {t!r} fs: {res[3]}")
    return res[0]


class _CorrelationIntegrand:
    """Splits J(w) coth(beta w/2) into an analytic singular part and a smooth remainder."""

    def __init__(self, sd, beta):
        self.sd, self.beta = sd, beta
        wc = sd.omega_c
        self.breaks = [0.0, UPPER_CUTOFFS * wc]
        if isinstance(sd, Structured):
            self.breaks = [0.0, sd.tail_cut * wc, UPPER_CUTOFFS * wc]
        self.f0 = 0.0
        if isinstance(sd, PowerLaw) and sd.s <= 1:
            # J coth -> f0 w^(s-1) exp(-w/wc) as w -> 0
            self.f0 = 4 * math.pi * sd.coupling**2 * wc ** (1 - sd.s) / beta

    def density(self, w):
        sd = self.sd
        lam2, wc = sd.coupling**2, sd.omega_c
        if isinstance(sd, PowerLaw):
            return 2 * math.pi * lam2 * wc ** (1 - sd.s) * w**sd.s * math.exp(-w / wc)
        out = 2 * math.pi * lam2 * w * math.exp(-w / wc)
        if w <= sd.tail_cut * wc:
            out += sd.tail_weight * 2 * math.pi * lam2 * w / wc
        return out

    def noise(self, w):
        """J(w) coth(beta w / 2) minus the subtracted singular part."""
        x = 0.5 * self.beta * w
        if self.f0:
            if w == 0.0:
                return 0.0
            sd = self.sd
            return self.f0 * w ** (sd.s - 1) * math.exp(-w / sd.omega_c) * _xcothx_minus_one(x)
        if w == 0.0:
            return self._noise_at_zero()
        return self.density(w) / math.tanh(x)

    def _noise_at_zero(self):
        sd = self.sd
        if isinstance(sd, PowerLaw):
            return 0.0
        slope = 2 * math.pi * sd.coupling**2 / sd.omega_c * (1 + sd.tail_weight)
        return 2 * slope / self.beta

    def singular_cos(self, t):
        """int_0^inf f0 w^(s-1) exp(-w/wc) cos(w t) dw."""
        if not self.f0:
            return 0.0
        z = complex(1.0 / self.sd.omega_c, -t)
        return self.f0 * gamma_fn(self.sd.s) * (z ** (-self.sd.s)).real

    def at(self, t, scale):
        re = self.singular_cos(t)
        im = 0.0
        for a, b in zip(self.breaks[:-1], self.breaks[1:]):
            re += _quad(self.noise, a, b, "cos", t, scale)
            im -= _quad(self.density, a, b, "sin", t, scale)
        return complex(re, im) / math.pi


def bath_correlation(sd, beta, dt, n_steps):
    """Sample C(t) at t = k dt, k = 0..n_steps."""
    if not dt > 0 or n_steps < 1 or not beta > 0:
        raise ValueError("need dt > 0, n_steps >= 1 and beta > 0")
    if sd.coupling == 0:
        return BathCorrelation(np.zeros(n_steps + 1, dtype=complex), dt, beta)
    integrand = _CorrelationIntegrand(sd, beta)
    c0 = integrand.at(0.0, 1.0)
    scale = abs(c0)
    samples = np.empty(n_steps + 1, dtype=complex)
    samples[0] = complex(c0.real, 0.0)
    for k in range(1, n_steps + 1):
        samples[k] = integrand.at(k * dt, scale)
    return BathCorrelation(samples, dt, beta)


def memory_time(corr, threshold=0.05):
    """Earliest grid time after which |C(t)| / |C(0)| stays below ``threshold``."""
    mag = np.abs(corr.samples)
    if mag[0] == 0:
        raise ValueError("C(0) = 0: memory time undefined")
    above = np.nonzero(mag / mag[0] >= threshold)[0]
    last = int(above[-1])
    if last == len(mag) - 1:
        return float(corr.times[-1])
    return float(corr.times[last + 1])
