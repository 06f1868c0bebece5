"""2D spectra, cross-peak traces, beating spectra and the PPT monitor."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .propagator import Phase
from .units import SPEED_OF_LIGHT, angular_to_cm1

#: exciton-basis index -> position in the product basis |q_A q_B> (00, 01, 10, 11)
_PRODUCT_ORDER = np.array([0, 2, 1, 3])


@dataclass(frozen=True)
class Spectrum2D:
    """``values[i, j]`` at (w1_cm1[i], w3_cm1[j]); absolute frequencies."""

    w1_cm1: np.ndarray
    w3_cm1: np.ndarray
    values: np.ndarray

    def same_axes(self, other):
        return (
            self.w1_cm1.shape == other.w1_cm1.shape
            and self.w3_cm1.shape == other.w3_cm1.shape
            and np.array_equal(self.w1_cm1, other.w1_cm1)
            and np.array_equal(self.w3_cm1, other.w3_cm1)
        )


@dataclass(frozen=True)
class CrossPeakTrace:
    T: np.ndarray
    amplitude: np.ndarray
    window: tuple


@dataclass(frozen=True)
class BeatingSpectrum:
    nu_cm1: np.ndarray
    magnitude: np.ndarray
    peak_cm1: float
    peak_magnitude: float
    peak_to_median: float


def uniform_step(grid, what="grid"):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError(f"{what} needs at least two points")
    d = np.diff(grid)
    if not np.all(d > 0) or np.ptp(d) > 1e-9 * max(1.0, abs(d[0])):
        raise ValueError(f"{what} is not uniformly spaced")
    return float(d.mean())


def _axis(n, dt, carrier_cm1):
    w = 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(n, dt))
    return angular_to_cm1(w) + carrier_cm1


def fourier_2d(sig, carrier_cm1=0.0, pad=4):
    """Half-range 2D transform of a :class:`Signal3`.

    Kernel exp(+i w3 t3) along t3 and exp(-/+ i w1 t1) along t1 for the
    rephasing / nonrephasing channel, so that both channels put the
    excitation peaks at positive rotating-frame frequencies.  The t = 0
    samples carry trapezoid half weights; both axes are zero-padded by ``pad``.
    """
    dt1 = uniform_step(sig.t1_grid, "t1 grid")
    dt3 = uniform_step(sig.t3_grid, "t3 grid")
    if sig.t1_grid[0] != 0 or sig.t3_grid[0] != 0:
        raise ValueError("half-range transform needs grids starting at t = 0")
    x = np.array(sig.values, dtype=complex)
    x[0, :] *= 0.5
    x[:, 0] *= 0.5
    n1, n3 = pad * x.shape[0], pad * x.shape[1]
    # sum_n x_n exp(+i w n dt) = N * ifft; sum_n x_n exp(-i w n dt) = fft
    y = n3 * np.fft.ifft(x, n=n3, axis=1)
    if Phase(sig.phase) is Phase.REPHASING:
        y = np.fft.fft(y, n=n1, axis=0)
    else:
        y = n1 * np.fft.ifft(y, n=n1, axis=0)
    y = np.fft.fftshift(y, axes=(0, 1)) * dt1 * dt3
    return Spectrum2D(_axis(n1, dt1, carrier_cm1), _axis(n3, dt3, carrier_cm1), y)


def absorptive(rp, nr):
    if not rp.same_axes(nr):
        raise ValueError("rephasing and nonrephasing spectra have different axes")
    return Spectrum2D(rp.w1_cm1, rp.w3_cm1, np.real(rp.values + nr.values))


def window_value(spectrum, window):
    """max |value| inside the rectangular window (w1, w3, half_width) in cm^-1."""
    w1c, w3c, hw = window
    for c, ax, name in ((w1c, spectrum.w1_cm1, "w1"), (w3c, spectrum.w3_cm1, "w3")):
        if not ax[0] <= c <= ax[-1]:
            raise ValueError(f"cross-peak window centre {name} = {c} cm^-1 outside [{ax[0]:.1f}, {ax[-1]:.1f}]")
    i = np.nonzero(np.abs(spectrum.w1_cm1 - w1c) <= hw)[0]
    j = np.nonzero(np.abs(spectrum.w3_cm1 - w3c) <= hw)[0]
    if not len(i):
        i = [int(np.argmin(np.abs(spectrum.w1_cm1 - w1c)))]
    if not len(j):
        j = [int(np.argmin(np.abs(spectrum.w3_cm1 - w3c)))]
    return float(np.abs(np.asarray(spectrum.values)[np.ix_(i, j)]).max())


def crosspeak_trace(spectra, T, window):
    if not len(spectra):
        raise ValueError("need at least one spectrum")
    if len(spectra) != len(T):
        raise ValueError("one spectrum per waiting time expected")
    amp = np.array([window_value(s, window) for s in spectra])
    return CrossPeakTrace(np.asarray(T, dtype=float), amp, tuple(window))


TAU_BOUNDS = (50.0, 5000.0)


def detrend(T, y):
    """Residual of the least-squares fit y ~ a + b exp(-T / tau), tau in [50, 5000] fs.

    The model is linear in (a, b), so tau is optimized by a bounded scalar
    search over the profiled residual.  Returns ``(residual, (a, b, tau))``.
    """
    T, y = np.asarray(T, float), np.asarray(y, float)

    def solve(tau):
        basis = np.column_stack([np.ones_like(T), np.exp(-(T - T[0]) / tau)])
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        return coef, y - basis @ coef

    def cost(log_tau):
        return float(np.sum(solve(np.exp(log_tau))[1] ** 2))

    lo, hi = np.log(TAU_BOUNDS[0]), np.log(TAU_BOUNDS[1])
    grid = np.linspace(lo, hi, 41)
    k = int(np.argmin([cost(g) for g in grid]))
    bracket = (grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)])
    res = minimize_scalar(cost, bounds=bracket, method="bounded", options={"xatol": 1e-6})
    tau = float(np.exp(res.x if res.fun <= cost(grid[k]) else grid[k]))
    (a, b), r = solve(tau)
    # express b for the fit written with exp(-T / tau)
    return r, (float(a), float(b * np.exp(T[0] / tau)), tau)


def beating_spectrum(trace, pad=8, min_cm1=20.0):
    T, y = np.asarray(trace.T, float), np.asarray(trace.amplitude, float)
    if len(T) < 8:
        raise ValueError("beating analysis needs at least 8 waiting times")
    dT = uniform_step(T, "waiting-time grid")
    r, _ = detrend(T, y)
    n = pad * len(T)
    mag = np.abs(np.fft.rfft(r * np.hanning(len(T)), n=n))
    nu = np.fft.rfftfreq(n, dT) / SPEED_OF_LIGHT
    sel = nu > min_cm1
    if not np.any(sel):
        raise ValueError("waiting-time grid too short to resolve frequencies above the threshold")
    k = int(np.argmax(np.where(sel, mag, -np.inf)))
    med = float(np.median(mag[sel]))
    ratio = float(mag[k] / med) if med > 0 else (np.inf if mag[k] > 0 else 0.0)
    return BeatingSpectrum(nu, mag, float(nu[k]), float(mag[k]), ratio)


def persistence_ratio(trace, early_end=200.0, late=(600.0, 1000.0)):
    """RMS of the detrended trace for T in ``late`` over its RMS for T < ``early_end``."""
    T = np.asarray(trace.T, float)
    r, _ = detrend(T, trace.amplitude)
    early = T < early_end
    window = (T >= late[0]) & (T <= late[1])
    if not early.any() or not window.any():
        raise ValueError("waiting-time grid does not cover both comparison windows")
    rms = lambda v: float(np.sqrt(np.mean(v**2)))
    e = rms(r[early])
    return rms(r[window]) / e if e > 0 else 0.0


def partial_transpose(rho):
    """Transpose on the second site; ``rho`` in the site basis (g, 1, 2, f)."""
    rho = np.asarray(rho)
    p = _PRODUCT_ORDER
    m = rho[..., p[:, None], p[None, :]]
    m = m.reshape(rho.shape[:-2] + (2, 2, 2, 2))
    m = np.swapaxes(m, -3, -1).reshape(rho.shape)
    inv = np.argsort(p)
    return m[..., inv[:, None], inv[None, :]]


def min_pt_eigenvalue(rho):
    pt = partial_transpose(rho)
    pt = 0.5 * (pt + np.swapaxes(pt, -1, -2).conj())
    return np.linalg.eigvalsh(pt)[..., 0]


def ppt_monitor(trajectory, to_site=None):
    """Global minimum PT eigenvalue over ``(t, rho)`` pairs and the time it occurs.

    ``to_site`` rotates exciton-basis states to the site basis first.
    Returns ``(min_eig, t_min, per_step)`` with per_step an (n, 2) array.
    """
    ts = np.array([t for t, _ in trajectory], dtype=float)
    rhos = np.array([r for _, r in trajectory])
    if to_site is not None:
        rhos = to_site(rhos)
    eig = min_pt_eigenvalue(rhos)
    k = int(np.argmin(eig))
    return float(eig[k]), float(ts[k]), np.column_stack([ts, eig])
