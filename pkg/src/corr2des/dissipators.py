"""Static and pulse-dressed Bloch-Redfield dissipators and their Liouville generators.

All dissipators are Schrodinger-picture convolution kernels

    Lambda_S(t) = int_0^t ds C(s) exp(-iHs) A0 exp(iHs),

tabulated once on a uniform grid with half the integrator step so that the
RK4 midpoints are table entries.  The master equation they enter is

    d rho / dt = -i [H, rho] + [Lambda rho, A0] + [A0, rho Lambda^dagger].

Vectorization is column stacking, ``vec(A X B) = (B^T kron A) vec(X)``.
"""

from dataclasses import dataclass
import enum

import numpy as np


class DynamicsMode(str, enum.Enum):
    CORRELATION_AWARE = "correlation_aware"
    FACTORIZED_RESET = "factorized_reset"
    STATIC_MARKOV = "static_markov"


class SegmentVariant(str, enum.Enum):
    AS_PRINTED = "as_printed"
    TELESCOPING = "telescoping"


class ConvergenceError(RuntimeError):
    pass


MARKOV_CERTIFICATE_TOL = 0.02


@dataclass(frozen=True)
class DissipatorTable:
    """Lambda_S(k * step) for k = 0..N-1 plus the Markovian limit.

    Entry 0 is the right limit t -> 0+: zero for regular baths, ``gamma/2 A0``
    when the bath carries a singular ``gamma delta(t)`` part.
    """

    step: float
    lam_s: np.ndarray
    lam_sm: np.ndarray
    a0: np.ndarray
    h: np.ndarray
    certificate: float

    @property
    def n(self):
        return len(self.lam_s)

    @property
    def times(self):
        return self.step * np.arange(self.n)

    def index(self, t):
        """Table index for a time in fs; refuses times off the grid."""
        x = np.asarray(t, dtype=float) / self.step
        k = np.rint(x)
        if np.any(np.abs(x - k) > 1e-9 * np.maximum(1.0, np.abs(x))):
            raise ValueError(f"time {t!r} fs is not on the {self.step} fs dissipator grid")
        k = k.astype(int)
        if np.any(k < 0) or np.any(k >= self.n):
            raise ValueError(f"time {t!r} fs outside the tabulated range [0, {self.times[-1]}] fs")
        return k

    def static(self, t):
        """Lambda_S at grid time(s) ``t`` (fs)."""
        return self.lam_s[self.index(t)]


def heisenberg_phases(h, t):
    """exp(-i (h_i - h_j) t) so that exp(-iHt) M exp(iHt) = M * phases."""
    t = np.asarray(t, dtype=float)
    w = h[:, None] - h[None, :]
    return np.exp(-1j * w * t[..., None, None])


def build_table(a0, h, corr, n_steps=None):
    """Tabulate Lambda_S on the correlation grid by the cumulative trapezoid rule.

    ``h`` is the diagonal of the field-free Hamiltonian in the working basis.
    """
    c = corr.samples if n_steps is None else corr.samples[: n_steps + 1]
    s = corr.dt * np.arange(len(c))
    kernel = c[:, None, None] * (a0[None] * heisenberg_phases(h, s))
    lam = np.zeros_like(kernel)
    lam[1:] = np.cumsum(0.5 * corr.dt * (kernel[1:] + kernel[:-1]), axis=0)
    if corr.delta_weight:
        lam += 0.5 * corr.delta_weight * a0
    lam_sm, cert = _markov_limit(lam)
    return DissipatorTable(corr.dt, lam, lam_sm, a0, np.asarray(h, dtype=float), cert)


def _markov_limit(lam):
    end = lam[-1]
    norm = np.linalg.norm(end)
    if norm == 0:
        return end.copy(), 0.0
    tail = lam[int(0.9 * (len(lam) - 1)):]
    cert = float(np.max(np.linalg.norm(tail - end, axis=(1, 2))) / norm)
    return end.copy(), cert


def lambda_static(table, t):
    return table.static(t)


def lambda_static_markov(table, strict=True):
    """Lambda^SM = Lambda_S(grid end) and its convergence certificate.

    With ``strict`` a certificate above 0.02 raises; slowly converging
    (sub-Ohmic, structured) baths pass ``strict=False`` and just get the number.
    """
    if strict and table.certificate > MARKOV_CERTIFICATE_TOL:
        raise ConvergenceError(
            f"Lambda_S has not settled by {table.times[-1]} fs (certificate {table.certificate:.3g})"
        )
    return table.lam_sm, table.certificate


def _dress(m, h, t):
    return m * heisenberg_phases(h, t)


def dressing_unitary(k, delays, elapsed, u_c, h):
    """Pulse-dressing unitary for segment ``k``.

    U1(t1)          = e^{-iHt1} Uc e^{iHt1}
    U2(t1, t2)      = e^{-iHt2} Uc e^{-iHt1} Uc e^{iHt1} e^{iHt2}
    U3(t1, t2, t3)  = e^{-iHt3} Uc U2(t1, t2) e^{iHt3}

    ``delays`` holds the ``k - 1`` earlier intervals, ``elapsed`` the time in
    the current segment.  Arguments broadcast; ``h`` is a diagonal.
    """
    if k not in (1, 2, 3):
        raise ValueError(f"segment index must be 1, 2 or 3, got {k!r}")
    delays = tuple(delays)
    if len(delays) != k - 1:
        raise ValueError(f"segment {k} needs {k - 1} earlier delays, got {len(delays)}")
    times = delays + (elapsed,)
    u = _dress(u_c, h, times[0])
    for t in times[1:]:
        u = _dress(u_c @ u, h, t)
    return u


def _sandwich(u, m):
    return u @ m @ np.swapaxes(u, -1, -2).conj()


@dataclass(frozen=True)
class SegmentDissipator:
    """Effective dissipator of segment ``k`` as a function of elapsed time.

    ``delays`` are the earlier intervals (fs, scalars or broadcastable
    arrays).  Calling with elapsed time(s) in fs returns ``(..., 4, 4)``.
    """

    k: int
    delays: tuple
    mode: DynamicsMode
    variant: SegmentVariant
    table: DissipatorTable
    u_c: np.ndarray

    def __call__(self, elapsed):
        tab = self.table
        lam = tab.static
        mode = DynamicsMode(self.mode)
        if mode is DynamicsMode.STATIC_MARKOV:
            shape = np.broadcast(np.asarray(elapsed), *map(np.asarray, self.delays)).shape
            return np.broadcast_to(tab.lam_sm, shape + (4, 4)).copy()
        tau = np.asarray(elapsed, dtype=float)
        if mode is DynamicsMode.FACTORIZED_RESET:
            shape = np.broadcast(tau, *map(np.asarray, self.delays)).shape
            return np.broadcast_to(lam(tau), shape + (4, 4)).copy()

        h, uc = tab.h, self.u_c
        variant = SegmentVariant(self.variant)
        if self.k == 1:
            out = _sandwich(dressing_unitary(1, (), tau, uc, h), tab.lam_sm - lam(tau))
            if variant is SegmentVariant.TELESCOPING:
                out = out + lam(tau)
            return out
        if self.k == 2:
            (t1,) = self.delays
            t1 = np.asarray(t1, dtype=float)
            return (
                _sandwich(dressing_unitary(2, (t1,), tau, uc, h), tab.lam_sm - lam(t1 + tau))
                + _sandwich(dressing_unitary(1, (), tau, uc, h), lam(t1 + tau) - lam(tau))
                + lam(tau)
            )
        t1, t2 = (np.asarray(d, dtype=float) for d in self.delays)
        middle_first = t1 if variant is SegmentVariant.AS_PRINTED else t2
        return (
            _sandwich(dressing_unitary(3, (t1, t2), tau, uc, h), tab.lam_sm - lam(t1 + t2 + tau))
            + _sandwich(dressing_unitary(2, (middle_first,), tau, uc, h), lam(t1 + t2 + tau) - lam(t2 + tau))
            + _sandwich(dressing_unitary(1, (), tau, uc, h), lam(t2 + tau) - lam(tau))
            + lam(tau)
        )


def segment_dissipator(k, delays, mode, variant, table, u_c):
    if k not in (1, 2, 3):
        raise ValueError(f"segment index must be 1, 2 or 3, got {k!r}")
    if len(tuple(delays)) != k - 1:
        raise ValueError(f"segment {k} needs {k - 1} earlier delays")
    return SegmentDissipator(k, tuple(delays), DynamicsMode(mode), SegmentVariant(variant), table, u_c)


def _kron(x, y):
    """Batched Kronecker product over the last two axes."""
    out = x[..., :, None, :, None] * y[..., None, :, None, :]
    shape = out.shape[:-4] + (x.shape[-2] * y.shape[-2], x.shape[-1] * y.shape[-1])
    return out.reshape(shape)


def liouville_generator(lam, a0):
    """16x16 dissipative generator of [Lambda rho, A0] + [A0, rho Lambda^dagger].

    D = Lambda* (x) A0 + A0* (x) Lambda - I (x) A0 Lambda - A0* Lambda* (x) I,
    batched over any leading axes of ``lam``.
    """
    lam = np.asarray(lam, dtype=complex)
    a0 = np.broadcast_to(np.asarray(a0, dtype=complex), lam.shape)
    eye = np.broadcast_to(np.eye(lam.shape[-1], dtype=complex), lam.shape)
    lc, ac = lam.conj(), a0.conj()
    return _kron(lc, a0) + _kron(ac, lam) - _kron(eye, a0 @ lam) - _kron(ac @ lc, eye)


def hamiltonian_generator(h):
    """-i (I (x) H - H^T (x) I) for a diagonal ``h``."""
    h = np.asarray(h, dtype=float)
    # column stacking: element (a, b) sits at b * d + a
    w = (h[:, None] - h[None, :]).T.reshape(-1)
    return np.diag(-1j * np.asarray(w, dtype=complex))


def memory_split(d_full, d_s):
    """Return ``(D_S, D_mem, ||D_mem|| / ||D_full||)``."""
    d_mem = d_full - d_s
    nf = np.linalg.norm(d_full, axis=(-2, -1))
    ratio = np.divide(np.linalg.norm(d_mem, axis=(-2, -1)), nf, out=np.zeros_like(nf), where=nf > 0)
    return d_s, d_mem, ratio


def vec_index(a, b, d=4):
    """Position of rho[a, b] in the column-stacked vector."""
    return b * d + a


def secularize(gen, h, tol=1e-9):
    """Drop generator elements connecting different Bohr frequencies of ``h``."""
    d = len(h)
    bohr = np.empty(d * d)
    for a in range(d):
        for b in range(d):
            bohr[vec_index(a, b, d)] = h[a] - h[b]
    keep = np.abs(bohr[:, None] - bohr[None, :]) <= tol * max(1.0, np.abs(h).max())
    return np.where(keep, gen, 0.0)


POPULATIONS = (vec_index(1, 1), vec_index(2, 2))
COHERENCES = (vec_index(1, 2), vec_index(2, 1))


def population_to_coherence(gen):
    """Largest |element| feeding single-exciton populations into the 1-2 coherence."""
    gen = np.asarray(gen)
    block = gen[..., list(COHERENCES), :][..., list(POPULATIONS)]
    return np.abs(block).max(axis=(-2, -1))
