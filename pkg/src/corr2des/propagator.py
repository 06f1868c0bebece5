"""RK4 propagation of the vectorized four-level density matrix.

Density matrices are vectorized by column stacking.  Field-free segments use
the segment dissipators of :mod:`corr2des.dissipators`; optical interactions
are instantaneous maps applied between segments.
"""

from dataclasses import dataclass, field
import enum

import numpy as np

from .dissipators import (
    DynamicsMode,
    SegmentVariant,
    hamiltonian_generator,
    liouville_generator,
    segment_dissipator,
)


class NumericalError(RuntimeError):
    pass


class Phase(str, enum.Enum):
    REPHASING = "rephasing"
    NONREPHASING = "nonrephasing"

    @property
    def signs(self):
        """Which dipole part (+ raising, - lowering) acts at pulses 1, 2, 3."""
        return ("-", "+", "+") if self is Phase.REPHASING else ("+", "-", "+")


def vec(rho):
    """Column stacking over the last two axes."""
    rho = np.asarray(rho)
    return np.swapaxes(rho, -1, -2).reshape(rho.shape[:-2] + (-1,))


def unvec(x, d=4):
    x = np.asarray(x)
    return np.swapaxes(x.reshape(x.shape[:-1] + (d, d)), -1, -2)


def rk4_step(gen, x, t, dt):
    """Classical RK4 step for dx/dt = D(t) x.

    ``gen(t)`` returns the (possibly batched) 16x16 generator; ``x`` is a
    vector or a stack of column vectors.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    d0, dh, d1 = gen(t), gen(t + 0.5 * dt), gen(t + dt)
    return _rk4(d0, dh, d1, x, dt)


def _rk4(d0, dh, d1, x, dt):
    k1 = d0 @ x
    k2 = dh @ (x + 0.5 * dt * k1)
    k3 = dh @ (x + 0.5 * dt * k2)
    k4 = d1 @ (x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def commutator(a, b):
    return a @ b - b @ a


def apply_switch(rho, mu_part, a, eps):
    """rho -> rho - i a eps [mu_part, rho] with a in {0, 1}."""
    if a not in (0, 1):
        raise ValueError(f"switch must be 0 or 1, got {a!r}")
    if not a:
        return rho
    return rho - 1j * eps * commutator(mu_part, rho)


def pulse_unitary(mu, eps):
    """U(eps) = exp(-i eps mu) for Hermitian ``mu``."""
    w, v = np.linalg.eigh(mu)
    return (v * np.exp(-1j * eps * w)) @ v.conj().T


def apply_pulse_unitary(rho, u, tol=1e-10):
    if np.linalg.norm(u @ u.conj().T - np.eye(len(u))) > tol:
        raise ValueError("pulse operator is not unitary")
    return u @ rho @ u.conj().T


@dataclass(frozen=True)
class Dynamics:
    """Immutable bundle of model, dissipator table and propagation settings.

    ``u_c`` is the pulse operator used inside the dressing unitaries,
    ``eps`` the (small) pulse amplitude of the optical-action switches.
    """

    model: object
    table: object
    u_c: np.ndarray
    mode: DynamicsMode
    variant: SegmentVariant
    dt: float
    eps: float
    h_gen: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mode", DynamicsMode(self.mode))
        object.__setattr__(self, "variant", SegmentVariant(self.variant))
        object.__setattr__(self, "h_gen", hamiltonian_generator(self.model.h_rot))
        ratio = self.dt / self.table.step
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) % 2:
            raise ValueError("dissipator grid must resolve RK4 midpoints (table step = dt / 2n)")

    def dissipator(self, k, delays):
        return segment_dissipator(k, delays, self.mode, self.variant, self.table, self.u_c)

    def generator(self, k, delays, elapsed):
        """Full generator -i[H, .] + D(Lambda_k) at the given elapsed time(s)."""
        lam = self.dissipator(k, delays)(elapsed)
        return self.h_gen + liouville_generator(lam, self.model.a0)

    def switch_operator(self, sign):
        return self.model.mu_plus if sign == "+" else self.model.mu_minus

    def snap(self, t, what="time"):
        n = round(t / self.dt)
        if abs(n * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"{what} {t!r} fs is not a multiple of dt = {self.dt} fs")
        return int(n)


def propagate_segment(dyn, k, delays, x, n_steps, record=(), reduce=None, segment_label=None):
    """Integrate segment ``k`` for ``n_steps`` steps of ``dyn.dt``.

    ``record`` lists step counts at which the state is kept, or ``"all"``.
    ``reduce`` is applied to each kept state (e.g. a detection projection).
    Returns ``(x_final, kept)``; with ``"all"`` kept[n] is the state after n steps.
    Delays may be arrays, in which case ``x`` carries the matching batch axis.
    """
    diss = dyn.dissipator(k, delays)
    a0, hg, dt = dyn.model.a0, dyn.h_gen, dyn.dt
    reduce = reduce or (lambda v: v)

    def gen(t):
        return hg + liouville_generator(diss(t), a0)

    steps = range(n_steps + 1) if isinstance(record, str) else [int(r) for r in record]
    want = set(steps)
    stored = {}
    if 0 in want:
        stored[0] = reduce(x)
    d_next = gen(0.0)
    for n in range(n_steps):
        t = n * dt
        d0, dh, d_next = d_next, gen(t + 0.5 * dt), gen(t + dt)
        x = _rk4(d0, dh, d_next, x, dt)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f"non-finite state in segment {segment_label or k} at elapsed {t + dt} fs")
        if n + 1 in want:
            stored[n + 1] = reduce(x)
    return x, [stored[r] for r in steps]


def detection_row(mu_minus):
    """Row vector r with r @ vec(rho) = Tr[mu_minus rho]."""
    return vec(np.swapaxes(mu_minus, -1, -2))


@dataclass(frozen=True)
class ProtocolPoint:
    t1: float
    T: float
    t3_grid: tuple
    phase: Phase
    switches: tuple = (1, 1, 1)


def run_protocol(point, dyn, rho_log=None, physical=False):
    """Tr[mu_minus rho(t3)] for one (t1, T, switches) protocol point.

    If ``rho_log`` is a list, the density matrix after every integrator step of
    all three segments is appended as ``(absolute_time_fs, rho)``.  With
    ``physical`` each pulse with switch 1 acts as the full unitary
    exp(-i eps mu) instead of the phase-selected linear switch map, so the
    logged states are genuine density matrices.
    """
    model = dyn.model
    signs = Phase(point.phase).signs
    a, b, c = point.switches
    n1, n2 = dyn.snap(point.t1, "t1"), dyn.snap(point.T, "T")
    t3_steps = [dyn.snap(t, "t3") for t in point.t3_grid]
    n3 = max(t3_steps, default=0)
    log = rho_log is not None
    if physical:
        u = pulse_unitary(model.mu, dyn.eps)

        def act(rho, sign, on):
            return apply_pulse_unitary(rho, u) if on else rho
    else:

        def act(rho, sign, on):
            return apply_switch(rho, dyn.switch_operator(sign), on, dyn.eps)

    rho = act(model.rho0, signs[0], a)
    x, traj = propagate_segment(dyn, 1, (), vec(rho), n1, record="all" if log else (), segment_label="t1")
    if log:
        rho_log.extend((n * dyn.dt, unvec(s)) for n, s in enumerate(traj))
    rho = act(unvec(x), signs[1], b)
    x, traj = propagate_segment(dyn, 2, (point.t1,), vec(rho), n2, record="all" if log else (), segment_label="T")
    if log:
        rho_log.extend((point.t1 + n * dyn.dt, unvec(s)) for n, s in enumerate(traj))
    rho = act(unvec(x), signs[2], c)
    x, traj = propagate_segment(dyn, 3, (point.t1, point.T), vec(rho), n3, record="all", segment_label="t3")
    if log:
        t0 = point.t1 + point.T
        rho_log.extend((t0 + n * dyn.dt, unvec(s)) for n, s in enumerate(traj))
    row = detection_row(model.mu_minus)
    return np.array([row @ traj[n] for n in t3_steps])
