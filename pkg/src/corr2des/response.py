"""Third-order signals by inclusion-exclusion over optical-action switches.

For each phase-matching channel the eight runs S_abc, (a, b, c) in {0, 1}^3,
are combined as

    S3 = (-i)^3 sum_abc (-1)^(3 - a - b - c) S_abc,

which removes every term of order < 3 in the pulse amplitude.  The dressing
unitaries inside the segment dissipators always use the full pulse operator;
switches act only on the optical-action maps.

Two evaluation paths exist.  :func:`third_order` calls :func:`run_protocol`
once per (t1, switches) and is the reference.  :func:`scan_waiting_times`
shares work across t1, switches and phases: segment 1 is one trajectory,
segment 2 is batched over t1 and sampled at every requested T, and segment 3
is one batched work unit per T.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import itertools

import numpy as np

from .propagator import (
    NumericalError,
    Phase,
    ProtocolPoint,
    apply_switch,
    detection_row,
    propagate_segment,
    run_protocol,
    unvec,
    vec,
)

SWITCHES = tuple(itertools.product((0, 1), repeat=3))


def ie_sign(a, b, c):
    return -1.0 if (3 - a - b - c) % 2 else 1.0


@dataclass(frozen=True)
class Signal3:
    """S3(t1, t3) at fixed waiting time; ``values[i, j]`` is (t1_grid[i], t3_grid[j])."""

    phase: Phase
    T: float
    t1_grid: np.ndarray
    t3_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        shape = (len(self.t1_grid), len(self.t3_grid))
        if np.shape(self.values) != shape:
            raise ValueError(f"signal shape {np.shape(self.values)} does not match grids {shape}")


def inclusion_exclusion(s_abc):
    """Combine ``s_abc[a, b, c, ...]`` (leading shape (2, 2, 2)) into S3."""
    s_abc = np.asarray(s_abc)
    if s_abc.shape[:3] != (2, 2, 2):
        raise ValueError("expected leading axes (2, 2, 2) indexed by the switches")
    total = sum(ie_sign(a, b, c) * s_abc[a, b, c] for a, b, c in SWITCHES)
    return (-1j) ** 3 * total


def switch_signals(dyn, t1_grid, t3_grid, phase, T):
    """All eight S_abc(t1, t3) by direct protocol runs; shape (2, 2, 2, n1, n3)."""
    out = np.empty((2, 2, 2, len(t1_grid), len(t3_grid)), dtype=complex)
    for a, b, c in SWITCHES:
        for i, t1 in enumerate(t1_grid):
            pt = ProtocolPoint(float(t1), float(T), tuple(t3_grid), Phase(phase), (a, b, c))
            row = run_protocol(pt, dyn)
            if not np.all(np.isfinite(row)):
                raise NumericalError(f"non-finite S_{a}{b}{c} at t1 = {t1} fs")
            out[a, b, c, i] = row
    return out


def third_order(dyn, t1_grid, t3_grid, phase, T):
    """Reference third-order signal for one phase and waiting time."""
    t1_grid, t3_grid = np.asarray(t1_grid, float), np.asarray(t3_grid, float)
    s = switch_signals(dyn, t1_grid, t3_grid, phase, T)
    return Signal3(Phase(phase), float(T), t1_grid, t3_grid, inclusion_exclusion(s))


def _apply_switch_columns(x, dyn, sign):
    """Split every column of ``x`` (..., 16, m) into switch-off / switch-on pairs."""
    rho = unvec(np.moveaxis(x, -1, -2))  # (..., m, 4, 4)
    # sign may differ per column through the phase axis: sign is a 1-d array of "+"/"-"
    on = np.empty_like(rho)
    for j, sg in enumerate(sign):
        on[..., j, :, :] = apply_switch(rho[..., j, :, :], dyn.switch_operator(sg), 1, dyn.eps)
    both = np.stack([rho, on], axis=-3)  # (..., m, 2, 4, 4)
    shape = both.shape[:-4] + (-1, 4, 4)
    return np.moveaxis(vec(both.reshape(shape)), -2, -1)


def scan_waiting_times(dyn, t1_grid, t3_grid, T_list, phases=tuple(Phase), threads=1, progress=None):
    """Third-order signals for every (phase, T); phase major, T minor.

    ``threads`` parallelizes the per-T detection segments.  Results are
    gathered in input order, independent of scheduling.
    """
    t1_grid, t3_grid = np.asarray(t1_grid, float), np.asarray(t3_grid, float)
    T_list = [float(t) for t in T_list]
    if not T_list:
        raise ValueError("T_list must not be empty")
    phases = [Phase(p) for p in phases]
    if not phases:
        raise ValueError("need at least one phase")
    model = dyn.model
    n1_steps = [dyn.snap(t, "t1") for t in t1_grid]
    t2_steps = [dyn.snap(t, "T") for t in T_list]
    t3_steps = [dyn.snap(t, "t3") for t in t3_grid]
    if min(n1_steps + t2_steps + t3_steps) < 0:
        raise ValueError("protocol times must be non-negative")
    n_ph = len(phases)

    # segment 1: columns (phase, a)
    rho0 = model.rho0
    cols = []
    for ph in phases:
        s1 = ph.signs[0]
        cols += [rho0, apply_switch(rho0, dyn.switch_operator(s1), 1, dyn.eps)]
    x = vec(np.stack(cols)).T  # (16, 2 n_ph)
    _, kept = propagate_segment(dyn, 1, (), x, max(n1_steps), record=n1_steps, segment_label="t1")
    x1 = np.stack(kept)  # (n1, 16, 2 n_ph)

    # segment 2: columns (phase, a, b), batched over t1
    sign2 = [ph.signs[1] for ph in phases for _ in range(2)]
    x2 = _apply_switch_columns(x1, dyn, sign2)  # (n1, 16, 4 n_ph)
    uniq = sorted(set(t2_steps))
    _, kept = propagate_segment(dyn, 2, (t1_grid,), x2, uniq[-1], record=uniq, segment_label="T")
    after_t2 = dict(zip(uniq, kept))

    row = detection_row(model.mu_minus)
    sign3 = [ph.signs[2] for ph in phases for _ in range(4)]

    def detect(k):
        T = T_list[k]
        x3 = _apply_switch_columns(after_t2[t2_steps[k]], dyn, sign3)  # (n1, 16, 8 n_ph)
        _, sig = propagate_segment(
            dyn, 3, (t1_grid, T), x3, max(t3_steps), record=t3_steps,
            reduce=lambda v: row @ v, segment_label=f"t3 (T = {T} fs)",
        )
        sig = np.stack(sig)  # (n3, n1, 8 n_ph)
        if not np.all(np.isfinite(sig)):
            raise NumericalError(f"non-finite signal at T = {T} fs")
        sig = sig.reshape(len(t3_steps), len(t1_grid), n_ph, 2, 2, 2)
        out = [inclusion_exclusion(np.transpose(sig[:, :, p], (2, 3, 4, 1, 0))) for p in range(n_ph)]
        if progress is not None:
            progress(k)
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_t = list(pool.map(detect, range(len(T_list))))
    else:
        per_t = [detect(k) for k in range(len(T_list))]

    return [
        Signal3(ph, T_list[k], t1_grid, t3_grid, per_t[k][p])
        for p, ph in enumerate(phases)
        for k in range(len(T_list))
    ]
