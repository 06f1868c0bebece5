"""End-to-end simulation pipeline: config -> tables -> sweep -> analysis."""

from dataclasses import dataclass, field, replace
from functools import lru_cache
import time

import numpy as np

from .bath import PowerLaw, bath_correlation
from .calibration import calibrate_coupling
from .dissipators import (
    DynamicsMode,
    build_table,
    lambda_static_markov,
    liouville_generator,
    memory_split,
    population_to_coherence,
)
from .exciton import build_model
from .propagator import Dynamics, Phase, ProtocolPoint, pulse_unitary, run_protocol, unvec
from .response import scan_waiting_times
from .spectra import absorptive, beating_spectrum, crosspeak_trace, fourier_2d, persistence_ratio, ppt_monitor
from .units import thermal_beta

#: Lambda_S is tabulated at least this far, whatever the protocol length
MIN_TABLE_FS = 2000.0


@lru_cache(maxsize=16)
def _calibrated(params, omega_c, dt, target):
    model = build_model(params)
    return calibrate_coupling(model, PowerLaw(1.0, 1.0, omega_c), dt, target_fs=target)[0]


def resolve_coupling(cfg):
    """Return ``cfg`` with the bath coupling filled in (calibrated if null)."""
    if cfg.bath.coupling is not None:
        return cfg
    lam = _calibrated(cfg.dimer, cfg.bath.omega_c, cfg.dt, cfg.bath.calibration_target_fs)
    return replace(cfg, bath=replace(cfg.bath, coupling=lam))


def strict_markov(spectral):
    """Only baths with s >= 1 and no tail must show a settled Lambda_S."""
    return isinstance(spectral, PowerLaw) and spectral.s >= 1


@lru_cache(maxsize=8)
def _correlation(spectral, beta, step, n):
    return bath_correlation(spectral, beta, step, n)


def table_steps(cfg):
    step = 0.5 * cfg.dt
    horizon = max(MIN_TABLE_FS, cfg.grids.t_total)
    return step, int(np.ceil(horizon / step - 1e-9))


@dataclass(frozen=True)
class Setup:
    cfg: object
    model: object
    corr: object
    table: object
    dyn: Dynamics
    certificate: float


def build_setup(cfg):
    cfg = resolve_coupling(cfg)
    model = build_model(cfg.dimer)
    spectral = cfg.bath.spectral()
    step, n = table_steps(cfg)
    corr = _correlation(spectral, thermal_beta(cfg.dimer.temperature), step, n)
    table = build_table(model.a0, model.h_rot, corr)
    _, cert = lambda_static_markov(table, strict=strict_markov(spectral))
    dyn = Dynamics(model, table, pulse_unitary(model.mu, cfg.dressing), cfg.dynamics_mode,
                   cfg.segment_variant, cfg.dt, cfg.pulse_amplitude)
    return Setup(cfg, model, corr, table, dyn, cert)


def default_window(cfg, model):
    if cfg.crosspeak_window is not None:
        return cfg.crosspeak_window
    e1, e2 = model.energies_cm1
    return (e2, e1, 30.0)


def mirror_window(window):
    return (window[1], window[0], window[2])


def representative_delays(cfg, dt):
    """Mid-grid t1 and T, snapped to dt, used by single-trajectory diagnostics."""
    g = cfg.grids
    t1 = g.t1_grid[len(g.t1_grid) // 2]
    T = g.T_list[len(g.T_list) // 2]
    return round(t1 / dt) * dt, round(T / dt) * dt


def memory_norms(setup, k, delays, n_steps):
    """t, ||D_mem||_F, ||D_full||_F over one segment (dissipative generators only)."""
    dyn = setup.dyn
    tau = dyn.dt * np.arange(n_steps + 1)
    full = liouville_generator(dyn.dissipator(k, delays)(tau), setup.model.a0)
    static = liouville_generator(setup.table.static(tau), setup.model.a0)
    _, d_mem, _ = memory_split(full, static)
    return tau, np.linalg.norm(d_mem, axis=(-2, -1)), np.linalg.norm(full, axis=(-2, -1))


def memory_norm_table(setup):
    """Rows (segment, t_fs, ||D_mem||, ||D_full||) at the representative delays."""
    cfg = setup.cfg
    t1, T = representative_delays(cfg, cfg.dt)
    spans = (
        (1, (), cfg.grids.t1_max),
        (2, (t1,), max(cfg.grids.T_list)),
        (3, (t1, T), cfg.grids.t3_max),
    )
    rows = []
    for k, delays, span in spans:
        tau, mem, full = memory_norms(setup, k, delays, int(round(span / cfg.dt)))
        rows += [(k, t, m, f) for t, m, f in zip(tau, mem, full)]
    return rows


def nonsecular_activation(setup, delays=None, span=None):
    """Max population->coherence element of the segment-2 generator, relative to its largest element."""
    cfg, dyn = setup.cfg, setup.dyn
    t1 = representative_delays(cfg, cfg.dt)[0] if delays is None else delays[0]
    span = max(cfg.grids.T_list) if span is None else span
    tau = dyn.dt * np.arange(int(round(span / dyn.dt)) + 1)
    gen = dyn.generator(2, (t1,), tau)
    rel = population_to_coherence(gen) / np.abs(gen).max(axis=(-2, -1))
    k = int(np.argmax(rel))
    return float(rel[k]), float(tau[k])


def physical_trajectory(setup, t1=None, T=None):
    """Density matrices along a full-pulse (1, 1, 1) run at the representative delays."""
    cfg = setup.cfg
    r1, rT = representative_delays(cfg, cfg.dt)
    t1 = r1 if t1 is None else t1
    T = rT if T is None else T
    pt = ProtocolPoint(t1, T, (cfg.grids.t3_max,), Phase.REPHASING)
    log = []
    run_protocol(pt, setup.dyn, rho_log=log, physical=True)
    return log


def hygiene(log):
    """Max trace and Hermiticity drift over a logged trajectory."""
    rhos = np.array([r for _, r in log])
    tr = np.abs(np.trace(rhos, axis1=-2, axis2=-1) - np.trace(rhos[0])).max()
    herm = np.linalg.norm(rhos - np.swapaxes(rhos, -1, -2).conj(), axis=(-2, -1)).max()
    return float(tr), float(herm)


def rk4_error_ratio(setup, t1=20.0, T=40.0, t3=60.0):
    """|S(dt) - S(dt/2)| / |S(dt/2) - S(dt/4)| for one S_111 protocol point.

    All three runs share one Lambda_S table at step dt/8 so that only the
    integrator error changes.
    """
    cfg, model = setup.cfg, setup.model
    dt = cfg.dt
    step = dt / 8
    n = int(np.ceil((t1 + T + t3) / step)) + 8
    corr = bath_correlation(cfg.bath.spectral(), setup.corr.beta, step, n)
    table = build_table(model.a0, model.h_rot, corr)
    out = []
    for h in (dt, dt / 2, dt / 4):
        dyn = replace(setup.dyn, table=table, dt=h)
        pt = ProtocolPoint(t1, T, (t3,), Phase.REPHASING)
        out.append(run_protocol(pt, dyn)[-1])
    e1, e2 = abs(out[0] - out[1]), abs(out[1] - out[2])
    return float(e1 / e2) if e2 > 0 else float("inf")


@dataclass
class Results:
    setup: Setup
    signals: list
    spectra: dict
    trace: object
    mirror_trace: object
    beating: object
    mirror_beating: object
    persistence: float
    ppt: tuple
    drift: tuple
    timings: dict = field(default_factory=dict)


def simulate(cfg, threads=1, progress=None, timings=None):
    """Full sweep and analysis for one configuration."""
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    setup = build_setup(cfg)
    cfg = setup.cfg
    timings["tables"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    g = cfg.grids
    signals = scan_waiting_times(setup.dyn, g.t1_grid, g.t3_grid, g.T_list, threads=threads, progress=progress)
    timings["sweep"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    carrier = setup.model.carrier_cm1
    n_t = len(g.T_list)
    spectra = {}
    for k, T in enumerate(g.T_list):
        rp = fourier_2d(signals[k], carrier)
        nr = fourier_2d(signals[n_t + k], carrier)
        spectra[T] = absorptive(rp, nr)
    window = default_window(cfg, setup.model)
    specs = [spectra[T] for T in g.T_list]
    trace = crosspeak_trace(specs, g.T_list, window)
    mirror = crosspeak_trace(specs, g.T_list, mirror_window(window))
    enough = len(g.T_list) >= 8
    beat = beating_spectrum(trace) if enough else None
    mbeat = beating_spectrum(mirror) if enough else None
    try:
        pers = persistence_ratio(trace)
    except ValueError:
        pers = float("nan")
    timings["analysis"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    log = physical_trajectory(setup)
    ppt = ppt_monitor(log, to_site=setup.model.to_site)
    drift = hygiene(log)
    timings["diagnostics"] = time.perf_counter() - t0
    return Results(setup, signals, spectra, trace, mirror, beat, mbeat, pers, ppt, drift, timings)


def is_static_reference(cfg):
    return cfg.dynamics_mode is DynamicsMode.STATIC_MARKOV
