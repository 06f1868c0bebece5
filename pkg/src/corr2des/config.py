"""Run configuration: JSON documents, validation, defaults and presets.

Units in the document: site energies, coupling and spectral windows in
cm^-1, temperature in K, times in fs, the bath cutoff ``omega_c`` in rad/fs.
A bath ``coupling`` of ``null`` asks for the default calibration (see
:func:`corr2des.calibration.calibrate_coupling`).
"""

from dataclasses import asdict, dataclass, field, replace
from importlib import resources
import hashlib
import json
import math

import numpy as np

from .bath import PowerLaw, Structured
from .dissipators import DynamicsMode, SegmentVariant
from .exciton import DimerParams

PRESETS = ("fig2", "fig3", "fig4", "fig5")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BathConfig:
    kind: str
    omega_c: float
    s: float = 1.0
    coupling: float = None
    tail_weight: float = 0.01
    tail_cut: float = 0.05
    #: static-Markov exciton coherence 1/e time used when coupling is null
    calibration_target_fs: float = 200.0

    def spectral(self, coupling=None):
        lam = self.coupling if coupling is None else coupling
        if lam is None:
            raise ConfigError("bath coupling is not resolved; calibrate first")
        if self.kind == "power_law":
            return PowerLaw(lam, self.s, self.omega_c)
        return Structured(lam, self.omega_c, self.tail_weight, self.tail_cut)

    def to_dict(self):
        d = asdict(self)
        if self.kind == "power_law":
            del d["tail_weight"], d["tail_cut"]
        else:
            del d["s"]
        return d

    def calibration_reference(self):
        """Ohmic density with the same cutoff; the calibration is shared by all shapes."""
        return PowerLaw(1.0, 1.0, self.omega_c)


@dataclass(frozen=True)
class Grids:
    t1_max: float = 315.0
    t1_points: int = 64
    t3_max: float = 315.0
    t3_points: int = 64
    T_list: tuple = tuple(float(t) for t in range(0, 1001, 10))

    @property
    def t1_grid(self):
        return np.arange(self.t1_points) * (self.t1_max / (self.t1_points - 1))

    @property
    def t3_grid(self):
        return np.arange(self.t3_points) * (self.t3_max / (self.t3_points - 1))

    @property
    def t_total(self):
        return self.t1_max + max(self.T_list) + self.t3_max


@dataclass(frozen=True)
class RunConfig:
    dimer: DimerParams
    bath: BathConfig
    dynamics_mode: DynamicsMode
    segment_variant: SegmentVariant = SegmentVariant.AS_PRINTED
    pulse_amplitude: float = 0.01
    dressing_amplitude: float = None
    grids: Grids = field(default_factory=Grids)
    dt: float = 0.5
    crosspeak_window: tuple = None
    name: str = "custom"

    @property
    def dressing(self):
        """Amplitude of the pulse operator inside the dressing unitaries."""
        return self.pulse_amplitude if self.dressing_amplitude is None else self.dressing_amplitude

    def to_dict(self):
        return {
            "name": self.name,
            "dimer": asdict(self.dimer),
            "bath": self.bath.to_dict(),
            "dynamics_mode": self.dynamics_mode.value,
            "segment_variant": self.segment_variant.value,
            "pulse_amplitude": self.pulse_amplitude,
            "dressing_amplitude": self.dressing_amplitude,
            "grids": {**asdict(self.grids), "T_list": list(self.grids.T_list)},
            "integrator": {"dt": self.dt},
            "crosspeak_window": None if self.crosspeak_window is None else list(self.crosspeak_window),
        }

    def with_overrides(self, **kw):
        return replace(self, **kw)


_DIMER_REQUIRED = ("eps1", "eps2", "coupling", "mu1", "mu2", "temperature")
_DIMER_OPTIONAL = ("f_dipoles",)
_BATH_KEYS = {
    "power_law": (("s", "omega_c"), ("coupling", "calibration_target_fs")),
    "structured": (("omega_c",), ("coupling", "tail_weight", "tail_cut", "calibration_target_fs")),
}
_TOP_REQUIRED = ("dimer", "bath", "dynamics_mode")
_TOP_OPTIONAL = (
    "name", "segment_variant", "pulse_amplitude", "dressing_amplitude",
    "grids", "integrator", "crosspeak_window",
)
_GRID_KEYS = ("t1_max", "t1_points", "t3_max", "t3_points", "T_list")

_MODE_ALIASES = {"ca": "correlation_aware", "reset": "factorized_reset", "markov": "static_markov"}


def _check_keys(d, required, optional, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    unknown = sorted(set(d) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"{where}: missing required field(s) {', '.join(missing)}")


def _number(d, key, where, positive=False, nonneg=False, integer=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key}: expected a finite number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key}: must be positive, got {v!r}")
    if nonneg and not v >= 0:
        raise ConfigError(f"{where}.{key}: must be non-negative, got {v!r}")
    return int(v) if integer else float(v)


def _parse_dimer(d):
    _check_keys(d, _DIMER_REQUIRED, _DIMER_OPTIONAL, "dimer")
    vals = {k: _number(d, k, "dimer") for k in _DIMER_REQUIRED}
    if not vals["temperature"] > 0:
        raise ConfigError(f"dimer.temperature: must be positive, got {vals['temperature']!r}")
    try:
        return DimerParams(**vals, f_dipoles=d.get("f_dipoles", "harmonic"))
    except ValueError as exc:
        raise ConfigError(f"dimer: {exc}") from None


def _parse_bath(d):
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError("bath: missing required field(s) kind")
    kind = d["kind"]
    if kind not in _BATH_KEYS:
        raise ConfigError(f"bath.kind: expected one of {', '.join(_BATH_KEYS)}, got {kind!r}")
    req, opt = _BATH_KEYS[kind]
    _check_keys(d, ("kind",) + req, opt, "bath")
    kw = {"kind": kind, "omega_c": _number(d, "omega_c", "bath", positive=True)}
    if kind == "power_law":
        kw["s"] = _number(d, "s", "bath", positive=True)
    for key in ("tail_weight", "tail_cut"):
        if key in d:
            kw[key] = _number(d, key, "bath", nonneg=key == "tail_weight", positive=key == "tail_cut")
    if d.get("coupling") is not None:
        kw["coupling"] = _number(d, "coupling", "bath", nonneg=True)
    if "calibration_target_fs" in d:
        kw["calibration_target_fs"] = _number(d, "calibration_target_fs", "bath", positive=True)
    return BathConfig(**kw)


def _snap_grid(t_max, points, dt, what):
    """Grid step rounded to a multiple of dt; returns the resolved t_max."""
    step = t_max / (points - 1)
    n = max(1, round(step / dt))
    if abs(n * dt - step) > 1e-9 * step:
        step = n * dt
    return float(step * (points - 1))


def _parse_T_list(v, dt):
    if isinstance(v, dict):
        _check_keys(v, ("start", "stop", "step"), (), "grids.T_list")
        start = _number(v, "start", "grids.T_list", nonneg=True)
        stop = _number(v, "stop", "grids.T_list", nonneg=True)
        step = _number(v, "step", "grids.T_list", positive=True)
        if stop < start:
            raise ConfigError("grids.T_list: stop must not precede start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = [start + k * step for k in range(n)]
    elif isinstance(v, (list, tuple)):
        values = [_number({"T": x}, "T", "grids.T_list", nonneg=True) for x in v]
    else:
        raise ConfigError("grids.T_list: expected a list or {start, stop, step}")
    if not values:
        raise ConfigError("grids.T_list: must not be empty")
    snapped = []
    for t in values:
        k = round(t / dt)
        if abs(k * dt - t) > 1e-9 * max(1.0, t):
            raise ConfigError(f"grids.T_list: {t} fs is not a multiple of dt = {dt} fs")
        snapped.append(float(k * dt))
    return tuple(snapped)


def _parse_grids(d, dt):
    _check_keys(d, (), _GRID_KEYS, "grids")
    g = Grids()
    kw = {}
    for axis in ("t1", "t3"):
        t_max = _number(d, f"{axis}_max", "grids", positive=True) if f"{axis}_max" in d else getattr(g, f"{axis}_max")
        pts = _number(d, f"{axis}_points", "grids", integer=True) if f"{axis}_points" in d else getattr(g, f"{axis}_points")
        if pts < 2:
            raise ConfigError(f"grids.{axis}_points: need at least 2, got {pts}")
        kw[f"{axis}_max"] = _snap_grid(t_max, pts, dt, axis)
        kw[f"{axis}_points"] = pts
    kw["T_list"] = _parse_T_list(d["T_list"], dt) if "T_list" in d else _parse_T_list(list(g.T_list), dt)
    return Grids(**kw)


def config_from_dict(d):
    """Validate a parsed document and return a :class:`RunConfig`."""
    if d is None or (isinstance(d, dict) and not d):
        fields = list(_TOP_REQUIRED) + [f"dimer.{k}" for k in _DIMER_REQUIRED] + ["bath.kind", "bath.omega_c"]
        raise ConfigError(f"empty configuration: missing required field(s) {', '.join(fields)}")
    _check_keys(d, _TOP_REQUIRED, _TOP_OPTIONAL, "config")
    integ = d.get("integrator", {})
    _check_keys(integ, (), ("dt",), "integrator")
    dt = _number(integ, "dt", "integrator", positive=True) if "dt" in integ else 0.5
    mode = _MODE_ALIASES.get(d["dynamics_mode"], d["dynamics_mode"])
    try:
        mode = DynamicsMode(mode)
    except ValueError:
        raise ConfigError(f"dynamics_mode: unknown mode {d['dynamics_mode']!r}") from None
    variant = str(d.get("segment_variant", "as_printed")).replace("-", "_")
    try:
        variant = SegmentVariant(variant)
    except ValueError:
        raise ConfigError(f"segment_variant: unknown variant {d['segment_variant']!r}") from None
    eps = _number(d, "pulse_amplitude", "config", positive=True) if "pulse_amplitude" in d else 0.01
    dress = d.get("dressing_amplitude")
    if dress is not None:
        dress = _number(d, "dressing_amplitude", "config", nonneg=True)
    window = d.get("crosspeak_window")
    if window is not None:
        if not isinstance(window, (list, tuple)) or len(window) != 3:
            raise ConfigError("crosspeak_window: expected [w1_cm1, w3_cm1, half_width_cm1]")
        window = tuple(_number({"w": w}, "w", "crosspeak_window") for w in window)
        if not window[2] > 0:
            raise ConfigError("crosspeak_window: half width must be positive")
    name = d.get("name", "custom")
    if not isinstance(name, str):
        raise ConfigError("name: expected a string")
    return RunConfig(
        dimer=_parse_dimer(d["dimer"]),
        bath=_parse_bath(d["bath"]),
        dynamics_mode=mode,
        segment_variant=variant,
        pulse_amplitude=eps,
        dressing_amplitude=dress,
        grids=_parse_grids(d.get("grids", {}), dt),
        dt=dt,
        crosspeak_window=window,
        name=name,
    )


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return config_from_dict({})
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return config_from_dict(doc)


def load_preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("corr2des.presets").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return config_from_dict(json.loads(text))


def dumps_config(cfg):
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


def dump_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_config(cfg) + "\n")


def config_hash(cfg):
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
