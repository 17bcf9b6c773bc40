"""Scenario configuration and its INI-style text format.

A config file has a ``[scenario]`` section, optional ``[noise]`` and
``[camera]`` sections, and one section per estimator named after it
(``stt``, ``sttr``, ``ckf``, ``cikf``, ``cmkf``) holding the tuning
parameters. Unknown sections or keys are rejected.
"""

import configparser
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .estimators import (
    CIKF_DEFAULTS,
    CKF_DEFAULTS,
    CMKF_DEFAULTS,
    STT_DEFAULTS,
    STTR_DEFAULTS,
    KalmanParams,
    SttrParams,
)

ESTIMATORS = ("ckf", "cikf", "cmkf", "stt", "sttr")
TRAJECTORIES = ("eight", "square", "constant")
NOISE_PATHS = ("angular", "pixel")
POINTING = ("target", "fixed")


class ConfigError(ValueError):
    pass


def default_params():
    return {
        "ckf": CKF_DEFAULTS,
        "cikf": CIKF_DEFAULTS,
        "cmkf": CMKF_DEFAULTS,
        "stt": STT_DEFAULTS,
        "sttr": STTR_DEFAULTS,
    }


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    dt: float = 0.05
    duration: float = 40.0
    trajectory: str = "eight"
    target_center: tuple = (0.0, 0.0, 20.0)
    target_velocity: tuple = (4.0, -3.0, 1.0)
    n_observers: int = 6
    neighbors: int = 3
    box: tuple = (80.0, 80.0, 40.0)
    radius_range: tuple = (5.0, 15.0)
    omega_range: tuple = (0.1, 0.5)
    pointing: str = "target"
    sigma_g_deg: float = 5.7
    sigma_hc_deg: float = 4.6
    sigma_omega_deg: float = 1.1
    noise_path: str = "angular"
    focal: float = 500.0
    cx: float = 320.0
    cy: float = 240.0
    estimators: tuple = ESTIMATORS
    steady_state_start: float | None = None
    max_lag: float = 5.0
    params: dict = field(default_factory=default_params)

    def __post_init__(self):
        self.validate()

    # -- derived ------------------------------------------------------------
    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    @property
    def sigma_g(self):
        return np.deg2rad(self.sigma_g_deg)

    @property
    def sigma_h(self):
        return np.deg2rad(self.sigma_hc_deg)

    @property
    def sigma_omega(self):
        return np.deg2rad(self.sigma_omega_deg)

    @property
    def steady_start(self):
        return 0.5 * self.duration if self.steady_state_start is None else self.steady_state_start

    def with_params(self, name, **changes):
        params = dict(self.params)
        params[name] = replace(params[name], **changes)
        return replace(self, params=params)

    # -- validation ---------------------------------------------------------
    def validate(self):
        errs = []
        if not self.dt > 0:
            errs.append("scenario.dt: must be > 0")
        if not self.duration > 0:
            errs.append("scenario.duration: must be > 0")
        elif self.dt > 0 and self.n_steps < 1:
            errs.append("scenario.duration: shorter than one step")
        if self.n_observers < 1:
            errs.append("scenario.n_observers: must be >= 1")
        if self.neighbors < 0:
            errs.append("scenario.neighbors: must be >= 0")
        elif self.neighbors > 0 and self.neighbors >= self.n_observers:
            errs.append("scenario.neighbors: must be smaller than n_observers")
        if self.trajectory not in TRAJECTORIES:
            errs.append(f"scenario.trajectory: expected one of {TRAJECTORIES}")
        if self.noise_path not in NOISE_PATHS:
            errs.append(f"scenario.noise_path: expected one of {NOISE_PATHS}")
        if self.pointing not in POINTING:
            errs.append(f"scenario.pointing: expected one of {POINTING}")
        if self.noise_path == "pixel" and self.pointing != "target":
            errs.append("scenario.pointing: pixel noise path needs pointing = target")
        for name in ("sigma_g_deg", "sigma_hc_deg", "sigma_omega_deg"):
            if getattr(self, name) < 0:
                errs.append(f"noise.{name}: must be >= 0")
        for name, n in (("target_center", 3), ("target_velocity", 3), ("box", 3),
                        ("radius_range", 2), ("omega_range", 2)):
            if len(getattr(self, name)) != n:
                errs.append(f"scenario.{name}: expected {n} values")
        if len(self.radius_range) == 2 and not 0 < self.radius_range[0] <= self.radius_range[1]:
            errs.append("scenario.radius_range: need 0 < low <= high")
        if len(self.omega_range) == 2 and self.omega_range[0] > self.omega_range[1]:
            errs.append("scenario.omega_range: need low <= high")
        if not self.estimators:
            errs.append("scenario.estimators: select at least one estimator")
        for e in self.estimators:
            if e not in ESTIMATORS:
                errs.append(f"scenario.estimators: unknown estimator {e!r}")
        if self.steady_state_start is not None and not (
            0 <= self.steady_state_start < self.duration
        ):
            errs.append("scenario.steady_state_start: must lie in [0, duration)")
        if self.max_lag < 0:
            errs.append("scenario.max_lag: must be >= 0")
        if self.focal <= 0:
            errs.append("camera.focal: must be > 0")
        for e in ESTIMATORS:
            if e not in self.params:
                errs.append(f"{e}: missing parameter block")
        if self.neighbors > 0:
            for e in ("stt", "sttr", "cikf", "cmkf"):
                z = getattr(self.params.get(e), "zeta", 0.0)
                if 1.0 - self.neighbors * z < -1e-12:
                    errs.append(f"{e}.zeta: {z} * {self.neighbors} neighbours exceeds 1")
        if errs:
            raise ConfigError("; ".join(errs))


# -- text format ----------------------------------------------------------------

_SCENARIO_KEYS = {
    "seed": int,
    "dt": float,
    "duration": float,
    "trajectory": str,
    "target_center": tuple,
    "target_velocity": tuple,
    "n_observers": int,
    "neighbors": int,
    "box": tuple,
    "radius_range": tuple,
    "omega_range": tuple,
    "pointing": str,
    "noise_path": str,
    "estimators": "names",
    "steady_state_start": "optional",
    "max_lag": float,
}
_NOISE_KEYS = {"sigma_g_deg": float, "sigma_hc_deg": float, "sigma_omega_deg": float}
_CAMERA_KEYS = {"focal": float, "cx": float, "cy": float}
_STTR_KEYS = {f.name for f in fields(SttrParams)}
_KALMAN_KEYS = {f.name for f in fields(KalmanParams)}


def _convert(section, key, raw, kind):
    try:
        if kind is tuple:
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if kind == "names":
            return tuple(v.strip().lower() for v in raw.replace(",", " ").split())
        if kind == "optional":
            return None if raw.strip().lower() in ("", "none") else float(raw)
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from exc


def _params_from_section(name, sec):
    base = default_params()[name]
    allowed = _KALMAN_KEYS if isinstance(base, KalmanParams) else _STTR_KEYS
    changes = {}
    for key, raw in sec.items():
        if key not in allowed:
            raise ConfigError(f"{name}.{key}: unknown parameter")
        if raw.strip().lower() in ("none", "-", ""):
            changes[key] = None
        else:
            changes[key] = _convert(name, key, raw, float)
    try:
        return replace(base, **changes)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def parse_config(text):
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    kw = {}
    params = default_params()
    for section in cp.sections():
        sec = cp[section]
        if section == "scenario":
            table = _SCENARIO_KEYS
        elif section == "noise":
            table = _NOISE_KEYS
        elif section == "camera":
            table = _CAMERA_KEYS
        elif section in ESTIMATORS:
            params[section] = _params_from_section(section, sec)
            continue
        else:
            raise ConfigError(f"[{section}]: unknown section")
        for key, raw in sec.items():
            if key not in table:
                raise ConfigError(f"{section}.{key}: unknown key")
            kw[key] = _convert(section, key, raw, table[key])
    for k in ("seed", "n_observers", "neighbors"):
        if k in kw:
            kw[k] = int(kw[k])
    kw["params"] = params
    return ScenarioConfig(**kw)


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg):
    """Text form of ``cfg``; ``parse_config(dump_config(cfg)) == cfg``."""
    lines = ["[scenario]"]
    for key in _SCENARIO_KEYS:
        lines.append(f"{key} = {_fmt(getattr(cfg, key))}")
    lines += ["", "[noise]"]
    lines += [f"{k} = {_fmt(getattr(cfg, k))}" for k in _NOISE_KEYS]
    lines += ["", "[camera]"]
    lines += [f"{k} = {_fmt(getattr(cfg, k))}" for k in _CAMERA_KEYS]
    for name in ESTIMATORS:
        p = cfg.params[name]
        lines += ["", f"[{name}]"]
        lines += [f"{f.name} = {_fmt(getattr(p, f.name))}" for f in fields(p)]
    return "\n".join(lines) + "\n"
