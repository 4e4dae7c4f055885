"""Experiment configuration, node placement and distance-based path loss."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Invalid or incomplete configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of a STARS-assisted full-duplex massive-MIMO cell.

    Powers are stored in dBm (ratios in dB) exactly as configured; the
    ``p_b``, ``p_u``, ``p_train``, ``sigma2``, ``sigma2_L`` and ``sigma2_kj``
    properties return watts. Defaults are the full-size profile.
    """

    M_T: int = 128
    M_R: int = 128
    N_h: int = 12
    N_v: int = 12
    K_r: int = 2
    K_t: int = 2
    tau_c: int = 200
    tau_up: int = 4
    tau_dp: int = 4
    p_b_dBm: float = 30.0
    p_u_dBm: float = 15.0
    p_train_dBm: float = 15.0
    sigma2_dBm: float = -94.0
    sigma2_L_dB: float = 0.0
    sigma2_kj_dB: float = 0.0
    alpha: float = 2.6
    lambda_m: float = 0.1
    elem_size_frac: float = 0.25
    geometry_kind: str = "line"
    bs_xy: tuple = (0.0, 0.0)
    stars_xy: tuple = (50.0, 10.0)
    d0_m: float = 20.0
    mu_1: float = 500.0
    epsilon: float = 1e-5
    seed: int = 0
    # BS array model (local scattering around a uniform linear array)
    bs_spacing_frac: float = 0.5
    bs_angle_spread_deg: float = 20.0
    bs_mean_angle_deg: float = 0.0
    bs_angle_points: int = 200

    def __post_init__(self):
        self.validate()

    # -- derived quantities -------------------------------------------------
    @property
    def N(self):
        return self.N_h * self.N_v

    @property
    def K(self):
        return self.K_r + self.K_t

    @property
    def p_b(self):
        return dbm_to_watt(self.p_b_dBm)

    @property
    def p_u(self):
        return dbm_to_watt(self.p_u_dBm)

    @property
    def p_train(self):
        return dbm_to_watt(self.p_train_dBm)

    @property
    def sigma2(self):
        return dbm_to_watt(self.sigma2_dBm)

    @property
    def sigma2_L(self):
        return self.sigma2 * db_to_linear(self.sigma2_L_dB)

    @property
    def sigma2_kj(self):
        return self.sigma2 * db_to_linear(self.sigma2_kj_dB)

    @property
    def elem_size_m(self):
        return self.elem_size_frac * self.lambda_m

    @property
    def zeta(self):
        """Fraction of the coherence block left for data."""
        return (self.tau_c - self.tau_up - self.tau_dp) / self.tau_c

    # -- validation -----------------------------------------------------------
    def validate(self):
        for key in ("M_T", "M_R", "N_h", "N_v", "K_r", "K_t"):
            if getattr(self, key) < 1:
                raise ConfigError(key, "must be at least 1")
        if self.tau_up < self.K:
            raise ConfigError("tau_up", "pilot length below user count")
        if self.tau_dp < self.K:
            raise ConfigError("tau_dp", "pilot length below user count")
        if self.tau_up + self.tau_dp >= self.tau_c:
            raise ConfigError("tau_c", "pilots must leave room for data")
        for key in ("p_b_dBm", "p_u_dBm", "p_train_dBm", "sigma2_dBm"):
            value = dbm_to_watt(getattr(self, key))
            if not (value > 0.0 and math.isfinite(value)):
                raise ConfigError(key, "power must be strictly positive")
        for key in ("alpha", "lambda_m", "elem_size_frac", "d0_m", "mu_1", "epsilon",
                    "bs_spacing_frac"):
            if not getattr(self, key) > 0:
                raise ConfigError(key, "must be positive")
        if self.geometry_kind not in ("line", "circular"):
            raise ConfigError("geometry_kind", "expected 'line' or 'circular'")
        if self.bs_angle_points < 1:
            raise ConfigError("bs_angle_points", "must be at least 1")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    def digest(self):
        """Short stable hash of every configured value."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


DESK_PROFILE = dict(M_T=32, M_R=32, N_h=6, N_v=6)


def desk_config(**overrides):
    """Reduced-size profile used by tests and quick runs (M=32, N=36, K=4)."""
    return SystemConfig(**{**DESK_PROFILE, **overrides})


_FIELDS = {f.name: f for f in dataclasses.fields(SystemConfig)}


def _coerce(key, raw):
    if key not in _FIELDS:
        raise ConfigError(key, "unknown key")
    default = _FIELDS[key].default
    text = raw.strip()
    try:
        if isinstance(default, bool):
            return text.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            value = float(text)
            if not value.is_integer():
                raise ValueError(text)
            return int(value)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            parts = [p for p in text.strip("()[] ").split(",") if p.strip()]
            if len(parts) != 2:
                raise ValueError(text)
            return tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(key, f"non-numeric value {raw!r}") from None
    return text


def parse_assignments(lines, base=None):
    """Turn ``key = value`` lines into a dict of typed values."""
    values = dict(base or {})
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        values[key] = _coerce(key, raw)
    return values


def load_config(path, overrides=()):
    """Read a flat ``key = value`` file (``#`` starts a comment).

    Keys missing from the file keep their defaults. ``overrides`` is an
    iterable of extra ``key=value`` strings applied after the file.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    values = parse_assignments(path.read_text().splitlines())
    values = parse_assignments(overrides, values)
    return SystemConfig(**values)


def config_from_overrides(overrides=(), base=None):
    base = base or SystemConfig()
    values = parse_assignments(overrides, base.to_dict())
    return SystemConfig(**values)


def write_config(cfg, path):
    lines = []
    for key, value in cfg.to_dict().items():
        if isinstance(value, (tuple, list)):
            value = ", ".join(repr(float(v)) for v in value)
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class UEGeometry:
    positions: np.ndarray = field(repr=False)
    region: tuple

    @property
    def reflect_mask(self):
        return np.array([w == "r" for w in self.region])


def _line_points(count, x_center, y, span):
    if count == 1:
        return [(x_center, y)]
    xs = np.linspace(x_center - 0.5 * span, x_center + 0.5 * span, count)
    return [(float(x), y) for x in xs]


def place_users(cfg, kind=None):
    """Place the reflection-region and transmission-region users.

    The line setup puts each region's users on a segment of length ``d0_m``
    half a span below (reflection) or above (transmission) the surface,
    endpoints included. The circular setup draws users uniformly in a disk of
    radius 10 m centred at the same two points, seeded by ``cfg.seed``.
    """
    kind = kind or cfg.geometry_kind
    xs, ys = cfg.stars_xy
    y_r = ys - 0.5 * cfg.d0_m
    y_t = ys + 0.5 * cfg.d0_m
    if kind == "line":
        pts = _line_points(cfg.K_r, xs, y_r, cfg.d0_m) + _line_points(cfg.K_t, xs, y_t, cfg.d0_m)
    elif kind == "circular":
        rng = np.random.default_rng(cfg.seed)
        pts = []
        for count, yc in ((cfg.K_r, y_r), (cfg.K_t, y_t)):
            radius = 10.0 * np.sqrt(rng.uniform(size=count))
            angle = rng.uniform(0.0, 2 * np.pi, size=count)
            pts += [(xs + r * np.cos(a), yc + r * np.sin(a)) for r, a in zip(radius, angle)]
    else:
        raise ConfigError("geometry_kind", f"unknown setup {kind!r}")
    region = ("r",) * cfg.K_r + ("t",) * cfg.K_t
    return UEGeometry(positions=np.asarray(pts, dtype=float), region=region)


def path_loss(distance_m, d_H, d_V, alpha):
    """Gain ``d_H * d_V * distance**-alpha`` of one surface-element link."""
    distance_m = np.asarray(distance_m, dtype=float)
    if np.any(distance_m <= 0):
        raise ValueError("distance must be positive")
    gain = d_H * d_V * distance_m ** (-alpha)
    return float(gain) if gain.ndim == 0 else gain
