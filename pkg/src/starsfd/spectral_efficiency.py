"""Closed-form UL/DL SINR terms and sum spectral efficiency.

Every SINR depends on the surface coefficients only through two trace
factors, ``t_r = tr(A_r Theta_r^H)`` and ``t_t = tr(A_t Theta_t^H)``, so a
:class:`Variant` (which surface correlation, which interference terms, which
pre-log) plus an :class:`~starsfd.estimation.EstimationStats` fully
determines a report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .correlation import stars_correlation, trace_factor
from .estimation import estimation_stats

MODES = ("FD_STARS", "HD_STARS", "FD_CRIS", "RANDOM_PBM")
CSV_SCHEMA = "se-v1"


def _tr(A):
    return float(np.real(np.trace(A)))


def _tr_prod(A, B):
    """``Re tr(A B)`` without forming the product."""
    return float(np.real(np.einsum("ij,ji->", A, B)))


def sigma_kj_matrix(cfg, region, include_self=True):
    """Inter-user direct-link variances: ``sigma2_kj`` within a region, else 0."""
    region = np.asarray(region)
    out = np.where(region[:, None] == region[None, :], cfg.sigma2_kj, 0.0)
    if not include_self:
        np.fill_diagonal(out, 0.0)
    return out


def cris_surface_correlation(cfg):
    """Correlation of one half of the surface grid (used by each cRIS panel)."""
    if cfg.N % 2:
        raise ValueError("cRIS baseline needs an even number of elements")
    if cfg.N_v % 2 == 0:
        n_h, n_v = cfg.N_h, cfg.N_v // 2
    else:
        n_h, n_v = cfg.N_h // 2, cfg.N_v
    d = cfg.elem_size_m
    return stars_correlation(n_h, n_v, d, d, cfg.lambda_m)


@dataclass(frozen=True)
class Variant:
    """What distinguishes FD-STARS, HD-STARS and FD-cRIS evaluations.

    ``R_s_r``/``R_s_t`` are the correlations seen by the reflection and
    transmission coefficient vectors; ``cochannel[k, j]`` switches the
    surface-borne UE-j -> UE-k interference on or off.
    """

    mode: str
    R_s_r: np.ndarray = field(repr=False)
    R_s_t: np.ndarray = field(repr=False)
    si_li: bool
    sigma_kj: np.ndarray = field(repr=False)
    cochannel: np.ndarray = field(repr=False)
    prelog: float
    unit_modulus: bool = False

    def traces(self, pbm):
        return trace_factor(self.R_s_r, pbm.theta_r), trace_factor(self.R_s_t, pbm.theta_t)

    def stats(self, cfg, corr, pbm):
        return estimation_stats(cfg, corr, *self.traces(pbm))


def make_variant(cfg, corr, mode="FD_STARS"):
    K = corr.K
    if mode in ("FD_STARS", "RANDOM_PBM"):
        return Variant(mode, corr.R_s, corr.R_s, True, sigma_kj_matrix(cfg, corr.region),
                       np.ones((K, K)), cfg.zeta)
    if mode == "HD_STARS":
        return Variant(mode, corr.R_s, corr.R_s, False,
                       sigma_kj_matrix(cfg, corr.region, include_self=False),
                       np.ones((K, K)), 0.5 * cfg.zeta)
    if mode == "FD_CRIS":
        R_half = cris_surface_correlation(cfg)
        region = np.asarray(corr.region)
        same = (region[:, None] == region[None, :]).astype(float)
        return Variant(mode, R_half, R_half, True, sigma_kj_matrix(cfg, corr.region),
                       same, cfg.zeta, unit_modulus=True)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


# -- UL terms -----------------------------------------------------------------------

def ul_signal(k, stats, cfg):
    return cfg.p_u * _tr(stats.Psi_ul[k]) ** 2


def ul_components(k, stats, corr, cfg, si_li=True):
    """UL interference split into variance, MUI, SI, LI and noise parts."""
    Psi = stats.Psi_ul[k]
    p_u = cfg.p_u
    var = p_u * (_tr_prod(Psi, stats.R_ul[k]) - _tr_prod(Psi, Psi))
    mui = sum(p_u * _tr_prod(Psi, stats.R_ul[i]) for i in range(stats.K) if i != k)
    if si_li and _tr(stats.Psi_sum) > 0:
        common = (cfg.p_b / _tr(stats.Psi_sum)) * _tr_prod(Psi, corr.R_bt) \
            * _tr_prod(corr.R_b, stats.Psi_sum)
        si = common * corr.delta_g * corr.delta_gt * stats.t_r
        li = common * cfg.sigma2_L
    else:
        si = li = 0.0
    noise = cfg.sigma2 * _tr(Psi)
    return {"var": var, "mui": mui, "si": si, "li": li, "noise": noise}


def ul_interference(k, stats, corr, cfg, si_li=True):
    """Closed-form UL interference-plus-noise of user ``k``."""
    Psi = stats.Psi_ul[k]
    R_sum = cfg.p_u * stats.R_ul.sum(axis=0)
    value = _tr_prod(Psi, R_sum) - cfg.p_u * _tr_prod(Psi, Psi) + cfg.sigma2 * _tr(Psi)
    if si_li and _tr(stats.Psi_sum) > 0:
        value += (cfg.p_b / _tr(stats.Psi_sum)) * _tr_prod(Psi, corr.R_bt) \
            * _tr_prod(corr.R_b, stats.Psi_sum) \
            * (corr.delta_g * corr.delta_gt * stats.t_r + cfg.sigma2_L)
    if value < 0:
        raise ArithmeticError(f"negative UL interference for user {k}: {value:.3e}")
    return value


# -- DL terms -----------------------------------------------------------------------

def _cochannel(k, stats, corr, cfg, sigma_kj, cochannel):
    t_k = stats.t_r if corr.region[k] == "r" else stats.t_t
    return sum(cfg.p_u * (sigma_kj[k, j] + cochannel[k, j] * corr.delta_h[k] * corr.delta_ht[j] * t_k)
               for j in range(stats.K))


def dl_signal(k, stats, cfg=None):
    """DL numerator with the power normalization divided out (``tr^2(Psi_k)``)."""
    return _tr(stats.Psi_dl[k]) ** 2


def dl_interference(k, stats, corr, cfg, sigma_kj=None, cochannel=None):
    """DL denominator on the same rescaled footing as :func:`dl_signal`."""
    K = stats.K
    sigma_kj = sigma_kj_matrix(cfg, corr.region) if sigma_kj is None else sigma_kj
    cochannel = np.ones((K, K)) if cochannel is None else cochannel
    Psi_k = stats.Psi_dl[k]
    tr_sum = _tr(stats.Psi_sum)
    value = (_tr_prod(stats.R_dl[k], stats.Psi_sum) - _tr_prod(Psi_k, Psi_k)
             + tr_sum / cfg.p_b * _cochannel(k, stats, corr, cfg, sigma_kj, cochannel)
             + cfg.sigma2 / cfg.p_b * tr_sum)
    if value < 0:
        raise ArithmeticError(f"negative DL interference for user {k}: {value:.3e}")
    return value


def dl_components(k, stats, corr, cfg, sigma_kj=None, cochannel=None):
    """Unscaled DL signal and interference parts (power normalization applied)."""
    K = stats.K
    sigma_kj = sigma_kj_matrix(cfg, corr.region) if sigma_kj is None else sigma_kj
    cochannel = np.ones((K, K)) if cochannel is None else cochannel
    tr_sum = _tr(stats.Psi_sum)
    scale = cfg.p_b / tr_sum if tr_sum > 0 else 0.0
    Psi_k = stats.Psi_dl[k]
    return {
        "S": scale * _tr(Psi_k) ** 2,
        "var": scale * (_tr_prod(Psi_k, stats.R_dl[k]) - _tr_prod(Psi_k, Psi_k)),
        "mui": scale * sum(_tr_prod(stats.R_dl[k], stats.Psi_dl[i]) for i in range(K) if i != k),
        "cochannel": _cochannel(k, stats, corr, cfg, sigma_kj, cochannel),
        "noise": cfg.sigma2,
    }


# -- reports ------------------------------------------------------------------------

def sinr(S, I):
    """``S / I`` with a link that carries no signal at all (``S = I = 0``) mapped to 0."""
    S = np.asarray(S, dtype=float)
    I = np.asarray(I, dtype=float)
    dead = (S == 0) & (I == 0)
    return np.where(dead, 0.0, S / np.where(dead, 1.0, I))


@dataclass
class SEReport:
    mode: str
    S_u: np.ndarray
    I_u: np.ndarray
    S_d: np.ndarray
    I_d: np.ndarray
    zeta: float
    beta: float
    config_hash: str = ""
    provenance: str = "closed-form"

    @property
    def gamma_u(self):
        return sinr(self.S_u, self.I_u)

    @property
    def gamma_d(self):
        return sinr(self.S_d, self.I_d)

    @property
    def se_u(self):
        return self.zeta * np.log2(1.0 + self.gamma_u)

    @property
    def se_d(self):
        return self.zeta * np.log2(1.0 + self.gamma_d)

    @property
    def ul_se(self):
        return float(self.se_u.sum())

    @property
    def dl_se(self):
        return float(self.se_d.sum())

    @property
    def sum_se(self):
        return self.ul_se + self.dl_se

    def to_dict(self):
        lst = lambda a: [float(x) for x in a]
        return {
            "mode": self.mode, "config_hash": self.config_hash, "provenance": self.provenance,
            "zeta": self.zeta, "beta": self.beta,
            "S_u": lst(self.S_u), "I_u": lst(self.I_u), "S_d": lst(self.S_d), "I_d": lst(self.I_d),
            "gamma_u": lst(self.gamma_u), "gamma_d": lst(self.gamma_d),
            "se_u": lst(self.se_u), "se_d": lst(self.se_d),
            "ul_se": self.ul_se, "dl_se": self.dl_se, "sum_se": self.sum_se,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_header(self):
        K = len(self.S_u)
        return (["schema", "mode", "config_hash"] + [f"gamma_u{k}" for k in range(K)]
                + [f"gamma_d{k}" for k in range(K)] + ["ul_se", "dl_se", "sum_se"])

    def csv_row(self):
        return ([CSV_SCHEMA, self.mode, self.config_hash]
                + [repr(float(g)) for g in self.gamma_u] + [repr(float(g)) for g in self.gamma_d]
                + [repr(self.ul_se), repr(self.dl_se), repr(self.sum_se)])


def report_from_stats(cfg, corr, stats, variant):
    K = stats.K
    S_u = np.array([ul_signal(k, stats, cfg) for k in range(K)])
    I_u = np.array([ul_interference(k, stats, corr, cfg, variant.si_li) for k in range(K)])
    S_d = np.array([dl_signal(k, stats, cfg) for k in range(K)])
    I_d = np.array([dl_interference(k, stats, corr, cfg, variant.sigma_kj, variant.cochannel)
                    for k in range(K)])
    tr_sum = _tr(stats.Psi_sum)
    beta = K / tr_sum if tr_sum > 0 else np.inf
    return SEReport(variant.mode, S_u, I_u, S_d, I_d, variant.prelog, beta, cfg.digest())


def evaluate(cfg, corr, pbm, variant):
    return report_from_stats(cfg, corr, variant.stats(cfg, corr, pbm), variant)


def sum_se(cfg, corr, pbm, mode="FD_STARS"):
    """Closed-form SE report of ``pbm`` under ``mode``.

    For ``FD_CRIS`` the PBM's ``theta_r``/``theta_t`` are the unit-modulus
    coefficients of the reflect-only and transmit-only panels (N/2 each).
    """
    return evaluate(cfg, corr, pbm, make_variant(cfg, corr, mode))


def hd_sum_se(cfg, corr, pbm):
    return sum_se(cfg, corr, pbm, "HD_STARS")


def cris_sum_se(cfg, corr, pbm_r, pbm_t):
    from .pbm import PBM
    if cfg.N % 2:
        raise ValueError("cRIS baseline needs an even number of elements")
    return sum_se(cfg, corr, PBM(pbm_r, pbm_t), "FD_CRIS")


def objective(cfg, corr, pbm, variant):
    """Sum SE in bit/s/Hz; the quantity the optimizer maximizes."""
    return evaluate(cfg, corr, pbm, variant).sum_se
