"""MMSE estimation statistics of the cascaded UL and DL channels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg


def _mmse_triplet(R, rho):
    n = R.shape[0]
    factor = linalg.cho_factor(R + rho * np.eye(n), lower=True)
    Q = linalg.cho_solve(factor, np.eye(n))
    Q = 0.5 * (Q + Q.conj().T)
    Psi = R @ Q @ R
    Psi = 0.5 * (Psi + Psi.conj().T)
    return Q, Psi, R - Psi


def ul_estimation_stats(R_ul_k, sigma2_u, tau_up, p_train):
    """Return ``(Q, Psi, E)`` of the UL cascaded-channel MMSE estimate.

    ``Q = (R + sigma2_u / (tau_up p_train) I)^-1``, ``Psi = R Q R`` is the
    estimate covariance and ``E = R - Psi`` the error covariance.
    """
    return _mmse_triplet(np.asarray(R_ul_k), sigma2_u / (tau_up * p_train))


def dl_estimation_stats(R_dl_k, sigma2_d, tau_dp, p_train):
    return _mmse_triplet(np.asarray(R_dl_k), sigma2_d / (tau_dp * p_train))


def mmse_estimate(r_obs, R, Q):
    """Linear MMSE estimate ``R Q r`` of a zero-mean channel from ``r = u + noise``."""
    r_obs = np.asarray(r_obs)
    if R.shape[1] != Q.shape[0] or Q.shape[1] != r_obs.shape[0]:
        raise ValueError("dimension mismatch between observation and statistics")
    return R @ (Q @ r_obs)


@dataclass(frozen=True)
class EstimationStats:
    """Per-user cascaded covariances and MMSE statistics (arrays stacked on axis 0).

    ``t_r``/``t_t`` are the surface trace factors the covariances were built
    from; ``c_ul[k] * t_r`` and ``c_dl[k] * t_{w_k}`` are the scalings that
    multiply ``R_bt`` and ``R_b``.
    """

    t_r: float
    t_t: float
    R_ul: np.ndarray = field(repr=False)
    Q_ul: np.ndarray = field(repr=False)
    Psi_ul: np.ndarray = field(repr=False)
    E_ul: np.ndarray = field(repr=False)
    R_dl: np.ndarray = field(repr=False)
    Q_dl: np.ndarray = field(repr=False)
    Psi_dl: np.ndarray = field(repr=False)
    E_dl: np.ndarray = field(repr=False)
    Psi_sum: np.ndarray = field(repr=False)

    @property
    def K(self):
        return self.R_ul.shape[0]


def _stats_from_eig(lam, U, scales, rho):
    """MMSE matrices for ``R_k = s_k U diag(lam) U^H`` sharing one eigenbasis."""
    lam = np.clip(lam, 0.0, None)
    out = {name: [] for name in ("R", "Q", "Psi", "E")}
    for s in scales:
        r = s * lam
        q = 1.0 / (r + rho)
        psi = r * r * q
        for name, d in (("R", r), ("Q", q), ("Psi", psi), ("E", r - psi)):
            out[name].append((U * d) @ U.conj().T)
    return {name: np.array(mats) for name, mats in out.items()}


def estimation_stats(cfg, corr, t_r, t_t):
    """All per-user statistics for given surface trace factors.

    Because every UL covariance is a scalar multiple of ``R_bt`` (and every
    DL covariance of ``R_b``), one eigendecomposition per BS array covers all
    users.
    """
    reflect = corr.reflect
    ul_scale = corr.delta_gt * corr.delta_ht * t_r
    dl_scale = corr.delta_g * corr.delta_h * np.where(reflect, t_r, t_t)
    lam, U = corr.eig_bt()
    ul = _stats_from_eig(lam, U, ul_scale, cfg.sigma2 / (cfg.tau_up * cfg.p_train))
    lam, U = corr.eig_b()
    dl = _stats_from_eig(lam, U, dl_scale, cfg.sigma2 / (cfg.tau_dp * cfg.p_train))
    return EstimationStats(
        t_r=float(t_r), t_t=float(t_t),
        R_ul=ul["R"], Q_ul=ul["Q"], Psi_ul=ul["Psi"], E_ul=ul["E"],
        R_dl=dl["R"], Q_dl=dl["Q"], Psi_dl=dl["Psi"], E_dl=dl["E"],
        Psi_sum=dl["Psi"].sum(axis=0),
    )
