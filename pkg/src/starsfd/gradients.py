"""Analytic gradients of the closed-form SINR terms w.r.t. the surface coefficients.

All SINR terms depend on ``theta_m`` only through ``t_m = theta_m^H K_m theta_m``
whose Wirtinger gradient is ``diag(A_m) = K_m theta_m``. Each gradient is
therefore a scalar coefficient times ``diag(A_r)`` plus another times
``diag(A_t)``; :class:`GradientWorkspace` assembles those coefficients from
the matrix expressions below and keeps them for reuse.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .correlation import diag_A
from .pbm import PBM
from .spectral_efficiency import evaluate, report_from_stats

LOG2E = 1.0 / np.log(2.0)


def _tr(A):
    return float(np.real(np.trace(A)))


def _trp(A, B):
    return float(np.real(np.einsum("ij,ji->", A, B)))


def _sandwich(Q, R, X):
    """``Q R X - Q R X R Q + X R Q``: derivative kernel of ``tr(R Q R X)`` in R."""
    QR = Q @ R
    RQ = R @ Q
    return QR @ X - QR @ X @ RQ + X @ RQ


class GradientWorkspace:
    """Coefficient matrices of the SINR-term gradients at one operating point.

    ``dS_u``, ``dI_u``, ``dS_d`` and ``dI_d`` are ``K x 2`` arrays whose
    columns multiply ``diag(A_r)`` and ``diag(A_t)``. ``nu_ul``/``nu_dl`` are
    the signal-gradient scalars, ``varpi``, ``chi_ul``, ``chi1`` and ``chi2``
    the scalar weights of the interference gradients.
    """

    def __init__(self, cfg, corr, stats, variant):
        self.cfg, self.corr, self.stats, self.variant = cfg, corr, stats, variant
        K = stats.K
        p_u, p_b, s2 = cfg.p_u, cfg.p_b, cfg.sigma2
        R_b, R_bt = corr.R_b, corr.R_bt
        dg, dgt = corr.delta_g, corr.delta_gt
        dh, dht = corr.delta_h, corr.delta_ht
        col = np.where(corr.reflect, 0, 1)
        t_of = np.where(corr.reflect, stats.t_r, stats.t_t)
        Psi_sum = stats.Psi_sum
        tr_sum = _tr(Psi_sum)
        tr_b_sum = _trp(R_b, Psi_sum)
        R_sum = p_u * stats.R_ul.sum(axis=0)
        I_M = np.eye(R_b.shape[0])

        # per-user building blocks
        self.C_ul = np.array([_sandwich(stats.Q_ul[k], stats.R_ul[k], np.eye(R_bt.shape[0]))
                              for k in range(K)])
        self.C_dl = np.array([_sandwich(stats.Q_dl[k], stats.R_dl[k], I_M) for k in range(K)])
        self.B_dl = np.array([2 * _sandwich(stats.Q_dl[k], stats.R_dl[k], stats.Psi_dl[k])
                              for k in range(K)])

        si = variant.si_li
        self.varpi = (p_b / tr_sum) * tr_b_sum * (dg * dgt * stats.t_r + cfg.sigma2_L) if si else 0.0

        dS_u = np.zeros((K, 2))
        dI_u = np.zeros((K, 2))
        dS_d = np.zeros((K, 2))
        dI_d = np.zeros((K, 2))
        sig = variant.sigma_kj
        mask = variant.cochannel
        self.Xi = []
        self.chi_ul = np.zeros(K)
        self.chi1 = np.zeros(K)
        self.chi2 = np.zeros(K)
        for k in range(K):
            Q, R, Psi = stats.Q_ul[k], stats.R_ul[k], stats.Psi_ul[k]
            tr_psi = _tr(Psi)
            tr_psi_bt = _trp(Psi, R_bt)
            # UL signal
            dS_u[k, 0] = 2 * dgt * dht[k] * p_u * tr_psi * _trp(R_bt, self.C_ul[k])
            # UL interference, own-covariance part
            B1 = _sandwich(Q, R, R_sum)
            B2 = self.varpi * _sandwich(Q, R, R_bt) if si else 0.0
            B3 = 2 * p_u * _sandwich(Q, R, Psi)
            own = _trp(R_bt, B1 + B2 - B3 + s2 * self.C_ul[k])
            mix = sum(dht[j] * p_u for j in range(K)) * tr_psi_bt
            dI_u[k, 0] = dgt * dht[k] * own + dgt * mix
            if si:
                scale = (p_b / tr_sum) * tr_psi_bt
                Xi = scale * (dg * dgt * stats.t_r + cfg.sigma2_L) * (R_b - (tr_b_sum / tr_sum) * I_M)
                chi = scale * dg * dgt * tr_b_sum
                dI_u[k, 0] += chi
                self.chi_ul[k] = chi
                for i in range(K):
                    L = _sandwich(stats.Q_dl[i], stats.R_dl[i], Xi)
                    dI_u[k, col[i]] += dg * dh[i] * _trp(R_b, L)
                self.Xi.append(Xi)

            # DL signal
            Rd, Psid = stats.R_dl[k], stats.Psi_dl[k]
            dS_d[k, col[k]] = 2 * dg * dh[k] * _tr(Psid) * _trp(R_b, self.C_dl[k])
            chi1 = (sum(p_u * (sig[k, j] + mask[k, j] * dh[k] * dht[j] * t_of[k]) for j in range(K))
                    + s2) / p_b
            chi2 = dh[k] * tr_sum * sum(mask[k, j] * p_u * dht[j] for j in range(K)) / p_b
            self.chi1[k], self.chi2[k] = chi1, chi2
            dI_d[k, col[k]] += dg * dh[k] * _trp(R_b, Psi_sum - self.B_dl[k]) + chi2
            for i in range(K):
                L = _sandwich(stats.Q_dl[i], stats.R_dl[i], Rd)
                dI_d[k, col[i]] += dg * dh[i] * (_trp(R_b, L) + chi1 * _trp(R_b, self.C_dl[i]))

        self.dS_u, self.dI_u, self.dS_d, self.dI_d = dS_u, dI_u, dS_d, dI_d
        self.nu_ul = dS_u[:, 0].copy()
        self.nu_dl = dS_d.sum(axis=1)


def _vectors(coef, a_r, a_t):
    return np.outer(coef[:, 0], a_r), np.outer(coef[:, 1], a_t)


@dataclass
class Gradients:
    """Wirtinger gradients ``d/d theta^*`` of every term (rows indexed by user)."""

    S_u: tuple
    I_u: tuple
    S_d: tuple
    I_d: tuple


def term_gradients(cfg, corr, pbm, variant, stats=None):
    stats = stats or variant.stats(cfg, corr, pbm)
    ws = GradientWorkspace(cfg, corr, stats, variant)
    a_r = diag_A(variant.R_s_r, pbm.theta_r)
    a_t = diag_A(variant.R_s_t, pbm.theta_t)
    return Gradients(*(_vectors(c, a_r, a_t) for c in (ws.dS_u, ws.dI_u, ws.dS_d, ws.dI_d)))


def grad_S_ul(cfg, corr, pbm, variant, k):
    return term_gradients(cfg, corr, pbm, variant).S_u[0][k]


def grad_I_ul(cfg, corr, pbm, variant, k):
    g = term_gradients(cfg, corr, pbm, variant).I_u
    return g[0][k], g[1][k]


def grad_S_dl(cfg, corr, pbm, variant, k):
    g = term_gradients(cfg, corr, pbm, variant).S_d
    return g[0][k], g[1][k]


def grad_I_dl(cfg, corr, pbm, variant, k):
    g = term_gradients(cfg, corr, pbm, variant).I_d
    return g[0][k], g[1][k]


def grad_objective(cfg, corr, pbm, variant, stats=None):
    """Value and Wirtinger gradient ``(f, g_r, g_t)`` of the sum SE.

    Each user contributes ``(grad S / I - gamma grad I / I) / (1 + gamma)``,
    which avoids forming ``I^2`` for tiny interference powers. Users whose
    link is switched off entirely (``I = 0``, e.g. ``theta_r = 0`` for the UL)
    contribute nothing.
    """
    stats = stats or variant.stats(cfg, corr, pbm)
    report = report_from_stats(cfg, corr, stats, variant)
    ws = GradientWorkspace(cfg, corr, stats, variant)
    coef = np.zeros(2)
    for S, I, dS, dI in ((report.S_u, report.I_u, ws.dS_u, ws.dI_u),
                         (report.S_d, report.I_d, ws.dS_d, ws.dI_d)):
        live = I > 0
        S, I, dS, dI = S[live], I[live], dS[live], dI[live]
        gamma = S / I
        coef += (((dS - gamma[:, None] * dI) / I[:, None]) / (1 + gamma)[:, None]).sum(axis=0)
    coef *= variant.prelog * LOG2E
    g_r = coef[0] * diag_A(variant.R_s_r, pbm.theta_r)
    g_t = coef[1] * diag_A(variant.R_s_t, pbm.theta_t)
    return report.sum_se, g_r, g_t


# -- finite-difference check --------------------------------------------------------

def numeric_wirtinger(fun, theta, step=1e-6):
    """Central-difference ``(df/dRe + j df/dIm) / 2`` for each entry of ``theta``."""
    theta = np.asarray(theta, dtype=complex)
    out = np.zeros_like(theta)
    for n in range(theta.size):
        e = np.zeros_like(theta)
        e[n] = step
        d_re = (fun(theta + e) - fun(theta - e)) / (2 * step)
        d_im = (fun(theta + 1j * e) - fun(theta - 1j * e)) / (2 * step)
        out[n] = 0.5 * (d_re + 1j * d_im)
    return out


def relative_error(analytic, numeric):
    scale = np.max(np.abs(numeric))
    if scale == 0:
        return float(np.max(np.abs(analytic)))
    return float(np.max(np.abs(analytic - numeric)) / scale)


def _term_value(cfg, corr, variant, term, k):
    def value(theta):
        rep = evaluate(cfg, corr, PBM.from_stacked(theta), variant)
        if term == "objective":
            return rep.sum_se
        return float(getattr(rep, term)[k])
    return value


@dataclass
class GradcheckRow:
    term: str
    user: int
    analytic: np.ndarray
    numeric: np.ndarray

    @property
    def rel_error(self):
        return relative_error(self.analytic, self.numeric)


def gradcheck(cfg, corr, pbm, variant, step=1e-6, terms=True):
    """Compare analytic and numeric gradients of the SINR terms and the objective.

    Returns :class:`GradcheckRow` records over the stacked ``[theta_r, theta_t]``
    vector; ``user`` is -1 for the objective. The unconstrained map
    ``theta -> f`` is differentiated (the energy constraint is not imposed on
    the perturbation).
    """
    theta = pbm.stacked()
    rows = []
    if terms:
        grads = term_gradients(cfg, corr, pbm, variant)
        for term, (g_r, g_t) in (("S_u", grads.S_u), ("I_u", grads.I_u),
                                 ("S_d", grads.S_d), ("I_d", grads.I_d)):
            for k in range(corr.K):
                numeric = numeric_wirtinger(_term_value(cfg, corr, variant, term, k), theta, step)
                rows.append(GradcheckRow(term, k, np.concatenate([g_r[k], g_t[k]]), numeric))
    _, g_r, g_t = grad_objective(cfg, corr, pbm, variant)
    numeric = numeric_wirtinger(_term_value(cfg, corr, variant, "objective", -1), theta, step)
    rows.append(GradcheckRow("objective", -1, np.concatenate([g_r, g_t]), numeric))
    return rows


def gradcheck_csv(rows):
    """One line per gradient component; ``rel_error`` repeats the per-term metric."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["term", "user", "component", "analytic_re", "analytic_im",
                     "numeric_re", "numeric_im", "rel_error"])
    for row in rows:
        err = row.rel_error
        for n, (a, b) in enumerate(zip(row.analytic, row.numeric)):
            writer.writerow([row.term, row.user, n, repr(float(a.real)), repr(float(a.imag)),
                             repr(float(b.real)), repr(float(b.imag)), f"{err:.6e}"])
    return buf.getvalue()
