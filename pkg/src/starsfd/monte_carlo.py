"""Monte-Carlo simulation of training and use-and-then-forget data transmission.

Every realization draws fresh small-scale fading, runs pilot training, forms
MRC combiners and MRT precoders from the MMSE estimates and records the raw
products whose averages make up the SINR terms. Realization ``i`` uses its
own Philox stream keyed by ``(seed, i)``, so results do not depend on how the
work is split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .correlation import psd_sqrt, trace_factor
from .spectral_efficiency import (
    dl_components, make_variant, sigma_kj_matrix, ul_components, ul_signal,
)

N_GROUPS = 20


def realization_rng(seed, index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass(frozen=True)
class MCContext:
    """Square-root factors and per-user statistics shared by all realizations."""

    cfg: object
    corr: object
    pbm: object
    stats: object
    sqrt_R_s: np.ndarray = field(repr=False)
    sqrt_R_b: np.ndarray = field(repr=False)
    sqrt_R_bt: np.ndarray = field(repr=False)
    sigma_kj: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, cfg, corr, pbm):
        variant = make_variant(cfg, corr, "FD_STARS")
        return cls(cfg, corr, pbm, variant.stats(cfg, corr, pbm),
                   psd_sqrt(corr.R_s), psd_sqrt(corr.R_b), psd_sqrt(corr.R_bt),
                   sigma_kj_matrix(cfg, corr.region))


@dataclass
class ChannelRealization:
    G: np.ndarray      # N x M_T, transmit array -> surface
    G_t: np.ndarray    # M_R x N, surface -> receive array
    h: np.ndarray      # K x N, surface -> user (row k is h_k)
    h_t: np.ndarray    # N x K, user -> surface (column k is h~_k)
    G_b: np.ndarray    # M_R x M_T, loop interference at the BS
    H: np.ndarray      # K x K, direct user-to-user channels


def draw_channels(ctx, rng):
    """One realization of every fast-fading channel, colored and path-loss scaled."""
    cfg, corr = ctx.cfg, ctx.corr
    N, M_T, M_R, K = corr.R_s.shape[0], corr.R_b.shape[0], corr.R_bt.shape[0], corr.K
    Rs = ctx.sqrt_R_s
    G = np.sqrt(corr.delta_g) * Rs @ _cn(rng, N, M_T) @ ctx.sqrt_R_b
    G_t = np.sqrt(corr.delta_gt) * ctx.sqrt_R_bt @ _cn(rng, M_R, N) @ Rs
    h = np.sqrt(corr.delta_h)[:, None] * (_cn(rng, K, N) @ Rs)
    h_t = (Rs @ _cn(rng, N, K)) * np.sqrt(corr.delta_ht)[None, :]
    G_b = np.sqrt(cfg.sigma2_L) * ctx.sqrt_R_bt @ _cn(rng, M_R, M_T) @ ctx.sqrt_R_b
    H = np.sqrt(ctx.sigma_kj) * _cn(rng, K, K)
    return ChannelRealization(G, G_t, h, h_t, G_b, H)


def cascaded_channels(real, pbm, region):
    """UL cascaded channels (``M_R x K``) and DL cascaded rows (``K x M_T``)."""
    u_t = real.G_t @ (pbm.theta_r[:, None] * real.h_t)
    theta = np.stack([pbm.theta_r if w == "r" else pbm.theta_t for w in region])
    u = (real.h * theta) @ real.G
    return u_t, u


def pilot_book(tau, K, p_train):
    """``K`` columns of a ``tau``-point DFT matrix, each with energy ``tau p_train``."""
    if tau < K:
        raise ValueError("pilot length below user count")
    n = np.arange(tau)
    F = np.exp(-2j * np.pi * np.outer(n, n) / tau)
    return np.sqrt(p_train) * F[:, :K]


def simulate_training(real, pbm, cfg, rng, region, noise=True):
    """Despread pilot observations ``(r_ul, r_dl)``.

    UL: the BS receives ``Y = sum_k u~_k phi_k^T + W`` over ``tau_up`` symbols
    and forms ``r~_k = Y phi_k^* / (tau_up p_train)``. DL uses the mirrored
    construction on the transmit array with ``tau_dp`` symbols, giving an
    observation of ``u_k^H``. Columns index users.
    """
    K = len(region)
    u_t, u = cascaded_channels(real, pbm, region)
    out = []
    for channels, tau in ((u_t, cfg.tau_up), (u.conj().T, cfg.tau_dp)):
        phi = pilot_book(tau, K, cfg.p_train)
        Y = channels @ phi.T
        if noise:
            Y = Y + np.sqrt(cfg.sigma2) * _cn(rng, channels.shape[0], tau)
        out.append(Y @ phi.conj() / (tau * cfg.p_train))
    return out[0], out[1]


def _realization_products(ctx, index, seed):
    """Raw per-realization quantities whose means form every SINR term."""
    cfg, corr, pbm, st = ctx.cfg, ctx.corr, ctx.pbm, ctx.stats
    K = corr.K
    rng = realization_rng(seed, index)
    real = draw_channels(ctx, rng)
    u_t, u = cascaded_channels(real, pbm, corr.region)
    r_ul, r_dl = simulate_training(real, pbm, cfg, rng, corr.region)
    V = np.stack([st.R_ul[k] @ (st.Q_ul[k] @ r_ul[:, k]) for k in range(K)], axis=1)
    F = np.stack([st.R_dl[k] @ (st.Q_dl[k] @ r_dl[:, k]) for k in range(K)], axis=1)
    VU = V.conj().T @ u_t
    UF = u @ F
    si = V.conj().T @ real.G_t @ (pbm.theta_r[:, None] * (real.G @ F))
    li = V.conj().T @ real.G_b @ F
    theta = np.stack([pbm.theta_r if w == "r" else pbm.theta_t for w in corr.region])
    co = (real.h * theta) @ real.h_t
    return {
        "a": np.diag(VU),                       # v_k^H u~_k
        "a2": np.abs(np.diag(VU)) ** 2,
        "mu_u": np.abs(VU) ** 2,                # |v_k^H u~_i|^2
        "si": (np.abs(si) ** 2).sum(axis=1),
        "li": (np.abs(li) ** 2).sum(axis=1),
        "vnorm": (np.abs(V) ** 2).sum(axis=0),
        "fnorm": float((np.abs(F) ** 2).sum()),
        "b": np.diag(UF),                       # u_k f_k
        "b2": np.abs(np.diag(UF)) ** 2,
        "mu_d": np.abs(UF) ** 2,                # |u_k f_i|^2
        "co": np.abs(co) ** 2,                  # |h_k Theta_{w_k} h~_j|^2
        "direct": np.abs(real.H) ** 2,
    }


def _chunk(args):
    ctx, seed, start, stop = args
    rows = [_realization_products(ctx, i, seed) for i in range(start, stop)]
    return {key: np.array([row[key] for row in rows]) for key in rows[0]}


def _terms_from_means(m, cfg, K, zeta):
    """SINR terms from averaged raw products (the unscaled DL form)."""
    p_u, p_b = cfg.p_u, cfg.p_b
    fnorm = m["fnorm"]
    beta = K / fnorm if fnorm > 0 else 0.0
    scale = beta * p_b / K
    off = ~np.eye(K, dtype=bool)
    out = {"beta": np.array(beta)}
    out["S_u"] = p_u * np.abs(m["a"]) ** 2
    out["var_u"] = p_u * (m["a2"] - np.abs(m["a"]) ** 2)
    out["mui_u"] = p_u * np.where(off, m["mu_u"], 0.0).sum(axis=1)
    out["si_u"] = scale * m["si"]
    out["li_u"] = scale * m["li"]
    out["noise_u"] = cfg.sigma2 * m["vnorm"]
    out["I_u"] = out["var_u"] + out["mui_u"] + out["si_u"] + out["li_u"] + out["noise_u"]
    out["S_d"] = scale * np.abs(m["b"]) ** 2
    out["var_d"] = scale * (m["b2"] - np.abs(m["b"]) ** 2)
    out["mui_d"] = scale * np.where(off, m["mu_d"], 0.0).sum(axis=1)
    out["cochannel_d"] = p_u * (m["direct"] + m["co"]).sum(axis=1)
    out["noise_d"] = np.full(K, cfg.sigma2)
    out["I_d"] = out["var_d"] + out["mui_d"] + out["cochannel_d"] + out["noise_d"]
    out["co_matrix"] = m["co"]
    gu = _safe_ratio(out["S_u"], out["I_u"])
    gd = _safe_ratio(out["S_d"], out["I_d"])
    out["sum_se"] = np.array(zeta * (np.log2(1 + gu).sum() + np.log2(1 + gd).sum()))
    return out


def _safe_ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


@dataclass
class MCResult:
    """MC estimates and grouped-jackknife standard errors of every term."""

    n_realizations: int
    mean: dict
    se: dict
    co_mean: np.ndarray = field(repr=False)
    co_se: np.ndarray = field(repr=False)


def mc_uatf_terms(cfg, corr, pbm, n_realizations, seed=None, jobs=1, n_groups=N_GROUPS):
    """Monte-Carlo estimates of all UL/DL signal and interference terms.

    Standard errors come from a delete-one-group jackknife over ``n_groups``
    contiguous blocks of realizations, which also covers ratio quantities
    such as the empirical power normalization ``beta = K / E{tr(F F^H)}``.
    """
    if n_realizations < 100:
        raise ValueError("need at least 100 realizations")
    seed = cfg.seed if seed is None else seed
    ctx = MCContext.build(cfg, corr, pbm)
    bounds = np.linspace(0, n_realizations, n_groups + 1).astype(int)
    tasks = [(ctx, seed, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_chunk, tasks))
    else:
        chunks = [_chunk(t) for t in tasks]
    sums = [{k: v.sum(axis=0) for k, v in c.items()} for c in chunks]
    counts = np.array([b - a for _, _, a, b in tasks])
    total = {k: sum(s[k] for s in sums) for k in sums[0]}
    full = _terms_from_means({k: v / n_realizations for k, v in total.items()},
                             cfg, corr.K, cfg.zeta)
    loo = []
    for g, s in enumerate(sums):
        n = n_realizations - counts[g]
        loo.append(_terms_from_means({k: (total[k] - s[k]) / n for k in total},
                                     cfg, corr.K, cfg.zeta))
    G = len(sums)
    se = {}
    for key in full:
        vals = np.array([l[key] for l in loo])
        se[key] = np.sqrt((G - 1) / G * ((vals - vals.mean(axis=0)) ** 2).sum(axis=0))
    co_mean = full.pop("co_matrix")
    co_se = se.pop("co_matrix")
    return MCResult(n_realizations, full, se, co_mean, co_se)


def closed_form_terms(cfg, corr, pbm):
    """Closed-form counterparts of the keys produced by :func:`mc_uatf_terms`."""
    variant = make_variant(cfg, corr, "FD_STARS")
    st = variant.stats(cfg, corr, pbm)
    K = corr.K
    ul = [ul_components(k, st, corr, cfg) for k in range(K)]
    dl = [dl_components(k, st, corr, cfg, variant.sigma_kj, variant.cochannel) for k in range(K)]
    out = {"S_u": np.array([ul_signal(k, st, cfg) for k in range(K)])}
    for name in ("var", "mui", "si", "li", "noise"):
        out[f"{name}_u"] = np.array([c[name] for c in ul])
    out["I_u"] = sum(out[f"{n}_u"] for n in ("var", "mui", "si", "li", "noise"))
    out["S_d"] = np.array([c["S"] for c in dl])
    for name in ("var", "mui", "cochannel", "noise"):
        out[f"{name}_d"] = np.array([c[name] for c in dl])
    out["I_d"] = sum(out[f"{n}_d"] for n in ("var", "mui", "cochannel", "noise"))
    tr_sum = float(np.real(np.trace(st.Psi_sum)))
    out["beta"] = np.array(K / tr_sum if tr_sum > 0 else 0.0)
    gu = _safe_ratio(out["S_u"], out["I_u"])
    gd = _safe_ratio(out["S_d"], out["I_d"])
    out["sum_se"] = np.array(cfg.zeta * (np.log2(1 + gu).sum() + np.log2(1 + gd).sum()))
    t = {"r": st.t_r, "t": st.t_t}
    out["co_matrix"] = np.array([[corr.delta_h[k] * corr.delta_ht[j] * t[corr.region[k]]
                                  for j in range(K)] for k in range(K)])
    return out


# Terms that decide the verdict; the remaining components are reported only.
GATED = ("S_u", "I_u", "S_d", "I_d", "sum_se")
COMPONENTS = ("var_u", "mui_u", "si_u", "li_u", "noise_u",
              "var_d", "mui_d", "cochannel_d", "noise_d")


def _entry(name, user, closed, mean, se, tolerance, gated, use_tolerance=True):
    allowed = max(3.0 * se, tolerance * abs(closed)) if use_tolerance else 3.0 * se
    return {"term": name, "user": user, "closed": float(closed), "mc_mean": float(mean),
            "mc_se": float(se), "allowed": float(allowed),
            "pass": bool(abs(closed - mean) <= allowed), "gated": gated}


def validate_closed_form(cfg, corr, pbm, n_realizations=1000, tolerance=0.05, seed=None,
                         jobs=1, corrupt=None):
    """Compare closed forms against MC; returns a JSON-serializable report.

    A term passes when ``|closed - mc| <= max(3 se, tolerance |closed|)``;
    ``beta`` must lie within 3 se. The verdict covers the per-user S and I
    terms, the sum SE and ``beta``; the individual interference components
    are listed with their own pass flags for diagnosis. ``corrupt`` names a
    closed-form key to double (negative control of the harness).
    """
    if n_realizations <= 0:
        raise ValueError("n_realizations must be positive")
    mc = mc_uatf_terms(cfg, corr, pbm, n_realizations, seed=seed, jobs=jobs)
    cf = closed_form_terms(cfg, corr, pbm)
    if corrupt is not None:
        if corrupt not in cf:
            raise KeyError(corrupt)
        cf[corrupt] = 2.0 * cf[corrupt]
    rows = []
    for name in GATED + COMPONENTS:
        closed = np.atleast_1d(cf[name])
        mean = np.atleast_1d(mc.mean[name])
        se = np.atleast_1d(mc.se[name])
        for k in range(closed.size):
            user = k if closed.size > 1 or name != "sum_se" else -1
            rows.append(_entry(name, user, closed[k], mean[k], se[k], tolerance, name in GATED))
    rows.append(_entry("beta", -1, cf["beta"], mc.mean["beta"], mc.se["beta"], tolerance,
                       True, use_tolerance=False))
    verdict = all(r["pass"] for r in rows if r["gated"])
    return {"verdict": "PASS" if verdict else "FAIL", "n_realizations": n_realizations,
            "tolerance": tolerance, "seed": cfg.seed if seed is None else seed,
            "config_hash": cfg.digest(), "terms": rows}


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True)


def channel_covariance_check(cfg, corr, n_draws, seed=0):
    """Empirical ``E{h~_k h~_k^H}`` per user, for comparison with ``delta~_h R_s``."""
    ctx = MCContext.build(cfg, corr, _unit_pbm(corr))
    acc = np.zeros((corr.K,) + corr.R_s.shape, dtype=complex)
    for i in range(n_draws):
        real = draw_channels(ctx, realization_rng(seed, i))
        acc += np.einsum("nk,mk->knm", real.h_t, real.h_t.conj())
    return acc / n_draws


def _unit_pbm(corr):
    from .pbm import PBM
    n = corr.R_s.shape[0]
    return PBM(np.full(n, np.sqrt(0.5)), np.full(n, np.sqrt(0.5)))


def cochannel_closed(corr, pbm, R_s=None):
    R_s = corr.R_s if R_s is None else R_s
    t = {"r": trace_factor(R_s, pbm.theta_r), "t": trace_factor(R_s, pbm.theta_t)}
    return np.array([[corr.delta_h[k] * corr.delta_ht[j] * t[corr.region[k]]
                      for j in range(corr.K)] for k in range(corr.K)])
