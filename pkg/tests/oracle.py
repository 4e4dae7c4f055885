"""Brute-force reference implementation used to pin down expected values.

Written independently of the package: explicit diagonal matrices, general
inverses and per-user loops, no eigendecomposition sharing.
"""

import numpy as np


def watt(dbm):
    return 10 ** ((dbm - 30) / 10)


def sinc_grid(nh, nv, d, lam):
    pts = [(c * d, r * d) for r in range(nv) for c in range(nh)]
    R = np.empty((len(pts), len(pts)))
    for i, a in enumerate(pts):
        for j, b in enumerate(pts):
            R[i, j] = np.sinc(2 * np.hypot(a[0] - b[0], a[1] - b[1]) / lam)
    return R


def ula(M, spacing=0.5, spread=20.0, mean=0.0, S=200):
    phis = np.deg2rad(np.linspace(mean - spread, mean + spread, S))
    R = np.zeros((M, M), complex)
    for p in range(M):
        for q in range(M):
            R[p, q] = np.mean(np.exp(2j * np.pi * spacing * (p - q) * np.sin(phis)))
    return R


def oracle_sum_se(M_T, M_R, N_h, N_v, K_r, K_t, theta_r, theta_t, p_b_dBm=30.0, p_u_dBm=15.0,
                  p_train_dBm=15.0, sigma2_dBm=-94.0, sigma2_L_dB=0.0, tau=None, tau_c=200,
                  lam=0.1, frac=0.25, alpha=2.6, d0=20.0):
    K = K_r + K_t
    tau = tau or max(K, 4)
    d = frac * lam
    Rs = sinc_grid(N_h, N_v, d, lam)
    Rb, Rbt = ula(M_T), ula(M_R)
    pb, pu, pt, s2 = watt(p_b_dBm), watt(p_u_dBm), watt(p_train_dBm), watt(sigma2_dBm)
    sL = s2 * 10 ** (sigma2_L_dB / 10)
    pl = lambda dist: d * d * dist ** (-alpha)
    xs, ys = 50.0, 10.0
    dg = pl(np.hypot(xs, ys))

    def line(count, y):
        if count == 1:
            return [(xs, y)]
        return [(x, y) for x in np.linspace(xs - d0 / 2, xs + d0 / 2, count)]

    users = line(K_r, ys - d0 / 2) + line(K_t, ys + d0 / 2)
    w = ["r"] * K_r + ["t"] * K_t
    dh = [pl(np.hypot(x - xs, y - ys)) for x, y in users]
    Th = {"r": np.diag(theta_r), "t": np.diag(theta_t)}
    tf = {m: np.trace(Rs @ Th[m] @ Rs @ Th[m].conj().T).real for m in Th}
    Rul = [dg * dh[k] * tf["r"] * Rbt for k in range(K)]
    Rdl = [dg * dh[k] * tf[w[k]] * Rb for k in range(K)]
    Qu = [np.linalg.inv(R + s2 / (tau * pt) * np.eye(M_R)) for R in Rul]
    Qd = [np.linalg.inv(R + s2 / (tau * pt) * np.eye(M_T)) for R in Rdl]
    Pu = [R @ Q @ R for R, Q in zip(Rul, Qu)]
    Pd = [R @ Q @ R for R, Q in zip(Rdl, Qd)]
    Psum = sum(Pd)
    tr = lambda A: np.trace(A).real
    Rsum = sum(pu * R for R in Rul)
    zeta = (tau_c - 2 * tau) / tau_c
    se = 0.0
    gam_u, gam_d = [], []
    for k in range(K):
        S = pu * tr(Pu[k]) ** 2
        I = (tr(Pu[k] @ Rsum)
             + pb / tr(Psum) * tr(Pu[k] @ Rbt) * tr(Rb @ Psum) * (dg * dg * tf["r"] + sL)
             - pu * tr(Pu[k] @ Pu[k]) + s2 * tr(Pu[k]))
        gam_u.append(S / I)
        Sd = tr(Pd[k]) ** 2
        co = sum(pu * ((s2 if w[j] == w[k] else 0.0) + dh[k] * dh[j] * tf[w[k]]) for j in range(K))
        Id = tr(Rdl[k] @ Psum) + tr(Psum) / pb * co - tr(Pd[k] @ Pd[k]) + s2 / pb * tr(Psum)
        gam_d.append(Sd / Id)
    se = zeta * (np.log2(1 + np.array(gam_u)).sum() + np.log2(1 + np.array(gam_d)).sum())
    return se, np.array(gam_u), np.array(gam_d)
