"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -s`` or
``python3 tests/test_acceptance.py``.
"""

import filecmp
import time

import numpy as np
import pytest

from starsfd import PBM, build_correlations, desk_config, make_variant, random_pbm, sum_se
from starsfd.cli import main
from starsfd.correlation import cascaded_ul_cov
from starsfd.estimation import mmse_estimate, ul_estimation_stats
from starsfd.gradients import grad_objective, numeric_wirtinger, relative_error
from starsfd.monte_carlo import (
    MCContext, cascaded_channels, draw_channels, realization_rng, simulate_training,
    validate_closed_form,
)
from starsfd.optimizer import best_restart, multi_start
from starsfd.pbm import project
from starsfd.spectral_efficiency import evaluate


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number} {title}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return emit


def _optimized(cfg, mode="FD_STARS", corr=None, restarts=5):
    corr = corr or build_correlations(cfg)
    variant = make_variant(cfg, corr, mode)
    best = best_restart(multi_start(cfg, corr, variant, restarts, seed=cfg.seed))
    return evaluate(cfg, corr, best.pbm, variant), best.pbm


def test_criterion_1_gradient_correctness(report):
    start = time.perf_counter()
    cfg = desk_config(M_T=8, M_R=8, N_h=2, N_v=4, K_r=2, K_t=2)
    corr = build_correlations(cfg)
    variant = make_variant(cfg, corr)
    worst = 0.0
    for s in range(20):
        pbm = random_pbm(cfg.N, np.random.SeedSequence([cfg.seed, s]))
        _, g_r, g_t = grad_objective(cfg, corr, pbm, variant)
        numeric = numeric_wirtinger(
            lambda th: sum_se(cfg, corr, PBM.from_stacked(th)).sum_se, pbm.stacked(), 1e-6)
        worst = max(worst, relative_error(np.concatenate([g_r, g_t]), numeric))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-5 and elapsed < 60
    assert report(1, "gradient correctness", ok,
                  f"max relative error {worst:.2e} over 20 points, {elapsed:.1f} s")


def test_criterion_2_closed_form_vs_monte_carlo(report):
    start = time.perf_counter()
    cfg = desk_config(N_h=4, N_v=4)
    corr = build_correlations(cfg)
    result = validate_closed_form(cfg, corr, random_pbm(cfg.N, cfg.seed), 1000, 0.05)
    elapsed = time.perf_counter() - start
    failed = [f"{r['term']}[{r['user']}] {r['mc_mean'] / r['closed']:.3f}x"
              for r in result["terms"] if r["gated"] and not r["pass"]]
    ok = result["verdict"] == "PASS" and elapsed < 600
    detail = f"{elapsed:.1f} s" + (f"; outside tolerance: {', '.join(failed)}" if failed else "")
    assert report(2, "closed form vs Monte Carlo", ok, detail)


def test_criterion_3_projection(report):
    rng = np.random.default_rng(3)
    n = 36
    worst_feas = worst_idem = 0.0
    nearest = True
    for _ in range(100):
        scale = 10.0 ** rng.uniform(-3, 3)
        hat = scale * (rng.normal(size=(2, n)) + 1j * rng.normal(size=(2, n)))
        p = project(hat[0], hat[1])
        worst_feas = max(worst_feas, np.max(np.abs(np.abs(p.theta_r) ** 2
                                                   + np.abs(p.theta_t) ** 2 - 1)))
        q = project(p.theta_r, p.theta_t)
        worst_idem = max(worst_idem, np.max(np.abs(q.stacked() - p.stacked())))
        d_proj = np.linalg.norm(np.concatenate(hat) - p.stacked())
        for _ in range(1000):
            c = random_pbm(n, rng)
            if np.linalg.norm(np.concatenate(hat) - c.stacked()) < d_proj:
                nearest = False
    ok = worst_feas <= 1e-10 and worst_idem <= 1e-14 and nearest
    assert report(3, "projection", ok, f"feasibility {worst_feas:.1e}, idempotence "
                  f"{worst_idem:.1e}, nearest vs 1000 comparators: {nearest}")


def test_criterion_4_mmse(report):
    cfg = desk_config(M_T=4, M_R=4, N_h=2, N_v=2, K_r=1, K_t=1, tau_up=2, tau_dp=2,
                      p_train_dBm=-60.0)
    corr = build_correlations(cfg)
    pbm = random_pbm(cfg.N, 1)
    st = MCContext.build(cfg, corr, pbm).stats
    split = max(np.max(np.abs(st.Psi_ul[k] + st.E_ul[k] - st.R_ul[k])) / np.abs(st.R_ul[k]).max()
                for k in range(corr.K))

    ctx = MCContext.build(cfg, corr, pbm)
    n = 10_000
    est = np.empty((n, cfg.M_R), complex)
    err = np.empty((n, cfg.M_R), complex)
    for i in range(n):
        rng = realization_rng(cfg.seed, i)
        real = draw_channels(ctx, rng)
        u_t, _ = cascaded_channels(real, pbm, corr.region)
        r_ul, _ = simulate_training(real, pbm, cfg, rng, corr.region)
        est[i] = mmse_estimate(r_ul[:, 0], st.R_ul[0], st.Q_ul[0])
        err[i] = u_t[:, 0] - est[i]
    prod = est[:, :, None] * err[:, None, :].conj()
    mean = prod.mean(axis=0)
    z = max(np.max(np.abs(part(mean)) / (part(prod).std(axis=0) / np.sqrt(n)))
            for part in (np.real, np.imag))

    R = cascaded_ul_cov(cfg, corr, pbm, 0)
    _, Psi, _ = ul_estimation_stats(R, cfg.sigma2, cfg.tau_up, 1e12)
    perfect = np.linalg.norm(Psi - R) / np.linalg.norm(R)

    ok = split <= 1e-10 and z <= 3.0 and perfect <= 1e-6
    assert report(4, "MMSE properties", ok, f"split {split:.1e}, orthogonality "
                  f"max |mean|/SE {z:.2f}, perfect-CSI error {perfect:.1e}")


def test_criterion_5_start_insensitivity(report):
    cfg = desk_config()
    corr = build_correlations(cfg)
    results = multi_start(cfg, corr, restarts=5, seed=cfg.seed)
    values = np.array([r.objective for r in results])
    iters = [r.trace.n_iter for r in results]
    spread = (values.max() - values.min()) / values.max()
    ok = spread <= 0.02 and max(iters) <= 200
    assert report(5, "start insensitivity", ok,
                  f"final sum SE {np.round(values, 4).tolist()}, spread {100 * spread:.1f}%, "
                  f"iterations {iters}")


def test_criterion_6_trends(report):
    cfg = desk_config()
    corr = build_correlations(cfg)
    checks = {}

    fd, fd_pbm = _optimized(cfg, corr=corr)
    hd, _ = _optimized(cfg, "HD_STARS", corr)
    cris, _ = _optimized(cfg, "FD_CRIS", corr)
    rand = np.mean([sum_se(cfg, corr, random_pbm(cfg.N, np.random.SeedSequence([cfg.seed, i])))
                    .sum_se for i in range(5)])
    checks["FD > HD"] = fd.sum_se > hd.sum_se
    checks["FD > cRIS"] = fd.sum_se > cris.sum_se
    checks["FD > random"] = fd.sum_se > rand

    for frac_name, frac in (("lambda/4", 0.25), ("lambda/6", 1 / 6)):
        values = [_optimized(cfg.replace(N_h=s, N_v=s, elem_size_frac=frac))[0].sum_se
                  for s in (4, 6, 8)]
        checks[f"N increasing ({frac_name})"] = bool(np.all(np.diff(values) > 0))
        if frac == 0.25:
            quarter = values
        else:
            checks["smaller elements lower"] = bool(np.all(np.array(values) < quarter))

    pb = [_optimized(cfg.replace(p_b_dBm=x))[0] for x in (20.0, 25.0, 30.0, 35.0, 40.0)]
    checks["p_b: DL up"] = bool(np.all(np.diff([r.dl_se for r in pb]) > 0))
    checks["p_b: UL down"] = bool(np.all(np.diff([r.ul_se for r in pb]) < 0))

    mr = [sum_se(cfg.replace(M_R=m), build_correlations(cfg.replace(M_R=m)), fd_pbm)
          for m in (16, 32, 64, 128)]
    checks["M_R: UL up"] = bool(np.all(np.diff([r.ul_se for r in mr]) > 0))
    checks["M_R: DL unchanged"] = max(abs(r.dl_se - mr[0].dl_se) for r in mr) <= 1e-9

    pt = [_optimized(cfg.replace(p_train_dBm=x))[0] for x in (0.0, 5.0, 10.0, 15.0, 20.0)]
    checks["p_train: UL up"] = bool(np.all(np.diff([r.ul_se for r in pt]) > 0))
    checks["p_train: DL up"] = bool(np.all(np.diff([r.dl_se for r in pt]) > 0))

    failed = [name for name, ok in checks.items() if not ok]
    detail = (f"FD {fd.sum_se:.3f}, HD {hd.sum_se:.3f}, cRIS {cris.sum_se:.3f}, random {rand:.3f}; "
              + (f"failed: {', '.join(failed)}" if failed else f"all {len(checks)} trends hold"))
    assert report(6, "ordering trends", not failed, detail)


def test_criterion_7_phase_invariance(report):
    cfg = desk_config()
    corr = build_correlations(cfg).with_R_s(np.eye(cfg.N, dtype=complex))
    pbm = random_pbm(cfg.N, cfg.seed)
    base = sum_se(cfg, corr, pbm).sum_se
    rng = np.random.default_rng(7)
    worst = max(abs(sum_se(cfg, corr, pbm.rotated(rng.uniform(0, 2 * np.pi, cfg.N),
                                                   rng.uniform(0, 2 * np.pi, cfg.N))).sum_se - base)
                for _ in range(20))
    assert report(7, "phase invariance", worst <= 1e-10, f"max change {worst:.1e} over 20 rotations")


COMMANDS = {
    "optimize": ["optimize", "--restarts", "2"],
    "validate": ["validate", "--realizations", "200"],
    "gradcheck": ["gradcheck", "--seeds", "1"],
    "sweep": ["sweep", "--variable", "N", "--values", "16,36", "--modes",
              "FD_STARS,RANDOM_PBM", "--restarts", "1"],
}


def test_criterion_8_determinism(report, tmp_path, capsys):
    mismatched = []
    for name, argv in COMMANDS.items():
        outs = []
        for run in ("a", "b"):
            out = tmp_path / name / run
            main(argv + ["--seed", "11", "--out", str(out)])
            outs.append(out)
        files = sorted(p.name for p in outs[0].iterdir())
        match, diff, errors = filecmp.cmpfiles(outs[0], outs[1], files, shallow=False)
        if diff or errors or not files:
            mismatched.append(name)
    capsys.readouterr()
    assert report(8, "determinism", not mismatched,
                  "identical outputs for " + ", ".join(COMMANDS) if not mismatched
                  else f"outputs differ: {', '.join(mismatched)}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
