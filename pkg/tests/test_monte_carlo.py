import json

import numpy as np
import pytest

from starsfd import PBM, build_correlations, random_pbm
from starsfd.monte_carlo import (
    GATED, MCContext, cascaded_channels, closed_form_terms, cochannel_closed, draw_channels,
    mc_uatf_terms, pilot_book, realization_rng, report_json, simulate_training,
    validate_closed_form,
)

from conftest import small_config


@pytest.fixture(scope="module")
def small_mc():
    cfg = small_config()
    corr = build_correlations(cfg)
    pbm = random_pbm(cfg.N, 0)
    return cfg, corr, pbm, mc_uatf_terms(cfg, corr, pbm, 400, seed=1)


def test_realization_streams():
    a = realization_rng(5, 3).standard_normal(4)
    np.testing.assert_array_equal(a, realization_rng(5, 3).standard_normal(4))
    assert not np.array_equal(a, realization_rng(5, 4).standard_normal(4))
    assert not np.array_equal(a, realization_rng(6, 3).standard_normal(4))


def test_pilot_book():
    phi = pilot_book(6, 4, 2.0)
    np.testing.assert_allclose(phi.conj().T @ phi, 12.0 * np.eye(4), atol=1e-12)
    with pytest.raises(ValueError):
        pilot_book(3, 4, 1.0)


def test_noiseless_training_recovers_channels(small):
    cfg, corr = small
    pbm = random_pbm(cfg.N, 2)
    rng = realization_rng(0, 0)
    real = draw_channels(MCContext.build(cfg, corr, pbm), rng)
    r_ul, r_dl = simulate_training(real, pbm, cfg, rng, corr.region, noise=False)
    u_t, u = cascaded_channels(real, pbm, corr.region)
    np.testing.assert_allclose(r_ul, u_t, atol=1e-12 * np.abs(u_t).max())
    np.testing.assert_allclose(r_dl, u.conj().T, atol=1e-12 * np.abs(u).max())


def test_direct_channels_only_within_region(small):
    cfg, corr = small
    real = draw_channels(MCContext.build(cfg, corr, random_pbm(cfg.N, 0)), realization_rng(0, 1))
    reflect = corr.reflect
    cross = reflect[:, None] != reflect[None, :]
    assert np.all(real.H[cross] == 0)
    assert np.all(real.H[~cross] != 0)


def test_uplink_uses_reflection_only(small):
    cfg, corr = small
    real = draw_channels(MCContext.build(cfg, corr, random_pbm(cfg.N, 0)), realization_rng(0, 2))
    u_t, u = cascaded_channels(real, PBM(np.zeros(cfg.N), np.ones(cfg.N)), corr.region)
    assert np.all(u_t == 0)
    assert np.all(u[corr.reflect] == 0) and np.all(u[~corr.reflect] != 0)


def test_cochannel_power(small_mc):
    cfg, corr, pbm, mc = small_mc
    z = (mc.co_mean - cochannel_closed(corr, pbm)) / mc.co_se
    assert np.max(np.abs(z)) < 3.0


def test_power_normalization(small_mc):
    cfg, corr, pbm, mc = small_mc
    cf = closed_form_terms(cfg, corr, pbm)
    assert abs(mc.mean["beta"] - cf["beta"]) <= 3.0 * mc.se["beta"]


def test_noise_terms(small_mc):
    cfg, corr, pbm, mc = small_mc
    cf = closed_form_terms(cfg, corr, pbm)
    np.testing.assert_allclose(mc.mean["noise_d"], cf["noise_d"], rtol=1e-12)
    assert np.all(np.abs(mc.mean["noise_u"] - cf["noise_u"]) <= 3.0 * mc.se["noise_u"])


def test_components_add_up(small_mc):
    cfg, corr, pbm, mc = small_mc
    m = mc.mean
    np.testing.assert_allclose(m["I_u"], m["var_u"] + m["mui_u"] + m["si_u"] + m["li_u"]
                               + m["noise_u"], rtol=1e-12)
    np.testing.assert_allclose(m["I_d"], m["var_d"] + m["mui_d"] + m["cochannel_d"]
                               + m["noise_d"], rtol=1e-12)
    assert all(np.all(mc.se[k] >= 0) for k in mc.se)


def test_reproducible_and_independent_of_jobs(small):
    cfg, corr = small
    pbm = random_pbm(cfg.N, 0)
    a = mc_uatf_terms(cfg, corr, pbm, 120, seed=3)
    b = mc_uatf_terms(cfg, corr, pbm, 120, seed=3, jobs=2)
    for key in a.mean:
        np.testing.assert_array_equal(a.mean[key], b.mean[key])
        np.testing.assert_array_equal(a.se[key], b.se[key])
    c = mc_uatf_terms(cfg, corr, pbm, 120, seed=4)
    assert not np.array_equal(a.mean["S_u"], c.mean["S_u"])


def test_no_reflection_degenerate(small):
    cfg, corr = small
    pbm = PBM(np.zeros(cfg.N), np.ones(cfg.N))
    mc = mc_uatf_terms(cfg, corr, pbm, 100, seed=0)
    assert np.all(mc.mean["S_u"] == 0) and np.all(mc.mean["I_u"] == 0)
    assert all(np.all(np.isfinite(v)) for v in mc.mean.values())
    assert np.isfinite(mc.mean["sum_se"])


@pytest.mark.parametrize("term", ["S_u", "I_d"])
def test_corrupted_term_is_caught(term, desk):
    cfg, _ = desk
    cfg = cfg.replace(N_h=4, N_v=4)
    corr = build_correlations(cfg)
    pbm = random_pbm(cfg.N, 0)
    clean = validate_closed_form(cfg, corr, pbm, 200, seed=1)
    assert all(r["pass"] for r in clean["terms"] if r["term"] == term)
    report = validate_closed_form(cfg, corr, pbm, 200, seed=1, corrupt=term)
    assert report["verdict"] == "FAIL"
    rows = [r for r in report["terms"] if r["term"] == term]
    assert len(rows) == corr.K and not any(r["pass"] for r in rows)


def test_validation_report_shape(small):
    cfg, corr = small
    report = validate_closed_form(cfg, corr, random_pbm(cfg.N, 0), 100, seed=0)
    names = {r["term"] for r in report["terms"]}
    assert set(GATED) | {"beta", "var_u", "cochannel_d"} <= names
    assert {r["gated"] for r in report["terms"] if r["term"] == "var_u"} == {False}
    assert json.loads(report_json(report))["config_hash"] == cfg.digest()


def test_bad_arguments(small):
    cfg, corr = small
    pbm = random_pbm(cfg.N, 0)
    with pytest.raises(ValueError):
        validate_closed_form(cfg, corr, pbm, 0)
    with pytest.raises(ValueError):
        mc_uatf_terms(cfg, corr, pbm, 50)
    with pytest.raises(KeyError):
        validate_closed_form(cfg, corr, pbm, 100, corrupt="nope")
