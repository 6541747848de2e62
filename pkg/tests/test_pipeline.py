import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planarsq.criteria import CriterionConfig
from planarsq.errors import DimensionMismatchError, RankDeficientError, SchemaError, SingularCovarianceError
from planarsq.pipeline import (
    FidModelParams,
    MeasurementRecord,
    NoiseModel,
    SyntheticConfig,
    analyze_run,
    bootstrap,
    calibrate_fid,
    conditional_covariance,
    estimate_pairs,
    fit_fid_segment,
    generate_synthetic_run,
    load_groups,
    read_run,
    subtract_readout_noise,
    write_run,
)

PARAMS = FidModelParams(g=1e-7, omega_L=2 * math.pi * 2e4, T2=0.02, theta_0=1e-3)
T = 5e-6 * np.arange(100)


def small_config(**kw):
    base = dict(shots=30, background_shots=30, photon_numbers=(1e8, 2.47e8), match_moments=True, seed=5)
    base.update(kw)
    return SyntheticConfig(**base)


def groups_of(runs):
    return [((r.records, r.meta), (r.background, r.background_meta)) for r in runs]


# ------------------------------------------------------------ FID fits

def test_fit_noise_free():
    J = np.array([3e4, -1.2e5])
    fit = fit_fid_segment(T, PARAMS.signal(T, J), PARAMS)
    np.testing.assert_allclose(fit.J, J, rtol=1e-9)


def test_fit_monte_carlo_covariance():
    rng = np.random.default_rng(0)
    sigma = 1e-4
    J = np.array([1e4, 2e4])
    clean = PARAMS.signal(T, J)
    est = np.array([fit_fid_segment(T, clean + rng.normal(0, sigma, T.size), PARAMS).J for _ in range(4000)])
    expect = fit_fid_segment(T, clean, PARAMS, sigma=sigma).covariance
    got = np.cov(est, rowvar=False)
    np.testing.assert_allclose(np.diag(got), np.diag(expect), rtol=0.1)
    assert np.all(np.abs(est.mean(axis=0) - J) <= 5 * np.sqrt(np.diag(expect) / 4000))


def test_fit_rank_deficient():
    with pytest.raises(RankDeficientError):
        fit_fid_segment(T[:1], np.zeros(1), PARAMS)
    # samples one full period apart see the same direction
    period = 2 * math.pi / PARAMS.omega_L
    flat = FidModelParams(PARAMS.g, PARAMS.omega_L, 1e9, 0.0)
    t = np.array([0.0, period, 2 * period])
    with pytest.raises(RankDeficientError):
        fit_fid_segment(t, np.zeros(3), flat)


def test_fit_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        fit_fid_segment(T, np.zeros(3), PARAMS)


def test_calibrate_recovers_globals():
    rng = np.random.default_rng(1)
    recs = []
    for s in range(5):
        J = rng.normal(0, 1e5, 2)
        recs.append(MeasurementRecord(s, T, PARAMS.signal(T, J), 1e6, np.arange(T.size)))
    omegas = PARAMS.omega_L * np.array([0.9, 1.0, 1.1])
    best, rss = calibrate_fid(recs, PARAMS, omegas, [0.01, 0.02, 0.04])
    assert best.omega_L == PARAMS.omega_L and best.T2 == 0.02
    assert best.theta_0 == pytest.approx(1e-3, rel=1e-6)
    assert rss < 1e-16


# --------------------------------------------------- conditional covariance

def test_conditional_covariance_gaussian_oracle():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(4, 4))
    S = A @ A.T + 0.5 * np.eye(4)
    x = rng.multivariate_normal(np.zeros(4), S, size=40000)
    got = conditional_covariance(x[:, :2], x[:, 2:])
    expect = S[2:, 2:] - S[2:, :2] @ np.linalg.solve(S[:2, :2], S[:2, 2:])
    np.testing.assert_allclose(got, expect, rtol=0.05, atol=0.02 * np.trace(expect))
    np.testing.assert_allclose(got, got.T)


def test_independent_is_plain_covariance():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(5000, 2)), rng.normal(size=(5000, 2))
    got = conditional_covariance(a, b)
    np.testing.assert_allclose(got, np.cov(b, rowvar=False), atol=5e-3)


def test_perfect_correlation_vanishes():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(200, 2))
    b = a @ np.array([[2.0, 0.3], [-0.1, 1.0]])
    assert np.abs(conditional_covariance(a, b)).max() < 1e-12


def test_singular_and_ridge():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(50, 1)) * np.ones((1, 2))
    b = rng.normal(size=(50, 2))
    with pytest.raises(SingularCovarianceError, match="ridge"):
        conditional_covariance(a, b)
    assert conditional_covariance(a, b, ridge=1e-3).shape == (2, 2)


def test_conditional_covariance_guards():
    with pytest.raises(ValueError):
        conditional_covariance(np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(DimensionMismatchError):
        conditional_covariance(np.zeros((5, 2)), np.zeros((5, 3)))


def test_subtract_readout_noise():
    good = subtract_readout_noise(np.eye(2) * 3, np.eye(2))
    assert not good.negative_eigenvalue
    np.testing.assert_allclose(good.gamma, np.eye(2) * 2)
    with pytest.warns(RuntimeWarning):
        bad = subtract_readout_noise(np.eye(2), np.diag([2.0, 0.5]))
    assert bad.negative_eigenvalue
    assert bad.gamma[0, 0] == -1.0  # no clamping
    with pytest.raises(DimensionMismatchError):
        subtract_readout_noise(np.eye(2), np.eye(3))


def test_bootstrap_deterministic():
    x = np.arange(20.0)
    a = bootstrap(lambda v: v.mean(), [(x,)], 50, seed=9)
    b = bootstrap(lambda v: v.mean(), [(x,)], 50, seed=9)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (50,)


# --------------------------------------------------------- noise model

@settings(max_examples=50, deadline=None)
@given(xi=st.floats(0.1, 0.8), n_opt=st.floats(1e7, 1e9), coh=st.floats(0.5, 0.99))
def test_calibration_places_minimum(xi, n_opt, coh):
    try:
        m = NoiseModel.calibrated(xi, n_opt, coh)
    except ValueError:
        return  # no interior minimum for this combination
    assert m.xi_sq(n_opt) == pytest.approx(xi, rel=1e-9)
    assert m.polarization(1.0, n_opt) == pytest.approx(coh, rel=1e-12)
    for f in (0.9, 1.1):
        assert m.xi_sq(n_opt * f) >= xi * (1 - 1e-9)


def test_calibration_rejects():
    with pytest.raises(ValueError):
        NoiseModel.calibrated(0.3, 1e8, 1.5)


# ----------------------------------------------------------- generator

def test_generator_deterministic():
    a = generate_synthetic_run(small_config())
    b = generate_synthetic_run(small_config())
    for ra, rb in zip(a, b):
        for x, y in zip(ra.records, rb.records):
            np.testing.assert_array_equal(x.theta, y.theta)
    c = generate_synthetic_run(small_config(seed=6))
    assert not np.array_equal(a[0].records[0].theta, c[0].records[0].theta)


def test_groups_independent_of_order():
    full = generate_synthetic_run(small_config(photon_numbers=(1e8, 2.47e8)))
    first = generate_synthetic_run(small_config(photon_numbers=(1e8,)))
    np.testing.assert_array_equal(full[0].records[3].theta, first[0].records[3].theta)


def test_config_validation():
    with pytest.raises(ValueError):
        SyntheticConfig(shots=2)
    with pytest.raises(ValueError, match="match_moments"):
        SyntheticConfig(shots=5, match_moments=True)
    with pytest.raises(ValueError):
        SyntheticConfig(samples_pre=1)
    with pytest.raises(ValueError):
        SyntheticConfig.from_dict({"bogus": 1})
    cfg = small_config()
    assert SyntheticConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_matched_moments_are_exact():
    runs = generate_synthetic_run(small_config())
    for r in runs:
        J1, J2 = estimate_pairs(r.records, r.meta)
        B1, B2 = estimate_pairs(r.background, r.background_meta)
        gamma = conditional_covariance(J1, J2) - conditional_covariance(B1, B2)
        pol = np.linalg.norm(J2.mean(axis=0))
        assert pol == pytest.approx(r.meta.truth["polarization"], rel=1e-9)
        assert np.trace(gamma) / pol == pytest.approx(r.meta.truth["xi_sq"], rel=1e-6)


def test_frame_angle_does_not_change_squeezing(published):
    a = analyze_run(groups_of(generate_synthetic_run(small_config())), CriterionConfig(k_max=6), published, n_boot=0)
    b = analyze_run(groups_of(generate_synthetic_run(small_config(frame_angle=0.7))),
                    CriterionConfig(k_max=6), published, n_boot=0)
    for ga, gb in zip(a.groups, b.groups):
        assert ga.xi_sq == pytest.approx(gb.xi_sq, rel=1e-6)
        assert ga.verdict.certified_depth == gb.verdict.certified_depth


# ------------------------------------------------------------- file I/O

def test_run_round_trip(tmp_path):
    run = generate_synthetic_run(small_config(photon_numbers=(2e8,), shots=10, background_shots=10))[0]
    path = tmp_path / "a.csv"
    write_run(path, run.records, run.meta)
    recs, meta = read_run(path)
    assert meta.to_dict() == run.meta.to_dict()
    for x, y in zip(recs, run.records):
        np.testing.assert_array_equal(x.theta, y.theta)
        np.testing.assert_array_equal(x.t, y.t)
        assert x.n == y.n
    with pytest.raises(FileExistsError):
        write_run(path, run.records, run.meta)
    write_run(path, run.records, run.meta, force=True)


def test_read_run_diagnostics(tmp_path):
    run = generate_synthetic_run(small_config(photon_numbers=(2e8,), shots=10, background_shots=10))[0]
    path = tmp_path / "a.csv"
    write_run(path, run.records, run.meta)
    lines = path.read_text().splitlines()
    lines[5] = "0,abc,1,1,4"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError, match="line 6"):
        read_run(path)
    path.write_text("a,b\n")
    with pytest.raises(SchemaError, match="line 1"):
        read_run(path)
    side = path.with_suffix(".json")
    doc = json.loads(side.read_text())
    del doc["n_atoms"]
    side.write_text(json.dumps(doc))
    with pytest.raises(SchemaError, match="n_atoms"):
        read_run(path)
    side.unlink()
    with pytest.raises(SchemaError, match="sidecar"):
        read_run(path)


def test_record_validation():
    with pytest.raises(ValueError):
        MeasurementRecord(0, np.array([0.0, 0.0]), np.zeros(2), 1.0, np.arange(2))
    with pytest.raises(ValueError):
        MeasurementRecord(0, np.array([0.0, 1.0]), np.zeros(2), 0.0, np.arange(2))


# ------------------------------------------------------------- analysis

def test_analyze_end_to_end(published, tmp_path):
    runs = generate_synthetic_run(small_config())
    for i, r in enumerate(runs):
        write_run(tmp_path / f"g{i}_atoms.csv", r.records, r.meta)
        write_run(tmp_path / f"g{i}_bg.csv", r.background, r.background_meta)
    rep = analyze_run(load_groups(tmp_path), CriterionConfig(k_max=6), published, n_boot=30, seed=1)
    assert [g.n_photons for g in rep.groups] == [1e8, 2.47e8]
    opt = rep.groups[1]
    assert opt.xi_sq == pytest.approx(0.32, rel=1e-6)
    assert opt.verdict.certified_depth == 6
    assert opt.sigma_xi > 0
    csv_lines = rep.to_csv().splitlines()
    assert csv_lines[0] == "N_L,xi_sq,depth,f_2,f_3,f_4,f_5,f_6,f_7"
    assert json.loads(rep.to_json())["groups"][1]["verdict"]["certified_depth"] == 6


def test_analyze_skips_small_groups(published):
    runs = generate_synthetic_run(small_config(photon_numbers=(1e8, 2e8, 2.47e8)))
    groups = groups_of(runs)
    (recs, meta), bg = groups[0]
    groups[0] = ((recs[:2], meta), bg)
    rep = analyze_run(groups, CriterionConfig(k_max=4), published, n_boot=0)
    assert len(rep.groups) == 2
    assert "skipped" in rep.warnings[0]
    with pytest.raises(ValueError):
        analyze_run(groups[:1], CriterionConfig(k_max=4), published)


def test_load_groups_needs_background(tmp_path):
    run = generate_synthetic_run(small_config(photon_numbers=(2e8,), shots=10, background_shots=10))[0]
    write_run(tmp_path / "a.csv", run.records, run.meta)
    with pytest.raises(SchemaError, match="background"):
        load_groups(tmp_path)
    with pytest.raises(SchemaError):
        load_groups(tmp_path / "empty")
