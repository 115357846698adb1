import json
import math

import numpy as np
import pytest

import smclimits as sl


def default_model():
    chi = [0.5, 0.5]
    q = [[0.9, 0.1], [0.2, 0.8]]
    b = [[0.8, 0.2], [0.2, 0.8]]
    ys = sl.DiscreteHMM.simulate_observations(chi, q, b, 5, 7)
    return sl.DiscreteHMM.from_emissions(chi, q, b, ys)


def test_version_and_commands():
    assert sl.__version__ == "0.1.0"
    assert "verify-resampling" in sl.command_names()
    cfg = json.loads(sl.default_config())
    assert cfg["model"]["obs_seed"] == 7


def test_ess_identity_and_extremes():
    rng = np.random.default_rng(0)
    w = rng.lognormal(sigma=2.0, size=50)
    assert sl.ess(w) * (1.0 + sl.cv2(w)) == pytest.approx(50.0, rel=1e-12)
    assert sl.ess([1.0, 1.0, 1.0]) == 3.0
    assert sl.ess([0.0, 5.0, 0.0]) == 1.0
    assert sl.max_weight_fraction([1.0, 3.0]) == pytest.approx(0.75)


def test_estimate_with_python_callable():
    pts = np.array([1.0, 2.0, 4.0])
    assert sl.estimate(pts, [1.0, 2.0, 1.0], lambda p: p[0]) == pytest.approx(2.25)


def test_resampling_and_oracles():
    pts = np.array([0.0, 1.0, 2.0])
    w = [0.5, 0.3, 0.2]
    out = sl.resample("residual", pts, w, 10, seed=1)
    assert out.shape == (10, 1)
    assert sorted(out[:, 0])[:5] == [0.0] * 5
    floors, probs, m_bar = sl.residual_counts(w, 10)
    assert floors == [5, 3, 2] and m_bar == 10 and probs == []
    mean_m, var_m = sl.conditional_moments("multinomial", pts, w, 7)
    mean_r, var_r = sl.conditional_moments("residual", pts, w, 7)
    assert mean_m == pytest.approx(0.7) and mean_r == pytest.approx(0.7)
    assert var_r <= var_m + 1e-12
    assert sl.w_ell_phi(3.0) == 0.0


def test_errors_carry_codes():
    with pytest.raises(sl.SmcError) as info:
        sl.resample("multinomial", np.array([0.0]), [0.0], 3, seed=1)
    assert info.value.code == sl.ErrorCode.DEGENERATE_WEIGHTS
    with pytest.raises(ValueError):
        sl.ess([-1.0])


def test_smoothing_and_variance_table():
    m = default_model()
    psi = sl.exact_joint_smoothing(m, 3)
    assert len(psi) == 8 and math.fsum(psi) == pytest.approx(1.0)
    fb = sl.forward_backward_marginals(m, 3)
    marginal0 = sum(p for i, p in enumerate(psi) if (i >> 2) & 1 == 0)
    assert fb[0][0] == pytest.approx(marginal0, abs=1e-12)
    rows = sl.variance_table(m, "prior", 1.0, 5, [0])
    assert [r["epsilon"] for r in rows] == [None, 0, 1, 0, 0]
    assert rows[0]["sigma2"][0] == pytest.approx(0.16)
    table = [1.0 if i % 2 == 0 else 0.0 for i in range(16)]
    assert sl.sigma2(m, "prior", 1.0, 4, table) == pytest.approx(rows[3]["sigma2"][0], rel=1e-12)


def test_filter_is_deterministic_and_consistent():
    m = default_model()
    a = sl.run_filter(m, "prior", "multinomial", 1.0, m=20000, seed=3)
    b = sl.run_filter(m, "prior", "multinomial", 1.0, m=20000, seed=3)
    assert np.array_equal(a["paths"], b["paths"])
    assert a["resampled"] == [False, False, True, False, False]
    w = np.asarray(a["weights"])
    est = float(np.sum(w * (a["paths"][:, -1] == 0)) / np.sum(w))
    exact = sl.forward_backward_marginals(m, 5)[4][0]
    assert est == pytest.approx(exact, abs=0.02)


def test_linear_gaussian_filter_tracks_kalman():
    ys = sl.LinearGaussianSSM.simulate_observations(0.9, 1.0, 1.0, 6, 2)
    model = sl.LinearGaussianSSM(0.9, 1.0, 1.0, ys)
    kf = sl.kalman_filter(model)
    out = sl.run_filter(model, "optimal", "residual", 0.5, m=20000, seed=4)
    w = np.asarray(out["weights"])
    est = float(np.sum(w * out["paths"][:, -1]) / np.sum(w))
    assert est == pytest.approx(kf[-1][0], abs=0.05)


def test_statistics():
    assert sl.normal_cdf(0.0) == 0.5
    assert sl.kolmogorov_survival(1.3580986393225505) == pytest.approx(0.05, rel=1e-6)
    z = np.random.default_rng(5).standard_normal(400)
    stat, p = sl.ks_test(z.tolist())
    assert 0.0 < stat < 0.1 and p > 0.01
    r = sl.counterexample_run(20000, 200, 9, workers=2)
    assert len(r["values"]) == 200
    assert r["mass_near_low"] + r["mass_near_high"] == pytest.approx(1.0)


def test_run_command(tmp_path):
    code, out, _ = sl.run_command("variance-table", out_dir=str(tmp_path))
    assert code == 0
    assert (tmp_path / "variance_table.csv").exists()
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, _, err = sl.run_command("verify-lln", config_path=str(bad), out_dir=str(tmp_path))
    assert code == 2 and err
