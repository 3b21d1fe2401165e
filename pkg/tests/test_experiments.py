import json
import math

import numpy as np
import pytest

from idslab import measures as M
from idslab.experiments import ConfigError, CounterexampleConfig, ExperimentConfig, ExperimentReport, \
    counterexample_integrals, coupling_cost, holder_bound, holder_bound_exact, run, run_holder_rate, \
    run_sharpness_shift, run_theorem1_dos, run_theorem1_ids

TWO_POINT = {"kind": M.TWO_POINT, "params": {"x0": 0.0, "x1": 1.0, "p": 0.5}}


def cfg(**kw):
    return ExperimentConfig.from_dict({"version": 1, **kw})


# -- density of states --


def test_dos_identical_measures_cost_nothing():
    r = run_theorem1_dos(cfg(experiment="theorem1_dos", shape=[40], mu=TWO_POINT, mu_tilde=TWO_POINT,
                             n_samples=5, master_seed=3))
    assert r.aggregates["d_kr_mu"] == 0.0
    assert r.aggregates["d_kr_rho"] == 0.0
    assert all(s["transport_cost"] == 0.0 for s in r.per_sample)
    assert r.verdict == "holds"


@pytest.mark.parametrize("c", [0.25, 1.0])
def test_dos_deterministic_shift(c):
    r = run_theorem1_dos(cfg(experiment="theorem1_dos", shape=[6, 7], mu=M.point_mass(0).to_dict(),
                             mu_tilde=M.point_mass(c).to_dict(), n_samples=2))
    assert r.aggregates["d_kr_rho"] == pytest.approx(c, abs=1e-12)
    for s in r.per_sample:
        assert s["transport_cost"] == pytest.approx(42 * c, rel=1e-12)
        assert s["potential_l1"] == pytest.approx(42 * c, rel=1e-15)


def test_dos_random_pair_holds():
    r = run_theorem1_dos(cfg(experiment="theorem1_dos", shape=[120], mu=M.uniform(0, 1).to_dict(),
                             mu_tilde=M.uniform(0, 1.5).to_dict(), n_samples=20, master_seed=11))
    assert r.aggregates["d_kr_mu"] == pytest.approx(0.25, abs=1e-10)
    assert r.verdict == "holds"
    for s in r.per_sample:
        assert s["transport_cost"] <= s["potential_l1"] + s["tol"]


def test_quantile_coupling_beats_independent():
    mu, mu_t = M.two_point(0, 1, 0.5), M.two_point(0, 1.1, 0.5)
    q, q_se = coupling_cost(mu, mu_t, 20000, 1, "quantile")
    i, i_se = coupling_cost(mu, mu_t, 20000, 1, "independent")
    assert q == pytest.approx(0.05, abs=3 * q_se + 1e-12)
    assert q < i - 3 * math.hypot(q_se, i_se)
    with pytest.raises(ValueError):
        coupling_cost(mu, mu_t, 10, 1, "bogus")


# -- integrated density of states --


def test_ids_identical_measures():
    r = run_theorem1_ids(cfg(experiment="theorem1_ids", shape=[50], mu=TWO_POINT, mu_tilde=TWO_POINT,
                             n_samples=4, grid={"start": -1, "stop": 6, "num": 281}))
    assert r.aggregates["sup_diff"] == 0.0
    assert r.verdict == "holds"


def test_ids_shift_equals_modulus():
    grid = {"start": -1.0, "stop": 6.0, "num": 701}
    h = 7.0 / 700
    c = 15 * h
    r = run_theorem1_ids(cfg(experiment="theorem1_ids", shape=[200], mu=M.point_mass(0).to_dict(),
                             mu_tilde=M.point_mass(c).to_dict(), n_samples=1, grid=grid, deltas=[c]))
    assert r.aggregates["sup_diff"] == pytest.approx(r.aggregates["omega_at_best_delta"], abs=1e-12)
    assert r.aggregates["bound"] == pytest.approx(r.aggregates["omega_at_best_delta"] + 1.0, abs=1e-12)
    assert r.verdict == "holds"


def test_ids_report_curves():
    r = run_theorem1_ids(cfg(experiment="theorem1_ids", shape=[30], mu=TWO_POINT,
                             mu_tilde={"kind": M.TWO_POINT, "params": {"x0": 0.0, "x1": 1.2, "p": 0.5}},
                             n_samples=6, grid={"start": -1, "stop": 6.2, "num": 145}))
    assert r.curves["ids_curve"]["columns"] == ["E", "N", "N_tilde"]
    assert len(r.curves["ids_curve"]["rows"]) == 145
    om = np.array(r.curves["omega"]["rows"])
    assert np.all(np.diff(om[:, 1]) >= 0)
    assert r.aggregates["log_ratio"] == pytest.approx(r.aggregates["sup_diff"] * math.log(10))


# -- sharpness --


@pytest.mark.parametrize("c", [0.0, 0.3, 1.0])
def test_sharpness_equality(c):
    r = run_sharpness_shift(cfg(experiment="sharpness_shift", shift=c, shapes=[[10], [33], [5, 4]]))
    assert r.verdict == "holds"
    for s in r.per_sample:
        assert s["error"] <= 1e-12
        assert s["w1_rank_matched"] == pytest.approx(c, abs=1e-12)


def test_sharpness_rejects_negative_shift():
    with pytest.raises(ConfigError):
        run_sharpness_shift(cfg(experiment="sharpness_shift", shift=-0.1, shapes=[[4]]))


# -- Hoelder rate --


@pytest.mark.parametrize("t", [1e-4, 3e-3, 0.1])
def test_holder_bound_linear_modulus(t):
    assert holder_bound(t, 1.0) == pytest.approx(2 * math.sqrt(t), rel=1e-6)
    assert holder_bound_exact(t, 1.0) == pytest.approx(2 * math.sqrt(t), rel=1e-14)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 3.0])
def test_holder_slope(a):
    r = run_holder_rate(cfg(experiment="holder_rate", holder_exponent=a, holder_constant=1.7))
    assert r.aggregates["slope"] == pytest.approx(a / (1 + a), abs=1e-3)
    assert r.aggregates["max_rel_error_vs_exact"] < 1e-5
    assert r.verdict == "holds"


def test_holder_stated_exponent_reported():
    r = run_holder_rate(cfg(experiment="holder_rate", holder_exponent=2.0))
    assert r.aggregates["stated_exponent"] == pytest.approx(1 / 3)
    assert r.aggregates["stated_rate_dominates"]
    r = run_holder_rate(cfg(experiment="holder_rate", holder_exponent=0.5))
    assert not r.aggregates["stated_rate_dominates"]


def test_holder_fitted_from_model():
    r = run_holder_rate(cfg(experiment="holder_rate", holder_exponent=1.0, shape=[400],
                            mu=M.uniform(0, 1).to_dict(), n_samples=4))
    assert 0 < r.aggregates["fitted"]["a"] <= 1.5
    assert r.verdict == "holds"


def test_holder_rejects_nonpositive_exponent():
    with pytest.raises(ConfigError):
        run_holder_rate(cfg(experiment="holder_rate", holder_exponent=0.0))


# -- counterexample integrals --


def closed_form_d4(eps, delta):
    m = 1 / eps - 1
    i1 = m - math.log1p(m) - eps * m ** 2 / 2
    i2 = (m - delta) - (1 + delta) * math.log((1 + m) / (1 + delta)) - eps * (m - delta) ** 2 / 2
    return i1, i2


@pytest.mark.parametrize("eps", [0.1, 1e-2, 1e-3, 1e-5])
def test_counterexample_d4_closed_form(eps):
    r = counterexample_integrals(CounterexampleConfig(4, 1.0, 0.1, [eps]))
    i1, i2 = closed_form_d4(eps, 0.1)
    rec = r.per_sample[0]
    assert rec["I_rho"] == pytest.approx(i1, rel=1e-9)
    assert rec["I_rho_tilde"] == pytest.approx(i2, rel=1e-9)


@pytest.mark.parametrize("eps", [0.5, 1e-2, 1e-4])
def test_counterexample_low_dimensions_closed_form(eps):
    m = 1 / eps - 1
    r2 = counterexample_integrals(CounterexampleConfig(2, 1.0, 0.0, [eps]))
    assert r2.per_sample[0]["I_rho"] == pytest.approx(math.log1p(m) - eps * m, rel=1e-9)
    r1 = counterexample_integrals(CounterexampleConfig(1, 1.0, 0.0, [eps]))
    assert r1.per_sample[0]["I_rho"] == pytest.approx(2 * math.atan(math.sqrt(m)) - 2 * eps * math.sqrt(m),
                                                      rel=1e-9)


def test_counterexample_zero_shift_and_regimes():
    eps = [0.1, 0.01, 0.001]
    r = counterexample_integrals(CounterexampleConfig(4, 1.0, 0.0, eps))
    assert all(abs(p["difference"]) < 1e-12 for p in r.per_sample)
    assert not r.aggregates["bounded_regime"]
    d4 = counterexample_integrals(CounterexampleConfig(4, 1.0, 0.1, eps))
    assert d4.aggregates["monotone_increasing"]
    d1 = counterexample_integrals(CounterexampleConfig(1, 1.0, 0.1, eps))
    assert d1.aggregates["bounded_regime"]
    assert d1.aggregates["growth_ratio"] < 2
    assert d4.curves["divergence"]["columns"] == ["epsilon", "difference"]


@pytest.mark.parametrize("kw", [dict(dimension=0), dict(alpha=0.0), dict(delta=-1.0),
                                dict(epsilons=[1.5]), dict(epsilons=[0.01, 0.1]), dict(epsilons=[])])
def test_counterexample_config_errors(kw):
    base = dict(dimension=4, alpha=1.0, delta=0.1, epsilons=[0.1, 0.01])
    with pytest.raises(ConfigError):
        CounterexampleConfig(**{**base, **kw})


def test_counterexample_negative_alpha():
    with pytest.raises(ConfigError):
        counterexample_integrals(CounterexampleConfig(4, -1.0, 0.1, [0.1]))


# -- configs and reports --


@pytest.mark.parametrize("d", [
    {"experiment": "theorem1_dos", "shape": [4], "mu": TWO_POINT, "mu_tilde": TWO_POINT, "colour": 1},
    {"experiment": "nope"},
    {"experiment": "theorem1_dos", "shape": [4]},
    {"experiment": "sharpness_shift", "shift": 0.1},
    {"experiment": "holder_rate"},
    {"experiment": "theorem1_dos", "shape": [4], "mu": {"kind": "weird"}, "mu_tilde": TWO_POINT},
])
def test_config_errors(d):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"version": 1, **d})


def test_config_version_required():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"experiment": "holder_rate", "holder_exponent": 1.0})
    with pytest.raises(ConfigError):
        CounterexampleConfig.from_dict({"version": 2, "dimension": 1, "alpha": 1, "delta": 0,
                                        "epsilons": [0.1]})


def test_config_round_trip():
    d = {"version": 1, "experiment": "theorem1_ids", "shape": [4, 5], "mu": TWO_POINT,
         "mu_tilde": M.uniform(0, 1).to_dict(), "n_samples": 3, "master_seed": 9}
    c = ExperimentConfig.from_dict(d)
    assert ExperimentConfig.from_dict(c.to_dict()).to_dict() == c.to_dict()


def test_report_check_and_verdict():
    r = ExperimentReport("x")
    assert r.check("a", 1.0, 1.0)
    assert r.verdict == "holds"
    assert not r.check("b", 1.0 + 1e-9, 1.0, tol=1e-10)
    assert r.verdict == "violated"
    assert json.loads(r.to_json())["checks"][1]["margin"] < 0


def test_report_reproducible_across_workers():
    c = cfg(experiment="theorem1_ids", shape=[40], mu=TWO_POINT, mu_tilde=M.uniform(0, 1).to_dict(),
            n_samples=9, master_seed=77, grid={"start": -1, "stop": 6, "num": 100})
    a, b = run(c, workers=1), run(c, workers=4)
    assert a.to_json() == b.to_json()
    assert a.curves == b.curves
