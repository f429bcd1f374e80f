import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from riemstab.errors import ConfigError
from riemstab.lyapunov import PolarGrid, Verdict
from riemstab.scenarios import (
    build_example_euclidean,
    build_example_hyperbolic,
    build_linear_oracle,
    build_zero_field,
    evaluate_claims,
    load_scenario,
    load_scenario_file,
    serialize_scenario,
    simulate,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SMALL = PolarGrid(n_radii=6, n_dirs=24, n_times=3)


def test_hyperbolic_builder(hyp_const):
    np.testing.assert_array_equal(hyp_const.field(0.0, np.array([0.0, 2.0])), [0.0, -6.0])
    assert hyp_const.field.domain_radius == math.inf
    assert hyp_const.manifold.kind == "half_plane_hyperbolic"
    assert hyp_const.claims == ("sandwich", "decrease", "properness", "uniform_attraction")


@pytest.mark.parametrize("builder", [build_example_hyperbolic, build_example_euclidean])
@pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
def test_equilibrium_property(builder, a):
    scn = builder(a=a)
    A = np.array([0.0, a])
    for t in np.linspace(0, 100, 57):
        assert np.linalg.norm(scn.field(t, A)) < 1e-12


def test_two_plus_sin_range(hyp_sin):
    t = np.linspace(0, 50, 1001)
    x = np.tile([0.0, 2.0], (len(t), 1))
    d = -hyp_sin.field(t, x)[:, 1] / 6.0
    assert d.min() >= 1.0 - 1e-12 and d.max() <= 3.0 + 1e-12


def test_euclidean_builder(euc_sin):
    assert euc_sin.field.domain_radius == 1.0
    assert build_example_euclidean(a=2.5).field.domain_radius == 2.5
    assert "barrier" in euc_sin.claims
    const = build_example_euclidean(a=1.0, d=1.0)
    x = np.array([0.0, 2.0])
    # dV(f) = 2 (x2 - 1) f2 = 2 * 1 * (-6)
    assert 2 * (x - [0.0, 1.0]) @ const.field(0.0, x) == -12.0
    assert const.candidate.W3(x) == 12.0


def test_same_field_both_metrics(hyp_sin, euc_sin, rng):
    x = np.stack([rng.uniform(-3, 3, 100), rng.uniform(0.01, 5, 100)], -1)
    t = rng.uniform(0, 20, 100)
    assert np.array_equal(hyp_sin.field(t, x), euc_sin.field(t, x))


def test_euclidean_trajectory_stays_in_ball(euc_sin):
    tr = simulate(build_example_euclidean(a=1.0, run={"t_max": 5.0, "t0_list": [0.0], "x0_list": [[0.0, 0.5]]}))[0]
    assert np.all(np.linalg.norm(tr.points - [0.0, 1.0], axis=-1) < 1.0)


def test_linear_oracle(lin1):
    assert lin1.candidate.exp_constants == (1.0, 1.0, 2.0, 2.0)
    assert lin1.exact(0.0, [1.0], 1.0)[0] == pytest.approx(math.exp(-1))
    tr = simulate(build_linear_oracle(n=1, run={"t_max": 1.0, "t0_list": [0.0], "x0_list": [[1.0]]}))[0]
    assert abs(tr.final[0] - math.exp(-1)) < 1e-8
    two = build_linear_oracle(n=2, lam=0.5)
    x0 = np.array([0.6, -0.8])
    x1 = two.exact(0.0, x0, 3.0)
    np.testing.assert_allclose(x1 / np.linalg.norm(x1), x0)


def test_default_initial_grid(hyp_sin, euc_sin):
    rho = hyp_sin.manifold.distance(hyp_sin.run.x0_list, hyp_sin.field.equilibrium)
    np.testing.assert_allclose(sorted(rho), [2.5] * 4 + [5.0] * 4, rtol=1e-12)
    d = np.linalg.norm(euc_sin.run.x0_list - [0.0, 1.0], axis=-1)
    np.testing.assert_allclose(sorted(d), [0.5] * 4 + [0.99] * 4, rtol=1e-12)
    assert hyp_sin.run.t0_list == tuple(float(k) for k in range(11))
    assert len(build_linear_oracle(n=1).run.x0_list) == 4


# -- config loading -------------------------------------------------------------


def test_load_named_config():
    scn = load_scenario('{"template":"hyperbolic","a":1.0,"d":"two_plus_sin","name":"ex"}')
    assert scn.name == "ex"
    assert scn.template == "hyperbolic"


def test_missing_run_keys_warn():
    scn = load_scenario('{"template": "hyperbolic"}')
    assert scn.run.t_max == 50.0
    assert any("run.t_max" in w and "50" in w for w in scn.warnings)
    assert len(scn.warnings) == 6


def test_full_config_has_no_warnings():
    assert load_scenario_file(CONFIGS / "hyperbolic.json").warnings == ()


@pytest.mark.parametrize(
    "text, path",
    [
        ('{"template":"hyperbolic","a":-1}', "a"),
        ('{"template":"hyperbolic","a":0}', "a"),
        ('{"template":"hyperbolic","a":true}', "a"),
        ('{"template":"hyperbolic","d":"cos"}', "d"),
        ('{"template":"hyperbolic","d":-2}', "d"),
        ('{"template":"hyperbolic","lambda":1}', "lambda"),
        ('{"template":"hyperbolic","bogus":1}', "bogus"),
        ('{"template":"linear","n":0}', "n"),
        ('{"template":"linear","n":1.5}', "n"),
        ('{"template":"hyperbolic","run":{"h0":0}}', "run.h0"),
        ('{"template":"hyperbolic","run":{"speed":1}}', "run.speed"),
        ('{"template":"hyperbolic","run":{"t0_list":[0,-1]}}', "run.t0_list[1]"),
        ('{"template":"hyperbolic","run":{"t_max":5,"t0_list":[0,6]}}', "run.t_max"),
        ('{"template":"hyperbolic","run":{"x0_list":[[0,1],[0,-1]]}}', "run.x0_list[1]"),
        ('{"template":"hyperbolic","run":{"x0_list":[[0,1,2]]}}', "run.x0_list[0]"),
        ('{"template":"euclidean","run":{"x0_list":[[0,2.5]]}}', "run.x0_list[0]"),
        ('{"template":"hyperbolic","claims":["magic"]}', "claims[0]"),
        ('{"template":"hyperbolic","claims":[]}', "claims"),
        ('{"template":"hyperbolic","name":""}', "name"),
        ('{"template":"torus"}', "template"),
        ('{"a":1}', "template"),
    ],
)
def test_validation_names_field(text, path):
    with pytest.raises(ConfigError) as info:
        load_scenario(text)
    assert info.value.path == path
    assert str(info.value).startswith(path + ":")


def test_parse_error_location():
    with pytest.raises(ConfigError, match="line 3, column"):
        load_scenario('{\n  "template": "hyperbolic",\n  "a": ,\n}')
    with pytest.raises(ConfigError, match="duplicate"):
        load_scenario('{"template": "hyperbolic", "a": 1, "a": 2}')
    with pytest.raises(ConfigError):
        load_scenario("[1, 2]")


@pytest.mark.parametrize("builder", [build_example_hyperbolic, build_example_euclidean, build_linear_oracle, build_zero_field])
def test_serialize_roundtrip(builder):
    scn = builder()
    again = load_scenario(serialize_scenario(scn))
    assert again.config == scn.config
    assert serialize_scenario(again) == serialize_scenario(scn)
    assert again.warnings == ()
    np.testing.assert_array_equal(again.run.x0_list, scn.run.x0_list)


@given(a=st.floats(0.1, 10), c=st.floats(0.1, 10), scale=st.floats(0.5, 2))
def test_serialize_roundtrip_property(a, c, scale):
    scn = build_example_euclidean(a=a, d=c, w3_scale=scale)
    again = load_scenario(serialize_scenario(scn))
    assert again.config == scn.config
    x = np.array([0.1 * a, 1.3 * a])
    assert again.field(1.0, x).tolist() == scn.field(1.0, x).tolist()


@pytest.mark.parametrize("name", ["hyperbolic", "euclidean", "linear", "zero"])
def test_shipped_configs_load(name):
    scn = load_scenario_file(CONFIGS / f"{name}.json")
    assert scn.template == name
    assert json.loads((CONFIGS / f"{name}.json").read_text())["run"]["t_max"] == scn.run.t_max


# -- claims ---------------------------------------------------------------------


def test_doubled_w3_breaks_decrease():
    scn = build_example_hyperbolic(w3_scale=2.0)
    rep = evaluate_claims(scn, SMALL)["decrease"]
    assert rep.verdict is Verdict.FAIL


def test_zero_field_claims():
    reps = evaluate_claims(build_zero_field(claims=["sandwich", "decrease"]), SMALL)
    assert all(r.passed for r in reps.values())


def test_linear_claims_pass():
    scn = build_linear_oracle(run={"t_max": 5.0, "t0_list": [0.0, 1.0]})
    reps = evaluate_claims(scn, SMALL)
    assert {k: r.verdict.value for k, r in reps.items()} == dict.fromkeys(scn.claims, "pass")


def test_simulate_order(hyp_sin):
    scn = build_example_hyperbolic(run={"t_max": 2.5, "t0_list": [0.0, 1.0, 2.0]})
    trs = simulate(scn, every=100)
    assert len(trs) == 3 * 8
    assert [tr.t0 for tr in trs[::8]] == [0.0, 1.0, 2.0]
    np.testing.assert_array_equal(trs[9].points[0], scn.run.x0_list[1])
