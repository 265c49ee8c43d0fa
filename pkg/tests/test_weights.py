import numpy as np
import pytest

from gaborwf.exceptions import ConfigError, DomainError
from gaborwf.weights import (
    ExpWeight,
    WeightFunction,
    double_conjugate,
    eval_omega,
    exp_weight_eval,
    fit_47ii_constant,
    log_lattice_infimum,
    omega_point,
    property_suite,
    young_conjugate,
)

W05 = WeightFunction.power(0.5)


def _grid_sup_conjugate(s, a=0.5):
    # brute oracle: sup over t in [0, 200] of s t - exp(a t)
    t = np.linspace(0.0, 200.0, 10**6)
    return float(np.max(s * t - np.exp(a * t)))


def test_eval_omega_values():
    assert eval_omega(W05, 4.0) == pytest.approx(2.0, abs=1e-15)
    for w in (W05, WeightFunction.logpower(2.0), WeightFunction.power(0.3)):
        assert eval_omega(w, 0.0) == 0.0
    assert eval_omega(WeightFunction.logpower(2.0), np.e - 1) == pytest.approx(1.0, rel=1e-14)


def test_omega_point_norm():
    assert omega_point(W05, np.array([3.0, 4.0])) == pytest.approx(np.sqrt(5.0), rel=1e-15)
    assert omega_point(W05, np.zeros(2)) == 0.0
    assert omega_point(W05, np.array([0.0, 9.0])) == pytest.approx(3.0, rel=1e-15)


def test_young_conjugate_against_grid_oracle():
    # closed form 2 log 2 - 2; the grid supremum agrees to ~1e-9
    frozen = 2 * np.log(2.0) - 2
    assert _grid_sup_conjugate(1.0) == pytest.approx(frozen, abs=1e-8)
    assert young_conjugate(W05, 1.0) == pytest.approx(frozen, abs=1e-10)
    # at s = a the supremum sits at t = 0
    assert young_conjugate(W05, 0.5) == pytest.approx(-1.0, abs=1e-12)
    assert _grid_sup_conjugate(0.5) == pytest.approx(-1.0, abs=1e-12)


def test_young_conjugate_convexity_spot():
    c1, c2, c3 = (young_conjugate(W05, s) for s in (1.0, 2.0, 3.0))
    assert c1 + c3 >= 2 * c2


def test_young_conjugate_vectorized_matches_scalar():
    s = np.array([0.0, 0.7, 3.0, 12.5])
    v = young_conjugate(W05, s)
    assert np.allclose(v, [young_conjugate(W05, float(x)) for x in s], rtol=0, atol=1e-12)


def test_double_conjugate_recovers_phi():
    t = np.linspace(0.5, 8.0, 6)
    back = double_conjugate(W05, t)
    assert np.allclose(back, np.exp(t / 2), rtol=1e-6)


def test_exp_weight():
    assert exp_weight_eval(ExpWeight(1.0, W05), np.zeros(2)) == 1.0
    assert exp_weight_eval(ExpWeight(2.0, W05), np.array([4.0, 0.0])) == pytest.approx(np.e**4, rel=1e-14)
    with pytest.raises(DomainError):
        ExpWeight(0.0, W05)


def test_moderate_random_pairs():
    rng = np.random.default_rng(3)
    for lam in (-1.5, 0.7, 2.0):
        ew = ExpWeight(lam, W05)
        z1, z2 = rng.normal(scale=20, size=(2, 500, 2))
        lhs = ew.m(z1 + z2, log=True)
        rhs = ew.v(z1, log=True) + ew.m(z2, log=True)
        assert np.all(lhs <= rhs + 1e-12)


def test_lattice_infimum_oracle_values():
    # oracle: direct minimum over beta of -beta log t + phi*(beta) using the closed form
    # phi*(s) = 2 s log(2 s) - 2 s for s >= 1/2, -1 below
    def conj(s):
        return np.where(s > 0.5, 2 * s * np.log(np.maximum(2 * s, 1e-300)) - 2 * s, -1.0)

    beta = np.arange(201, dtype=float)
    for t, frozen in ((2.0, -1.3068528194400546), (10.0, -3.0599927415085295), (100.0, -10.0)):
        oracle = float(np.min(-beta * np.log(t) + conj(beta)))
        assert oracle == pytest.approx(frozen, abs=1e-9)
        assert log_lattice_infimum(W05, 1.0, t) == pytest.approx(frozen, abs=1e-9)


def test_fit_47ii_constant_is_feasible():
    ts = np.geomspace(1.5, 1e3, 400)
    a, b = fit_47ii_constant(W05, [1.0], ts)
    assert b == 1.0
    assert a == pytest.approx(1.0191707459882737, abs=1e-9)
    lhs = log_lattice_infimum(W05, 1.0, ts)
    assert np.all(lhs + a <= 1e-12)


def test_property_suite_power():
    res = property_suite(W05, const_47ii=(1.0191707459882737, 1.0))
    assert all(ok for ok, _ in res.values()), res


def test_logpower_not_subadditive_near_zero():
    # (log(1+t))^2 behaves like t^2 at the origin, so omega(2t) > 2 omega(t) there
    w = WeightFunction.logpower(2.0)
    t = 0.1
    assert eval_omega(w, 2 * t) > 2 * eval_omega(w, t)
    res = property_suite(w)
    assert not res["subadditive"][0]


def test_from_dict_errors():
    assert WeightFunction.from_dict({"kind": "power", "a": 0.5}).label == W05.label
    with pytest.raises(ConfigError) as exc:
        WeightFunction.from_dict({"kind": "power"})
    assert exc.value.field.startswith("weight")
    with pytest.raises((ConfigError, DomainError)):
        WeightFunction.power(1.5)
