import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from subpop_uda.adapt import (
    NuisanceBundle,
    TargetPredictor,
    classify,
    eta,
    eta0,
    eta1,
    fit_nuisance,
    naive_xi1,
    oracle_predictor,
)
from subpop_uda.core import Dataset, select
from subpop_uda.errors import FitError
from subpop_uda.proportions import SourceProportions, TargetProportions
from subpop_uda.synthgen import DEFAULT_MEANS, SyntheticSpec, generate, oracle_spec


class Const:
    """Stand-in nuisance model returning a fixed probability for every row."""

    def __init__(self, p):
        self.p = p

    def predict_proba(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.p)


THIRD = SourceProportions(1 / 3, 1 / 3, 1 / 3, 0.5)
QUARTER = TargetProportions(0.25, 0.25, 0.25, 0.25, 0.5, 0.5)


def make(xi0=0.5, xi=0.5, tau0=0.5, tau1=0.5, kappa=0.5, sp=THIRD, tp=QUARTER):
    b = NuisanceBundle(Const(xi0), Const(xi), Const(tau0), Const(tau1), Const(kappa))
    return TargetPredictor(b, sp, tp)


X1 = np.zeros(2)


class TestNaiveXi1:
    def test_full_a1_share_collapses_to_xi(self):
        assert naive_xi1(make(xi=0.3, xi0=0.9, tau1=1.0), X1) == pytest.approx(0.3, abs=1e-15)

    def test_equal_components(self):
        assert naive_xi1(make(xi=0.4, xi0=0.4, tau1=0.5), X1) == pytest.approx(0.4, abs=1e-15)

    def test_negative_raw_value_is_clamped(self):
        tp = make(xi=0.2, xi0=0.5, tau1=0.5)
        assert tp.xi1(X1, clamp=False) == pytest.approx(-0.1, abs=1e-15)
        assert naive_xi1(tp, X1) == 0.0
        assert tp.clamp_rate("xi1", np.zeros((3, 2))) == 1.0


class TestEta1:
    def test_no_minority_mass_gives_one(self):
        tp = TargetProportions(0.5, 0.25, 0.0, 0.25, 0.5, 0.5)
        assert eta1(make(kappa=0.7, tp=tp), X1) == 1.0

    def test_kappa_at_floor(self):
        assert eta1(make(kappa=1e-6), X1) == pytest.approx(1.0, abs=1e-5)
        assert eta1(make(kappa=1e-6), X1) < 1.0

    def test_constant_kappa_world_predicts_zero(self):
        pi, alpha01, rho = 0.5, 1 / 3, 0.5
        kappa = pi * alpha01 / (pi * alpha01 + (1 - pi) * (1 - rho))
        tp = TargetProportions(0.0, 0.25, 0.5, 0.25, 0.5, 0.5)
        assert make(kappa=kappa, tp=tp).eta1(X1, clamp=False) == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(k1=st.floats(0.01, 0.99), k2=st.floats(0.01, 0.99))
    def test_strictly_decreasing_in_kappa(self, k1, k2):
        if abs(k1 - k2) < 1e-6:
            return
        lo, hi = sorted((k1, k2))
        assert make(kappa=lo).eta1(X1, clamp=False) > make(kappa=hi).eta1(X1, clamp=False)


class TestEta0:
    def test_worked_example(self):
        sp = SourceProportions(0.25, 0.5, 0.25, 0.5)
        tp = TargetProportions(0.0, 0.5, 0.25, 0.25, 0.75, 0.5)
        assert eta0(make(xi0=0.5, sp=sp, tp=tp), X1) == pytest.approx(2 / 3, abs=1e-15)

    def test_uninformative_xi0_gives_ratio_share(self):
        sp = SourceProportions(0.2, 0.5, 0.3, 0.5)
        tp = TargetProportions(0.2, 0.35, 0.3, 0.15, 0.5, 0.4)
        r, s = 0.35 / 0.2, 0.15 / 0.3
        assert eta0(make(xi0=0.5, sp=sp, tp=tp), X1) == pytest.approx(r / (r + s), abs=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(p1=st.floats(0.01, 0.99), p2=st.floats(0.01, 0.99))
    def test_strictly_increasing_in_xi0(self, p1, p2):
        if abs(p1 - p2) < 1e-9:
            return
        lo, hi = sorted((p1, p2))
        tp = TargetProportions(0.2, 0.35, 0.3, 0.15, 0.5, 0.5)
        assert make(xi0=lo, tp=tp).eta0(X1) < make(xi0=hi, tp=tp).eta0(X1)


class TestEta:
    def test_endpoints(self):
        tp = make(xi0=0.3, kappa=0.2, tau0=1.0)
        assert eta(tp, X1) == tp.eta1(X1)
        tp = make(xi0=0.3, kappa=0.2, tau0=0.0)
        assert eta(tp, X1) == tp.eta0(X1)

    def test_worked_mixture(self):
        # alpha = 1/3 each, pi = 1/2, beta01 = 0.2 and kappa = 1/4 give eta1 = 0.8;
        # beta10 = beta00 makes eta0 equal to xi0 = 0.2
        tp = TargetProportions(0.2, 0.3, 0.2, 0.3, 0.6, 0.5)
        assert eta(make(xi0=0.2, kappa=0.25, tau0=0.25, tp=tp), X1) == pytest.approx(0.35, abs=1e-14)


@pytest.mark.parametrize("p, threshold, label", [(0.5, 0.5, 0), (0.5000001, 0.5, 1), (0.0, 0.5, 0),
                                                 (0.3, 0.2, 1)])
def test_classify_is_strict(p, threshold, label):
    assert classify(p, threshold) == label


@pytest.fixture(scope="module")
def fitted():
    spec = SyntheticSpec(3000, 3000, seed=7)
    ds, truth = generate(spec)
    bundle = fit_nuisance(ds)
    return ds, bundle, oracle_spec(spec)


class TestFitted:
    def test_models_share_feature_dimension(self, fitted):
        ds, bundle, _ = fitted
        assert all(bundle.__dict__[n].q == 4 for n in ("xi0", "xi", "tau0", "tau1", "kappa"))

    def test_mixture_identity_pre_clamp(self, fitted):
        ds, bundle, o = fitted
        tp = TargetPredictor(bundle, o.source, o.target)
        X = select(ds, r=0).X
        lhs = tp.eta(X, clamp=False)
        rhs = tp.eta1(X, clamp=False) * tp.tau0(X) + tp.eta0(X) * (1 - tp.tau0(X))
        np.testing.assert_array_equal(lhs, rhs)
        assert np.all((tp.eta(X) >= 0) & (tp.eta(X) <= 1))

    def test_proportionality_collapse(self, fitted):
        ds, bundle, _ = fitted
        sp = SourceProportions(0.2, 0.5, 0.3, 0.5)
        tp = TargetProportions(0.25, 0.2, 0.25, 0.3, 0.5, 0.4)  # 0.2 / 0.2 == 0.3 / 0.3
        pred = TargetPredictor(bundle, sp, tp)
        X = ds.X[:500]
        np.testing.assert_allclose(pred.eta0(X), pred.xi0(X), atol=1e-12, rtol=0)

    def test_serialization_round_trip(self, fitted):
        ds, bundle, o = fitted
        tp = TargetPredictor(bundle, o.source, o.target, threshold=0.4)
        back = TargetPredictor.from_dict(json.loads(json.dumps(tp.to_dict())))
        X = ds.X[:200]
        np.testing.assert_array_equal(back.eta(X), tp.eta(X))
        assert back.threshold == 0.4


class TestFitErrors:
    def _rows(self, cells, seed=0):
        rng = np.random.default_rng(seed)
        n = len(cells)
        r, y, a = map(np.array, zip(*cells))
        return Dataset(rng.normal(size=(n, 2)), r, y, a)

    def test_missing_target_a1_rows(self):
        cells = [(1, 1, 0), (1, 0, 1), (1, 0, 0), (0, -1, 0)] * 10
        with pytest.raises(FitError) as err:
            fit_nuisance(self._rows(cells))
        assert err.value.model == "kappa"

    def test_all_negative_source(self):
        cells = [(1, 0, 1), (1, 0, 0), (0, -1, 0), (0, -1, 1)] * 10
        with pytest.raises(FitError) as err:
            fit_nuisance(self._rows(cells))
        assert err.value.model == "xi"


def _bayes_posterior(X, means=DEFAULT_MEANS):
    dens = {c: multivariate_normal(means[c], np.eye(4)).pdf(X) for c in means}
    return (dens[(1, 0)] + dens[(1, 1)]) / sum(dens.values())


class TestOracle:
    spec = SyntheticSpec(4000, 4000, seed=0)

    def test_eta_at_mu11_matches_bayes(self):
        x = np.array(DEFAULT_MEANS[(1, 1)], float)
        assert oracle_predictor(self.spec).eta(x) == pytest.approx(float(_bayes_posterior(x)), abs=1e-10)

    def test_equidistant_point(self):
        x = np.full(4, 0.25)  # same distance to every unit basis vector
        assert oracle_predictor(self.spec).eta(x) == pytest.approx(0.5, abs=1e-10)

    def test_tau0_at_mu00(self):
        x = np.array(DEFAULT_MEANS[(0, 0)], float)
        dens = {c: math.exp(-0.5 * np.sum((x - np.array(m)) ** 2)) for c, m in DEFAULT_MEANS.items()}
        expected = (dens[(0, 1)] + dens[(1, 1)]) / sum(dens.values())
        assert oracle_predictor(self.spec).tau0(x) == pytest.approx(expected, abs=1e-12)

    def test_random_points(self):
        X = np.random.default_rng(1).normal(scale=1.5, size=(1000, 4)) + 0.25
        np.testing.assert_allclose(oracle_predictor(self.spec).eta(X), _bayes_posterior(X), atol=1e-10, rtol=0)
