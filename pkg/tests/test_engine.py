import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import normal_quantile

from localdml import (
    DebiasedEstimator,
    FunctionalSpec,
    FunctionPredictor,
    Kernel,
    LocalWeighting,
    RieszLasso,
    constant_predictor,
    critical_value,
    dml_estimate,
    double_robustness_probe,
    oracle_estimate,
    partition_folds,
)
from localdml.core.data import as_dataset
from localdml.core.errors import FoldFitError
from localdml.core.folds import FoldPartition
from localdml.learners import DictionaryLasso
from localdml.simlab import alpha0, dgp_sample, gamma0, true_ate, true_cate


def _tiny():
    # gamma = 2d, alpha = 1, so m = 2 on every row
    data = as_dataset(y=[3.0, 1.0, 2.0, 2.0], d=[1.0, 0.0, 1.0, 0.0], x=np.zeros((4, 1)))
    gamma = FunctionPredictor(lambda Z: 2.0 * Z[:, 0], dd=lambda Z: np.full(Z.shape[0], 2.0))
    return data, gamma, constant_predictor(1.0)


def test_hand_computed_estimate_two_folds():
    data, gamma, alpha = _tiny()
    folds = FoldPartition(2, np.array([0, 1, 0, 1]))
    res = DebiasedEstimator(FunctionalSpec("ate"), gamma, alpha, n_folds=2).fit(data, folds).result_
    # m + alpha * (y - gamma) = [3, 3, 2, 4]
    assert res.theta == 3.0
    np.testing.assert_array_equal(res.psi, [0.0, 0.0, -1.0, 1.0])
    assert res.sigma == math.sqrt(0.5)
    assert res.se == pytest.approx(math.sqrt(0.5) / 2, abs=1e-15)
    lo, hi = res.ci
    assert hi - lo == pytest.approx(2 * critical_value(0.05) * math.sqrt(0.5) / 2, rel=1e-15)


def test_critical_values_against_mpmath():
    assert critical_value(0.05) == pytest.approx(normal_quantile(0.975), abs=1e-12)
    assert critical_value(0.2) == pytest.approx(normal_quantile(0.9), abs=1e-12)
    assert round(critical_value(0.05), 6) == 1.959964
    assert round(critical_value(0.2), 6) == 1.281552
    with pytest.raises(ValueError):
        critical_value(0.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(20, 200), k=st.integers(2, 5))
def test_identities_hold_on_every_run(seed, n, k):
    data = dgp_sample(n, seed)
    v0 = float(np.median(data.v))
    w = LocalWeighting.from_sample(data.v, Kernel("gaussian"), v0, 0.3)
    spec = FunctionalSpec("cate", w)
    res = oracle_estimate(data, spec, gamma0, alpha0(spec), n_folds=k, seed=seed)
    # estimate is the mean moment, psi is centered, sigma is the root mean square of psi
    assert res.theta == pytest.approx(np.mean(res.m_part + res.correction), abs=1e-12)
    assert abs(res.psi.mean()) < 1e-12
    assert res.sigma == pytest.approx(np.sqrt(np.mean(res.psi ** 2)), rel=1e-12)
    lo, hi = res.ci
    assert lo <= res.theta <= hi
    assert (hi - lo) / 2 == pytest.approx(res.critical * res.sigma / math.sqrt(n), rel=1e-12)
    assert sum(f.n_test for f in res.folds) == n


def test_oracle_global_estimate_close_to_truth():
    data = dgp_sample(20_000, 11)
    res = oracle_estimate(data, FunctionalSpec("ate"), gamma0, alpha0())
    assert abs(res.theta - true_ate()) < 4 * res.se


def test_local_oracle_uses_localized_representer():
    data = dgp_sample(20_000, 12)
    w = LocalWeighting.from_sample(data.v, Kernel("epanechnikov"), 0.25, 0.1)
    spec = FunctionalSpec("cate", w)
    res = oracle_estimate(data, spec, gamma0, alpha0(spec))
    # smoothing bias at h=0.1 is far below the sampling error here
    assert abs(res.theta - true_cate(0.25)) < 4 * res.se + 0.01


def test_within_fold_order_preserving_permutation_is_bit_identical():
    data = dgp_sample(100, 3)
    folds = partition_folds(100, 5, 7)
    spec = FunctionalSpec("ate")
    est = DebiasedEstimator(spec, DictionaryLasso(), RieszLasso()).fit(data, folds)
    # regroup rows fold by fold, keeping their order inside each fold
    perm = np.concatenate([folds.test_index(k) for k in range(5)])
    moved = data.subset(perm)
    moved_folds = FoldPartition(5, folds.assignment[perm])
    est2 = DebiasedEstimator(spec, DictionaryLasso(), RieszLasso()).fit(moved, moved_folds)
    assert est.result_.theta == est2.result_.theta
    assert est.result_.sigma == est2.result_.sigma


def test_reruns_are_bitwise_identical():
    data = dgp_sample(100, 4)
    spec = FunctionalSpec("ate")
    a = dml_estimate(data, spec, DictionaryLasso(), RieszLasso(), seed=3)
    b = dml_estimate(data, spec, DictionaryLasso(), RieszLasso(), seed=3)
    assert a.theta == b.theta and a.sigma == b.sigma
    assert [f.gamma_fingerprint for f in a.folds] == [f.gamma_fingerprint for f in b.folds]


def test_fold_failure_names_the_fold():
    class Broken:
        def fit(self, Z, y):
            raise RuntimeError("boom")

        def get_params(self, deep=True):
            return {}

    data = dgp_sample(50, 5)
    with pytest.raises(FoldFitError) as info:
        dml_estimate(data, FunctionalSpec("ate"), Broken(), alpha0(), n_folds=2)
    assert info.value.fold == 0


def test_result_serialization_round_trip():
    data, gamma, alpha = _tiny()
    res = oracle_estimate(data, FunctionalSpec("ate"), gamma, alpha, n_folds=2)
    doc = json.loads(res.to_json())
    assert doc["theta"] == res.theta and doc["ci_lower"] == res.ci[0] and len(doc["folds"]) == 2
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=res.CSV_FIELDS)
    writer.writeheader()
    writer.writerow(res.csv_row())
    row = next(csv.DictReader(io.StringIO(buf.getvalue())))
    assert float(row["theta"]) == res.theta and float(row["se"]) == res.se


def test_evaluate_relocalizes_without_refitting():
    data = dgp_sample(200, 6)
    k = Kernel("gaussian")
    a = FunctionalSpec("cate", LocalWeighting.from_sample(data.v, k, 0.0, 0.2))
    b = FunctionalSpec("cate", LocalWeighting.from_sample(data.v, k, 0.25, 0.2))
    est = DebiasedEstimator(a, DictionaryLasso(), RieszLasso()).fit(data)
    rb = est.evaluate(b)
    direct = DebiasedEstimator(b, DictionaryLasso(), RieszLasso()).fit(data).result_
    assert rb.theta == pytest.approx(direct.theta, abs=1e-12)


def test_estimator_exposes_params():
    est = DebiasedEstimator(FunctionalSpec("ate"), DictionaryLasso(), RieszLasso(), n_folds=3)
    params = est.get_params(deep=False)
    assert params["n_folds"] == 3 and params["level"] == 0.05


def test_double_robustness_each_wrong_nuisance_alone():
    data = dgp_sample(50_000, 8)
    spec = FunctionalSpec("ate")
    wrong_alpha, wrong_gamma = double_robustness_probe(data, spec, gamma0, alpha0())
    truth = true_ate()
    assert abs(wrong_alpha.theta - truth) < 4 * wrong_alpha.se
    assert abs(wrong_gamma.theta - truth) < 4 * wrong_gamma.se


def test_both_nuisances_wrong_is_biased():
    data = dgp_sample(50_000, 9)
    spec = FunctionalSpec("ate")
    bad_g = FunctionPredictor(lambda Z: gamma0.predict(Z) + 0.5 * Z[:, 0])
    bad_a = FunctionPredictor(lambda Z: alpha0().predict(Z) + 0.5 * Z[:, 0])
    res = oracle_estimate(data, spec, bad_g, bad_a)
    assert abs(res.theta - true_ate()) > 10 * res.se
