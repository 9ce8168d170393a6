import numpy as np
import pytest
from sklearn.base import clone

from smallcap import CapNormalizer, ExpSumField, HighLowAnalyzer, SuperlevelProfiler
from smallcap.engine import theorem_bound
from smallcap.highlow import single_cap_field


def test_expsum_field_points_and_grid():
    X = np.arange(1, 9) / 8
    est = ExpSumField().fit(X)
    assert est.predict([[0.0, 0.0]])[0] == pytest.approx(8.0)
    field = est.sample(4.0, origin=(1.0, 2.0))
    pts = np.array([[field.x[3], field.t[5]]])
    assert est.transform(pts)[0] == pytest.approx(field.samples[3, 5], abs=1e-9)
    assert est.moment(2, 8.0) > 0


def test_expsum_params_and_clone():
    est = ExpSumField(spacing=0.125, method="direct")
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(ValueError):
        ExpSumField(method="magic").fit([0.5])
    with pytest.raises(ValueError):
        ExpSumField(spacing=1.0).fit([0.5])
    with pytest.raises(ValueError):
        ExpSumField().fit([0.5, 1.5])
    with pytest.raises(ValueError):
        ExpSumField().fit([0.1, 0.6]).transform([[1.0, 2.0, 3.0]])


def test_unfitted_raises():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        ExpSumField().transform([[0.0, 0.0]])


def test_superlevel_profiler_order_and_ratio():
    X = np.arange(1, 17) / 16
    prof = SuperlevelProfiler(R=64.0).fit(X)
    alphas = [8.0, 4.0, 16.0]
    areas = prof.transform(alphas)
    assert areas[1] >= areas[0] >= areas[2]
    ratio = prof.predict(alphas)
    assert ratio[0] == pytest.approx(areas[0] / theorem_bound(16, 64.0, 8.0, 16.0)[0])
    with pytest.raises(ValueError):
        prof.transform([-1.0])


def test_cap_normalizer():
    rng = np.random.default_rng(0)
    X = np.sort(rng.uniform(-1, 1, 200))
    est = CapNormalizer(R=256.0).fit(X)
    kept = est.transform(X)
    assert 0 < kept.size <= X.size
    assert est.result_.retained_ratio > 0
    with pytest.raises(ValueError):
        CapNormalizer(beta=0.3).fit(X)


def test_highlow_analyzer():
    est = HighLowAnalyzer().fit(single_cap_field(256))
    consts = est.predict()
    assert set(consts) == {"low_lemma", "high_lemma_1", "high_lemma_2", "pruning_lemma", "locally_constant"}
    assert len(est.reports_) == 5
    with pytest.raises(TypeError):
        HighLowAnalyzer().fit(np.zeros(3))
