"""Estimator-style wrappers around the engine, geometry and high/low audits."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_alphas, check_frequencies, check_points, check_positive, check_spacing
from .engine import Region, evaluate, evaluate_points, moment, streaming_level_areas, theorem_bound
from .geometry import FrequencySet, build_cap_partition, lambda_profile, pigeonhole_normalize
from .highlow import TestField, run_highlow

__all__ = ["ExpSumField", "SuperlevelProfiler", "CapNormalizer", "HighLowAnalyzer"]


def _freqset(X, y, n_nominal=None):
    pts, coeffs = check_frequencies(X, y)
    return FrequencySet(pts, coeffs, n_nominal=n_nominal)


class ExpSumField(BaseEstimator, TransformerMixin):
    """F(x, t) = sum a_xi e(x xi + t xi^2) for fitted frequencies.

    Parameters
    ----------
    spacing : float
        Grid spacing used by :meth:`sample`.
    method : {"auto", "fast", "direct"}
        Evaluation path on grids.
    n_nominal : int, optional
        Nominal N for the separation check; defaults to the number of points.
    """

    def __init__(self, spacing=0.25, method="auto", n_nominal=None):
        self.spacing = spacing
        self.method = method
        self.n_nominal = n_nominal

    def fit(self, X, y=None):
        """X: frequencies in [-1, 1]; y: optional complex coefficients."""
        check_spacing(self.spacing)
        if self.method not in ("auto", "fast", "direct"):
            raise ValueError(f"unknown method {self.method!r}")
        self.freq_ = _freqset(X, y, self.n_nominal)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        """Complex values at the (x, t) rows of X."""
        check_is_fitted(self, "freq_")
        return evaluate_points(self.freq_, check_points(X))

    def predict(self, X):
        """|F| at the (x, t) rows of X."""
        return np.abs(self.transform(X))

    def sample(self, R, origin=(0.0, 0.0), n_jobs=1):
        """SampledField on the square of side R at ``origin``."""
        check_is_fitted(self, "freq_")
        check_positive("R", R)
        return evaluate(self.freq_, Region.square(R, origin), self.spacing, self.method, n_jobs)

    def moment(self, p, R):
        return moment(self.sample(R), p)


class SuperlevelProfiler(BaseEstimator):
    """Superlevel areas |{|F| >= alpha} cap [0, R]^2| for fitted frequencies.

    ``transform(alphas)`` returns the areas, ``predict(alphas)`` the ratio to
    the three-regime bound.
    """

    def __init__(self, R=64.0, spacing=0.25, kappa=0.05, n_jobs=1):
        self.R = R
        self.spacing = spacing
        self.kappa = kappa
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        check_positive("R", self.R)
        check_spacing(self.spacing)
        self.freq_ = _freqset(X, y)
        self.N_ = len(self.freq_)
        return self

    def transform(self, alphas):
        check_is_fitted(self, "freq_")
        a = check_alphas(alphas)
        prof = streaming_level_areas(self.freq_, Region.square(self.R), a, self.spacing,
                                     self.kappa, self.n_jobs)
        order = np.argsort(np.argsort(a))
        self.profile_ = prof
        return prof.areas[order]

    def predict(self, alphas):
        a = check_alphas(alphas)
        areas = self.transform(a)
        bounds = np.array([theorem_bound(self.N_, self.R, x, self.freq_.l2_mass)[0] for x in a])
        return areas / bounds


class CapNormalizer(BaseEstimator, TransformerMixin):
    """Pigeonhole frequencies onto one occupancy class per scale.

    ``fit`` builds the cap partition and chooses the surviving gamma caps;
    ``transform`` keeps the frequencies lying in them.
    """

    def __init__(self, R=256.0, beta=0.75, eps=0.25):
        self.R = R
        self.beta = beta
        self.eps = eps

    def fit(self, X, y=None):
        check_positive("R", self.R)
        if not 0.5 <= self.beta <= 1:
            raise ValueError("beta must lie in [1/2, 1]")
        pts, _ = check_frequencies(X)
        self.partition_ = build_cap_partition(self.R, self.beta, self.eps)
        active = np.zeros(self.partition_.n_gamma, dtype=bool)
        active[self.partition_.gamma_of_point(pts)] = True
        self.result_ = pigeonhole_normalize(self.partition_, active)
        self.lambda_ = lambda_profile(self.partition_, self.result_.selected)
        return self

    def transform(self, X):
        check_is_fitted(self, "result_")
        pts, _ = check_frequencies(X)
        keep = self.result_.selected[self.partition_.gamma_of_point(pts)]
        return pts[keep]


class HighLowAnalyzer(BaseEstimator):
    """Prune a cap field and run the high/low audits.

    ``fit`` takes a :class:`TestField`; ``predict`` returns the fitted
    constants keyed by audit name.
    """

    def __init__(self, alpha=None, M=4.0, delta=0.1):
        self.alpha = alpha
        self.M = M
        self.delta = delta

    def fit(self, X, y=None):
        if not isinstance(X, TestField):
            raise TypeError("HighLowAnalyzer.fit expects a TestField")
        if self.alpha is not None:
            check_positive("alpha", self.alpha)
        check_positive("M", self.M)
        check_positive("delta", self.delta)
        self.result_ = run_highlow(X, self.alpha, self.M, self.delta)
        return self

    def predict(self, X=None):
        check_is_fitted(self, "result_")
        return {r.name: r.fitted_constant for r in self.result_.reports}

    @property
    def reports_(self):
        check_is_fitted(self, "result_")
        return self.result_.reports
