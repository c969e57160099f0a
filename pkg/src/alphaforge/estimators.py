"""scikit-learn style wrappers around the evaluation, weighting and regression steps.

These let an alpha be dropped into a ``Pipeline`` or cloned with
``get_params``/``set_params``. ``fit`` only validates and records metadata;
nothing here learns from the data.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import operators as ops
from .analytics import ols_fit
from .backtest import alpha_to_weights
from .corpus import get_alpha
from .evaluator import EvalConfig, check_requirements, evaluate
from .expr import parse, validate
from .market import Panel
from .validation import check_market, check_panel


class AlphaTransformer(BaseEstimator, TransformerMixin):
    """Evaluate one alpha expression over ``MarketData``.

    ``expression`` is either formula text or a corpus id (1..101).
    """

    def __init__(
        self,
        expression="rank(close)",
        industry_level=None,
        variance_epsilon=ops.VARIANCE_EPSILON,
        flat_correlation=ops.FLAT_CORRELATION,
    ):
        self.expression = expression
        self.industry_level = industry_level
        self.variance_epsilon = variance_epsilon
        self.flat_correlation = flat_correlation

    def _config(self) -> EvalConfig:
        return EvalConfig(
            industry_level_override=self.industry_level,
            variance_epsilon=self.variance_epsilon,
            flat_correlation=self.flat_correlation,
        )

    def fit(self, X, y=None):
        market = check_market(X)
        if isinstance(self.expression, (int, np.integer)):
            self.expr_ = get_alpha(int(self.expression)).compile()
        else:
            self.expr_ = validate(parse(str(self.expression)))
        check_requirements(self.expr_, market, self._config())
        self.warmup_rows_ = self.expr_.warmup_rows
        self.required_inputs_ = tuple(sorted(self.expr_.required_inputs))
        return self

    def transform(self, X) -> Panel:
        check_is_fitted(self, "expr_")
        return evaluate(self.expr_, check_market(X), self._config()).values


class DollarNeutralWeights(BaseEstimator, TransformerMixin):
    """Demean each row and scale to unit gross exposure."""

    def fit(self, X, y=None):
        self.n_assets_ = check_panel(X).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_assets_")
        if isinstance(X, Panel):
            return alpha_to_weights(X).weights
        arr = check_panel(X)
        if arr.shape[1] != self.n_assets_:
            raise ValueError(f"expected {self.n_assets_} assets, got {arr.shape[1]}")
        return alpha_to_weights(Panel.from_array(arr)).values


class OLSRegressor(BaseEstimator, RegressorMixin):
    """Least squares with the diagnostics of :func:`alphaforge.analytics.ols_fit`."""

    def __init__(self, fit_intercept=True):
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        self.result_ = ols_fit(y, X, include_intercept=self.fit_intercept)
        coef = self.result_.coef
        self.intercept_ = float(coef[0]) if self.fit_intercept else 0.0
        self.coef_ = coef[1:] if self.fit_intercept else coef
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X @ self.coef_ + self.intercept_
