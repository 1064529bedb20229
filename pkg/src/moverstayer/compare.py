"""Benchmark models: the static mixture and the plain discrete hazard.

The static model fixes the stayer status at baseline: a subject is a
stayer with probability 1 - pi(x) forever, and otherwise faces the
logistic per-interval event hazard P_t = expit(beta'(1, x) + gamma' z_t).
The no-stayer model is the same hazard with pi pinned to 1. A polynomial
time trend enters through deterministic covariates t, t^2, ... appended
to the z rows (raw powers, so fitted gamma values are basis-dependent).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit, log_expit

from .errors import DimensionError, HistoryError
from .estimate import FitConfig, FitResult, _multistart_minimize
from .model import PanelDataset, Subject, _as_vector

_ALLOWED_DEGREES = (0, 1, 2, 3)


class StaticParams:
    """Coefficients (alpha, beta, gamma) of the static mixture model."""

    def __init__(self, alpha, beta, gamma):
        self.alpha = _as_vector(alpha, "alpha")
        self.beta = _as_vector(beta, "beta")
        self.gamma = _as_vector(gamma, "gamma")
        if len(self.alpha) != len(self.beta):
            raise DimensionError("alpha and beta must have equal length")

    @property
    def d(self) -> int:
        return len(self.beta) - 1

    @property
    def q(self) -> int:
        return len(self.gamma)

    @property
    def n_params(self) -> int:
        return len(self.alpha) + len(self.beta) + len(self.gamma)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta, self.gamma])

    @classmethod
    def from_vector(cls, vec, d: int, q: int) -> "StaticParams":
        vec = np.asarray(vec, dtype=float)
        k = d + 1
        if vec.shape != (2 * k + q,):
            raise DimensionError(f"expected vector of length {2 * k + q}, got {vec.shape}")
        return cls(alpha=vec[:k], beta=vec[k : 2 * k], gamma=vec[2 * k :])

    @staticmethod
    def coordinate_names(d: int, q: int) -> list:
        return (
            [f"alpha[{j}]" for j in range(d + 1)]
            + [f"beta[{j}]" for j in range(d + 1)]
            + [f"gamma[{j}]" for j in range(q)]
        )


class NoStayerParams:
    """Coefficients (beta, gamma) of the hazard model without stayers."""

    def __init__(self, beta, gamma):
        self.beta = _as_vector(beta, "beta")
        self.gamma = _as_vector(gamma, "gamma")

    @property
    def d(self) -> int:
        return len(self.beta) - 1

    @property
    def q(self) -> int:
        return len(self.gamma)

    @property
    def n_params(self) -> int:
        return len(self.beta) + len(self.gamma)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.beta, self.gamma])

    @classmethod
    def from_vector(cls, vec, d: int, q: int) -> "NoStayerParams":
        vec = np.asarray(vec, dtype=float)
        k = d + 1
        if vec.shape != (k + q,):
            raise DimensionError(f"expected vector of length {k + q}, got {vec.shape}")
        return cls(beta=vec[:k], gamma=vec[k:])

    @staticmethod
    def coordinate_names(d: int, q: int) -> list:
        return [f"beta[{j}]" for j in range(d + 1)] + [f"gamma[{j}]" for j in range(q)]


def append_time_powers(z_array, degree: int):
    """Append columns t, t^2, ..., t^degree to covariate rows.

    Accepts a (T, q) history or an (n, T, q) batch; t is the 0-based row
    index. degree 0 returns the input unchanged.
    """
    if degree not in _ALLOWED_DEGREES:
        raise ValueError(f"degree must be one of {_ALLOWED_DEGREES}")
    z_array = np.asarray(z_array, dtype=float)
    if degree == 0:
        return z_array
    t_axis = z_array.shape[-2]
    t = np.arange(t_axis, dtype=float)
    powers = np.stack([t ** k for k in range(1, degree + 1)], axis=-1)
    if z_array.ndim == 3:
        powers = np.broadcast_to(powers, (z_array.shape[0],) + powers.shape)
    return np.concatenate([z_array, powers], axis=-1)


def append_time_covariates(data: PanelDataset, degree: int) -> PanelDataset:
    """Dataset copy whose z rows carry the deterministic time powers."""
    if degree == 0:
        return data
    subjects = [
        Subject(y=s.y, delta=s.delta, x=s.x, z=append_time_powers(s.z, degree))
        for s in data.subjects
    ]
    return PanelDataset(subjects, ids=data.ids)


def _hazard_parts(beta, gamma, packed):
    eta = packed.z @ gamma + (packed.xmat @ beta)[:, None]
    log_p = log_expit(eta)
    log_s = log_expit(-eta)
    cum_incl = np.cumsum(log_s * packed.mask, axis=1)
    rows = np.arange(packed.n)
    at_y_p = log_p[rows, packed.y]
    cum_at_y = cum_incl[rows, packed.y]
    cum_before_y = cum_at_y - log_s[rows, packed.y]
    return eta, log_p, at_y_p, cum_at_y, cum_before_y


def _static_stats(params: StaticParams, data: PanelDataset):
    packed = data.packed
    if params.d != data.d or params.q != data.q:
        raise DimensionError(
            f"parameters are for d={params.d}, q={params.q}; data has d={data.d}, q={data.q}"
        )
    lp_alpha = packed.xmat @ params.alpha
    log_pi = log_expit(lp_alpha)
    log_one_minus_pi = log_expit(-lp_alpha)
    eta, _, at_y_p, cum_at_y, cum_before_y = _hazard_parts(params.beta, params.gamma, packed)
    mover_ll = log_pi + cum_before_y + at_y_p
    cens_ll = np.logaddexp(log_one_minus_pi, log_pi + cum_at_y)
    delta = packed.delta.astype(bool)
    ll_vec = np.where(delta, mover_ll, cens_ll)
    w = np.where(delta, 1.0, np.exp(log_pi + cum_at_y - cens_ll))
    return ll_vec, w, eta


def static_log_likelihood(params: StaticParams, data: PanelDataset) -> float:
    """Observed-data log-likelihood of the static mixture.

    An observed mover contributes pi * prod_{s<y}(1 - P_s) * P_y; a
    censored subject (1 - pi) + pi * prod_{s<=y}(1 - P_s). Both are
    accumulated in the log domain.
    """
    ll_vec, _, _ = _static_stats(params, data)
    return math.fsum(ll_vec)


def _event_residual(packed, eta, at_risk_mass):
    p = expit(eta)
    obs = np.zeros_like(p)
    obs[np.arange(packed.n), packed.y] = packed.delta
    return (obs - at_risk_mass[:, None] * p) * packed.mask


def _static_ll_and_gradient(params: StaticParams, data: PanelDataset):
    packed = data.packed
    ll_vec, w, eta = _static_stats(params, data)
    pi = expit(packed.xmat @ params.alpha)
    g_alpha = packed.xmat.T @ (w - pi)
    mass = np.where(packed.delta.astype(bool), 1.0, w)
    resid = _event_residual(packed, eta, mass)
    g_beta = packed.xmat.T @ resid.sum(axis=1)
    g_gamma = np.einsum("nt,ntq->q", resid, packed.z)
    return math.fsum(ll_vec), np.concatenate([g_alpha, g_beta, g_gamma])


def no_stayer_log_likelihood(params: NoStayerParams, data: PanelDataset) -> float:
    """Discrete-hazard log-likelihood with every subject at risk."""
    packed = data.packed
    if params.d != data.d or params.q != data.q:
        raise DimensionError(
            f"parameters are for d={params.d}, q={params.q}; data has d={data.d}, q={data.q}"
        )
    _, _, at_y_p, cum_at_y, cum_before_y = _hazard_parts(params.beta, params.gamma, packed)
    ll_vec = np.where(packed.delta.astype(bool), cum_before_y + at_y_p, cum_at_y)
    return math.fsum(ll_vec)


def _no_stayer_ll_and_gradient(params: NoStayerParams, data: PanelDataset):
    packed = data.packed
    eta, _, at_y_p, cum_at_y, cum_before_y = _hazard_parts(params.beta, params.gamma, packed)
    ll_vec = np.where(packed.delta.astype(bool), cum_before_y + at_y_p, cum_at_y)
    resid = _event_residual(packed, eta, np.ones(packed.n))
    g_beta = packed.xmat.T @ resid.sum(axis=1)
    g_gamma = np.einsum("nt,ntq->q", resid, packed.z)
    return math.fsum(ll_vec), np.concatenate([g_beta, g_gamma])


def fit_static(data: PanelDataset, intercept_degree: int, config: FitConfig,
               init: StaticParams | None = None) -> FitResult:
    """Multi-start fit of the static mixture with a polynomial time trend.

    Time powers t..t^intercept_degree are appended to the z rows before
    fitting, so the returned parameters expect augmented histories. The
    result carries AIC = 2p - 2 loglik with p counting every coefficient.
    """
    if intercept_degree not in _ALLOWED_DEGREES:
        raise ValueError(f"intercept_degree must be one of {_ALLOWED_DEGREES}")
    aug = append_time_covariates(data, intercept_degree)
    d, q = aug.d, aug.q
    p = 2 * (d + 1) + q

    def objective(vec):
        ll, grad = _static_ll_and_gradient(StaticParams.from_vector(vec, d, q), aug)
        return -ll, -grad

    best, best_start, n_eval = _multistart_minimize(
        objective, p, config, None if init is None else init.to_vector()
    )
    loglik = float(-best.fun)
    return FitResult(
        theta_hat=StaticParams.from_vector(best.x, d, q),
        loglik=loglik,
        converged=bool(best.status == 0),
        n_evaluations=n_eval,
        separation_flags=np.abs(best.x) > config.separation_threshold,
        start_index=best_start,
        aic=2.0 * p - 2.0 * loglik,
    )


def fit_no_stayer(data: PanelDataset, intercept_degree: int, config: FitConfig,
                  init: NoStayerParams | None = None) -> FitResult:
    """Multi-start fit of the discrete hazard without a stayer fraction."""
    if intercept_degree not in _ALLOWED_DEGREES:
        raise ValueError(f"intercept_degree must be one of {_ALLOWED_DEGREES}")
    aug = append_time_covariates(data, intercept_degree)
    d, q = aug.d, aug.q
    p = (d + 1) + q

    def objective(vec):
        ll, grad = _no_stayer_ll_and_gradient(NoStayerParams.from_vector(vec, d, q), aug)
        return -ll, -grad

    best, best_start, n_eval = _multistart_minimize(
        objective, p, config, None if init is None else init.to_vector()
    )
    loglik = float(-best.fun)
    return FitResult(
        theta_hat=NoStayerParams.from_vector(best.x, d, q),
        loglik=loglik,
        converged=bool(best.status == 0),
        n_evaluations=n_eval,
        separation_flags=np.abs(best.x) > config.separation_threshold,
        start_index=best_start,
        aic=2.0 * p - 2.0 * loglik,
    )


def static_cumulative_probs(params: StaticParams, x, zbar, t: int):
    """(stayer, mover) cumulative probabilities at time t.

    The stayer probability is the constant 1 - pi(x); the mover
    probability is pi(x) * (1 - prod_{s<t}(1 - P_s)). zbar must already
    contain any time-power columns the parameters were fitted with.
    """
    x = _as_vector(x, "x")
    zbar = np.asarray(zbar, dtype=float)
    if zbar.ndim != 2 or zbar.shape[1] != params.q:
        raise DimensionError(f"zbar must be (t, {params.q})")
    if len(x) != params.d:
        raise DimensionError(f"x has length {len(x)}, expected {params.d}")
    if zbar.shape[0] < t:
        raise HistoryError(f"need {t} covariate rows to reach time {t}, got {zbar.shape[0]}")
    xt = np.concatenate([[1.0], x])
    pi = float(expit(np.dot(params.alpha, xt)))
    if t == 0:
        return 1.0 - pi, 0.0
    eta = zbar[:t] @ params.gamma + np.dot(params.beta, xt)
    surv = float(np.exp(np.sum(log_expit(-eta))))
    return 1.0 - pi, pi * (1.0 - surv)


def _survival_curve(beta, gamma, x_matrix, z_array, horizon):
    x_matrix = np.asarray(x_matrix, dtype=float)
    z_array = np.asarray(z_array, dtype=float)
    n = x_matrix.shape[0]
    if z_array.shape[1] < horizon:
        raise HistoryError(
            f"need {horizon} covariate rows to reach time {horizon}, got {z_array.shape[1]}"
        )
    xmat = np.column_stack([np.ones(n), x_matrix])
    surv = np.ones((n, horizon + 1))
    if horizon > 0:
        eta = z_array[:, :horizon] @ gamma + (xmat @ beta)[:, None]
        surv[:, 1:] = np.exp(np.cumsum(log_expit(-eta), axis=1))
    return xmat, surv


def static_prob_curves(params: StaticParams, x_matrix, z_array, horizon: int):
    """Vectorized (stayer, mover) curves, each (n, horizon + 1)."""
    xmat, surv = _survival_curve(params.beta, params.gamma, x_matrix, z_array, horizon)
    pi = expit(xmat @ params.alpha)[:, None]
    stayer = np.broadcast_to(1.0 - pi, surv.shape).copy()
    mover = pi * (1.0 - surv)
    return stayer, mover


def no_stayer_prob_curves(params: NoStayerParams, x_matrix, z_array, horizon: int):
    """(stayer, mover) curves with the stayer share identically zero."""
    _, surv = _survival_curve(params.beta, params.gamma, x_matrix, z_array, horizon)
    return np.zeros_like(surv), 1.0 - surv
