"""Maximum-likelihood fitting (direct and EM) and inference reports.

Direct fitting runs L-BFGS-B with the analytic gradient from several
starting points and keeps the best final value. EM alternates the
posterior computation over the latent structure (E-step) with two exact
inner Newton solves (M-step): a weighted Bernoulli logistic update for
alpha and a weighted three-category multinomial-logit update for
(beta, gamma) on the extended at-risk records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit

from .errors import (
    DimensionError,
    FitFailureError,
    HessianError,
    MStepError,
)
from .likelihood import (
    _check_dims,
    _log_softmax3,
    _pack_single,
    _posterior_stats,
    loglik_and_gradient,
    total_log_likelihood,
)
from .model import ModelParams, PanelDataset, Subject, _linear_predictors, _softmax3

WALD_MULTIPLIER = 1.96
M_STEP_TOL = 1e-8
M_STEP_MAX_ITER = 200


@dataclass
class FitConfig:
    """Settings shared by the fitting routines.

    n_starts counts all starting points; the first is the zero vector (or
    the explicit init a caller provides) and the remaining n_starts - 1 are
    sampled uniformly from [-init_box, init_box]^p.
    """

    n_starts: int = 5
    init_box: float = 2.0
    max_iter: int = 1000
    tol: float = 1e-8
    separation_threshold: float = 15.0
    seed: int = 0

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if self.init_box <= 0 or self.max_iter <= 0 or self.tol <= 0:
            raise ValueError("init_box, max_iter and tol must be positive")
        if self.separation_threshold <= 0:
            raise ValueError("separation_threshold must be positive")


@dataclass
class FitResult:
    theta_hat: object
    loglik: float
    converged: bool
    n_evaluations: int
    separation_flags: np.ndarray
    start_index: int
    trace: np.ndarray | None = None
    aic: float | None = None


class InferenceMethod(str, Enum):
    HESSIAN = "hessian"
    BOOTSTRAP = "bootstrap"
    WARP_SPEED = "warp_speed"


@dataclass
class InferenceReport:
    """Standard errors and 95% Wald intervals theta_j +/- 1.96 se_j."""

    se: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    method: InferenceMethod
    n_boot: int
    theta: np.ndarray | None = None
    n_failures: int = 0
    n_separation_flagged: int = 0


def scaled_gradient_maxnorm(params: ModelParams, data: PanelDataset) -> float:
    """Gradient max-norm scaled by max(1, |loglik|), the stationarity measure."""
    ll, grad = loglik_and_gradient(params, data)
    return float(np.max(np.abs(grad)) / max(1.0, abs(ll)))


def _multistart_minimize(objective, p: int, config: FitConfig, init_vec):
    """Run L-BFGS-B from [init or zeros] plus n_starts - 1 box draws.

    objective maps a parameter vector to (negative loglik, negative
    gradient). config.tol is an absolute tolerance on the log-likelihood
    change; scipy's ftol is relative, so it is rescaled per start by the
    starting objective magnitude (with an extra 0.1 safety factor so the
    final accepted step is strictly below tol). Returns (best scipy
    result, winning start index, total function evaluations); raises
    FitFailureError when every start ends on a non-finite value.
    """
    rng = np.random.default_rng(config.seed)
    starts = [np.zeros(p) if init_vec is None else np.asarray(init_vec, dtype=float)]
    for _ in range(config.n_starts - 1):
        starts.append(rng.uniform(-config.init_box, config.init_box, size=p))
    best = None
    best_start = -1
    n_eval = 0
    for k, x0 in enumerate(starts):
        f0, _ = objective(x0)
        scale = max(1.0, abs(f0)) if np.isfinite(f0) else 1.0
        res = minimize(
            objective,
            x0,
            jac=True,
            method="L-BFGS-B",
            options={
                "maxiter": config.max_iter,
                "maxfun": max(15000, 20 * config.max_iter),
                "ftol": 0.1 * config.tol / scale,
                "gtol": 1e-7,
            },
        )
        n_eval += res.nfev + 1
        if np.isfinite(res.fun) and (best is None or -res.fun > -best.fun):
            best = res
            best_start = k
    if best is None:
        raise FitFailureError("no start produced a finite log-likelihood")
    return best, best_start, n_eval


def fit_direct(data: PanelDataset, config: FitConfig, init: ModelParams | None = None) -> FitResult:
    """Maximize the log-likelihood by multi-start quasi-Newton ascent.

    The start list is [init or zeros] plus n_starts - 1 uniform draws from
    the init box; the best final value wins. Coordinates whose estimate
    exceeds separation_threshold in absolute value are flagged.
    """
    d, q = data.d, data.q
    if init is not None:
        _check_dims(init, d, q)
    p = 3 * (d + 1) + 2 * q

    def objective(vec):
        ll, grad = loglik_and_gradient(ModelParams.from_vector(vec, d, q), data)
        return -ll, -grad

    best, best_start, n_eval = _multistart_minimize(
        objective, p, config, None if init is None else init.to_vector()
    )
    theta_vec = best.x
    theta = ModelParams.from_vector(theta_vec, d, q)
    return FitResult(
        theta_hat=theta,
        loglik=float(-best.fun),
        converged=bool(best.status == 0),
        n_evaluations=n_eval,
        separation_flags=np.abs(theta_vec) > config.separation_threshold,
        start_index=best_start,
    )


def e_step(params: ModelParams, subject: Subject):
    """Posterior weights (w, q) of the latent structure for one subject.

    w = E[B | observed data]; q = (Q(0), ..., Q(y), Q(inf)) is the posterior
    mass of the latent 1->2 transition time (last slot: never, while still
    observed). Movers have w = 1 and an all-zero q by convention. For
    censored subjects w is returned as q_inf + sum of the q entries, so
    that identity is exact.
    """
    _check_dims(params, len(subject.x), subject.z.shape[1])
    if subject.delta == 1:
        return 1.0, np.zeros(subject.y + 2)
    packed = _pack_single(subject)
    _, w, q, q_inf = _posterior_stats(params, packed)
    qvec = np.concatenate([q[0, : subject.y + 1], [q_inf[0]]])
    return float(w[0]), qvec


@dataclass
class ExtendedRecords:
    """At-risk interval records for the weighted multinomial update.

    Each row is one candidate transition with covariates (1, x, z_t):
    outcome 1, 2 or 3 codes the destination state. A mover contributes a
    unit-weight 1->1 record per t < y and a unit-weight 1->3 record at y;
    a censored subject contributes, for every t <= y, a 1->1 record with
    weight Q(inf) + sum_{r>t} Q(r) and a 1->2 record with weight Q(t).
    """

    design: np.ndarray
    outcome: np.ndarray
    weight: np.ndarray


def _weights_to_arrays(data: PanelDataset, weights):
    packed = data.packed
    n, T = packed.mask.shape
    if len(weights) != n:
        raise DimensionError(f"expected {n} weight pairs, got {len(weights)}")
    w = np.empty(n)
    q = np.zeros((n, T))
    q_inf = np.zeros(n)
    for i, (wi, qvec) in enumerate(weights):
        y = packed.y[i]
        qvec = np.asarray(qvec, dtype=float)
        if qvec.shape != (y + 2,):
            raise DimensionError(f"subject {i}: q vector must have length y+2 = {y + 2}")
        w[i] = wi
        q[i, : y + 1] = qvec[:-1]
        q_inf[i] = qvec[-1]
    return w, q, q_inf


def build_extended_records(data: PanelDataset, weights) -> ExtendedRecords:
    """The extended-data table the multinomial M-step maximizes over."""
    _, q, q_inf = _weights_to_arrays(data, weights)
    design_rows, outcomes, wts = [], [], []
    for i, s in enumerate(data.subjects):
        xt = np.concatenate([[1.0], s.x])
        for t in range(s.y + 1):
            v = np.concatenate([xt, s.z[t]])
            if s.delta == 1:
                design_rows.append(v)
                outcomes.append(3 if t == s.y else 1)
                wts.append(1.0)
            else:
                design_rows.append(v)
                outcomes.append(1)
                wts.append(q_inf[i] + q[i, t + 1 : s.y + 1].sum())
                design_rows.append(v)
                outcomes.append(2)
                wts.append(q[i, t])
    return ExtendedRecords(
        design=np.array(design_rows),
        outcome=np.array(outcomes, dtype=np.int64),
        weight=np.array(wts),
    )


def _grouped_mstep_weights(packed, q, q_inf):
    """Per-(subject, t) masses on the 1->1 / 1->2 / 1->3 outcomes."""
    n, T = packed.mask.shape
    maskf = packed.mask.astype(float)
    delta = packed.delta.astype(bool)[:, None]
    is_last = np.zeros((n, T))
    is_last[np.arange(n), packed.y] = 1.0
    tail_incl = np.cumsum(q[:, ::-1], axis=1)[:, ::-1]
    w11 = np.where(delta, maskf - is_last, (q_inf[:, None] + tail_incl - q) * maskf)
    w12 = np.where(delta, 0.0, q)
    w13 = np.where(delta, is_last, 0.0)
    return w11, w12, w13


def _fit_weighted_logistic(xmat, w, init, tol=M_STEP_TOL, max_iter=M_STEP_MAX_ITER):
    """Newton ascent for sum_i w_i log pi_i + (1 - w_i) log(1 - pi_i)."""
    a = init.copy()

    def value(vec):
        lp = xmat @ vec
        return float(np.sum(w * log_expit(lp) + (1.0 - w) * log_expit(-lp)))

    f = value(a)
    for it in range(max_iter):
        pi = expit(xmat @ a)
        g = xmat.T @ (w - pi)
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= tol:
            return a
        curv = pi * (1.0 - pi)
        neg_hess = xmat.T @ (xmat * curv[:, None])
        try:
            step = np.linalg.solve(neg_hess, g)
        except np.linalg.LinAlgError as exc:
            raise MStepError(
                f"singular curvature in the logistic update: {exc}",
                iterations=it, grad_norm=gnorm, coef=a,
            ) from exc
        scale = 1.0
        for _ in range(60):
            a_new = a + scale * step
            f_new = value(a_new)
            if np.isfinite(f_new) and f_new >= f - 1e-12:
                break
            scale *= 0.5
        a, f = a_new, f_new
    g = xmat.T @ (w - expit(xmat @ a))
    gnorm = float(np.max(np.abs(g)))
    if gnorm <= tol:
        return a
    raise MStepError(
        "logistic update did not reach the gradient tolerance",
        iterations=max_iter, grad_norm=gnorm, coef=a,
    )


def _fit_weighted_multinomial(packed, w11, w12, w13, init: ModelParams,
                              tol=M_STEP_TOL, max_iter=M_STEP_MAX_ITER):
    """Newton ascent for the weighted multinomial-logit log-likelihood.

    Works on the grouped per-(subject, t) masses, which is algebraically
    identical to iterating over the extended records (gradients and
    Hessians depend on the records only through these masses).
    """
    xmat, z = packed.xmat, packed.z
    k = xmat.shape[1]
    n_t = w11 + w12 + w13

    def split(phi):
        return phi[:k], phi[k : k + z.shape[2]], phi[k + z.shape[2] : 2 * k + z.shape[2]], phi[2 * k + z.shape[2] :]

    def value(phi):
        b12, g12, b13, g13 = split(phi)
        pr = ModelParams(init.alpha, b12, b13, g12, g13)
        eta12, eta13 = _linear_predictors(pr, xmat, z)
        lp11, lp12, lp13 = _log_softmax3(eta12, eta13)
        return float(np.sum(w11 * lp11 + w12 * lp12 + w13 * lp13))

    def vtv(s):
        # sum over (i, t) of s[i, t] * v v' with v = (1, x_i, z_it)
        xx = xmat.T @ (xmat * s.sum(axis=1)[:, None])
        xz = np.einsum("nk,nt,ntq->kq", xmat, s, z)
        zz = np.einsum("nt,ntq,ntr->qr", s, z, z)
        return np.block([[xx, xz], [xz.T, zz]])

    phi = np.concatenate([init.beta12, init.gamma12, init.beta13, init.gamma13])
    f = value(phi)
    for it in range(max_iter):
        b12, g12, b13, g13 = split(phi)
        pr = ModelParams(init.alpha, b12, b13, g12, g13)
        eta12, eta13 = _linear_predictors(pr, xmat, z)
        p11, p12, p13 = _softmax3(eta12, eta13)
        r2 = w12 - n_t * p12
        r3 = w13 - n_t * p13
        g = np.concatenate([
            xmat.T @ r2.sum(axis=1),
            np.einsum("nt,ntq->q", r2, z),
            xmat.T @ r3.sum(axis=1),
            np.einsum("nt,ntq->q", r3, z),
        ])
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= tol:
            return split(phi)
        a22 = vtv(n_t * p12 * (1.0 - p12))
        a33 = vtv(n_t * p13 * (1.0 - p13))
        a23 = vtv(n_t * p12 * p13)
        neg_hess = np.block([[a22, -a23], [-a23, a33]])
        try:
            step = np.linalg.solve(neg_hess, g)
        except np.linalg.LinAlgError as exc:
            raise MStepError(
                f"singular curvature in the multinomial update: {exc}",
                iterations=it, grad_norm=gnorm, coef=phi,
            ) from exc
        scale = 1.0
        for _ in range(60):
            phi_new = phi + scale * step
            f_new = value(phi_new)
            if np.isfinite(f_new) and f_new >= f - 1e-12:
                break
            scale *= 0.5
        phi, f = phi_new, f_new
    raise MStepError(
        "multinomial update did not reach the gradient tolerance",
        iterations=max_iter, grad_norm=gnorm, coef=phi,
    )


def _m_step_arrays(data: PanelDataset, w, q, q_inf, init: ModelParams) -> ModelParams:
    packed = data.packed
    alpha = _fit_weighted_logistic(packed.xmat, w, np.asarray(init.alpha, dtype=float))
    w11, w12, w13 = _grouped_mstep_weights(packed, q, q_inf)
    b12, g12, b13, g13 = _fit_weighted_multinomial(packed, w11, w12, w13, init)
    return ModelParams(alpha=alpha, beta12=b12, beta13=b13, gamma12=g12, gamma13=g13)


def m_step(data: PanelDataset, weights, init: ModelParams | None = None) -> ModelParams:
    """One M-step: exact weighted logistic and multinomial-logit updates.

    weights is the list of per-subject e_step outputs aligned with
    data.subjects. Both inner solvers run to gradient max-norm 1e-8 and
    raise MStepError with their iteration state when they cannot.
    """
    if init is None:
        init = ModelParams(
            alpha=np.zeros(data.d + 1),
            beta12=np.zeros(data.d + 1),
            beta13=np.zeros(data.d + 1),
            gamma12=np.zeros(data.q),
            gamma13=np.zeros(data.q),
        )
    w, q, q_inf = _weights_to_arrays(data, weights)
    return _m_step_arrays(data, w, q, q_inf, init)


def expected_complete_loglik(params: ModelParams, data: PanelDataset, weights) -> float:
    """The EM objective: posterior-weighted complete-data log-likelihood."""
    _check_dims(params, data.d, data.q)
    packed = data.packed
    w, q, q_inf = _weights_to_arrays(data, weights)
    lp = packed.xmat @ params.alpha
    bernoulli = float(np.sum(w * log_expit(lp) + (1.0 - w) * log_expit(-lp)))
    eta12, eta13 = _linear_predictors(params, packed.xmat, packed.z)
    lp11, lp12, lp13 = _log_softmax3(eta12, eta13)
    w11, w12, w13 = _grouped_mstep_weights(packed, q, q_inf)
    return bernoulli + float(np.sum(w11 * lp11 + w12 * lp12 + w13 * lp13))


def fit_em(data: PanelDataset, config: FitConfig, init: ModelParams | None = None) -> FitResult:
    """EM ascent of the observed-data log-likelihood.

    Stops when the log-likelihood change drops below config.tol or after
    config.max_iter iterations; the full log-likelihood trace is recorded
    on the result. With exact inner M-step solves the trace is
    nondecreasing up to roundoff.
    """
    d, q_dim = data.d, data.q
    params = init if init is not None else ModelParams(
        alpha=np.zeros(d + 1),
        beta12=np.zeros(d + 1),
        beta13=np.zeros(d + 1),
        gamma12=np.zeros(q_dim),
        gamma13=np.zeros(q_dim),
    )
    _check_dims(params, d, q_dim)
    packed = data.packed

    loglik_vec, w, q, q_inf = _posterior_stats(params, packed)
    ll = math.fsum(loglik_vec)
    trace = [ll]
    converged = False
    for _ in range(config.max_iter):
        params = _m_step_arrays(data, w, q, q_inf, init=params)
        loglik_vec, w, q, q_inf = _posterior_stats(params, packed)
        ll_new = math.fsum(loglik_vec)
        trace.append(ll_new)
        if abs(ll_new - ll) < config.tol:
            ll = ll_new
            converged = True
            break
        ll = ll_new
    theta_vec = params.to_vector()
    return FitResult(
        theta_hat=params,
        loglik=ll,
        converged=converged,
        n_evaluations=len(trace),
        separation_flags=np.abs(theta_vec) > config.separation_threshold,
        start_index=0,
        trace=np.asarray(trace),
    )


def _central_difference_hessian(func, x0, rel_step=1e-4):
    """Symmetric finite-difference Hessian with per-coordinate relative steps."""
    x0 = np.asarray(x0, dtype=float)
    p = len(x0)
    h = rel_step * np.maximum(1.0, np.abs(x0))
    hess = np.empty((p, p))
    f0 = func(x0)
    for j in range(p):
        e = np.zeros(p)
        e[j] = h[j]
        hess[j, j] = (func(x0 + e) - 2.0 * f0 + func(x0 - e)) / h[j] ** 2
    for i in range(p):
        ei = np.zeros(p)
        ei[i] = h[i]
        for j in range(i + 1, p):
            ej = np.zeros(p)
            ej[j] = h[j]
            val = (
                func(x0 + ei + ej)
                - func(x0 + ei - ej)
                - func(x0 - ei + ej)
                + func(x0 - ei - ej)
            ) / (4.0 * h[i] * h[j])
            hess[i, j] = val
            hess[j, i] = val
    return hess


def hessian_se(theta: ModelParams, data: PanelDataset, _loglik_fn=None) -> InferenceReport:
    """Wald standard errors from the negated finite-difference Hessian.

    Steps are 1e-4 * max(1, |theta_j|). A non-positive-definite negated
    Hessian raises HessianError naming the offending eigenvalue.
    _loglik_fn replaces the model log-likelihood (tests only).
    """
    _check_dims(theta, data.d, data.q)
    x0 = theta.to_vector()

    if _loglik_fn is None:
        def func(vec):
            return total_log_likelihood(ModelParams.from_vector(vec, data.d, data.q), data)
    else:
        func = _loglik_fn

    info = -_central_difference_hessian(func, x0)
    eigvals = np.linalg.eigvalsh(info)
    if eigvals[0] <= 0:
        raise HessianError(
            f"negated Hessian is not positive definite: smallest eigenvalue {eigvals[0]:.6g}",
            eigenvalue=float(eigvals[0]),
        )
    se = np.sqrt(np.diag(np.linalg.inv(info)))
    return InferenceReport(
        se=se,
        ci_lower=x0 - WALD_MULTIPLIER * se,
        ci_upper=x0 + WALD_MULTIPLIER * se,
        method=InferenceMethod.HESSIAN,
        n_boot=0,
        theta=x0,
    )


def _resample_indices(rng, n):
    return rng.integers(0, n, size=n)


def bootstrap_se(data: PanelDataset, theta_hat: ModelParams, n_boot: int, seed: int,
                 config: FitConfig | None = None) -> InferenceReport:
    """Subject-level nonparametric bootstrap standard errors.

    Each replicate owns the RNG substream (seed, replicate-index), resamples
    subjects with replacement, and refits with a single start at theta_hat.
    Separation-flagged replicates are counted but kept; refit failures are
    dropped, and more than 50% of them aborts with an error. Results are
    reduced in replicate order, so equal seeds give bit-identical reports.
    """
    if n_boot < 2:
        raise ValueError("n_boot must be >= 2")
    _check_dims(theta_hat, data.d, data.q)
    base = config if config is not None else FitConfig(n_starts=1, seed=0)
    refit_config = replace(base, n_starts=1)
    n = len(data)
    estimates = []
    n_failures = 0
    n_flagged = 0
    for b in range(n_boot):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        sample = data.take(_resample_indices(rng, n))
        try:
            fit = fit_direct(sample, refit_config, init=theta_hat)
        except FitFailureError:
            n_failures += 1
            continue
        if fit.separation_flags.any():
            n_flagged += 1
        estimates.append(fit.theta_hat.to_vector())
    if n_failures > n_boot / 2:
        raise FitFailureError(f"{n_failures} of {n_boot} bootstrap refits failed")
    est = np.asarray(estimates)
    se = est.std(axis=0, ddof=1)
    x0 = theta_hat.to_vector()
    return InferenceReport(
        se=se,
        ci_lower=x0 - WALD_MULTIPLIER * se,
        ci_upper=x0 + WALD_MULTIPLIER * se,
        method=InferenceMethod.BOOTSTRAP,
        n_boot=n_boot,
        theta=x0,
        n_failures=n_failures,
        n_separation_flagged=n_flagged,
    )


@dataclass
class CoverageTable:
    """Per-coordinate Wald coverage of the truth, in two variants.

    The warp-speed columns pool one bootstrap deviation per replication
    into a per-coordinate SD and apply it to every replication's estimate;
    the Hessian columns use each replication's own inverse-curvature SEs.
    """

    names: list
    truth: np.ndarray
    warp_sd: np.ndarray
    warp_coverage: np.ndarray
    warp_ci_length: np.ndarray
    hessian_sd: np.ndarray | None
    hessian_coverage: np.ndarray | None
    hessian_ci_length: np.ndarray | None
    n_reps: int
    n_fit_failures: int
    n_hessian_failures: int


def warp_speed_coverage(setting, n_reps: int, seed: int, include_hessian: bool = True,
                        fit_config: FitConfig | None = None, _fit_fn=None) -> CoverageTable:
    """Coverage study with one bootstrap resample per replication.

    Per replication: simulate from the setting, fit starting at the truth,
    fit one subject-level resample starting at the estimate, and record the
    deviation (resample estimate - estimate). Pooled deviation SDs give the
    warp-speed Wald intervals; optionally each replication's Hessian report
    is scored alongside. Failed fits are counted and excluded.
    """
    from .simulate import simulate_dataset

    if n_reps < 100:
        raise ValueError("n_reps must be >= 100")
    truth = setting.true_params
    tvec = truth.to_vector()
    cfg = fit_config if fit_config is not None else FitConfig(n_starts=1, max_iter=500, seed=0)
    fitter = _fit_fn if _fit_fn is not None else fit_direct

    theta_rows, dev_rows = [], []
    hess_se_rows, hess_cover_rows = [], []
    n_fit_failures = 0
    n_hessian_failures = 0
    for r in range(n_reps):
        rep_seq = np.random.SeedSequence(seed, spawn_key=(r,))
        sim_child, boot_child = rep_seq.spawn(2)
        sim_seed = int(sim_child.generate_state(1, np.uint64)[0])
        data, _ = simulate_dataset(replace(setting, seed=sim_seed))
        try:
            fit = fitter(data, cfg, init=truth)
            theta_r = fit.theta_hat.to_vector()
            boot_rng = np.random.default_rng(boot_child)
            sample = data.take(_resample_indices(boot_rng, len(data)))
            refit = fitter(sample, cfg, init=fit.theta_hat)
        except FitFailureError:
            n_fit_failures += 1
            continue
        theta_rows.append(theta_r)
        dev_rows.append(refit.theta_hat.to_vector() - theta_r)
        if include_hessian:
            try:
                report = hessian_se(fit.theta_hat, data)
                hess_se_rows.append(report.se)
                hess_cover_rows.append(
                    (report.ci_lower <= tvec) & (tvec <= report.ci_upper)
                )
            except HessianError:
                n_hessian_failures += 1

    thetas = np.asarray(theta_rows)
    devs = np.asarray(dev_rows)
    warp_sd = devs.std(axis=0, ddof=1)
    half = WALD_MULTIPLIER * warp_sd
    warp_cov = np.mean(np.abs(thetas - tvec) <= half, axis=0)
    names = ModelParams.coordinate_names(truth.d, truth.q)
    if include_hessian and hess_se_rows:
        hess_se = np.asarray(hess_se_rows)
        hess_cover = np.asarray(hess_cover_rows)
        hessian_sd = hess_se.mean(axis=0)
        hessian_cov = hess_cover.mean(axis=0)
        hessian_len = 2.0 * WALD_MULTIPLIER * hessian_sd
    else:
        hessian_sd = hessian_cov = hessian_len = None
    return CoverageTable(
        names=names,
        truth=tvec,
        warp_sd=warp_sd,
        warp_coverage=warp_cov,
        warp_ci_length=2.0 * half,
        hessian_sd=hessian_sd,
        hessian_coverage=hessian_cov,
        hessian_ci_length=hessian_len,
        n_reps=len(theta_rows),
        n_fit_failures=n_fit_failures,
        n_hessian_failures=n_hessian_failures,
    )
