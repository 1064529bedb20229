"""Model parameters, panel-data containers, and probability primitives.

The process has three states: 1 = at risk of the event, 2 = not at risk
(absorbing, entered either at baseline or through a latent 1->2 transition),
3 = event occurred (absorbing, observed). A subject starts at risk with
probability pi(alpha; x) and, while at risk, moves according to a
three-category multinomial logit with baseline category 1->1.

Parameter vectors are flattened in the fixed order
(alpha, beta12, beta13, gamma12, gamma13); every optimizer, Hessian and
serialization routine in the package uses this order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DimensionError, EmptyDatasetError, HistoryError


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class ModelParams:
    """Regression coefficients of the dynamic model.

    alpha, beta12, beta13 have length d+1 with the intercept first;
    gamma12, gamma13 have length q (time-varying covariates carry no
    separate intercept slot).
    """

    alpha: np.ndarray
    beta12: np.ndarray
    beta13: np.ndarray
    gamma12: np.ndarray
    gamma13: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta12", "beta13", "gamma12", "gamma13"):
            object.__setattr__(self, name, _as_vector(getattr(self, name), name))
        if not (len(self.alpha) == len(self.beta12) == len(self.beta13)):
            raise DimensionError("alpha, beta12, beta13 must share length d+1")
        if len(self.alpha) < 1:
            raise DimensionError("alpha must contain at least the intercept")
        if len(self.gamma12) != len(self.gamma13):
            raise DimensionError("gamma12 and gamma13 must share length q")

    @property
    def d(self) -> int:
        return len(self.alpha) - 1

    @property
    def q(self) -> int:
        return len(self.gamma12)

    @property
    def n_params(self) -> int:
        return 3 * (self.d + 1) + 2 * self.q

    def to_vector(self) -> np.ndarray:
        """Flatten to (alpha, beta12, beta13, gamma12, gamma13)."""
        return np.concatenate(
            [self.alpha, self.beta12, self.beta13, self.gamma12, self.gamma13]
        )

    @classmethod
    def from_vector(cls, vec, d: int, q: int) -> "ModelParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (3 * (d + 1) + 2 * q,):
            raise DimensionError(
                f"expected flat vector of length {3 * (d + 1) + 2 * q}, got {vec.shape}"
            )
        k = d + 1
        return cls(
            alpha=vec[:k],
            beta12=vec[k : 2 * k],
            beta13=vec[2 * k : 3 * k],
            gamma12=vec[3 * k : 3 * k + q],
            gamma13=vec[3 * k + q :],
        )

    @staticmethod
    def coordinate_names(d: int, q: int) -> list[str]:
        """Names of the flattened coordinates, 0-based ([0] = intercept)."""
        names = []
        for block in ("alpha", "beta12", "beta13"):
            names += [f"{block}[{j}]" for j in range(d + 1)]
        for block in ("gamma12", "gamma13"):
            names += [f"{block}[{j}]" for j in range(q)]
        return names


@dataclass
class Subject:
    """One observed record.

    y is the last observation time; delta = 1 when the event (1->3) was
    observed at y, 0 when censored. x holds the d time-fixed covariates
    (no intercept; it is prepended at evaluation). z has one row per
    observed time t = 0..y, each of length q.
    """

    y: int
    delta: int
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        if int(self.y) != self.y or self.y < 0:
            raise DimensionError(f"y must be a nonnegative integer, got {self.y}")
        self.y = int(self.y)
        if self.delta not in (0, 1):
            raise DimensionError(f"delta must be 0 or 1, got {self.delta}")
        self.delta = int(self.delta)
        self.x = _as_vector(self.x, "x")
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 2:
            raise DimensionError(f"z must be 2-d, got shape {z.shape}")
        if z.shape[0] != self.y + 1:
            raise DimensionError(
                f"z must have y+1 = {self.y + 1} rows, got {z.shape[0]}"
            )
        if not np.all(np.isfinite(z)):
            raise DimensionError("z must be finite")
        self.z = z


@dataclass
class _PackedPanel:
    """Dense padded arrays for vectorized likelihood work.

    Rows are subjects; the time axis is padded to max_time columns and
    mask[i, t] is True exactly when t <= y_i.
    """

    y: np.ndarray        # (n,) int
    delta: np.ndarray    # (n,) int
    xmat: np.ndarray     # (n, d+1), intercept column first
    z: np.ndarray        # (n, max_time, q), zero-padded
    mask: np.ndarray     # (n, max_time) bool

    @property
    def n(self) -> int:
        return len(self.y)


class PanelDataset:
    """Ordered collection of subjects with common covariate dimensions."""

    def __init__(self, subjects, ids=None):
        subjects = list(subjects)
        if not subjects:
            raise EmptyDatasetError("dataset must contain at least one subject")
        d = len(subjects[0].x)
        q = subjects[0].z.shape[1]
        for i, s in enumerate(subjects):
            if len(s.x) != d:
                raise DimensionError(f"subject {i}: x has length {len(s.x)}, expected {d}")
            if s.z.shape[1] != q:
                raise DimensionError(f"subject {i}: z rows have length {s.z.shape[1]}, expected {q}")
        self.subjects = subjects
        self.d = d
        self.q = q
        self.max_time = max(s.y for s in subjects) + 1
        if ids is None:
            ids = list(range(len(subjects)))
        elif len(ids) != len(subjects):
            raise DimensionError("ids must align with subjects")
        self.ids = list(ids)
        self._packed = None

    def __len__(self) -> int:
        return len(self.subjects)

    @property
    def packed(self) -> _PackedPanel:
        if self._packed is None:
            n, T, q = len(self.subjects), self.max_time, self.q
            y = np.fromiter((s.y for s in self.subjects), dtype=np.int64, count=n)
            delta = np.fromiter((s.delta for s in self.subjects), dtype=np.int64, count=n)
            xmat = np.ones((n, self.d + 1))
            z = np.zeros((n, T, q))
            for i, s in enumerate(self.subjects):
                xmat[i, 1:] = s.x
                z[i, : s.y + 1] = s.z
            mask = np.arange(T)[None, :] <= y[:, None]
            self._packed = _PackedPanel(y=y, delta=delta, xmat=xmat, z=z, mask=mask)
        return self._packed

    def take(self, indices) -> "PanelDataset":
        """Row-resampled dataset sharing subject objects (bootstrap helper)."""
        indices = np.asarray(indices, dtype=np.int64)
        out = PanelDataset.__new__(PanelDataset)
        out.subjects = [self.subjects[i] for i in indices]
        out.d, out.q = self.d, self.q
        out.max_time = max(s.y for s in out.subjects) + 1
        out.ids = [self.ids[i] for i in indices]
        p = self.packed
        T = out.max_time
        out._packed = _PackedPanel(
            y=p.y[indices],
            delta=p.delta[indices],
            xmat=p.xmat[indices],
            z=p.z[indices, :T],
            mask=p.mask[indices, :T],
        )
        return out


@dataclass(frozen=True)
class TransitionProbs:
    """One-step transition probabilities out of the at-risk state."""

    p11: float
    p12: float
    p13: float


def initial_risk_prob(alpha, x) -> float:
    """Probability pi = expit(alpha' (1, x)) of starting at risk.

    Evaluated through expit, which is overflow-safe for linear predictors
    of magnitude well beyond 700.
    """
    alpha = _as_vector(alpha, "alpha")
    x = _as_vector(x, "x")
    if len(alpha) != len(x) + 1:
        raise DimensionError(
            f"alpha has length {len(alpha)}, expected {len(x) + 1} for x of length {len(x)}"
        )
    lp = alpha[0] + float(np.dot(alpha[1:], x))
    return float(expit(lp))


def _softmax3(eta12, eta13):
    """Probabilities (p11, p12, p13) from logits relative to baseline 1->1.

    Max-subtracted so large logits cannot overflow; the three returned
    arrays share the same denominator and therefore sum to 1 up to
    rounding cancellation only.
    """
    eta12 = np.asarray(eta12, dtype=float)
    eta13 = np.asarray(eta13, dtype=float)
    m = np.maximum(0.0, np.maximum(eta12, eta13))
    e1 = np.exp(-m)
    e2 = np.exp(eta12 - m)
    e3 = np.exp(eta13 - m)
    s = e1 + e2 + e3
    return e1 / s, e2 / s, e3 / s


def transition_probs(params: ModelParams, x, z_t) -> TransitionProbs:
    """One-step transition probabilities at covariates (x, z_t).

    Logits are eta_1j = beta_1j' (1, x) + gamma_1j' z_t for j = 2, 3 with
    1->1 as the baseline category.
    """
    x = _as_vector(x, "x")
    z_t = _as_vector(z_t, "z_t")
    if len(x) != params.d:
        raise DimensionError(f"x has length {len(x)}, expected {params.d}")
    if len(z_t) != params.q:
        raise DimensionError(f"z_t has length {len(z_t)}, expected {params.q}")
    xt = np.concatenate([[1.0], x])
    eta12 = float(np.dot(params.beta12, xt) + np.dot(params.gamma12, z_t))
    eta13 = float(np.dot(params.beta13, xt) + np.dot(params.gamma13, z_t))
    p11, p12, p13 = _softmax3(eta12, eta13)
    return TransitionProbs(p11=float(p11), p12=float(p12), p13=float(p13))


def _linear_predictors(params: ModelParams, xmat: np.ndarray, z: np.ndarray):
    """Logits eta12, eta13 of shape (n, T) from packed covariate arrays."""
    eta12 = z @ params.gamma12 + (xmat @ params.beta12)[:, None]
    eta13 = z @ params.gamma13 + (xmat @ params.beta13)[:, None]
    return eta12, eta13


def cumulative_state_probs(params: ModelParams, x, zbar, t: int):
    """Cumulative probabilities (P2(t), P3(t)) of being a stayer / a mover.

    P2(t) = (1-pi) + pi * sum_{s<t} prod_{u<s} P11(u) * P12(s) and
    P3(t) = pi * sum_{s<t} prod_{u<s} P11(u) * P13(s); empty products are 1,
    so P2(0) = 1-pi and P3(0) = 0. zbar must supply covariate rows 0..t-1.
    """
    if t < 0 or int(t) != t:
        raise DimensionError(f"t must be a nonnegative integer, got {t}")
    t = int(t)
    x = _as_vector(x, "x")
    zbar = np.asarray(zbar, dtype=float)
    if zbar.ndim != 2 or zbar.shape[1] != params.q:
        raise DimensionError(f"zbar must have q = {params.q} columns")
    if zbar.shape[0] < t:
        raise HistoryError(
            f"cumulative probabilities at t = {t} need {t} covariate rows, got {zbar.shape[0]}"
        )
    pi = initial_risk_prob(params.alpha, x)
    p2 = 1.0 - pi
    p3 = 0.0
    surv = 1.0
    for s in range(t):
        probs = transition_probs(params, x, zbar[s])
        p2 += pi * surv * probs.p12
        p3 += pi * surv * probs.p13
        surv *= probs.p11
    return p2, p3


def cumulative_prob_curves(params: ModelParams, x_matrix, z_array, horizon: int):
    """Vectorized stayer/mover cumulative probabilities for many subjects.

    x_matrix is (n, d) raw covariates, z_array is (n, T, q) with T >= horizon.
    Returns (p_stayer, p_mover), each (n, horizon+1), column t being the
    probability of occupying state 2 resp. 3 at time t.
    """
    x_matrix = np.asarray(x_matrix, dtype=float)
    z_array = np.asarray(z_array, dtype=float)
    n = x_matrix.shape[0]
    if z_array.shape[0] != n or z_array.shape[2] != params.q:
        raise DimensionError("z_array must be (n, T, q) aligned with x_matrix")
    if z_array.shape[1] < horizon:
        raise HistoryError(
            f"horizon {horizon} needs {horizon} covariate rows, got {z_array.shape[1]}"
        )
    xmat = np.column_stack([np.ones(n), x_matrix])
    pi = expit(xmat @ params.alpha)
    p_stayer = np.empty((n, horizon + 1))
    p_mover = np.empty((n, horizon + 1))
    p_stayer[:, 0] = 1.0 - pi
    p_mover[:, 0] = 0.0
    if horizon:
        eta12, eta13 = _linear_predictors(params, xmat, z_array[:, :horizon])
        p11, p12, p13 = _softmax3(eta12, eta13)
        surv = np.ones(n)
        for s in range(horizon):
            p_stayer[:, s + 1] = p_stayer[:, s] + pi * surv * p12[:, s]
            p_mover[:, s + 1] = p_mover[:, s] + pi * surv * p13[:, s]
            surv = surv * p11[:, s]
    return p_stayer, p_mover
