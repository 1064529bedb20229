"""Probability-accuracy metrics and the Monte Carlo replication harness."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .compare import (
    append_time_powers,
    fit_no_stayer,
    fit_static,
    no_stayer_prob_curves,
    static_prob_curves,
)
from .errors import DimensionError, FitFailureError
from .estimate import FitConfig, fit_direct
from .model import ModelParams, cumulative_prob_curves
from .simulate import SimulationConfig, occupancy_table, simulate_dataset

MODEL_NAMES = ("dynamic", "static", "no_stayer")


class State(Enum):
    STAYER = 2
    MOVER = 3


@dataclass
class ProbCurves:
    """Per-subject cumulative stayer/mover probabilities, (n, horizon+1) each."""

    stayer: np.ndarray
    mover: np.ndarray

    def __post_init__(self):
        self.stayer = np.asarray(self.stayer, dtype=float)
        self.mover = np.asarray(self.mover, dtype=float)
        if self.stayer.shape != self.mover.shape:
            raise DimensionError("stayer and mover curves must have equal shape")


def mad(model_probs: ProbCurves, truth_probs: ProbCurves, state: State, t: int) -> float:
    """Mean absolute deviation of cumulative state-t probabilities.

    Averages |P_truth - P_model| over subjects at time t for the chosen
    state (the mover column is 0 at t = 0 for both curves, so MAD there
    is always 0).
    """
    if model_probs.stayer.shape != truth_probs.stayer.shape:
        raise DimensionError("model and truth curves must cover the same subjects and times")
    if not 0 <= t < model_probs.stayer.shape[1]:
        raise DimensionError(f"t={t} outside the curve horizon {model_probs.stayer.shape[1] - 1}")
    if state is State.STAYER:
        a, b = model_probs.stayer, truth_probs.stayer
    else:
        a, b = model_probs.mover, truth_probs.mover
    return float(np.mean(np.abs(a[:, t] - b[:, t])))


def _mad_curve(model_probs: ProbCurves, truth_probs: ProbCurves, state: State) -> np.ndarray:
    cols = model_probs.stayer.shape[1]
    return np.array([mad(model_probs, truth_probs, state, t) for t in range(cols)])


@dataclass
class StudyReport:
    """Aggregated output of a replication study.

    estimates[m] holds one parameter vector per successful replication of
    model m; mad_curves[(m, state)] the matching per-replication MAD
    rows. extreme_fraction is the share of successful dynamic
    replications with any coefficient magnitude above the threshold.
    occupancy comes from the first replication. timing_seconds is wall
    time and is never serialized.
    """

    setting_n: int
    k_max: int
    n_reps: int
    seed: int
    models: list
    truth: np.ndarray
    coordinate_names: list
    estimates: dict
    mad_curves: dict
    failures: dict
    extreme_fraction: float | None
    extreme_threshold: float
    occupancy: object
    timing_seconds: float


def run_replication_study(setting: SimulationConfig, n_reps: int, models, seed: int,
                          dynamic_config: FitConfig | None = None,
                          comparator_config: FitConfig | None = None,
                          intercept_degree: int = 0,
                          extreme_threshold: float = 6.0) -> StudyReport:
    """Simulate, fit and score each requested model n_reps times.

    The dynamic model starts each fit at the true parameters with a
    single start; comparators run multi-start. MAD curves are evaluated
    on every subject's full simulated covariate history out to k_max.
    Fit failures are counted per model and their replications skipped for
    that model only.
    """
    if n_reps < 2:
        raise ValueError("n_reps must be >= 2")
    models = list(models)
    for m in models:
        if m not in MODEL_NAMES:
            raise ValueError(f"unknown model {m!r}; expected subset of {MODEL_NAMES}")
    models = [m for m in MODEL_NAMES if m in models]
    dyn_cfg = dynamic_config if dynamic_config is not None else FitConfig(n_starts=1, max_iter=500)
    cmp_cfg = comparator_config if comparator_config is not None else FitConfig(n_starts=3, max_iter=500)
    truth = setting.true_params
    horizon = setting.k_max

    estimates = {m: [] for m in models}
    mad_acc = {}
    for m in models:
        mad_acc[(m, State.MOVER)] = []
        if m != "no_stayer":
            mad_acc[(m, State.STAYER)] = []
    failures = dict.fromkeys(models, 0)
    first_occupancy = None
    t_start = time.perf_counter()

    for r in range(n_reps):
        rep_seq = np.random.SeedSequence(seed, spawn_key=(r,))
        sim_seed = int(rep_seq.generate_state(1, np.uint64)[0])
        data, trajectories = simulate_dataset(replace(setting, seed=sim_seed))
        if first_occupancy is None:
            first_occupancy = occupancy_table(trajectories, data)
        x_matrix = data.packed.xmat[:, 1:]
        z_full = np.stack([tr.z_full for tr in trajectories])
        truth_curves = ProbCurves(*cumulative_prob_curves(truth, x_matrix, z_full, horizon))

        if "dynamic" in models:
            try:
                fit = fit_direct(data, dyn_cfg, init=truth)
                estimates["dynamic"].append(fit.theta_hat.to_vector())
                curves = ProbCurves(
                    *cumulative_prob_curves(fit.theta_hat, x_matrix, z_full, horizon)
                )
                mad_acc[("dynamic", State.STAYER)].append(_mad_curve(curves, truth_curves, State.STAYER))
                mad_acc[("dynamic", State.MOVER)].append(_mad_curve(curves, truth_curves, State.MOVER))
            except FitFailureError:
                failures["dynamic"] += 1

        z_aug = append_time_powers(z_full, intercept_degree) if intercept_degree else z_full
        if "static" in models:
            try:
                fit = fit_static(data, intercept_degree, cmp_cfg)
                estimates["static"].append(fit.theta_hat.to_vector())
                curves = ProbCurves(
                    *static_prob_curves(fit.theta_hat, x_matrix, z_aug, horizon)
                )
                mad_acc[("static", State.STAYER)].append(_mad_curve(curves, truth_curves, State.STAYER))
                mad_acc[("static", State.MOVER)].append(_mad_curve(curves, truth_curves, State.MOVER))
            except FitFailureError:
                failures["static"] += 1
        if "no_stayer" in models:
            try:
                fit = fit_no_stayer(data, intercept_degree, cmp_cfg)
                estimates["no_stayer"].append(fit.theta_hat.to_vector())
                curves = ProbCurves(
                    *no_stayer_prob_curves(fit.theta_hat, x_matrix, z_aug, horizon)
                )
                mad_acc[("no_stayer", State.MOVER)].append(_mad_curve(curves, truth_curves, State.MOVER))
            except FitFailureError:
                failures["no_stayer"] += 1

    est_arrays = {m: np.asarray(v) for m, v in estimates.items()}
    mad_arrays = {key: np.asarray(v) for key, v in mad_acc.items()}
    extreme = None
    if "dynamic" in models and len(est_arrays["dynamic"]):
        extreme = float(np.mean(np.any(np.abs(est_arrays["dynamic"]) > extreme_threshold, axis=1)))
    return StudyReport(
        setting_n=setting.n,
        k_max=setting.k_max,
        n_reps=n_reps,
        seed=seed,
        models=models,
        truth=truth.to_vector(),
        coordinate_names=ModelParams.coordinate_names(truth.d, truth.q),
        estimates=est_arrays,
        mad_curves=mad_arrays,
        failures=failures,
        extreme_fraction=extreme,
        extreme_threshold=extreme_threshold,
        occupancy=first_occupancy,
        timing_seconds=time.perf_counter() - t_start,
    )
