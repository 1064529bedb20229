"""Command-line interface, CSV/JSON ingestion and serialization.

Panel files use a long format, one row per subject-time:
    id, t, y, delta, x_1..x_d, z_1..z_q
with y, delta and the x columns repeated (and validated constant) within
a subject, and times covering 0..y contiguously. Output files start with
a '#' meta line that embeds the resolved configuration and the package
version; floats are serialized with repr so rewriting a parsed file is
byte-identical.

Exit codes: 0 success, 1 usage, 2 data validation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .compare import (
    NoStayerParams,
    StaticParams,
    append_time_powers,
    fit_no_stayer,
    fit_static,
    no_stayer_prob_curves,
    static_cumulative_probs,
)
from .errors import (
    DataValidationError,
    DimensionError,
    EmptyDatasetError,
    FitFailureError,
    HessianError,
    HistoryError,
    UsageError,
)
from .estimate import FitConfig, bootstrap_se, fit_direct
from .metrics import State, run_replication_study
from .model import (
    ModelParams,
    PanelDataset,
    Subject,
    cumulative_state_probs,
)
from .simulate import (
    Bernoulli,
    IntegerWalk,
    NormalWalk,
    SimulationConfig,
    StandardNormal,
    builtin_setting,
    occupancy_table,
    simulate_dataset,
)

VERSION = "0.1.0"

_MODEL_CHOICES = ("dynamic", "static", "nostayer")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "" if math.isnan(v) else repr(v)
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def _meta_line(meta: dict) -> str:
    body = json.dumps(meta, sort_keys=True, separators=(",", ":"))
    return f"# {body}"


def _write_table(path, meta, header, rows):
    lines = []
    if meta is not None:
        lines.append(_meta_line(meta))
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_panel_csv(data: PanelDataset, path, meta: dict | None = None):
    """Serialize a dataset in the long panel format (repr floats)."""
    header = (
        ["id", "t", "y", "delta"]
        + [f"x_{j + 1}" for j in range(data.d)]
        + [f"z_{j + 1}" for j in range(data.q)]
    )
    rows = []
    for sid, s in zip(data.ids, data.subjects):
        for t in range(s.y + 1):
            rows.append(
                [sid, t, s.y, s.delta] + [float(v) for v in s.x] + [float(v) for v in s.z[t]]
            )
    _write_table(path, meta, header, rows)


def write_latent_csv(trajectories, ids, path, meta: dict | None = None):
    """One row per subject: initial status, latent move-to-stayer time, final state."""
    header = ["id", "b0", "r", "final_state"]
    rows = [
        [sid, tr.b0, float(tr.r), int(tr.states[-1])]
        for sid, tr in zip(ids, trajectories)
    ]
    _write_table(path, meta, header, rows)


def write_occupancy_csv(table, path, meta: dict | None = None):
    header = ["t", "state1_pct", "state2_pct", "state3_pct", "obs_mover_pct", "censored_pct"]
    rows = [
        [
            int(table.time[i]),
            float(table.state1_pct[i]),
            float(table.state2_pct[i]),
            float(table.state3_pct[i]),
            float(table.obs_mover_pct[i]),
            float(table.censored_pct[i]),
        ]
        for i in range(len(table.time))
    ]
    _write_table(path, meta, header, rows)


def _parse_id(token: str):
    try:
        return int(token)
    except ValueError:
        return token


def ingest_panel_csv(path) -> PanelDataset:
    """Read a long-format panel file into a PanelDataset.

    Validates the schema row by row: ragged rows, non-binary delta,
    inconsistent per-subject constants, duplicate or missing times each
    raise DataValidationError carrying the offending line number.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            physical = [(lineno, row) for lineno, row in enumerate(csv.reader(fh), start=1)]
    except OSError as exc:
        raise DataValidationError(f"cannot read panel data: {exc}") from exc
    rows = [(lineno, row) for lineno, row in physical if row and not row[0].lstrip().startswith("#")]
    if not rows:
        raise EmptyDatasetError("no rows found")
    header_line, header = rows[0]
    required = ["id", "t", "y", "delta"]
    if header[: len(required)] != required:
        raise DataValidationError(
            f"header must start with {','.join(required)}", row=header_line
        )
    x_cols = [c for c in header[4:] if c.startswith("x_")]
    z_cols = [c for c in header[4:] if c.startswith("z_")]
    if header[4:] != x_cols + z_cols:
        raise DataValidationError(
            "covariate columns must be x_1..x_d then z_1..z_q", row=header_line
        )
    d, q = len(x_cols), len(z_cols)
    width = 4 + d + q

    order = []
    by_id = {}
    for lineno, row in rows[1:]:
        if len(row) != width:
            raise DataValidationError(
                f"expected {width} columns, got {len(row)}", row=lineno
            )
        sid = _parse_id(row[0])
        try:
            t = int(row[1])
            y = int(row[2])
            delta = int(row[3])
            xs = [float(v) for v in row[4 : 4 + d]]
            zs = [float(v) for v in row[4 + d :]]
        except ValueError as exc:
            raise DataValidationError(f"unparseable value: {exc}", row=lineno) from exc
        if delta not in (0, 1):
            raise DataValidationError(
                f"delta must be 0 or 1, got {delta}", row=lineno, subject_id=sid
            )
        if sid not in by_id:
            order.append(sid)
            by_id[sid] = {"y": y, "delta": delta, "x": xs, "rows": {}, "last_line": lineno}
        rec = by_id[sid]
        rec["last_line"] = lineno
        if y != rec["y"] or delta != rec["delta"]:
            raise DataValidationError(
                "y and delta must be constant within a subject", row=lineno, subject_id=sid
            )
        if xs != rec["x"]:
            raise DataValidationError(
                "fixed covariates must be constant within a subject", row=lineno, subject_id=sid
            )
        if t in rec["rows"]:
            raise DataValidationError(f"duplicate time {t}", row=lineno, subject_id=sid)
        rec["rows"][t] = zs

    subjects = []
    for sid in order:
        rec = by_id[sid]
        y = rec["y"]
        for t in range(y + 1):
            if t not in rec["rows"]:
                raise DataValidationError(
                    f"subject {sid}: missing time {t} of 0..{y}",
                    row=rec["last_line"],
                    subject_id=sid,
                )
        extra = sorted(set(rec["rows"]) - set(range(y + 1)))
        if extra:
            raise DataValidationError(
                f"subject {sid}: time {extra[0]} outside 0..{y}",
                row=rec["last_line"],
                subject_id=sid,
            )
        z = np.array([rec["rows"][t] for t in range(y + 1)])
        subjects.append(Subject(y=y, delta=rec["delta"], x=np.array(rec["x"]), z=z))
    return PanelDataset(subjects, ids=order)


_FIXED_GEN = {"normal": lambda spec: StandardNormal(), "bernoulli": lambda spec: Bernoulli(p=spec["p"])}
_TV_GEN = {
    "normal_walk": lambda spec: NormalWalk(mean=spec["mean"], sd=spec["sd"]),
    "integer_walk": lambda spec: IntegerWalk(),
}


def _load_sim_config(path) -> SimulationConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataValidationError(f"cannot read simulation config: {exc}") from exc
    try:
        params = ModelParams(**{k: doc["params"][k] for k in
                                ("alpha", "beta12", "beta13", "gamma12", "gamma13")})
        fixed = [_FIXED_GEN[spec["type"]](spec) for spec in doc["fixed_covariates"]]
        tv = [_TV_GEN[spec["type"]](spec) for spec in doc["tv_covariates"]]
        return SimulationConfig(
            n=int(doc["n"]),
            k_max=int(doc["k_max"]),
            true_params=params,
            fixed_covariate_spec=fixed,
            tv_covariate_spec=tv,
            censoring_rate=float(doc["censoring_rate"]),
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataValidationError(f"invalid simulation config: {exc}") from exc


def _sim_meta(cfg: SimulationConfig, setting_label: str) -> dict:
    return {
        "command": "simulate",
        "version": VERSION,
        "setting": setting_label,
        "n": cfg.n,
        "k_max": cfg.k_max,
        "censoring_rate": cfg.censoring_rate,
        "seed": cfg.seed,
        "params": {
            "alpha": list(map(float, cfg.true_params.alpha)),
            "beta12": list(map(float, cfg.true_params.beta12)),
            "beta13": list(map(float, cfg.true_params.beta13)),
            "gamma12": list(map(float, cfg.true_params.gamma12)),
            "gamma13": list(map(float, cfg.true_params.gamma13)),
        },
    }


def _cmd_simulate(args) -> int:
    if (args.setting is None) == (args.config is None):
        raise UsageError("exactly one of --setting or --config is required")
    if args.setting is not None:
        cfg = builtin_setting(args.setting, n=args.n if args.n else 1000, seed=args.seed)
        label = args.setting
    else:
        cfg = _load_sim_config(args.config)
        if args.n is not None:
            cfg.n = args.n
        cfg.seed = args.seed
        label = "custom"
    data, trajectories = simulate_dataset(cfg)
    meta = _sim_meta(cfg, label)
    os.makedirs(args.out, exist_ok=True)
    write_panel_csv(data, os.path.join(args.out, "data.csv"), meta)
    write_latent_csv(trajectories, data.ids, os.path.join(args.out, "latent.csv"), meta)
    table = occupancy_table(trajectories, data)
    write_occupancy_csv(table, os.path.join(args.out, "occupancy.csv"), meta)
    return 0


def _cmd_fit(args) -> int:
    data = ingest_panel_csv(args.data)
    config = FitConfig(n_starts=args.starts, seed=args.seed)
    if args.model == "dynamic":
        if args.degree:
            raise UsageError("--degree applies only to static and nostayer models")
        result = fit_direct(data, config)
        names = ModelParams.coordinate_names(data.d, data.q)
        aic = 2.0 * len(names) - 2.0 * result.loglik
    elif args.model == "static":
        result = fit_static(data, args.degree, config)
        names = StaticParams.coordinate_names(data.d, data.q + args.degree)
        aic = result.aic
    else:
        result = fit_no_stayer(data, args.degree, config)
        names = NoStayerParams.coordinate_names(data.d, data.q + args.degree)
        aic = result.aic
    doc = {
        "version": VERSION,
        "model": args.model,
        "config": {"starts": args.starts, "seed": args.seed, "degree": args.degree},
        "d": data.d,
        "q": data.q,
        "intercept_degree": args.degree,
        "theta_order": names,
        "theta": [float(v) for v in result.theta_hat.to_vector()],
        "loglik": float(result.loglik),
        "aic": float(aic),
        "converged": bool(result.converged),
        "n_evaluations": int(result.n_evaluations),
        "start_index": int(result.start_index),
        "separation_flags": [bool(v) for v in result.separation_flags],
    }
    _write_json(args.out, doc)
    return 0


def _load_estimates(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataValidationError(f"cannot read estimates file: {exc}") from exc
    try:
        kind = doc["model"]
        d, q = int(doc["d"]), int(doc["q"])
        degree = int(doc.get("intercept_degree", 0))
        theta = np.asarray(doc["theta"], dtype=float)
        if kind == "dynamic":
            params = ModelParams.from_vector(theta, d, q)
        elif kind == "static":
            params = StaticParams.from_vector(theta, d, q + degree)
        elif kind == "nostayer":
            params = NoStayerParams.from_vector(theta, d, q + degree)
        else:
            raise DataValidationError(f"unknown model {kind!r} in estimates file")
        return doc, kind, params, degree
    except (KeyError, TypeError, ValueError, DimensionError) as exc:
        raise DataValidationError(f"invalid estimates file: {exc}") from exc


def _parse_times(spec: str):
    try:
        if ".." in spec:
            lo, hi = spec.split("..")
            times = list(range(int(lo), int(hi) + 1))
        else:
            times = [int(tok) for tok in spec.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse --times {spec!r}: {exc}") from exc
    if not times or any(t < 0 for t in times) or sorted(set(times)) != times:
        raise UsageError("--times must be strictly increasing nonnegative integers")
    return times


def _cmd_predict(args) -> int:
    data = ingest_panel_csv(args.data)
    doc, kind, params, degree = _load_estimates(args.params)
    times = _parse_times(args.times)
    rows = []
    for sid, s in zip(data.ids, data.subjects):
        z = append_time_powers(s.z, degree) if kind != "dynamic" and degree else s.z
        for t in times:
            try:
                if kind == "dynamic":
                    p2, p3 = cumulative_state_probs(params, s.x, s.z, t)
                elif kind == "static":
                    p2, p3 = static_cumulative_probs(params, s.x, z, t)
                else:
                    _, mover = no_stayer_prob_curves(params, s.x[None, :], z[None], t)
                    p2, p3 = 0.0, float(mover[0, t])
            except HistoryError as exc:
                raise HistoryError(f"subject {sid}: {exc}") from exc
            rows.append([sid, t, float(p2), float(p3)])
    meta = {
        "command": "predict",
        "version": VERSION,
        "model": kind,
        "times": times,
        "theta": [float(v) for v in doc["theta"]],
    }
    _write_table(args.out, meta, ["id", "t", "p_stayer", "p_mover"], rows)
    return 0


def _cmd_bootstrap(args) -> int:
    data = ingest_panel_csv(args.data)
    doc, kind, params, _ = _load_estimates(args.params)
    if kind != "dynamic":
        raise UsageError("bootstrap requires dynamic-model estimates")
    report = bootstrap_se(data, params, n_boot=args.nboot, seed=args.seed)
    out = {
        "version": VERSION,
        "method": report.method.value,
        "config": {"nboot": args.nboot, "seed": args.seed},
        "theta_order": doc["theta_order"],
        "theta": [float(v) for v in report.theta],
        "se": [float(v) for v in report.se],
        "ci_lower": [float(v) for v in report.ci_lower],
        "ci_upper": [float(v) for v in report.ci_upper],
        "n_boot": report.n_boot,
        "n_failures": report.n_failures,
        "n_separation_flagged": report.n_separation_flagged,
    }
    _write_json(args.out, out)
    return 0


def _normalize_models(spec: str):
    out = []
    for tok in spec.split(","):
        name = tok.strip().lower().replace("nostayer", "no_stayer")
        if name not in ("dynamic", "static", "no_stayer"):
            raise UsageError(f"unknown model {tok!r}")
        if name not in out:
            out.append(name)
    return out


def _cmd_study(args) -> int:
    models = _normalize_models(args.models)
    setting = builtin_setting(args.setting, n=args.n if args.n else 1000, seed=0)
    report = run_replication_study(
        setting, args.nreps, models, args.seed, intercept_degree=args.degree
    )
    os.makedirs(args.out, exist_ok=True)
    meta = {
        "command": "study",
        "version": VERSION,
        "setting": args.setting,
        "n": setting.n,
        "nreps": args.nreps,
        "models": models,
        "seed": args.seed,
        "degree": args.degree,
    }
    _write_json(
        os.path.join(args.out, "study.json"),
        {
            **meta,
            "failures": report.failures,
            "extreme_fraction": report.extreme_fraction,
            "extreme_threshold": report.extreme_threshold,
            "truth": [float(v) for v in report.truth],
            "theta_order": report.coordinate_names,
        },
    )
    d, q = setting.true_params.d, setting.true_params.q
    name_map = {
        "dynamic": report.coordinate_names,
        "static": StaticParams.coordinate_names(d, q + args.degree),
        "no_stayer": NoStayerParams.coordinate_names(d, q + args.degree),
    }
    for m in models:
        est = report.estimates[m]
        _write_table(
            os.path.join(args.out, f"estimates_{m}.csv"),
            meta,
            name_map[m],
            [[float(v) for v in row] for row in est],
        )
        for state in (State.STAYER, State.MOVER):
            key = (m, state)
            if key not in report.mad_curves:
                continue
            curves = report.mad_curves[key]
            _write_table(
                os.path.join(args.out, f"mad_{m}_{state.name.lower()}.csv"),
                meta,
                [f"t{t}" for t in range(curves.shape[1] if len(curves) else setting.k_max + 1)],
                [[float(v) for v in row] for row in curves],
            )
    write_occupancy_csv(report.occupancy, os.path.join(args.out, "occupancy.csv"), meta)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="moverstayer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a dataset with latent truth")
    p.add_argument("--setting", choices=("s1", "s2", "s3"))
    p.add_argument("--config", help="JSON simulation config file")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit a model to a panel CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=_MODEL_CHOICES, required=True)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--degree", type=int, default=0, choices=(0, 1, 2, 3))
    p.add_argument("--out", default="estimates.json")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="cumulative stayer/mover probabilities")
    p.add_argument("--data", required=True)
    p.add_argument("--params", required=True, help="estimates.json from fit")
    p.add_argument("--times", required=True, help="e.g. 0..5 or 0,2,4")
    p.add_argument("--out", default="predictions.csv")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("bootstrap", help="bootstrap standard errors")
    p.add_argument("--data", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--nboot", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="inference.json")
    p.set_defaults(func=_cmd_bootstrap)

    p = sub.add_parser("study", help="replication study with MAD curves")
    p.add_argument("--setting", choices=("s1", "s2", "s3"), required=True)
    p.add_argument("--nreps", type=int, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--models", default="dynamic,static,no_stayer")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--degree", type=int, default=0, choices=(0, 1, 2, 3))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_study)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    except (DataValidationError, EmptyDatasetError, DimensionError, HistoryError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FitFailureError, HessianError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
