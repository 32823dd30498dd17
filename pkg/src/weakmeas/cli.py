"""Command-line front end: config parsing, dispatch, plot-ready tables.

Every command is a pure function of (config, seed): rerunning with the same
inputs reproduces all output files byte for byte, for any ``--threads`` value
(worker threads only spread fixed work blocks; they never change results).

Config is a single JSON document, given as a file path or inline with
``--config '{...}'``. Complex numbers are [re, im] pairs, observables
row-major lists of pairs, and states are normalized on input. Unknown keys
are rejected with their field path. A short hash of the merged config stamps
every emitted file.

Exit codes: 0 success, 2 config error, 3 domain error (bad physics inputs),
4 numeric-quality failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import collective as coll
from . import core
from . import lindblad as lb
from . import montecarlo as mc
from . import pointer as ptr
from . import protocols as proto
from .errors import (
    ConfigurationError,
    DomainError,
    FileError,
    NumericalQualityError,
    SchemaError,
)
from .serialize import config_hash, jsonable, write_csv, write_json

DEFAULT_LAMBDA = 0.1
DEFAULT_LAMBDA_GRID = (0.2, 0.1, 0.05, 0.025)
DEFAULT_N_GRID = (25, 50, 100, 200, 400)
DEFAULT_TRIALS = 100_000
DEFAULT_GRID_POINTS = 512

_SIMULATE_KEYS = {
    "protocol",
    "observable",
    "observable_b",
    "psi",
    "phi",
    "lambda",
    "lambda2",
    "trials",
    "seed",
    "threads",
    "threshold_multiple",
}

COMMAND_KEYS: dict[str, tuple[set[str], set[str]]] = {
    # command: (required keys, optional keys)
    "weak-value": ({"observable", "psi", "phi"}, set()),
    "anomalous": ({"observable", "epsilon"}, {"target"}),
    "density": ({"observable", "psi", "phi"}, {"lambda", "basis", "grid"}),
    "postselect-prob": ({"observable", "psi", "phi"}, {"lambda_grid"}),
    "kick": ({"observable", "psi", "phi"}, {"lambda_grid"}),
    "sequential": (
        {"observable", "observable_b", "psi", "phi"},
        {"lambda_grid", "basis"},
    ),
    "collective": ({"observable", "psi", "phi"}, {"lambda", "n_grid", "basis"}),
    "lindblad": ({"observable", "psi", "phi"}, {"lambda", "grid"}),
    "disturbance": ({"observable", "psi", "phi"}, {"lambda"}),
    "simulate": ({"protocol", "observable", "psi"}, _SIMULATE_KEYS),
    "threshold": ({"observable", "psi"}, {"lambda", "lambda_grid", "threshold_multiple"}),
}


@dataclass(frozen=True)
class RunConfig:
    """Validated command configuration; ``raw`` is the hashed document."""

    command: str
    raw: dict
    params: dict

    @property
    def hash(self) -> str:
        # threads is an execution detail: hashing it would make otherwise
        # identical runs look different across worker counts
        doc = {k: v for k, v in self.raw.items() if k != "threads"}
        return config_hash({"command": self.command, **doc})


def _parse_complex_pairs(value, path: str) -> list[complex]:
    if not isinstance(value, list) or not value:
        raise SchemaError(path, "expected a non-empty list of [re, im] pairs")
    out = []
    for i, item in enumerate(value):
        if (
            not isinstance(item, list)
            or len(item) != 2
            or not all(isinstance(v, (int, float)) for v in item)
        ):
            raise SchemaError(f"{path}[{i}]", "expected an [re, im] pair of numbers")
        out.append(complex(item[0], item[1]))
    return out


def _parse_state(value, path: str) -> core.PureState:
    amps = _parse_complex_pairs(value, path)
    try:
        return core.PureState.normalized(np.array(amps))
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from exc


def _parse_observable(value, path: str) -> core.Observable:
    entries = _parse_complex_pairs(value, path)
    dim = math.isqrt(len(entries))
    if dim * dim != len(entries):
        raise SchemaError(path, f"row-major length {len(entries)} is not a square")
    try:
        return core.Observable(np.array(entries).reshape(dim, dim))
    except (ValueError, DomainError) as exc:
        raise SchemaError(path, str(exc)) from exc


def _parse_number(value, path: str, kind=float, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(value).__name__}")
    value = kind(value)
    if minimum is not None and value < minimum:
        raise SchemaError(path, f"must be >= {minimum}")
    return value


def _parse_choice(value, path: str, choices) -> str:
    if value not in choices:
        raise SchemaError(path, f"expected one of {sorted(choices)}")
    return value


def _parse_grid(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(path, "expected an object {xmin, xmax, points}")
    out = {"xmin": None, "xmax": None, "points": DEFAULT_GRID_POINTS}
    for key, item in value.items():
        if key in ("xmin", "xmax"):
            out[key] = _parse_number(item, f"{path}.{key}")
        elif key == "points":
            out[key] = int(_parse_number(item, f"{path}.points", int, 16))
        else:
            raise SchemaError(f"{path}.{key}", "unknown key")
    return out


def _parse_number_list(value, path: str, kind=float, minimum=None) -> tuple:
    if not isinstance(value, list) or not value:
        raise SchemaError(path, "expected a non-empty list of numbers")
    return tuple(_parse_number(v, f"{path}[{i}]", kind, minimum) for i, v in enumerate(value))


def load_config_document(source: str) -> dict:
    """Read the JSON config from an inline string or a file path."""
    text = source
    if not source.lstrip().startswith("{"):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise FileError(f"cannot read config file {source}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("$", "config document must be a JSON object")
    return doc


def parse_config(command: str, source: str, overrides: dict | None = None) -> RunConfig:
    """Validate the config document for ``command`` and fill defaults."""
    if command not in COMMAND_KEYS:
        raise SchemaError("$", f"unknown command {command!r}")
    doc = load_config_document(source)
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    required, optional = COMMAND_KEYS[command]
    allowed = required | optional
    for key in doc:
        if key not in allowed:
            raise SchemaError(key, f"unknown key for command {command!r}")
    for key in required:
        if key not in doc:
            raise SchemaError(key, "required key missing")

    params: dict = {}
    for key, value in doc.items():
        if key in ("observable", "observable_b"):
            params[key] = _parse_observable(value, key)
        elif key in ("psi", "phi"):
            params[key] = _parse_state(value, key)
        elif key in ("lambda", "lambda2", "epsilon", "threshold_multiple"):
            params[key] = _parse_number(value, key)
        elif key == "lambda_grid":
            params[key] = _parse_number_list(value, key)
        elif key in ("trials", "threads"):
            params[key] = int(_parse_number(value, key, int, 1))
        elif key == "seed":
            params[key] = int(_parse_number(value, key, int, 0))
        elif key == "basis":
            params[key] = _parse_choice(value, key, {ptr.BASIS_X, ptr.BASIS_XPRIME})
        elif key == "target":
            params[key] = _parse_choice(value, key, {"re", "im"})
        elif key == "protocol":
            params[key] = _parse_choice(value, key, set(mc.PROTOCOLS))
        elif key == "grid":
            params[key] = _parse_grid(value, key)
        elif key == "n_grid":
            params[key] = _parse_number_list(value, key, int, 1)
        else:  # unreachable: key already vetted against the schema
            raise SchemaError(key, "unhandled key")

    params.setdefault("lambda", DEFAULT_LAMBDA)
    params.setdefault("lambda_grid", DEFAULT_LAMBDA_GRID)
    params.setdefault("basis", ptr.BASIS_X)
    params.setdefault("target", "re")
    params.setdefault("trials", DEFAULT_TRIALS)
    params.setdefault("seed", 0)
    params.setdefault("threads", 1)
    params.setdefault("threshold_multiple", 100.0)
    params.setdefault("n_grid", DEFAULT_N_GRID)
    if command == "simulate":
        if params["protocol"] != "threshold" and "phi" not in params:
            raise SchemaError("phi", "required unless protocol is 'threshold'")
        if params["protocol"] == "sequential" and "observable_b" not in params:
            raise SchemaError("observable_b", "required for the sequential protocol")
        params.setdefault("lambda2", params["lambda"])
    return RunConfig(command=command, raw=doc, params=params)


def _metadata(cfg: RunConfig) -> str:
    return f"config_sha256={cfg.hash} seed={cfg.params.get('seed', 0)}"


def _write_table(cfg: RunConfig, out_dir: Path, name: str, header, rows, fmt: str) -> Path:
    if fmt == "json":
        path = out_dir / f"{name}.json"
        payload = {
            "columns": list(header),
            "rows": [list(jsonable(list(r))) for r in rows],
            "metadata": _metadata(cfg),
        }
        write_json(path, payload)
    else:
        path = out_dir / f"{name}.csv"
        write_csv(path, list(header), rows, _metadata(cfg))
    return path


def _density_window(observable: core.Observable, lam: float, a_w: complex) -> tuple[float, float]:
    reach = abs(lam) * (observable.spectral_radius + abs(a_w)) + 10.0
    return -reach, reach


# ---------------------------------------------------------------- commands


def _cmd_weak_value(cfg: RunConfig, out_dir: Path, fmt: str) -> dict:
    p = cfg.params
    wv = core.weak_value(p["observable"], p["psi"], p["phi"])
    payload = {
        "weak_value": wv.value,
        "preselect_overlap": wv.preselect_overlap,
        "overlap_sq": abs(wv.preselect_overlap) ** 2,
        "expectation_psi": core.expectation(p["observable"], p["psi"]),
    }
    write_json(out_dir / "weak_value.json", {**payload, "metadata": _metadata(cfg)})
    return {
        "weak_value_re": wv.value.real,
        "weak_value_im": wv.value.imag,
        "overlap_sq": abs(wv.preselect_overlap) ** 2,
    }


def _cmd_anomalous(cfg: RunConfig, out_dir: Path, fmt: str) -> dict:
    p = cfg.params
    pair = core.anomalous_pair(p["observable"], p["epsilon"], p["target"])
    write_json(
        out_dir / "anomalous.json",
        {
            "psi": pair.psi.to_json(),
            "phi": pair.phi.to_json(),
            "perp": pair.perp.to_json(),
            "weak_value": pair.weak_value,
            "postselect_prob": pair.postselect_prob,
            "metadata": _metadata(cfg),
        },
    )
    return {
        "weak_value_re": pair.weak_value.real,
        "weak_value_im": pair.weak_value.imag,
        "overlap_sq": pair.postselect_prob,
    }


def _cmd_density(cfg: RunConfig, out_dir: Path, fmt: str) -> dict:
    p = cfg.params
    setup = proto.MeasurementSetup(p["observable"], p["lambda"], p["psi"], p["phi"])
    a_w = core.weak_value(p["observable"], p["psi"], p["phi"]).value
    grid_cfg = p.get("grid", {"xmin": None, "xmax": None, "points": DEFAULT_GRID_POINTS})
    lo, hi = _density_window(p["observable"], p["lambda"], a_w)
    xmin = grid_cfg["xmin"] if grid_cfg["xmin"] is not None else lo
    xmax = grid_cfg["xmax"] if grid_cfg["xmax"] is not None else hi
    xs = np.linspace(xmin, xmax, grid_cfg["points"])
    dens = proto.conditional_meter_density(setup, p["basis"], xs)
    _write_table(cfg, out_dir, "density", ["x", "density"], zip(xs, dens), fmt)
    seg = 0.5 * (dens[1:] + dens[:-1]) * np.diff(xs)
    cdf = np.concatenate(([0.0], np.cumsum(seg)))
    _write_table(cfg, out_dir, "cdf", ["x", "cdf"], zip(xs, cdf), fmt)
    integral = float(np.trapezoid(dens, xs))
    mean = proto.conditional_meter_mean(setup, p["basis"])
    return {"integral": integral, "conditional_mean": mean, "basis": p["basis"]}


def _cmd_postselect_prob(cfg: RunConfig, out_dir: Path, fmt: str) -> dict:
    p = cfg.params
    lams = p["lambda_grid"]
    unperturbed = float(abs(p["phi"].overlap(p["psi"])) ** 2)
    rows = []
    coeffs = []
    for lam in lams:
        setup = proto.MeasurementSetup(p["observable"], lam, p["psi"], p["phi"])
        prob = proto.postselection_probability(setup)
        coeff = (prob - unperturbed) / lam**2
        coeffs.append(coeff)
        rows.append(["lambda", lam, prob, unperturbed, coeff, None])
    intercept, resid = proto.extrapolate_to_zero_coupling(lams, coeffs)
    rows.append(["extrapolation", 0.0, None, unperturbed, intercept, resid])
    _write_table(
        cfg,
        out_dir,
        "postselect_prob",
        ["row", "lambda", "prob", "prob_unperturbed", "coeff_lambda_sq", "fit_residual"],
        rows,
        fmt,
    )
    analytic = lb.second_order_coefficient(p["observable"], p["psi"], p["phi"])
    return {
        "coeff_extrapolated": intercept,
        "coeff_analytic": analytic,
        "prob_unperturbed": unperturbed,
    }


def _cmd_kick(cfg: RunConfig, out_dir: Path, fmt: str) -> dict:
    p = cfg.params
    lams = p["lambda_grid"]
    rows = []
    scaled = []
    for lam in lams:
        setup = proto.MeasurementSetup(p["observable"], lam, p["psi"], p["phi"])
        state = proto.kick_pointer_state(setup)
        mean = ptr.moment(state, 1)
        scaled.append(mean / lam)
        rows.append(["lambda", lam, mean, mean / lam, None])
    intercept, resid = proto.extrapolate_to_zero_coupling(lams, scaled)
    rows.append(["extrapolation", 0.0, None, intercept, resid])
    _write_table(
        cfg,
        out_dir,
        "kick",
        ["row", "lambda", "conditional_mean", "mean_over_lambda", "fit_residual"],
        rows,
        fmt,
    )
    a_w = core.weak_value(p["observable"], p["psi"], p["phi"]).value
    return {"im_weak_value_extrapolated": intercept, "im_weak_value": a_w.imag}


def _cmd_sequential(cfg: RunConfig, out_dir: Path, fmt: str) -> dict:
    p = cfg.params
    bases = (p["basis"], p["basis"])
    lams = p["lambda_grid"]
    rows = []
    coeffs = []
    for lam in lams:
        sq = proto.SequentialSetup(
            p["observable"], lam, p["observable_b"], lam, p["psi"], p["phi"], bases
        )
        cov = proto.sequential_cross_covariance(sq)
        coeff = cov / (lam * lam / 2.0)
        coeffs.append(coeff)
        rows.append(["lambda", lam, cov, coeff, None])
    intercept, resid = proto.extrapolate_to_zero_coupling(lams, coeffs)
    rows.append(["extrapolation", 0.0, None, intercept, resid])
    _write_table(
        cfg,
        out_dir,
        "sequential",
        ["row", "lambda", "cross_covariance", "coeff", "fit_residual"],
        rows,
        fmt,
    )
    # joint conditional density grid at the single-lambda setting
    sq_grid = proto.SequentialSetup(
        p["observable"], p["lambda"], p["observable_b"], p["lambda"], p["psi"], p["phi"], bases
    )
    xs = np.linspace(-6.0 - abs(p["lambda"]), 6.0 + abs(p["lambda"]), 101)
    dens2 = proto.sequential_joint_density(sq_grid, xs, xs)
    _write_table(
        cfg,
        out_dir,
        "sequential_density",
        ["x1", "x2", "density"],
        (
            [xs[i], xs[j], dens2[i, j]]
            for i in range(xs.size)
            for j in range(xs.size)
        ),
        fmt,
    )
    sq0 = proto.SequentialSetup(
        p["observable"], lams[0], p["observable_b"], lams[0], p["psi"], p["phi"], bases
    )
    gap = proto.sequential_order_gap(sq0)
    ba = core.matrix_weak_value(
        p["observable_b"].matrix @ p["observable"].matrix, p["psi"], p["phi"]
    )
    a_w = core.weak_value(p["observable"], p["psi"], p["phi"]).value
    b_w = core.weak_value(p["observable_b"], p["psi"], p["phi"]).value
    analytic = (ba - a_w * b_w).real
    if p["basis"] == ptr.BASIS_XPRIME:
        analytic = -analytic
    return {"coeff_extrapolated": intercept, "coeff_analytic": analytic, "order_gap": gap}


def _cmd_collective(cfg: RunConfig, out_dir: Path, fmt: str) -> dict:
    p = cfg.params
    lam = p["lambda"]
    a_w = core.weak_value(p["observable"], p["psi"], p["phi"]).value
    ratio_limit = math.exp(lam * lam * a_w.imag**2 / 2.0)
    rows = []
    for n in p["n_grid"]:
        cs = coll.CollectiveSetup(p["observable"], lam, p["psi"], p["phi"], int(n))
        ratio = coll.collective_postselection_ratio(cs)
        xs = np.linspace(lam * a_w.real - 8.0, lam * a_w.real + 8.0, 512)
        dens = coll.collective_conditional_density(cs, ptr.BASIS_X, xs)
        supnorm = float(np.max(np.abs(dens - ptr.gaussian_density(xs - lam * a_w.real))))
        xp_mean = coll.collective_conditional_mean(cs, ptr.BASIS_XPRIME)
        rows.append([n, "postselection_ratio", ratio])
        rows.append([n, "x_density_supnorm_gap", supnorm])
        rows.append([n, "xprime_mean", xp_mean])
    _write_table(cfg, out_dir, "collective", ["n", "metric", "value"], rows, fmt)
    return {
        "ratio_limit": ratio_limit,
        "x_shift_limit": lam * a_w.real,
        "xprime_shift_limit": lam * a_w.imag,
    }


def _cmd_lindblad(cfg: RunConfig, out_dir: Path, fmt: str) -> dict:
    p = cfg.params
    lam = p["lambda"]
    lo, hi = lb.integration_interval(p["observable"], lam)
    grid_cfg = p.get("grid", {"xmin": None, "xmax": None, "points": DEFAULT_GRID_POINTS})
    xmin = grid_cfg["xmin"] if grid_cfg["xmin"] is not None else lo
    xmax = grid_cfg["xmax"] if grid_cfg["xmax"] is not None else hi
    xs = np.linspace(xmin, xmax, grid_cfg["points"])
    samples = lb.decompose_on_grid(p["observable"], lam, p["psi"], p["phi"], xs)
    _write_table(
        cfg,
        out_dir,
        "lindblad_decomposition",
        ["x", "joint", "pw", "error"],
        ([s.x, s.joint_p, s.pw, s.error] for s in samples),
        fmt,
    )
    report = lb.gdi_diagnostic(p["observable"], lam, p["psi"], p["phi"])
    write_json(out_dir / "gdi.json", {**asdict(report), "metadata": _metadata(cfg)})
    return {
        "mean_full": report.mean_full,
        "mean_pw": report.mean_pw,
        "mean_gap": report.mean_gap,
        "integrated_error_over_lambda_sq": report.integrated_error_over_coupling_sq,
    }


def _cmd_disturbance(cfg: RunConfig, out_dir: Path, fmt: str) -> dict:
    p = cfg.params
    setup = proto.MeasurementSetup(p["observable"], p["lambda"], p["psi"], p["phi"])
    report = proto.disturbance_report(setup)
    write_json(out_dir / "disturbance.json", {**asdict(report), "metadata": _metadata(cfg)})
    return {
        "prob_exact": report.postselect_prob_exact,
        "prob_unperturbed": report.postselect_prob_unperturbed,
        "purity": report.nonselective_purity,
        "fidelity": report.fidelity_to_initial,
    }


def _build_plan(p: dict) -> mc.TrialPlan:
    return mc.TrialPlan(
        protocol=p["protocol"],
        observable=p["observable"],
        coupling=p["lambda"],
        preselect=p["psi"],
        postselect=p.get("phi"),
        trials=p["trials"],
        seed=p["seed"],
        second_observable=p.get("observable_b"),
        second_coupling=p.get("lambda2", p["lambda"]),
        threshold_multiple=p["threshold_multiple"],
        threads=p["threads"],
    )


def _cmd_simulate(cfg: RunConfig, out_dir: Path, fmt: str) -> dict:
    plan = _build_plan(cfg.params)
    records, stats = mc.run_plan(plan)
    two = "x2" in (records.dtype.names or ())
    header = ["x", "x2", "postselected"] if two else ["x", "postselected"]

    def rows():
        for rec in records:
            if two:
                yield [rec["x"], rec["x2"], int(rec["postselected"])]
            else:
                yield [rec["x"], int(rec["postselected"])]

    _write_table(cfg, out_dir, "records", header, rows(), fmt)
    write_json(out_dir / "stats.json", {**asdict(stats), "metadata": _metadata(cfg)})
    summary = {
        "n_postselected": stats.n_postselected,
        "postselection_rate": stats.postselection_rate,
        "conditional_mean": stats.conditional_means[0],
        "standard_error": stats.standard_errors[0],
    }
    if stats.cross_covariance is not None:
        summary["cross_covariance"] = stats.cross_covariance
    return summary


def _cmd_threshold(cfg: RunConfig, out_dir: Path, fmt: str) -> dict:
    p = cfg.params
    mult = p["threshold_multiple"]
    lams = list(p["lambda_grid"])
    rows = []
    preds = {}
    for lam in lams:
        thr = mult * lam
        pred = mc.truncated_mean_prediction(p["observable"], lam, p["psi"], thr)
        preds[lam] = pred
        rows.append(["lambda", lam, thr, pred, None])
    # threshold means are not even in lambda; extrapolate linearly in lambda
    slope, intercept = np.polyfit(lams, [preds[l] for l in lams], 1)
    resid = float(
        np.sqrt(np.mean((np.array([preds[l] for l in lams]) - (slope * np.array(lams) + intercept)) ** 2))
    )
    rows.append(["extrapolation", 0.0, 0.0, float(intercept), resid])
    _write_table(
        cfg,
        out_dir,
        "threshold",
        ["row", "lambda", "threshold", "predicted_mean", "fit_residual"],
        rows,
        fmt,
    )
    half_gauss = math.sqrt(2.0 / math.pi)
    return {"predicted_mean_extrapolated": float(intercept), "half_gaussian_mean": half_gauss}


_HANDLERS = {
    "weak-value": _cmd_weak_value,
    "anomalous": _cmd_anomalous,
    "density": _cmd_density,
    "postselect-prob": _cmd_postselect_prob,
    "kick": _cmd_kick,
    "sequential": _cmd_sequential,
    "collective": _cmd_collective,
    "lindblad": _cmd_lindblad,
    "disturbance": _cmd_disturbance,
    "simulate": _cmd_simulate,
    "threshold": _cmd_threshold,
}


def dispatch(cfg: RunConfig, out_dir: Path, fmt: str = "csv") -> dict:
    """Run one command; writes artifacts and returns the summary mapping."""
    out_dir.mkdir(parents=True, exist_ok=True)
    return _HANDLERS[cfg.command](cfg, out_dir, fmt)


def _summary_line(command: str, summary: dict) -> str:
    parts = [f"{k}={repr(v) if isinstance(v, float) else v}" for k, v in summary.items()]
    return f"{command} " + " ".join(parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weakmeas",
        description="Exact and Monte Carlo simulation of weak measurements with post-selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMAND_KEYS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON file path or inline JSON object")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.add_argument("--lambda-grid", dest="lambda_grid", default=None,
                       help="comma-separated coupling values")
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--basis", choices=[ptr.BASIS_X, ptr.BASIS_XPRIME], default=None)
        p.add_argument("--format", choices=["csv", "json"], default="csv")
    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict:
    grid = None
    if args.lambda_grid is not None:
        try:
            grid = [float(v) for v in args.lambda_grid.split(",") if v.strip()]
        except ValueError as exc:
            raise SchemaError("lambda_grid", f"bad --lambda-grid value: {exc}") from exc
    return {
        "seed": args.seed,
        "threads": args.threads,
        "lambda": args.lam,
        "lambda_grid": grid,
        "trials": args.trials,
        "basis": args.basis,
    }


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = _overrides_from_args(args)
        cfg = parse_config(args.command, args.config, overrides)
        summary = dispatch(cfg, Path(args.out), args.format)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 3
    except NumericalQualityError as exc:
        print(f"numeric-quality error: {exc}", file=sys.stderr)
        return 4
    print(_summary_line(args.command, summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
