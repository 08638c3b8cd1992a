"""Batch experiment driver.

Subcommands: evolve, trotter, strong-trotter, commutator, seminorms,
cocycle-smooth, bounds.  Each reads a JSON config, runs the experiment,
and writes a deterministic report (CSV, JSON, or SVG) plus a run
manifest.  Exit codes: 0 all expectations met, 1 usage/config error,
2 expectation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import cocycle as cc
from . import lie_core as lc
from . import limits as lm
from . import semidirect as sd
from .errors import (
    ConfigError,
    ConvergenceFailureError,
    HalfLieError,
    NotDifferentiableError,
    OutOfChartError,
    QuadratureError,
)
from .instances import build_instance, oscillator_ladder
from .regulated import constant_path, path_from_jsonable

EXPERIMENTS = (
    "evolve",
    "trotter",
    "strong-trotter",
    "commutator",
    "seminorms",
    "cocycle-smooth",
    "bounds",
)

_NUMERICAL_ERRORS = (
    OutOfChartError,
    ConvergenceFailureError,
    QuadratureError,
    NotDifferentiableError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _require(config: dict, path: str, kind=None):
    node = config
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(path, "required field missing")
        node = node[part]
    if kind is not None and not isinstance(node, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ConfigError(path, f"expected {names}")
    return node


def _positive(config: dict, path: str, default=None):
    node = config
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is not None:
                return default
            raise ConfigError(path, "required field missing")
        node = node[part]
    if not isinstance(node, (int, float)) or node <= 0:
        raise ConfigError(path, "must be a positive number")
    return float(node)


def parse_config(text: str) -> dict:
    """Parse and schema-check an experiment config."""
    try:
        config = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("<root>", f"invalid JSON: {err}") from err
    if not isinstance(config, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    experiment = _require(config, "experiment", str)
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment; one of {EXPERIMENTS}")
    if experiment in ("evolve", "trotter", "strong-trotter", "commutator", "seminorms"):
        _require(config, "instance.name", str)
    if "tol" in config:
        _positive(config, "tol")
    if experiment in ("trotter", "strong-trotter", "commutator") and "ladder" not in config:
        grid = _require(config, "t_grid", list)
        if not grid:
            raise ConfigError("t_grid", "must be nonempty for limit experiments")
    return config


def _coords(obj):
    if isinstance(obj, dict):
        return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    return np.asarray(obj, dtype=float)


def _build_curve(inst, spec: dict, path: str) -> lm.CurveDescriptor:
    name = _require(spec, "name", str)
    fiber_c1 = spec.get("fiber_c1")
    try:
        if name == "one_parameter":
            w = sd.vector(inst, _coords(spec["v"]), _coords(spec["x"]), fiber_c1)
            return lm.curve_one_parameter(inst, w)
        if name == "fiber_linear":
            return lm.curve_fiber_linear(inst, _coords(spec["v"]), fiber_c1)
        if name == "base_linear":
            return lm.curve_base_linear(inst, _coords(spec["x"]))
        if name == "sin_fiber_linear_base":
            return lm.curve_sin_fiber_linear_base(
                inst, _coords(spec["v"]), _coords(spec["x"]), fiber_c1
            )
        if name == "fiber_quadratic":
            return lm.curve_fiber_quadratic(inst, _coords(spec["v"]))
    except KeyError as missing:
        raise ConfigError(f"{path}.{missing.args[0]}", "required curve parameter missing")
    raise ConfigError(f"{path}.name", f"unknown curve {name!r}")


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return {"re": value.real.tolist(), "im": value.imag.tolist()}
        return value.tolist()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def _serialize_point(pt: sd.HalfLiePoint) -> str:
    payload = {"fiber": _jsonable(pt.n.coords), "base": _jsonable(pt.g.coords)}
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# experiment runners: each returns (columns, rows, summary, expect_failures)
# ---------------------------------------------------------------------------


def _check_sequence_expectations(config, reports_by_t):
    failures = []
    expect = config.get("expectations", {})
    for t, report in reports_by_t:
        if "verdict" in expect and report.verdict != expect["verdict"]:
            failures.append(
                f"t={t}: verdict {report.verdict!r} != expected {expect['verdict']!r}"
            )
        if "final_error_below" in expect and not report.errors[-1] < expect["final_error_below"]:
            failures.append(f"t={t}: final error {report.errors[-1]:.3g} not below bound")
        if "exponent_range" in expect:
            lo, hi = expect["exponent_range"]
            if not lo <= report.fitted_exponent <= hi:
                failures.append(
                    f"t={t}: fitted exponent {report.fitted_exponent:.3g} outside [{lo}, {hi}]"
                )
    return failures


def _run_sequences(config: dict, seed: int, jobs: int, kind: str):
    inst = build_instance(
        _require(config, "instance.name", str), config.get("instance", {}).get("params", {})
    )
    curves = [
        _build_curve(inst, spec, f"curves[{i}]")
        for i, spec in enumerate(_require(config, "curves", list))
    ]
    needed = 1 if kind == "strong-trotter" else 2
    if len(curves) != needed:
        raise ConfigError("curves", f"{kind} needs exactly {needed} curve(s)")
    indices = tuple(int(n) for n in config.get("indices", lm.DEFAULT_INDICES))
    tol = float(config.get("tol", 1e-6))
    t_grid = [float(t) for t in _require(config, "t_grid", list)]

    def run_one(t):
        if kind == "strong-trotter":
            return lm.strong_trotter_sequence(curves[0], t, indices, tol)
        if kind == "trotter":
            return lm.trotter_pair_sequence(curves[0], curves[1], t, indices, tol)
        return lm.commutator_sequence(curves[0], curves[1], t, indices, tol)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run_one, t_grid))
    else:
        reports = [run_one(t) for t in t_grid]

    columns = ("t", "n", "error", "target_serialized")
    rows = []
    plottable = []
    convergent = [
        (t, rep) for t, rep in zip(t_grid, reports) if isinstance(rep, lm.ConvergenceReport)
    ]
    for t, report in zip(t_grid, reports):
        if isinstance(report, lm.CommutatorRawSequence):
            for n, norm in zip(report.indices, report.fiber_norms):
                rows.append((t, n, norm, ""))
            continue
        target = _serialize_point(report.target)
        for n, err in zip(report.indices, report.errors):
            rows.append((t, n, err, target))
        plottable.append((f"t={t}", report.indices, report.errors))
    summary = {
        f"t={t}": {"verdict": rep.verdict, "fitted_exponent": rep.fitted_exponent}
        for t, rep in convergent
    }
    failures = _check_sequence_expectations(config, convergent)
    return columns, rows, summary, failures, plottable


def _run_commutator_ladder(config: dict):
    ladder_cfg = config["ladder"]
    d_values = [int(d) for d in _require(ladder_cfg, "d_values", list)]
    lam_exp = float(ladder_cfg.get("lam_exponent", 2.0))
    coeff_exp = float(ladder_cfg.get("coeff_exponent", -1.4))
    t = float(ladder_cfg.get("t", 1.0))
    m = int(ladder_cfg.get("extrap_m", 2**10))

    columns = ("d", "limit_norm", "max_mode_residual")
    rows = []
    norms = []
    for d in d_values:
        modes = np.arange(1, d + 1, dtype=float)
        lam = modes**lam_exp
        coeff = modes**coeff_exp
        # per-mode finite products m sqrt(t) (1 - e^{i lam sqrt(t)/m}) x and
        # their Richardson extrapolation toward m -> infinity
        limits_exact = -1j * lam * coeff * t
        resolvable = lam * np.sqrt(t) / m <= 1.0 / 16.0
        extrapolated = _richardson_mode_limits(lam, coeff, t, m)
        residual = (
            float(np.max(np.abs(extrapolated[resolvable] - limits_exact[resolvable])))
            if resolvable.any()
            else float("nan")
        )
        norms.append(float(np.linalg.norm(limits_exact)))
        rows.append((d, norms[-1], residual))
    fitted = float(
        np.polyfit(np.log(np.asarray(d_values, dtype=float)), np.log(norms), 1)[0]
    )
    summary = {"fitted_exponent": fitted, "extrap_m": m}
    failures = []
    expect = config.get("expectations", {})
    if "exponent_range" in expect:
        lo, hi = expect["exponent_range"]
        if not lo <= fitted <= hi:
            failures.append(f"ladder exponent {fitted:.3g} outside [{lo}, {hi}]")
    plottable = [("ladder", d_values, norms)]
    return columns, rows, summary, failures, plottable


def _richardson_mode_limits(lam, coeff, t, m):
    """Extrapolate the per-mode product values at m/8, m/4, m/2, m."""
    ms = np.array([m // 8, m // 4, m // 2, m], dtype=float)
    values = np.empty((4, len(lam)), dtype=complex)
    for i, mm in enumerate(ms):
        values[i] = mm * np.sqrt(t) * (1.0 - np.exp(1j * lam * np.sqrt(t) / mm)) * coeff
    # eliminate 1/m, 1/m^2, 1/m^3 terms successively
    for level in range(1, 4):
        factor = 2.0**level
        values = (factor * values[1:] - values[:-1]) / (factor - 1.0)
    return values[0]


def _run_evolve(config: dict, seed: int, jobs: int):
    inst = build_instance(
        _require(config, "instance.name", str), config.get("instance", {}).get("params", {})
    )
    controls = _require(config, "controls", dict)
    alpha = _parse_control(inst.N_spec, controls, "controls.alpha", "alpha")
    beta = _parse_control(inst.G_spec, controls, "controls.beta", "beta")
    tol = float(config.get("tol", 1e-8))
    times = [float(t) for t in config.get("t_grid", [1.0])]
    flow = sd.evol_h(inst, alpha, beta, tol)
    columns = ("t", "fiber", "base")
    rows = []
    for t in times:
        pt = flow.at(t)
        rows.append(
            (
                t,
                json.dumps(_jsonable(pt.n.coords), sort_keys=True, separators=(",", ":")),
                json.dumps(_jsonable(pt.g.coords), sort_keys=True, separators=(",", ":")),
            )
        )
    summary = {
        "error_estimate": flow.error_estimate,
        "refinement_depth": flow.refinement_depth,
        "instance_probe_residual": inst.probe_residual,
    }
    return columns, rows, summary, [], None


def _parse_control(group, controls: dict, path: str, key: str):
    if key not in controls:
        raise ConfigError(path, "required control missing")
    spec = controls[key]
    if isinstance(spec, dict) and "constant" in spec:
        return constant_path(group, _coords(spec["constant"]).astype(group.dtype))
    if isinstance(spec, dict) and "breakpoints" in spec:
        return path_from_jsonable(group, spec)
    raise ConfigError(path, "control must carry 'constant' or 'breakpoints'/'values'")


def _run_seminorms(config: dict):
    k_grid = [int(k) for k in config.get("k_grid", [1, 2, 3])]
    if any(k < 1 for k in k_grid):
        raise ConfigError("k_grid", "orders must be positive")
    columns = ("k", "d", "p_k")
    rows = []
    failures = []
    expect = config.get("expectations", {})
    closed_tol = expect.get("matches_closed_form_tol")

    if "d_grid" in config:
        lam_exp = float(config.get("lam_exponent", 1.0))
        coeff_exp = float(config.get("coeff_exponent", 0.0))
        entries = oscillator_ladder([int(d) for d in config["d_grid"]], lam_exp, coeff_exp)
    else:
        inst = build_instance(
            _require(config, "instance.name", str),
            config.get("instance", {}).get("params", {}),
        )
        v = lc.AlgebraVector.of(inst.N_spec, _coords(_require(config, "vector", (list, dict))))
        entries = [(inst, v)]

    for inst, v in entries:
        d = inst.N_spec.size
        for k in k_grid:
            pk = sd.seminorm_pk(inst, v, k)
            rows.append((k, d, pk))
            if closed_tol is not None and "p_k" in inst.closed_forms:
                ref = inst.closed_forms["p_k"](v, k)
                if abs(pk - ref) > closed_tol * max(1.0, abs(ref)):
                    failures.append(f"p_{k} at d={d} deviates from the closed form")
    return columns, rows, {}, failures, None


def _run_bounds(config: dict, seed: int):
    group_cfg = config.get("group", {"kind": "matrix", "size": 2})
    kind = group_cfg.get("kind", "matrix")
    if kind != "matrix":
        raise ConfigError("group.kind", "bounds experiment expects a matrix group")
    group = lc.matrix_group(int(group_cfg.get("size", 2)))
    samples = int(config.get("samples", 10_000))
    radius = float(config.get("radius", 0.2))
    reports = lm.bound_suite(group, samples, radius, seed)

    columns = ("claim", "samples", "max_slack", "violations")
    rows = [(r.claim, r.samples, r.max_slack, r.violations) for r in reports]

    c_grid = config.get("c_grid", [2.0 / radius**2])
    rho_grid = config.get("rho_grid", [0.5, 1.0, 2.0])
    n_max = int(config.get("n_max", 2**10))
    worst_doubling = 0.0
    chain_violations = 0
    chain_count = 0
    doubling_count = 0
    for c_const in c_grid:
        for rho in rho_grid:
            rep = lm.an_identities(float(c_const), float(rho), n_max)
            worst_doubling = max(worst_doubling, rep.doubling_max_residual)
            doubling_count += rep.doubling_checked
            chain_count += len(rep.chain_values)
            if not rep.chain_ok:
                chain_violations += 1
    rows.append(("power_doubling", doubling_count, worst_doubling, int(worst_doubling > 1e-12)))
    rows.append(("power_chain", chain_count, 0.0, chain_violations))

    failures = []
    expect = config.get("expectations", {})
    if expect.get("zero_violations") and any(row[3] for row in rows):
        failures.append("bound violations present")
    return columns, rows, {"radius": radius, "seed": seed}, failures, None


def _run_cocycle_smooth(config: dict):
    mus = [float(m) for m in config.get("mus", [1.0, 5.0])]
    w = _coords(config.get("coboundary_w", {"re": [1.0] * len(mus), "im": [0.0] * len(mus)}))
    window = float(config.get("window", 2.5))
    bump = cc.standard_mollifier(float(config.get("bump_length", 1.0)))
    rough = config.get("roughness", {})
    amplitude = float(rough.get("amplitude", 0.0))
    scale = float(rough.get("scale", 1e-9))
    fine_step = float(config.get("fine_step", max(scale, 1e-12)))
    coarse_step = float(config.get("coarse_step", 1e-3))

    mus_arr = np.asarray(mus)

    def u_apply(t, vec):
        return np.exp(1j * mus_arr * t) * np.asarray(vec, dtype=complex)

    direction = np.ones(len(mus)) / np.sqrt(len(mus))

    def alpha_eval(t):
        base = (np.exp(1j * mus_arr * t) - 1.0) * w
        if amplitude:
            saw = t / scale - np.round(t / scale)
            base = base + amplitude * abs(saw) * direction
        return base

    alpha = cc.CocycleCurve(alpha_eval, (0.0, window))
    score_before = cc.smoothness_score(
        alpha_eval, (0.1, 0.9), base_step=fine_step, orders=(1,)
    )
    beta = cc.smooth_equivalent(alpha, u_apply, bump)
    hi = beta.window[1]
    score_after = cc.smoothness_score(
        beta, (0.0, min(1.2, hi)), base_step=coarse_step, orders=(1,)
    )
    rng_pairs = [(0.1, 0.2), (0.3, 0.5), (0.05, 0.7), (0.4, 0.4), (0.25, 0.6)]
    pairs = [(s, t) for s, t in rng_pairs if s + t <= hi]
    defect = cc.max_cocycle_defect(beta, u_apply, pairs)
    diff = lambda t: beta(t) - alpha(t)
    ts = np.linspace(0.05, min(0.95, hi), 10)
    _, fit_residual = cc.fit_coboundary(diff, u_apply, ts, len(mus))

    columns = ("metric", "value")
    rows = [
        ("smoothness_before_order1", score_before.scores[1]),
        ("smoothness_after_order1", score_after.scores[1]),
        ("cocycle_defect_after", defect),
        ("coboundary_fit_residual", fit_residual),
        ("consistency_residual", beta.consistency_residual),
    ]
    failures = []
    expect = config.get("expectations", {})
    if expect.get("before_fails_order1") and score_before.passes(1):
        failures.append("input unexpectedly passes the order-1 smoothness proxy")
    if "after_passes_below" in expect and not score_after.scores[1] <= expect["after_passes_below"]:
        failures.append("smoothed output fails the order-1 smoothness proxy")
    if "defect_below" in expect and not defect < expect["defect_below"]:
        failures.append(f"cocycle defect {defect:.3g} above bound")
    if "fit_below" in expect and not fit_residual < expect["fit_below"]:
        failures.append(f"coboundary fit residual {fit_residual:.3g} above bound")
    return columns, rows, {"window": window}, failures, None


# ---------------------------------------------------------------------------
# report writers
# ---------------------------------------------------------------------------


def _format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path: Path, columns, rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])


def write_json(path: Path, experiment, config, seed, columns, rows, summary) -> None:
    payload = {
        "experiment": experiment,
        "config": config,
        "seed": seed,
        "columns": list(columns),
        "rows": [[_jsonable(c) if not isinstance(c, str) else c for c in row] for row in rows],
        "summary": summary,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_svg(path: Path, series) -> None:
    """Log-log error plot: one polyline per labelled series."""
    width, height, margin = 640, 480, 60
    points = [
        (x, y)
        for _, xs, ys in series
        for x, y in zip(xs, ys)
        if x > 0 and y > 0 and np.isfinite(y)
    ]
    if not points:
        raise HalfLieError("nothing plottable: no positive finite errors")
    lx = [np.log10(p[0]) for p in points]
    ly = [np.log10(p[1]) for p in points]
    x_lo, x_hi = min(lx), max(lx)
    y_lo, y_hi = min(ly), max(ly)
    x_span = max(x_hi - x_lo, 1e-9)
    y_span = max(y_hi - y_lo, 1e-9)

    def to_px(x, y):
        px = margin + (np.log10(x) - x_lo) / x_span * (width - 2 * margin)
        py = height - margin - (np.log10(y) - y_lo) / y_span * (height - 2 * margin)
        return f"{px:.2f},{py:.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
    ]
    palette = ("#1b6ca8", "#a83232", "#2e8b57", "#8b6d2e", "#6a2ea8", "#2ea89b")
    for i, (label, xs, ys) in enumerate(series):
        pts = " ".join(
            to_px(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0 and np.isfinite(y)
        )
        color = palette[i % len(palette)]
        parts.append(f'<polyline fill="none" stroke="{color}" points="{pts}"/>')
        parts.append(
            f'<text x="{width - margin + 4}" y="{margin + 16 * i + 12}" '
            f'font-size="12" fill="{color}">{label}</text>'
        )
    parts.append(
        f'<text x="{width // 2}" y="{height - margin // 4}" font-size="12">log n</text>'
    )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")


def run_experiment(config: dict, out_dir: Path, fmt: str, seed: int, jobs: int) -> int:
    """Dispatch, write the report plus manifest, return the exit code."""
    experiment = config["experiment"]
    started = time.perf_counter()
    plottable = None
    if experiment in ("trotter", "strong-trotter", "commutator"):
        if experiment == "commutator" and "ladder" in config:
            columns, rows, summary, failures, plottable = _run_commutator_ladder(config)
        else:
            columns, rows, summary, failures, plottable = _run_sequences(
                config, seed, jobs, experiment
            )
    elif experiment == "evolve":
        columns, rows, summary, failures, plottable = _run_evolve(config, seed, jobs)
    elif experiment == "seminorms":
        columns, rows, summary, failures, plottable = _run_seminorms(config)
    elif experiment == "bounds":
        columns, rows, summary, failures, plottable = _run_bounds(config, seed)
    else:
        columns, rows, summary, failures, plottable = _run_cocycle_smooth(config)

    stem = config.get("output", {}).get("stem", experiment.replace("-", "_"))
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        write_csv(out_dir / f"{stem}.csv", columns, rows)
    elif fmt == "json":
        write_json(out_dir / f"{stem}.json", experiment, config, seed, columns, rows, summary)
    else:
        if plottable is None:
            raise ConfigError("output", f"svg format not available for {experiment}")
        write_svg(out_dir / f"{stem}.svg", plottable)

    manifest = {
        "config": config,
        "version": __version__,
        "seed": seed,
        "wall_time_s": time.perf_counter() - started,
        "summary": summary,
        "expectation_failures": failures,
    }
    with open(out_dir / f"{stem}.manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")

    for line in failures:
        print(f"expectation failed: {line}", file=sys.stderr)
    return 2 if failures else 0


def main(argv=None) -> int:
    parser = _Parser(prog="halflie", description=__doc__)
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", default="csv", choices=("csv", "json", "svg"))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return 1

    try:
        config = parse_config(text)
        if config["experiment"] != args.experiment:
            raise ConfigError(
                "experiment", f"config says {config['experiment']!r}, subcommand is {args.experiment!r}"
            )
        return run_experiment(config, Path(args.out), args.format, args.seed, args.jobs)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except _NUMERICAL_ERRORS as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    except HalfLieError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
