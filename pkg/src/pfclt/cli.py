"""Command-line surface: scans and checks with CSV/JSON artifacts.

Every command echoes its configuration, writes one table plus a block of
machine-readable pass/fail checks, and exits 0 exactly when all checks pass.
Output is byte-identical across reruns apart from the timestamp line.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys

import numpy as np

from . import __version__
from .cumulants import clt_diagnostic, cumulant_counts, cumulant_linear_stat, expectation_variance
from .discretize import StepFunction
from .ensembles import EnsembleConfig, fluctuation_scan
from .errors import ValidationError
from .frcp import verify_frcp
from .kernels import correlation_at, kernel_by_name

COUNT_SLOPE_TARGET = {"sine4": 1.0 / (2 * np.pi**2), "sine1": 2.0 / np.pi**2}


class PointsFileError(ValueError):
    pass


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def write_artifact(path, fmt, command, config, columns, rows, checks):
    """Write the result table and check block as CSV or JSON."""
    if fmt == "json":
        payload = {
            "command": command,
            "version": __version__,
            "timestamp": _timestamp(),
            "config": config,
            "columns": list(columns),
            "rows": [[(float(v) if isinstance(v, (int, float, np.floating)) else v)
                      for v in row] for row in rows],
            "checks": checks,
        }
        text = json.dumps(payload, indent=2) + "\n"
    else:
        lines = [f"# pfclt {command} v{__version__}"]
        lines.append(f"# timestamp: {_timestamp()}")
        echo = " ".join(f"{k}={v}" for k, v in config.items())
        lines.append(f"# config: {echo}")
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        for chk in checks:
            status = chk["status"]
            extras = " ".join(
                f"{k}={_fmt(v)}" for k, v in chk.items() if k not in ("name", "status")
            )
            lines.append(f"# check: name={chk['name']} status={status} {extras}".rstrip())
        text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _check(name, passed, **extras):
    return {"name": name, "status": "PASS" if passed else "FAIL", **extras}


def _skip(name, **extras):
    return {"name": name, "status": "SKIP", **extras}


def all_pass(checks) -> bool:
    return all(c["status"] != "FAIL" for c in checks)


def parse_l_list(text) -> list:
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise ValidationError(f"scale list must be nonempty ascending, got {text!r}")
    return values


def parse_step(text) -> StepFunction:
    """Parse 'lam:a:b,lam:a:b' into a step function."""
    pieces = []
    for part in text.split(","):
        fields = part.split(":")
        if len(fields) != 3:
            raise ValidationError(f"step piece {part!r} is not lam:a:b")
        pieces.append(tuple(float(v) for v in fields))
    return StepFunction(tuple(pieces))


def parse_points_arg(text) -> list:
    rows = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if chunk:
            rows.append([float(v) for v in chunk.split(",")])
    return rows


def read_points_file(path) -> list:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(v) for v in line.replace(",", " ").split()])
            except ValueError as exc:
                raise PointsFileError(f"{path}:{lineno}: cannot parse {line!r}") from exc
    return rows


def step_slope_target(kernel_name, step: StepFunction):
    """Asymptotic log-variance slope for a scaled step statistic, if known."""
    if step is None:
        return COUNT_SLOPE_TARGET[kernel_name]
    if kernel_name != "sine4":
        return None
    lams = [p[0] for p in step.pieces]
    total = sum(l * l for l in lams)
    for (l1, _, b1), (l2, a2, _) in zip(step.pieces, step.pieces[1:]):
        if np.isclose(b1, a2, rtol=0, atol=1e-12 * max(1.0, abs(b1))):
            total -= l1 * l2
    return total / (2 * np.pi**2)


def _fit_slope(l_values, y_values) -> float:
    return float(np.polyfit(np.log(np.asarray(l_values)), np.asarray(y_values), 1)[0])


# ------------------------------------------------------------- commands


def cmd_correlation_eval(args) -> int:
    kernel = kernel_by_name(args.kernel)
    if args.points_file:
        try:
            point_rows = read_points_file(args.points_file)
        except PointsFileError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    else:
        point_rows = parse_points_arg(args.points)
    rows, checks = [], []
    for pts in point_rows:
        rho, degenerate = correlation_at(kernel, pts)
        rows.append([len(pts), " ".join(repr(p) for p in pts), rho,
                     "degenerate" if degenerate else "ok"])
    checks.append(
        _check(
            "correlations_nonnegative",
            all(row[2] >= -1e-10 for row in rows),
            min_value=min(row[2] for row in rows),
        )
    )
    config = {"kernel": args.kernel, "rows": len(rows)}
    write_artifact(args.out, args.format, "correlation-eval", config,
                   ["k", "points", "rho", "flag"], rows, checks)
    return 0 if all_pass(checks) else 1


def cmd_variance_scan(args) -> int:
    kernel = kernel_by_name(args.kernel)
    l_values = parse_l_list(args.L)
    step = parse_step(args.step) if args.step else StepFunction(((1.0, -1.0, 1.0),))
    target = step_slope_target(args.kernel, parse_step(args.step) if args.step else None)
    rows = []
    variances = []
    for L in l_values:
        e, v = expectation_variance(kernel, step, L, nodes_per_unit=args.grid_density)
        variances.append(v)
        rows.append([L, e, v, ""])
    slope = _fit_slope(l_values, variances) if len(l_values) >= 2 else float("nan")
    rows[-1][3] = slope
    checks = []
    if target is None or len(l_values) < 2:
        checks.append(_skip("variance_log_slope", slope=slope))
    else:
        tol = args.slope_tolerance
        checks.append(
            _check(
                "variance_log_slope",
                abs(slope - target) <= tol * target,
                slope=slope,
                target=target,
                tolerance=tol,
            )
        )
    config = {
        "kernel": args.kernel,
        "L": args.L,
        "grid_density": args.grid_density,
        "step": args.step or "counts",
    }
    write_artifact(args.out, args.format, "variance-scan", config,
                   ["L", "expectation", "variance", "log_slope"], rows, checks)
    return 0 if all_pass(checks) else 1


def cmd_cumulant_scan(args) -> int:
    kernel = kernel_by_name(args.kernel)
    l_values = parse_l_list(args.L)
    step = parse_step(args.step) if args.step else None
    n_max = args.nmax
    reports = []
    for L in l_values:
        if step is None:
            reports.append(cumulant_counts(kernel, L, n_max, nodes_per_unit=args.grid_density))
        else:
            reports.append(
                cumulant_linear_stat(kernel, step, L, n_max, nodes_per_unit=args.grid_density)
            )
    columns = ["L", "expectation", "variance"]
    columns += [f"c_{n}" for n in range(3, n_max + 1)]
    columns += [f"normalized_{n}" for n in range(3, n_max + 1)]
    rows = []
    for rep in reports:
        row = [rep.L, rep.expectation, rep.variance]
        row += list(rep.c_n[2:])
        row += list(rep.normalized[2:])
        rows.append(row)
    checks = []
    for n in range(3, n_max + 1):
        series = [abs(rep.normalized[n - 1]) for rep in reports]
        if len(series) >= 2:
            checks.append(
                _check(
                    f"normalized_c{n}_decreasing",
                    all(b < a for a, b in zip(series, series[1:])),
                    first=series[0],
                    last=series[-1],
                )
            )
        else:
            checks.append(_skip(f"normalized_c{n}_decreasing"))
    config = {
        "kernel": args.kernel,
        "L": args.L,
        "nmax": n_max,
        "grid_density": args.grid_density,
        "step": args.step or "counts",
    }
    write_artifact(args.out, args.format, "cumulant-scan", config, columns, rows, checks)
    return 0 if all_pass(checks) else 1


def cmd_frcp_check(args) -> int:
    kernel = kernel_by_name(args.kernel)
    l_values = parse_l_list(args.L)
    rows, checks = [], []
    for L in l_values:
        chk = verify_frcp(kernel, L, n_nodes=args.grid_nodes)
        rows.append(
            [
                L,
                chk.first.residual,
                chk.first.ratio,
                chk.second.residual,
                chk.second.ratio,
                chk.first.declared_rank,
            ]
        )
        checks.append(
            _check(
                f"rank_and_closed_form_L{L:g}",
                chk.passed
                and chk.first.residual <= args.residual_tolerance
                and chk.second.residual <= args.residual_tolerance,
                first_residual=chk.first.residual,
                second_residual=chk.second.residual,
                sigma_ratio=max(chk.first.ratio, chk.second.ratio),
                rank=chk.first.declared_rank,
            )
        )
    config = {"kernel": args.kernel, "L": args.L, "grid_nodes": args.grid_nodes}
    write_artifact(
        args.out,
        args.format,
        "frcp-check",
        config,
        ["L", "first_residual", "first_sigma_ratio", "second_residual",
         "second_sigma_ratio", "rank"],
        rows,
        checks,
    )
    return 0 if all_pass(checks) else 1


def cmd_mc_clt(args) -> int:
    l_values = parse_l_list(args.L)
    step = parse_step(args.step) if args.step else None
    config_obj = EnsembleConfig(
        beta=args.beta,
        matrix_size=args.matrix_size,
        samples=args.samples,
        seed=args.seed,
        window=l_values[-1],
        step=step,
    )
    reports = fluctuation_scan(config_obj, l_values)
    intensity = 1.0 if args.beta == 4 else 2.0
    rows, checks = [], []
    for L, rep in zip(l_values, reports):
        se = float(np.sqrt(rep.variance / len(rep.values)))
        if step is None:
            expected = intensity * L
            mean_ok = abs(rep.mean - expected) <= 3 * se
            checks.append(
                _check(
                    f"mean_count_L{L:g}", mean_ok, mean=rep.mean,
                    expected=expected, se=se,
                )
            )
        else:
            expected = float("nan")
        rows.append([L, rep.mean, expected, se, rep.variance, rep.k3, rep.k4,
                     rep.ks_distance])
    kernel_name = "sine4" if args.beta == 4 else "sine1"
    target = step_slope_target(kernel_name, step)
    if len(l_values) >= 2 and target is not None:
        slope = _fit_slope(l_values, [rep.variance for rep in reports])
        checks.append(
            _check(
                "variance_log_slope",
                abs(slope - target) <= 0.25 * target,
                slope=slope,
                target=target,
                tolerance=0.25,
            )
        )
    ks = reports[-1].ks_distance
    checks.append(
        _check("ks_normality", ks <= args.ks_threshold, ks=ks,
               threshold=args.ks_threshold)
    )
    config = {
        "beta": args.beta,
        "L": args.L,
        "samples": args.samples,
        "matrix_size": args.matrix_size,
        "seed": args.seed,
        "step": args.step or "counts",
    }
    write_artifact(
        args.out,
        args.format,
        "mc-clt",
        config,
        ["L", "mean", "expected_mean", "se", "variance", "k3", "k4", "ks"],
        rows,
        checks,
    )
    return 0 if all_pass(checks) else 1


# ------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pfclt",
        description="Pfaffian sine-process statistics: scans, checks, Monte Carlo",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("correlation-eval", help="k-point correlations via Pfaffians")
    p.add_argument("--kernel", choices=("sine1", "sine4"), required=True)
    p.add_argument("--points", default="", help="rows 'x1,x2;y1,y2,...'")
    p.add_argument("--points-file", default="", help="file with one point tuple per line")
    common(p)
    p.set_defaults(func=cmd_correlation_eval)

    p = sub.add_parser("variance-scan", help="E and Var of counts or a step statistic")
    p.add_argument("--kernel", choices=("sine1", "sine4"), required=True)
    p.add_argument("--L", required=True, help="ascending comma list of scales")
    p.add_argument("--grid-density", type=float, default=16.0)
    p.add_argument("--step", default="", help="step function 'lam:a:b,...'")
    p.add_argument("--slope-tolerance", type=float, default=0.10)
    common(p)
    p.set_defaults(func=cmd_variance_scan)

    p = sub.add_parser("cumulant-scan", help="cumulants and CLT diagnostics over scales")
    p.add_argument("--kernel", choices=("sine1", "sine4"), required=True)
    p.add_argument("--L", required=True)
    p.add_argument("--nmax", type=int, default=4)
    p.add_argument("--grid-density", type=float, default=8.0)
    p.add_argument("--step", default="")
    common(p)
    p.set_defaults(func=cmd_cumulant_scan)

    p = sub.add_parser("frcp-check", help="commutator rank and closed-form residuals")
    p.add_argument("--kernel", choices=("sine1", "sine4"), required=True)
    p.add_argument("--L", required=True)
    p.add_argument("--grid-nodes", type=int, default=1024)
    p.add_argument("--residual-tolerance", type=float, default=1e-5)
    common(p)
    p.set_defaults(func=cmd_frcp_check)

    p = sub.add_parser("mc-clt", help="Monte Carlo counting statistics vs the CLT")
    p.add_argument("--beta", type=int, choices=(1, 4), required=True)
    p.add_argument("--L", required=True)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--matrix-size", type=int, default=2000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--step", default="")
    p.add_argument("--ks-threshold", type=float, default=0.02)
    common(p)
    p.set_defaults(func=cmd_mc_clt)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
