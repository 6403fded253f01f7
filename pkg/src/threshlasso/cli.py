"""Command-line interface: fit, infer, lp, and simulate subcommands.

Input is a headed CSV; outputs are JSON reports, CSV mirrors for downstream
tooling, and rendered PNG figures, all written into the output directory.
Exit codes: 0 success, 1 input/usage error, 2 estimation failure; every
failure prints a single line starting with ``error:`` to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import plots
from .design import Sample, build_design, make_grid
from .errors import EstimationError, InputError
from .hac import HacConfig
from .inference import build_report
from .lp import LpSpec, lp_fit
from .montecarlo import PRESETS, McConfig, run_simulation, write_outputs
from .nodewise import assemble_theta
from .search import profile_fit
from .solver import nodewise_lambda, select_lambda

__all__ = ["main", "read_csv"]

_DEFAULTS = {
    "input": None,
    "output": ".",
    "y": "y",
    "q": "q",
    "x": None,
    "grid_lo": 0.15,
    "grid_hi": 0.85,
    "grid_points": 71,
    "lam": None,
    "alpha": 0.05,
    "bandwidth": 0,
    "hmax": 8,
    "lags": 4,
    "shock": 0,
    "preset": None,
    "seed": None,
    "reps": None,
    "threads": None,
    "config": None,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route usage problems to the exit-1 path
        raise InputError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="threshlasso", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", metavar="{fit,infer,lp,simulate}")

    def add_common(p):
        p.add_argument("--input", help="input CSV with header row")
        p.add_argument("--output", help="output directory (default: .)")
        p.add_argument("--y", help="response column name (default: y)")
        p.add_argument("--q", help="threshold-variable column name (default: q)")
        p.add_argument(
            "--x",
            help="covariate columns: comma list of names and/or i-j index ranges "
            "(default: every column other than y and q)",
        )
        p.add_argument("--grid-lo", dest="grid_lo", type=float)
        p.add_argument("--grid-hi", dest="grid_hi", type=float)
        p.add_argument("--grid-points", dest="grid_points", type=int)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--bandwidth", type=int)
        p.add_argument("--hmax", type=int)
        p.add_argument("--lags", type=int)
        p.add_argument("--shock", type=int)
        p.add_argument("--preset", help="simulation preset name")
        p.add_argument("--seed", type=int)
        p.add_argument("--reps", type=int, help="override preset replication count")
        p.add_argument("--threads", type=int)
        p.add_argument("--config", help="JSON config file; flags take precedence")

    for name, fn in (
        ("fit", _cmd_fit),
        ("infer", _cmd_infer),
        ("lp", _cmd_lp),
        ("simulate", _cmd_simulate),
    ):
        p = sub.add_parser(name)
        add_common(p)
        p.set_defaults(handler=fn)
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    """Merge flags over config-file values over defaults, then validate."""
    file_cfg = {}
    cfg_path = getattr(args, "config", None)
    if cfg_path is not None:
        try:
            with open(cfg_path, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed config file {cfg_path}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise InputError(f"config file {cfg_path} must hold a JSON object")

    opts = {}
    for key, default in _DEFAULTS.items():
        val = getattr(args, key, None)
        if val is None:
            val = file_cfg.get(key, default)
        opts[key] = val
    opts["mc"] = file_cfg.get("mc", {})

    if not 0.0 < opts["alpha"] < 1.0:
        raise InputError(f"--alpha must be in (0, 1), got {opts['alpha']}")
    if not 0.0 < opts["grid_lo"] < opts["grid_hi"] < 1.0:
        raise InputError(
            f"grid bounds must satisfy 0 < lo < hi < 1, got "
            f"{opts['grid_lo']}, {opts['grid_hi']}"
        )
    if opts["grid_points"] < 1:
        raise InputError(f"--grid-points must be >= 1, got {opts['grid_points']}")
    if opts["bandwidth"] < 0:
        raise InputError(f"--bandwidth must be >= 0, got {opts['bandwidth']}")
    if opts["hmax"] < 0 or opts["lags"] < 0:
        raise InputError("--hmax and --lags must be >= 0")
    if opts["threads"] is not None and opts["threads"] < 1:
        raise InputError(f"--threads must be >= 1, got {opts['threads']}")
    if opts["lam"] is not None and opts["lam"] < 0:
        raise InputError(f"--lambda must be >= 0, got {opts['lam']}")
    return opts


def _parse_x_spec(spec: str, header: list[str]) -> list[int]:
    """Expand an --x value into header indices.

    Items are column names or 0-based inclusive index ranges written ``i-j``.
    """
    idx: list[int] = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split("-")
        if len(parts) == 2 and parts[0].strip().isdigit() and parts[1].strip().isdigit():
            a, b = int(parts[0]), int(parts[1])
            if a > b or b >= len(header):
                raise InputError(f"--x range '{item}' out of bounds for {len(header)} columns")
            idx.extend(range(a, b + 1))
        elif item in header:
            idx.append(header.index(item))
        else:
            raise InputError(f"--x column '{item}' not found in header")
    if not idx:
        raise InputError(f"--x spec '{spec}' selects no columns")
    return idx


def read_csv(path: str, y_name: str = "y", q_name: str = "q", x_spec: str | None = None):
    """Parse a headed CSV into a Sample (rows kept in file order).

    Returns ``(sample, x_names)``.  Ragged rows, non-numeric cells, and
    non-finite values are rejected with their row numbers (header = line 1).
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read input file: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [cell.strip() for cell in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file, 0 data rows") from None

        for name in (y_name, q_name):
            if name not in header:
                raise InputError(f"column '{name}' not found in header of {path}")
        y_idx = header.index(y_name)
        q_idx = header.index(q_name)
        if x_spec is None:
            x_idx = [i for i in range(len(header)) if i not in (y_idx, q_idx)]
            if not x_idx:
                raise InputError(f"{path}: no covariate columns besides y and q")
        else:
            x_idx = _parse_x_spec(x_spec, header)
            if y_idx in x_idx or q_idx in x_idx:
                raise InputError("--x must not include the y or q columns")

        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise InputError(
                    f"{path} row {lineno}: expected {len(header)} cells, got {len(cells)}"
                )
            parsed = []
            for i in (y_idx, q_idx, *x_idx):
                cell = cells[i].strip()
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise InputError(
                        f"{path} row {lineno}: non-numeric value '{cell}' "
                        f"in column '{header[i]}'"
                    ) from None
            rows.append((lineno, parsed))

        if not rows:
            raise InputError(f"{path}: 0 data rows")
        data = np.array([vals for _, vals in rows], dtype=float)
        bad = [str(rows[i][0]) for i in np.nonzero(~np.isfinite(data).all(axis=1))[0]]
        if bad:
            shown = ", ".join(bad[:10]) + (", ..." if len(bad) > 10 else "")
            raise InputError(f"{path}: rows with non-finite values rejected: {shown}")

    sample = Sample(y=data[:, 0], x=data[:, 2:], q=data[:, 1], time_ordered=True)
    return sample, [header[i] for i in x_idx]


def _require_input(opts) -> tuple[Sample, list[str]]:
    if opts["input"] is None:
        raise InputError("missing --input CSV path")
    return read_csv(opts["input"], opts["y"], opts["q"], opts["x"])


def _json_dump(obj: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fit_pipeline(sample: Sample, opts):
    grid = make_grid(
        sample,
        opts["grid_lo"],
        opts["grid_hi"],
        mode="quantile-count",
        count=opts["grid_points"],
    )
    lam = opts["lam"]
    if lam is None:
        mid = float(grid.candidates[len(grid) // 2])
        lam = select_lambda(build_design(sample, mid).xaug, sample.y, rule="plugin")
    fit = profile_fit(sample, grid, float(lam))
    return fit, grid


def _write_fit_outputs(fit, sample, x_names, out_dir) -> None:
    p = sample.p
    with open(os.path.join(out_dir, "coefficients.csv"), "w", encoding="utf-8") as fh:
        fh.write("coord,name,block,estimate\n")
        for j, value in enumerate(fit.alpha_hat):
            name = x_names[j % p]
            block = "base" if j < p else "shift"
            fh.write(f"{j},{name},{block},{float(value)!r}\n")
    _json_dump(
        {
            "tau_hat": fit.tau_hat,
            "lambda": fit.lam,
            "objective": fit.objective_min,
            "argmin_candidates": [float(fit.candidates[i]) for i in fit.argmin_set],
            "n_active": int(np.sum(fit.alpha_hat != 0.0)),
            "max_kkt_violation": float(np.max(fit.kkt_violations)),
            "all_converged": bool(np.all(fit.converged)),
        },
        os.path.join(out_dir, "fit.json"),
    )
    with open(os.path.join(out_dir, "profile.csv"), "w", encoding="utf-8") as fh:
        fh.write("tau,objective\n")
        for t, v in zip(fit.candidates, fit.profile):
            fh.write(f"{float(t)!r},{float(v)!r}\n")
    plots.profile_plot(
        fit.candidates, fit.profile, fit.tau_hat, os.path.join(out_dir, "profile.png")
    )


def _cmd_fit(opts) -> int:
    sample, x_names = _require_input(opts)
    out_dir = opts["output"]
    os.makedirs(out_dir, exist_ok=True)
    fit, _ = _fit_pipeline(sample, opts)
    _write_fit_outputs(fit, sample, x_names, out_dir)
    print(f"tau_hat={fit.tau_hat!r} lambda={fit.lam!r} wrote {out_dir}")
    return 0


def _cmd_infer(opts) -> int:
    sample, x_names = _require_input(opts)
    out_dir = opts["output"]
    os.makedirs(out_dir, exist_ok=True)
    fit, _ = _fit_pipeline(sample, opts)
    _write_fit_outputs(fit, sample, x_names, out_dir)

    lam_node = nodewise_lambda(sample.n, sample.p)
    theta = assemble_theta(sample, fit.tau_hat, lam_node, rows="all")
    report = build_report(sample, fit, theta, alpha_level=opts["alpha"])

    _json_dump(report.to_json_dict(), os.path.join(out_dir, "report.json"))
    p = sample.p
    with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write("coord,name,block,estimate,debiased,se,z,ci_lo,ci_hi,reject_bonferroni\n")
        for j in range(2 * p):
            fh.write(
                f"{j},{x_names[j % p]},{'base' if j < p else 'shift'},"
                f"{float(report.coef[j])!r},{float(report.a_hat[j])!r},"
                f"{float(report.se[j])!r},{float(report.z[j])!r},"
                f"{float(report.ci_lo[j])!r},{float(report.ci_hi[j])!r},"
                f"{int(report.reject_bonferroni[j])}\n"
            )
    plots.ci_plot(
        report.a_hat,
        report.ci_lo,
        report.ci_hi,
        os.path.join(out_dir, "intervals.png"),
    )
    print(f"tau_hat={fit.tau_hat!r} wrote {out_dir}")
    return 0


def _cmd_lp(opts) -> int:
    sample, _ = _require_input(opts)
    out_dir = opts["output"]
    os.makedirs(out_dir, exist_ok=True)
    spec = LpSpec(h_max=opts["hmax"], lags=opts["lags"], shock_index=opts["shock"])
    result = lp_fit(
        sample,
        spec,
        lam=opts["lam"],
        hac_cfg=HacConfig(bandwidth=opts["bandwidth"]),
        alpha_level=opts["alpha"],
        grid_lo=opts["grid_lo"],
        grid_hi=opts["grid_hi"],
        grid_count=opts["grid_points"],
    )
    irf = result.irf
    with open(os.path.join(out_dir, "irf.csv"), "w", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["horizon", "regime", "estimate", "se", "ci_lo", "ci_hi"]
        )
        writer.writeheader()
        for row in irf.to_rows():
            writer.writerow(row)
    _json_dump(
        {
            "tau_hat": irf.tau_hat,
            "lambda": irf.lam,
            "alpha_level": irf.alpha_level,
            "h_max": spec.h_max,
            "lags": spec.lags,
            "shock_index": spec.shock_index,
            "bandwidths": [int(k) for k in irf.bandwidths],
        },
        os.path.join(out_dir, "lp.json"),
    )
    plots.irf_plot(irf, os.path.join(out_dir, "irf.png"))
    print(f"tau_hat={irf.tau_hat!r} wrote {out_dir}")
    return 0


def _cmd_simulate(opts) -> int:
    if opts["preset"] is not None:
        if opts["preset"] not in PRESETS:
            known = ", ".join(sorted(PRESETS))
            raise InputError(f"unknown preset '{opts['preset']}'; choose from: {known}")
        kwargs = asdict(PRESETS[opts["preset"]])
    else:
        kwargs = asdict(McConfig())
    mc_over = opts["mc"]
    if not isinstance(mc_over, dict):
        raise InputError("config key 'mc' must hold an object of config fields")
    unknown = set(mc_over) - set(kwargs)
    if unknown:
        raise InputError(f"unknown mc config fields: {', '.join(sorted(unknown))}")
    kwargs.update(mc_over)
    if opts["seed"] is not None:
        kwargs["seed"] = opts["seed"]
    if opts["reps"] is not None:
        kwargs["n_reps"] = opts["reps"]
    kwargs["alpha_level"] = opts["alpha"]
    cfg = McConfig(**kwargs)

    threads = opts["threads"]
    if threads is None:
        env = os.environ.get("THRESHLASSO_THREADS", "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise InputError(
                    f"THRESHLASSO_THREADS must be an integer, got '{env}'"
                ) from None
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise InputError(f"thread count must be >= 1, got {threads}")

    out_dir = opts["output"]
    report, records = run_simulation(cfg, threads=threads)
    paths = write_outputs(report, records, out_dir)
    qq = plots.qq_plot(report.z_pool, os.path.join(out_dir, "qq.png"))
    for path in [*paths, qq]:
        print(f"wrote {path}")
    tau_part = (
        f"mean_abs_tau_err={report.mean_abs_tau_err!r} "
        if report.mean_abs_tau_err is not None
        else ""
    )
    print(
        f"{tau_part}ell={report.ell!r} cov={report.cov!r} "
        f"fwer={report.fwer!r} power={report.power!r}"
    )
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "handler", None) is None:
            raise InputError("missing subcommand: choose fit, infer, lp, or simulate")
        opts = _resolve(args)
        return args.handler(opts)
    except SystemExit as exc:  # argparse --help
        code = exc.code
        return int(code) if isinstance(code, int) else 0
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
