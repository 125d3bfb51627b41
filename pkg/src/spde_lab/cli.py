"""Command-line front end: reproducible experiment runs with CSV/JSON artifacts.

Every run resolves its parameters into a flat config dict that is embedded
in all emitted artifacts (and written as ``config.json``); re-running with
``--config config.json`` reproduces the artifacts byte for byte. Exit codes:
0 success, 2 validation failure (with an error JSON on stdout), 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import (
    SpectralMeasure,
    check_dalang_riesz,
    check_fractional,
    dalang_gronwall_certificate,
    dalang_integral_numeric,
)
from .errors import DomainError, InputError, NumericalError, SpdeLabError
from .field import write_csv as write_field_csv, write_spdf
from .grids import SpaceTimeGrid, TimeGrid
from .kernels import OperatorSpec
from .moments import (
    MomentReport,
    estimate_moments,
    fit_log_slope,
    fk_second_moment,
    linear_heat_holder_study,
    lyapunov_closed_form,
)
from .noise import (
    NoiseSpec,
    sample_bm_paths,
    sample_fbm_paths,
    sample_homogeneous_noise,
    sample_white_noise_sheet,
)
from .rng import RngStream, map_replica_blocks
from .solvers import chaos_geometric_partials, pam_chaos_series

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(json.dumps({"error": "usage", "message": message}), file=sys.stdout)
        raise SystemExit(EXIT_VALIDATION)


def _canonical(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def _write_json(path: Path, config: dict, results: dict) -> None:
    payload = {"version": __version__, "config": config, "results": results}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _csv_header(config: dict) -> str:
    return f"# spde-lab {__version__}\n# config: {_canonical(config)}\n"


def _write_csv(path: Path, config: dict, body: str) -> None:
    path.write_text(_csv_header(config) + body)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _resolve_threads(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("SPDE_LAB_THREADS")
    return int(env) if env else 1


def _resolve_seed(args) -> int:
    if args.seed is None:
        if args.strict:
            raise InputError("--seed is required in --strict mode")
        return 0
    return int(args.seed)


# ---------------------------------------------------------------------------
# subcommand implementations (each takes the resolved config dict)
# ---------------------------------------------------------------------------


def _auto_pam_grid(t: float, n_steps: int, half_width: float | None) -> SpaceTimeGrid:
    half = 8.0 * math.sqrt(t) if half_width is None else half_width
    dt = t / n_steps
    n_cells = int(np.ceil(2 * half / (0.8 * math.sqrt(dt))))
    n_cells += n_cells % 2
    return SpaceTimeGrid(TimeGrid(t, n_steps), half, n_cells)


def run_simulate(cfg: dict, out: Path, threads: int = 1) -> None:
    model = cfg["model"]
    ts = cfg["t"]
    ps = cfg["p"]
    replicas = cfg["replicas"]
    stream = RngStream(cfg["seed"])
    rows = []
    for i, t in enumerate(ts):
        if model == "gbm":
            def block(gen, count, t=t):
                inc = gen.standard_normal((count, 1)) * math.sqrt(t)
                return np.exp(inc[:, 0] - t / 2.0)

            x = map_replica_blocks(replicas, block, stream.substream(i << 32), threads=threads)
        elif model == "gfbm":
            hurst = cfg["hurst"]

            def block(gen, count, t=t, hurst=hurst):
                z = gen.standard_normal((count, 1)) * t**hurst
                return np.exp(z[:, 0] - t ** (2 * hurst) / 2.0)

            x = map_replica_blocks(replicas, block, stream.substream(i << 32), threads=threads)
        elif model == "pam-white":
            from .solvers import pam_euler_final_batch

            grid = _auto_pam_grid(t, cfg["n_steps"], cfg.get("half_width"))
            vol = math.sqrt(grid.cell_volume)
            mid = grid.n_cells // 2

            def block(gen, count, grid=grid, vol=vol, mid=mid):
                w = gen.standard_normal((count,) + grid.cell_shape()) * vol
                return pam_euler_final_batch(grid, w)[:, mid]

            x = map_replica_blocks(
                replicas, block, stream.substream(i << 32), block_size=64, threads=threads
            )
        else:
            raise InputError(f"unknown model {cfg['model']!r}")
        rows.extend(estimate_moments(x, ps, model=model, t=t))

    report = MomentReport(rows=rows)
    if cfg["fit"] and len(ts) >= 4:
        name = {"gbm": "gbm", "gfbm": "gfbm", "pam-white": "pam_white"}[model]
        lam, kappa = lyapunov_closed_form(name, ps[0], cfg.get("hurst"))
        report.kappa = kappa
        report.fitted_lambda = fit_log_slope(
            ts, [r.estimate for r in rows if r.p == ps[0]], kappa
        )
        report.closed_form_lambda = lam
    _write_csv(out / "moments.csv", cfg, report.csv_text())
    _write_json(out / "report.json", cfg, report.to_dict())


def run_chaos(cfg: dict, out: Path, threads: int = 1) -> None:
    t, n = cfg["t"], cfg["n"]
    if cfg["model"] == "pam":
        series = pam_chaos_series(t, n)
        lines = ["n,term_variance,partial_sum,closed_form"]
        for i in range(n + 1):
            lines.append(
                f"{i},{series.term_variances[i]:.17g},{series.partial_sums[i]:.17g},"
                f"{series.closed_form:.17g}"
            )
        _write_csv(out / "chaos.csv", cfg, "\n".join(lines) + "\n")
        _write_json(out / "chaos.json", cfg, series.to_dict())
    elif cfg["model"] in ("gbm", "gfbm"):
        kind = "bm" if cfg["model"] == "gbm" else "fbm"
        partials = chaos_geometric_partials(t, cfg["b"], n, kind, cfg.get("hurst"))
        if kind == "bm":
            closed = math.exp(cfg["b"] - t / 2.0)
        else:
            closed = math.exp(cfg["b"] - t ** (2 * cfg["hurst"]) / 2.0)
        lines = ["n,partial_sum,closed_form"]
        for i, v in enumerate(partials):
            lines.append(f"{i},{v:.17g},{closed:.17g}")
        _write_csv(out / "chaos.csv", cfg, "\n".join(lines) + "\n")
        _write_json(
            out / "chaos.json",
            cfg,
            {"partial_sums": list(partials), "closed_form": closed},
        )
    else:
        raise InputError(f"unknown chaos model {cfg['model']!r}")


def run_check(cfg: dict, out: Path, threads: int = 1) -> None:
    op, alpha, d = cfg["op"], cfg["alpha"], cfg["d"]
    if op == "dalang":
        verdict = check_dalang_riesz(alpha, d)
    else:
        verdict = check_fractional(op, alpha, cfg["hurst"], d)
    results = {"verdict": verdict.to_dict()}
    if cfg["numeric"]:
        kappa = verdict.parameters.get("kappa", 1.0)
        numeric = dalang_integral_numeric(SpectralMeasure.riesz_dual(alpha, d), kappa, d)
        results["numeric_verdict"] = numeric.to_dict()
    print(json.dumps(results["verdict"]))
    _write_json(out / "check.json", cfg, results)


def run_certificate(cfg: dict, out: Path, threads: int = 1) -> None:
    if cfg["profile"] == "constant":
        profile = cfg["beta"]
    else:
        profile = OperatorSpec(cfg["profile"], 1)
    cert = dalang_gronwall_certificate(
        profile,
        cfg["big_t"],
        M=cfg["m"],
        n_max=cfg["n_max"],
        mc_replicas=cfg["replicas"],
        rng=RngStream(cfg["seed"]),
    )
    lines = ["n,a_n,stderr,bound,partial_sum_p1,partial_sum_p2"]
    for i in range(cfg["n_max"] + 1):
        lines.append(
            f"{i},{cert.a_n[i]:.17g},{cert.stderr[i]:.17g},{cert.bounds[i]:.17g},"
            f"{cert.partial_sums_p1[i]:.17g},{cert.partial_sums_p2[i]:.17g}"
        )
    _write_csv(out / "certificate.csv", cfg, "\n".join(lines) + "\n")
    _write_json(out / "certificate.json", cfg, cert.to_dict())


def run_fk(cfg: dict, out: Path, threads: int = 1) -> None:
    spec = NoiseSpec.fractional_riesz(cfg["hurst"], cfg["alpha"])
    est = fk_second_moment(
        cfg["t"],
        spec,
        cfg["d"],
        cfg["replicas"],
        cfg["n_quad"],
        RngStream(cfg["seed"]),
        threads=threads,
    )
    print(json.dumps({"estimate": est.estimate, "stderr": est.stderr}))
    _write_json(out / "fk.json", cfg, est.to_dict())


def run_holder(cfg: dict, out: Path, threads: int = 1) -> None:
    grid = SpaceTimeGrid(
        TimeGrid(cfg["t"], cfg["n_steps"]), cfg["half_width"], cfg["n_cells"]
    )
    study = linear_heat_holder_study(
        grid,
        cfg["replicas"],
        RngStream(cfg["seed"]),
        time_lags=tuple(cfg["time_lags"]),
        space_lags=tuple(cfg["space_lags"]),
        base_node=cfg.get("base_node"),
        threads=threads,
    )
    tf, sf = study["time_fit"], study["space_fit"]
    lines = ["axis,lag,spacing,norm"]
    for fit in (tf, sf):
        for lag, sp, norm in zip(fit.lags, fit.lag_spacings, fit.norms):
            lines.append(f"{fit.axis},{lag},{sp:.17g},{norm:.17g}")
    _write_csv(out / "holder.csv", cfg, "\n".join(lines) + "\n")
    _write_json(
        out / "holder.json",
        cfg,
        {
            "time_fit": tf.to_dict(),
            "space_fit": sf.to_dict(),
            "window_nodes": study["window_nodes"],
        },
    )


def run_noise(cfg: dict, out: Path, threads: int = 1) -> None:
    kind = cfg["kind"]
    stream = RngStream(cfg["seed"])
    if kind in ("bm", "fbm"):
        grid = TimeGrid(cfg["t"], cfg["n_steps"])
        if kind == "bm":
            path = sample_bm_paths(grid, stream)[0]
        else:
            path = sample_fbm_paths(cfg["hurst"], grid, stream)[0]
        lines = ["t,value"]
        for tv, v in zip(grid.nodes(), path):
            lines.append(f"{tv:.17g},{v:.17g}")
        _write_csv(out / "path.csv", cfg, "\n".join(lines) + "\n")
        return
    grid = SpaceTimeGrid(
        TimeGrid(cfg["t"], cfg["n_steps"]), cfg["half_width"], cfg["n_cells"]
    )
    if kind == "sheet":
        fld = sample_white_noise_sheet(grid, stream)
    elif kind == "homogeneous":
        if cfg.get("hurst") is None:
            spec = NoiseSpec.space_time_white()
        else:
            spec = NoiseSpec.fractional_riesz(cfg["hurst"], cfg["alpha"])
        fld = sample_homogeneous_noise(grid, spec, stream)
    else:
        raise InputError(f"unknown noise kind {kind!r}")
    if cfg["format"] == "spdf":
        write_spdf(fld, out / "field.spdf")
    else:
        write_field_csv(fld, out / "field.csv")
        # prepend the artifact header while keeping the coordinate header
        body = (out / "field.csv").read_text()
        _write_csv(out / "field.csv", cfg, body)


_RUNNERS = {
    "simulate": run_simulate,
    "chaos": run_chaos,
    "check": run_check,
    "certificate": run_certificate,
    "fk": run_fk,
    "holder": run_holder,
    "noise": run_noise,
}


# ---------------------------------------------------------------------------
# argument parsing and config resolution
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="spde-lab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"spde-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--strict", action="store_true", help="require --seed")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", type=str, default=".")
        p.add_argument("--config", type=str, default=None, help="re-run a resolved config")

    p = sub.add_parser("simulate", help="moment estimation for gbm/gfbm/pam-white")
    p.add_argument("--model", choices=["gbm", "gfbm", "pam-white"], default="gbm")
    p.add_argument("--t", type=str, default="1.0", help="comma-separated times")
    p.add_argument("--p", type=str, default="2.0", help="comma-separated moment orders")
    p.add_argument("--replicas", type=int, default=10_000)
    p.add_argument("--hurst", type=float, default=None)
    p.add_argument("--n-steps", type=int, default=256)
    p.add_argument("--half-width", type=float, default=None)
    p.add_argument("--fit", action="store_true", help="fit a Lyapunov slope")
    common(p)

    p = sub.add_parser("chaos", help="chaos-series tables")
    p.add_argument("--model", choices=["pam", "gbm", "gfbm"], default="pam")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--n", type=int, default=60)
    p.add_argument("--b", type=float, default=0.0, help="endpoint value (gbm/gfbm)")
    p.add_argument("--hurst", type=float, default=None)
    common(p)

    p = sub.add_parser("check", help="existence-condition verdicts")
    p.add_argument("--op", choices=["heat", "wave", "dalang"], required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--hurst", type=float, default=None)
    # alpha must lie in (0, d); d = 2 admits the full alpha < 2 range
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--numeric", action="store_true", help="also run the quadrature route")
    common(p)

    p = sub.add_parser("certificate", help="extension-of-Gronwall coefficient bounds")
    p.add_argument("--profile", choices=["heat", "wave", "constant"], default="heat")
    p.add_argument("--beta", type=float, default=1.0, help="constant-profile value")
    p.add_argument("--big-t", type=float, default=1.0)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--replicas", type=int, default=100_000)
    common(p)

    p = sub.add_parser("fk", help="two-path exponential-functional second moment")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--t", type=float, default=0.25)
    p.add_argument("--replicas", type=int, default=10_000)
    p.add_argument("--n-quad", type=int, default=128)
    common(p)

    p = sub.add_parser("holder", help="empirical regularity exponents, linear heat")
    p.add_argument("--t", type=float, default=0.25)
    p.add_argument("--n-steps", type=int, default=1024)
    p.add_argument("--n-cells", type=int, default=512)
    p.add_argument("--half-width", type=float, default=4.0)
    p.add_argument("--replicas", type=int, default=128)
    p.add_argument("--time-lags", type=str, default="4,8,16,32,64")
    p.add_argument("--space-lags", type=str, default="2,4,8,16")
    p.add_argument("--base-node", type=int, default=None)
    common(p)

    p = sub.add_parser("noise", help="raw noise dumps (paths, sheets, homogeneous fields)")
    p.add_argument("--kind", choices=["bm", "fbm", "sheet", "homogeneous"], required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--n-steps", type=int, default=128)
    p.add_argument("--n-cells", type=int, default=16)
    p.add_argument("--half-width", type=float, default=1.0)
    p.add_argument("--hurst", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--format", choices=["csv", "spdf"], default="csv")
    common(p)

    return parser


def _resolve_config(args) -> dict:
    """Flatten parsed args into the embedded-config dict."""
    cfg = {"command": args.command, "version": __version__}
    cfg["seed"] = _resolve_seed(args)
    skip = {"command", "seed", "strict", "threads", "out", "config"}
    for key, value in vars(args).items():
        if key in skip or value is None:
            continue
        cfg[key] = value
    if args.command == "simulate":
        cfg["t"] = _floats(args.t)
        cfg["p"] = _floats(args.p)
        cfg["fit"] = bool(args.fit)
        if cfg["model"] == "gfbm" and cfg.get("hurst") is None:
            raise InputError("gfbm requires --hurst")
    if args.command == "chaos" and cfg["model"] == "gfbm" and cfg.get("hurst") is None:
        raise InputError("gfbm chaos requires --hurst")
    if args.command == "check":
        cfg["numeric"] = bool(args.numeric)
        if cfg["op"] in ("heat", "wave") and cfg.get("hurst") is None:
            raise InputError(f"{cfg['op']} check requires --hurst")
    if args.command == "holder":
        cfg["time_lags"] = [int(v) for v in args.time_lags.split(",")]
        cfg["space_lags"] = [int(v) for v in args.space_lags.split(",")]
    if args.command == "noise":
        if cfg["kind"] == "fbm" and cfg.get("hurst") is None:
            raise InputError("fbm noise requires --hurst")
        if cfg["kind"] == "homogeneous" and cfg.get("hurst") is not None and cfg.get("alpha") is None:
            raise InputError("homogeneous fractional noise requires --alpha")
    return cfg


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config is not None:
            cfg = json.loads(Path(args.config).read_text())
            known = {"command", "version"} | set(vars(args))
            extra = {
                "t", "p", "fit", "numeric", "time_lags", "space_lags", "model", "op",
                "alpha", "hurst", "d", "n", "b", "profile", "beta", "big_t", "m",
                "n_max", "replicas", "n_quad", "n_steps", "n_cells", "half_width",
                "base_node", "kind", "format", "seed", "threads",
            }
            unknown = set(cfg) - known - extra
            if unknown:
                raise InputError(f"unknown config keys: {sorted(unknown)}")
            if cfg.get("command") != args.command:
                raise InputError(
                    f"config is for command {cfg.get('command')!r}, not {args.command!r}"
                )
            cfg.pop("threads", None)  # execution knob, never part of the experiment
        else:
            cfg = _resolve_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _RUNNERS[args.command](cfg, out, threads=_resolve_threads(args.threads))
        # config.json is the flat resolved config itself, re-runnable via --config
        (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
        return 0
    except (InputError, DomainError, NotImplementedError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return EXIT_NUMERICAL
    except SpdeLabError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
