"""Command-line front end.

    amptraffic generate  --config run.json --out DIR
    amptraffic aggregate --config run.json --out DIR
    amptraffic analyze   TRACE.csv --out DIR
    amptraffic validate  [--tolerance-scale F]
    amptraffic report    --config run.json --out DIR

Exit codes: 0 success, 1 configuration error, 2 input/output error,
3 validation failure.  The output directory defaults to ``$AMPTRAFFIC_OUT_DIR``
and then to ``./amptraffic-out``.
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
from .aggregate import aggregate_marginal, aggregate_trace, check_capacity
from .config import ConfigError, RunConfig, load_config
from .estimators import (
    DegenerateTraceError,
    acf_decay_exponent,
    autocorrelation,
    gaussianity_stats,
    hill_tail_index,
    hurst_aggregated_variance,
    hurst_rescaled_range,
    hurst_spectral,
    log_binned,
    periodogram,
)
from .onoff import (
    BinnedTrace,
    ConstantRate,
    _bin_intervals,
    _grid,
    bin_trace,
    expected_load,
    generate_timeline,
    on_fraction,
    single_source_marginal,
    theoretical_hurst,
)
from .spectrum import QuadratureError, binned_psd_model, dc_mass, psd_model
from .traceio import TraceFormatError, read_binned, read_events, sniff, write_binned, write_columns, write_events
from .validation import run_validation

OUT_ENV = "AMPTRAFFIC_OUT_DIR"
DEFAULT_OUT = "amptraffic-out"

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_VALIDATION = 0, 1, 2, 3


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _write_json(path: Path, data):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CommandError(EXIT_IO, f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise CommandError(EXIT_IO, f"output directory {out} is not writable")
    return out


def _config(args, mode: str) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = cfg.with_overrides(mode=mode, seed=args.seed)
    if getattr(args, "workers", None):
        from dataclasses import replace

        cfg = replace(cfg, workers=args.workers)
    return cfg


def _law_dict(law) -> dict:
    if isinstance(law, ConstantRate):
        return {"constant": law.rate}
    out = {"shape": law.shape, "scale": law.scale}
    if hasattr(law, "cutoff"):
        out["cutoff"] = law.cutoff
    return out


# -- generate -----------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = _config(args, "generate")
    out = _out_dir(args)
    src = cfg.source_config()
    total = cfg.burn_in + cfg.horizon
    tl = generate_timeline(src, total, start=cfg.start)
    trace = bin_trace(tl, cfg.bin_width, origin=cfg.burn_in, seed=cfg.seed)
    write_events(out / "events.csv", tl)
    write_binned(out / "trace.csv", trace)
    observed = trace.volume / cfg.horizon
    expected = expected_load(src)
    summary = {
        "command": "generate",
        "seed": cfg.seed,
        "start": cfg.start,
        "horizon": cfg.horizon,
        "burn_in": cfg.burn_in,
        "bin_width": cfg.bin_width,
        "epochs": len(tl),
        "bins": len(trace),
        "load_observed": observed,
        "load_expected": expected,
        "load_ratio": observed / expected,
        "hurst_theoretical": theoretical_hurst(src.off_law.shape, src.on_law.shape),
        "on": _law_dict(src.on_law),
        "off": _law_dict(src.off_law),
        "rate": _law_dict(src.rate),
    }
    _write_json(out / "summary.json", summary)
    print(f"generate: {len(tl)} epochs, {len(trace)} bins; load {observed:.6g} vs expected {expected:.6g} "
          f"(ratio {observed / expected:.4f})")
    return EXIT_OK


# -- aggregate ----------------------------------------------------------------

def cmd_aggregate(args) -> int:
    cfg = _config(args, "aggregate")
    agg = cfg.aggregate_config()
    cap = check_capacity(agg)
    if not cap.passes:
        raise CommandError(EXIT_CONFIG, f"capacity check failed: N*B = {cap.peak_rate:g} is not below the "
                                        f"link capacity {cap.link_capacity:g}")
    out = _out_dir(args)
    n_bins = int(math.ceil(cfg.horizon / cfg.bin_width - 1e-12))
    trace = aggregate_trace(agg, n_bins, cfg.bin_width, start=cfg.start, burn_in=cfg.burn_in,
                            workers=cfg.workers)
    write_binned(out / "aggregate.csv", trace)
    expected = agg.n_sources * expected_load(agg.source) if agg.homogeneous else None
    observed = trace.volume / (n_bins * cfg.bin_width)
    summary = {
        "command": "aggregate",
        "seed": cfg.seed,
        "n_sources": agg.n_sources,
        "bins": n_bins,
        "bin_width": cfg.bin_width,
        "horizon_used": n_bins * cfg.bin_width,
        "start": cfg.start,
        "load_observed": observed,
        "load_expected": expected,
        "max_value": float(trace.values.max()) if n_bins else 0.0,
        "capacity": {"passes": cap.passes, "peak_rate": cap.peak_rate,
                     "link_capacity": _jsonable(cap.link_capacity), "headroom": _jsonable(cap.headroom)},
    }
    if agg.homogeneous:
        marg = aggregate_marginal(agg, samples=cfg.marginal_samples)
        summary["marginal"] = {
            "atom_at_zero": marg.atom_at_zero,
            "mc_zero_frequency": marg.mc_zero_frequency,
            "k_bn": marg.k_bn,
            "k_bn_method": marg.kb_method,
            "l1": _jsonable(marg.l1),
            "body_mass": marg.body_mass,
            "tail_mass": marg.tail_mass,
            "point_masses": {repr(k): v for k, v in sorted(marg.point_masses.items())},
            "total_mass": marg.total_mass,
            "attempts": [[m, _jsonable(k), _jsonable(l1)] for m, k, l1 in marg.attempts],
        }
    _write_json(out / "summary.json", summary)
    print(f"aggregate: {agg.n_sources} sources, {n_bins} bins; mean rate {observed:.6g}"
          + (f" vs expected {expected:.6g}" if expected else ""))
    if "marginal" in summary:
        m = summary["marginal"]
        print(f"marginal: atom {m['atom_at_zero']:.6g}, k_B(N) {m['k_bn']:.6g} via {m['k_bn_method']}, "
              f"L1 {marg.l1:.4g}")
    return EXIT_OK


# -- analyze ------------------------------------------------------------------

def _hill(samples: np.ndarray, fraction: float):
    x = samples[samples > 0]
    k = int(len(x) * fraction)
    if k < 10 or k >= len(x) / 2:
        return None
    try:
        return hill_tail_index(x, k)
    except DegenerateTraceError:
        # e.g. rates tied at the Bounded-Pareto cutoff
        return None


def _load_trace(path: str, cfg: RunConfig):
    kind = sniff(path)
    if kind == "binned":
        return read_binned(path), None
    ev = read_events(path)
    if len(ev) == 0:
        raise DegenerateTraceError(f"{path}: no On periods")
    horizon = float(np.max(ev.t_start + ev.duration))
    if cfg.bin_width > horizon:
        raise DegenerateTraceError(f"{path}: events span {horizon} s, less than one bin of {cfg.bin_width} s")
    n, widths = _grid(horizon, cfg.bin_width)
    values = _bin_intervals(ev.t_start, ev.t_start + ev.duration, ev.rate, n, cfg.bin_width, widths)
    return BinnedTrace(bin_width=cfg.bin_width, values=values, origin=0.0, seed=None), ev


def cmd_analyze(args) -> int:
    cfg = _config(args, "analyze")
    path = args.trace or cfg.trace
    if not path:
        raise CommandError(EXIT_CONFIG, "analyze needs a trace path (argument or config 'trace')")
    trace, events = _load_trace(path, cfg)
    out = _out_dir(args)
    opts = cfg.analysis
    n = len(trace)
    if n < 1 << 12:
        raise DegenerateTraceError(f"trace has {n} bins; analysis needs at least 4096")
    rs = hurst_rescaled_range(trace, min_scale=opts.min_scale)
    av = hurst_aggregated_variance(trace, min_scale=opts.min_scale)
    pgram = periodogram(trace, fraction=opts.spectral_fraction)
    sp = hurst_spectral(pgram)
    max_lag = min(opts.max_lag, n // 4)
    acf = autocorrelation(trace, max_lag)
    hi = min(1000, max_lag)
    try:
        beta = -acf_decay_exponent(acf, lags=(min(10, hi), hi)).slope
    except DegenerateTraceError:
        beta = None
    gs = gaussianity_stats(trace)

    def est(h):
        return {"method": h.method, "value": h.value, "stderr": h.stderr, "n_points": h.n_points,
                "clamped": h.clamped, "alpha_implied": 3.0 - 2.0 * h.value}

    report = {
        "command": "analyze",
        "trace": {"path": os.path.basename(path), "bins": n, "bin_width": trace.bin_width, "origin": trace.origin,
                  "seed": trace.seed, "mean": float(np.mean(trace.values)), "variance": float(np.var(trace.values))},
        "hurst": [est(rs), est(av), est(sp)],
        "spectrum": {"slope": pgram.slope_fit.slope, "intercept": pgram.slope_fit.intercept,
                     "residual": pgram.slope_fit.residual, "band": list(pgram.band),
                     "alpha_implied": pgram.slope_fit.slope + 2.0},
        "autocorrelation": {"max_lag": max_lag, "beta": beta},
        "gaussianity": {"skewness": gs.skewness, "excess_kurtosis": gs.excess_kurtosis,
                        "statistic": gs.statistic, "p_value": gs.p_value},
        "tail_indices": {},
    }
    if events is not None:
        report["tail_indices"] = {"on_durations": _hill(events.duration, opts.hill_fraction),
                                  "off_durations": _hill(events.off_gaps(), opts.hill_fraction),
                                  "rates": _hill(events.rate, opts.hill_fraction)}
    _write_json(out / "analysis.json", report)

    fb, pb = log_binned(pgram.frequencies, pgram.power, per_decade=20)
    write_columns(out / "periodogram.csv", ["omega", "power"], [fb, pb])
    write_columns(out / "variance_time.csv", ["block", "variance"], [av.scales, av.statistic])
    write_columns(out / "rescaled_range.csv", ["block", "rs"], [rs.scales, rs.statistic])
    write_columns(out / "acf.csv", ["lag", "r"], [np.arange(len(acf)), acf])
    print(f"analyze: {n} bins; H R/S {rs.value:.4f}, aggregated-variance {av.value:.4f}, "
          f"spectral {sp.value:.4f}; slope {pgram.slope_fit.slope:.4f}")
    for key, val in report["tail_indices"].items():
        if val is not None:
            print(f"tail index {key}: {val:.4f}")
    return EXIT_OK


# -- validate -----------------------------------------------------------------

def cmd_validate(args) -> int:
    cfg = _config(args, "validate")
    out = _out_dir(args)
    scale = 1.0 if args.tolerance_scale is None else args.tolerance_scale
    if not (scale >= 0 and math.isfinite(scale)):
        raise CommandError(EXIT_CONFIG, f"--tolerance-scale must be a non-negative number, got {scale}")
    report = run_validation(cfg.checks, seed=cfg.seed, workers=cfg.workers, tolerance_scale=scale,
                            tolerances=cfg.tolerances)
    data = report.to_dict()
    data["environment"]["version"] = __version__
    _write_json(out / "validation.json", json.loads(json.dumps(data, default=_jsonable)))
    for r in report.records:
        tol = "" if r.tolerance is None else f" tol {r.tolerance:.4g}"
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.criterion} {r.name}: observed {r.observed} "
              f"expected {r.expected}{tol}")
    print(f"validate: {'pass' if report.passed else 'fail'} "
          f"({sum(r.passed for r in report.records)}/{len(report.records)} checks)")
    return EXIT_OK if report.passed else EXIT_VALIDATION


# -- report -------------------------------------------------------------------

def cmd_report(args) -> int:
    """Model-side curves for the configured source plus a text summary."""
    cfg = _config(args, "report")
    out = _out_dir(args)
    src = cfg.source_config()
    on, off = src.on_law, src.off_law
    rate_mean = src.mean_rate
    w = np.geomspace(1e-4, math.pi / cfg.bin_width, 200)
    try:
        s = psd_model(w, on, off) * rate_mean**2
        sb = binned_psd_model(w[w < math.pi / cfg.bin_width], on, off, cfg.bin_width) * rate_mean**2
    except QuadratureError as exc:
        raise CommandError(EXIT_CONFIG, f"spectrum quadrature failed: {exc}") from None
    write_columns(out / "psd_model.csv", ["omega", "psd", "psd_binned"],
                  [w[: len(sb)], s[: len(sb)], sb])
    marg = single_source_marginal(src)
    lo, hi = marg.support
    if hi > lo:
        x = np.geomspace(lo, hi, 200)[:-1]
        write_columns(out / "marginal_model.csv", ["rate", "density"], [x, marg.density(x)])
    agg = cfg.aggregate_config()
    cap = check_capacity(agg)
    h = theoretical_hurst(off.shape, on.shape)
    lines = [
        "# Model report",
        "",
        f"- seed: {cfg.seed}",
        f"- On law: Pareto(shape={on.shape}, scale={on.scale}); Off law: Pareto(shape={off.shape}, scale={off.scale})",
        f"- rate law: {_law_dict(src.rate)}",
        f"- On probability A1: {on_fraction(src):.6g}; atom at zero A0: {1 - on_fraction(src):.6g}",
        f"- expected load per source: {expected_load(src):.6g}",
        f"- Hurst exponent (3 - min(a0, a1)) / 2: {h:.6g}",
        f"- low-frequency PSD slope: {min(on.shape, off.shape) - 2:.6g}; DC mass {dc_mass(on, off):.6g}",
        f"- sources: {agg.n_sources}; peak rate N*B {cap.peak_rate:g}; link capacity {cap.link_capacity:g}; "
        f"capacity check {'pass' if cap.passes else 'FAIL'}",
    ]
    for name in ("validation.json", "analysis.json"):
        p = out / name
        if p.exists():
            try:
                data = json.loads(p.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise CommandError(EXIT_IO, f"cannot read {p}: {exc}") from None
            if name == "validation.json":
                lines += ["", "## Validation", "", f"verdict: {data.get('verdict')}"]
                lines += [f"- criterion {k}: {'pass' if v else 'fail'}" for k, v in data.get("criteria", {}).items()]
            else:
                lines += ["", "## Analysis", ""]
                lines += [f"- {e['method']}: H = {e['value']:.4f}" for e in data.get("hurst", [])]
    (out / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "aggregate": cmd_aggregate,
    "analyze": cmd_analyze,
    "validate": cmd_validate,
    "report": cmd_report,
}


class _Parser(argparse.ArgumentParser):
    # usage mistakes are configuration errors, not argparse's default exit 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--seed", type=int, metavar="U64", help="override the configured seed")
    common.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--tolerance-scale", type=float, metavar="F",
                        help="multiply every validation tolerance by F (validate only)")
    common.add_argument("--workers", type=int, metavar="N", help="worker threads; output does not depend on it")

    parser = _Parser(prog="amptraffic", description="Heavy-tailed On/Off traffic toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="simulate one source; write event and binned CSVs")
    sub.add_parser("aggregate", parents=[common], help="simulate N sources; write the binned aggregate")
    p = sub.add_parser("analyze", parents=[common], help="estimate H, spectrum, ACF and tails of a CSV trace")
    p.add_argument("trace", nargs="?", help="event or binned CSV (default: config 'trace')")
    sub.add_parser("validate", parents=[common], help="run the model-versus-data checks")
    sub.add_parser("report", parents=[common], help="write model-side curves and a summary")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TraceFormatError, DegenerateTraceError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
