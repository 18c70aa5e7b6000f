"""Command-line front end.

Subcommands: run, sweep, impulse, stability, params2roots, roots2params,
design.  Exit codes: 0 success, 1 invalid input or config, 2 divergence when
--fail-on-divergence is set, 3 numeric failure.  An unstable verdict from the
stability subcommand is a result, not an error, and exits 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .experiments import (
    ConfigError,
    load_config,
    operator_poly,
    run_experiment,
)
from .operators import (
    DesignSpec,
    InfeasibleRootsError,
    char_poly_first_order,
    char_poly_second_order,
    design_roots,
    params_from_roots_first_order,
    params_from_roots_second_order,
    poly_roots,
    routh_hurwitz,
)
from .rootspace import (
    NumericError,
    PolyCoeffs,
    RootSet,
    impulse_response_eval,
    partial_fraction_coefficients,
)
from .streams import StreamFormatError

__all__ = ["main", "entrypoint"]

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_DIVERGED = 2
EXIT_NUMERIC = 3

MAX_IMPULSE_SAMPLES = 200_001


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; 2 is reserved for divergence
    # here, so route usage problems to the invalid-input code instead.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _parse_complex_list(text: str) -> list[complex]:
    values = []
    for token in text.split(","):
        token = token.strip().replace("i", "j")
        if not token:
            continue
        try:
            values.append(complex(token))
        except ValueError:
            raise ValueError(f"cannot parse root {token!r}") from None
    if not values:
        raise ValueError("no roots given")
    return values


def _parse_float_list(text: str) -> list[float]:
    return [float(token) for token in text.split(",") if token.strip()]


def _poly_from_args(args) -> PolyCoeffs:
    if getattr(args, "poly", None):
        return PolyCoeffs(tuple(_parse_float_list(args.poly)))
    if args.alphas is None or args.theta is None:
        raise ValueError("give either --poly or both --theta and --alphas")
    alphas = _parse_float_list(args.alphas)
    if len(alphas) == 2:
        return char_poly_first_order(args.theta, *alphas)
    if len(alphas) == 3:
        return char_poly_second_order(args.theta, *alphas)
    raise ValueError("--alphas takes 2 values (order 1) or 3 values (order 2)")


def _roots_from_args(args) -> RootSet:
    if getattr(args, "roots", None):
        return RootSet.from_values(_parse_complex_list(args.roots))
    return poly_roots(_poly_from_args(args))


def _sample_impulse(roots: RootSet, step: float, samples: int | None = None):
    rate = roots.min_decay_rate()
    if rate == 0.0:
        raise ValueError("a root has zero real part: the impulse response never settles")
    horizon = 40.0 / rate
    if samples is None:
        samples = int(min(MAX_IMPULSE_SAMPLES, max(2, round(horizon / step) + 1)))
    times = np.linspace(0.0, horizon, samples)
    coeffs = partial_fraction_coefficients(roots)
    return times, impulse_response_eval(coeffs, roots, times)


def _write_xy_csv(path, header: str, xs, ys) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for x, y in zip(xs, ys):
            fh.write(f"{format(x, '.17g')},{format(y, '.17g')}\n")


def _emit(args, payload: dict, lines: list[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2))
    else:
        for line in lines:
            print(line)


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    trace = run_experiment(config)
    trace.write_csv(outdir / "trace.csv")
    trace.write_metrics_csv(outdir / "metrics.csv")
    if args.svg:
        from .plotting import render_impulse_figure, render_run_figure

        roots = poly_roots(operator_poly(config.operator))
        g_times, g_values = _sample_impulse(roots, config.base_tau / 10.0)
        render_impulse_figure(g_times, g_values, outdir / "g.svg")
        if trace.times.shape[0] > 1:
            render_run_figure(trace, g_times, g_values, outdir / "weights.svg")
    final = trace.final_metrics()
    if final is not None:
        acc = "" if final.accuracy is None else f", accuracy {final.accuracy:.4g}"
        print(f"run finished: {final.epoch} epochs, mse {final.mse:.6g}{acc}")
    else:
        print("run finished")
    if trace.any_divergent():
        print("warning: divergence flagged during the run")
        if args.fail_on_divergence:
            return EXIT_DIVERGED
    return EXIT_OK


def cmd_sweep(args) -> int:
    cap = int(os.environ.get("LAGRANGE_THREADS", "4"))
    cap = max(1, cap)
    outbase = Path(args.outdir)

    def one(path_str: str) -> int:
        path = Path(path_str)
        run_args = argparse.Namespace(
            config=path,
            outdir=outbase / path.stem,
            svg=args.svg,
            fail_on_divergence=args.fail_on_divergence,
            seed=None,
        )
        try:
            code = cmd_run(run_args)
        except Exception as exc:  # per-run isolation; the worst code wins
            print(f"{path}: failed: {exc}", file=sys.stderr)
            return EXIT_NUMERIC if isinstance(exc, NumericError) else EXIT_INVALID
        print(f"{path}: exit {code}")
        return code

    with ThreadPoolExecutor(max_workers=min(cap, len(args.configs))) as pool:
        codes = list(pool.map(one, args.configs))
    return max(codes)


def cmd_impulse(args) -> int:
    roots = _roots_from_args(args)
    times, values = _sample_impulse(roots, args.step, args.samples)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_xy_csv(outdir / "g.csv", "t,g", times, values)
    if args.svg:
        from .plotting import render_impulse_figure

        render_impulse_figure(times, values, outdir / "g.svg")
    print(f"sampled {times.size} points over [0, {times[-1]:.6g}] into {outdir / 'g.csv'}")
    return EXIT_OK


def cmd_stability(args) -> int:
    poly = _poly_from_args(args)
    report = routh_hurwitz(poly)
    payload = {
        "coefficients": list(poly.coeffs),
        "stable": report.stable,
        "conditions": [
            {"name": c.name, "satisfied": c.satisfied, "margin": c.margin}
            for c in report.conditions
        ],
    }
    lines = [f"polynomial coefficients (ascending, monic): {list(poly.coeffs)}"]
    for cond in report.conditions:
        mark = "ok " if cond.satisfied else "FAIL"
        lines.append(f"  [{mark}] {cond.name}  margin {cond.margin:.6g}")
    lines.append("stable" if report.stable else "unstable")
    _emit(args, payload, lines)
    return EXIT_OK


def _fmt_root(value: complex, mult: int) -> str:
    s = f"{value.real:.12g}" if value.imag == 0 else f"{value.real:.12g}{value.imag:+.12g}i"
    return s if mult == 1 else f"{s} (x{mult})"


def cmd_params2roots(args) -> int:
    poly = _poly_from_args(args)
    roots = poly_roots(poly)
    payload = {
        "coefficients": list(poly.coeffs),
        "roots": [
            {"re": v.real, "im": v.imag, "multiplicity": r} for v, r in roots.roots
        ],
    }
    lines = [f"polynomial coefficients (ascending, monic): {list(poly.coeffs)}", "roots:"]
    lines += [f"  {_fmt_root(v, r)}" for v, r in roots.roots]
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_roots2params(args) -> int:
    roots = RootSet.from_values(_parse_complex_list(args.roots))
    if roots.n == 2:
        values = [v for v, r in roots.roots for _ in range(r)]
        theta, nus = params_from_roots_first_order(values[0], values[1])
        payload = {"order": 1, "theta": theta, "nu_candidates": list(nus)}
        lines = [f"order 1: theta = {theta:.12g}", f"nu = alpha0/alpha1 candidates: {list(nus)}"]
        _emit(args, payload, lines)
        return EXIT_OK
    try:
        result = params_from_roots_second_order(roots)
    except InfeasibleRootsError as exc:
        _emit(args, {"feasible": False, "reason": str(exc)}, [f"infeasible: {exc}"])
        return EXIT_OK
    payload = {
        "feasible": True,
        "order": 2,
        "theta": result.theta,
        "branches": [
            {"nu0": n0, "nu1": n1, "alpha1_for_unit_alpha0_alpha2": a1}
            for n0, n1, a1 in result.branches
        ],
    }
    lines = [f"order 2: theta = {result.theta:.12g}", "branches (nu0, nu1, alpha1 @ alpha0=alpha2=1):"]
    lines += [f"  nu0 = {n0:.12g}, nu1 = {n1:.12g}, alpha1 = {a1:.12g}" for n0, n1, a1 in result.branches]
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_design(args) -> int:
    fractions = tuple(_parse_float_list(args.fractions)) if args.fractions else (0.60, 0.65, 0.75)
    spec = DesignSpec(memory_span=args.memory_span, fractions=fractions)
    roots = design_roots(spec, args.theta)
    payload = {
        "theta": args.theta,
        "memory_span": args.memory_span,
        "fractions": list(fractions),
        "roots": [{"re": v.real, "im": v.imag, "multiplicity": r} for v, r in roots.roots],
    }
    lines = ["designed roots:"] + [f"  {_fmt_root(v, r)}" for v, r in roots.roots]
    _emit(args, payload, lines)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lagrange", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[], help="run one experiment config")
    run.add_argument("config", help="JSON experiment configuration")
    run.add_argument("-o", "--outdir", default=".", help="output directory")
    run.add_argument("--svg", action="store_true", help="also render weights.svg and g.svg")
    run.add_argument("--fail-on-divergence", action="store_true",
                     help="exit with code 2 when any weight diverges")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run several configs across worker threads")
    sweep.add_argument("configs", nargs="+", help="JSON configuration files")
    sweep.add_argument("-o", "--outdir", default=".", help="base output directory")
    sweep.add_argument("--svg", action="store_true")
    sweep.add_argument("--fail-on-divergence", action="store_true")
    sweep.set_defaults(func=cmd_sweep)

    impulse = sub.add_parser("impulse", help="sample the impulse response to g.csv")
    impulse.add_argument("--roots", help="comma-separated roots, e.g. '-1,-4' or '-0.1+1i,-0.1-1i,-1.2,-1'")
    impulse.add_argument("--theta", type=float)
    impulse.add_argument("--alphas", help="comma-separated alpha coefficients (2 or 3 values)")
    impulse.add_argument("--step", type=float, default=0.001, help="sampling step (default 0.001)")
    impulse.add_argument("--samples", type=int, default=None,
                         help="fixed sample count over [0, 40/min|Re root|]")
    impulse.add_argument("-o", "--outdir", default=".")
    impulse.add_argument("--svg", action="store_true")
    impulse.set_defaults(func=cmd_impulse)

    stability = sub.add_parser("stability", help="Routh-Hurwitz report for an operator")
    params2roots = sub.add_parser("params2roots", help="characteristic roots of an operator")
    for p in (stability, params2roots):
        p.add_argument("--theta", type=float)
        p.add_argument("--alphas", help="comma-separated alpha coefficients (2 or 3 values)")
        p.add_argument("--poly", help="ascending monic coefficients b0,b1,... (degree 2 or 4)")
        p.add_argument("--json", action="store_true")
    stability.set_defaults(func=cmd_stability)
    params2roots.set_defaults(func=cmd_params2roots)

    roots2params = sub.add_parser("roots2params", help="recover operator parameters from roots")
    roots2params.add_argument("--roots", required=True, help="comma-separated roots (2 or 4 values)")
    roots2params.add_argument("--json", action="store_true")
    roots2params.set_defaults(func=cmd_roots2params)

    design = sub.add_parser("design", help="design a degree-4 root set with a memory root")
    design.add_argument("--memory-span", dest="memory_span", type=float, required=True,
                        help="memory span a; the slow root is -1/a")
    design.add_argument("--theta", type=float, required=True)
    design.add_argument("--fractions", help="three fractions of theta (default 0.6,0.65,0.75)")
    design.add_argument("--json", action="store_true")
    design.set_defaults(func=cmd_design)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse help/usage paths
        return int(exc.code or 0)
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
              file=sys.stderr)
        return EXIT_INVALID
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, StreamFormatError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
