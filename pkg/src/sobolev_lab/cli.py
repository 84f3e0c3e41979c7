"""Command-line front end.

Exit codes: 0 success, 1 property violation, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from .certify import CSV_COLUMNS, VIOLATED, generate_corpus, run_corpus
from .config import KIND_ALIASES, RunConfig, load_config, with_overrides
from .errors import DomainError, SobolevLabError
from .function_spec import SpecParseError, parse_function_spec
from .functions import make_exponents
from .inequalities import property_sweep
from .manifold import asymmetry_gradient, asymmetry_lpstar
from .quadrature import QuadratureScheme
from .sobolev import sobolev_constant_refined

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _list_of_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _list_of_kinds(text: str) -> tuple[str, ...]:
    return tuple(KIND_ALIASES.get(t.strip(), t.strip()) for t in text.split(",") if t.strip())


def _exponents_or_exit(n, p):
    try:
        return make_exponents(n, p)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def cmd_constant(args) -> int:
    exps = _exponents_or_exit(args.n, args.p)
    for res in args.resolution:
        ref = sobolev_constant_refined(exps, QuadratureScheme(kind="Radial1D", resolution=res))
        print(f"S(n={exps.n}, p={exps.p:g}) = {ref.value:.15g}  resolution={res}  "
              f"delta={ref.value - ref.coarse:+.3e}")
    return EXIT_OK


def _config_from_args(args) -> RunConfig:
    overrides = dict(
        n=args.n, p=args.p, samples=args.samples, eps_grid=args.eps_grid,
        perturbation_kinds=args.kinds, resolution=args.resolution, seed=args.seed,
        output_path=args.output, format=args.format, constants=args.constants,
        shrink_constants=args.shrink_constants, ratios=args.ratios,
        projected=args.projected, workers=args.workers,
    )
    if args.config:
        return load_config(args.config, **overrides)
    return with_overrides(RunConfig(), **overrides)


def _print_summary(summary: dict) -> None:
    counts = summary["counts"]
    print("samples={samples} ".format(**summary)
          + " ".join(f"{k}={v}" for k, v in counts.items()))
    for key in ("min_slack", "min_rhs_over_lhs", "order_deficits_violations",
                "max_log10_ratio", "ratio_count", "ratio_excluded", "ratio_unconverged",
                "projected_counts"):
        value = summary.get(key)
        if value is not None:
            print(f"{key}={value}")


def cmd_certify(args) -> int:
    try:
        cfg = _config_from_args(args)
    except (SobolevLabError, OSError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = run_corpus(cfg)
    path = cfg.resolved_output()
    path.parent.mkdir(parents=True, exist_ok=True)
    text = report.to_csv() if cfg.format == "csv" else report.to_json()
    with open(path, "w", newline="") as fh:
        fh.write(text)
    summary = report.summary()
    print(f"report: {path}")
    _print_summary(summary)
    for sid, err in report.errors:
        print(f"error {sid}: {err}", file=sys.stderr)
    violated = summary["counts"][VIOLATED] + (summary["projected_counts"] or {}).get(VIOLATED, 0)
    return EXIT_VIOLATION if violated else EXIT_OK


def cmd_clarkson(args) -> int:
    if args.trials < 1:
        print("error: trials must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if not args.p > 1:
        print("error: p must be > 1", file=sys.stderr)
        return EXIT_USAGE
    results = property_sweep(args.p, args.trials, args.seed)
    ok = True
    for name, res in results.items():
        status = "ok" if res.all_hold else "VIOLATED"
        ok &= res.all_hold
        equal = int((abs(res.slack) <= 1e-10).sum())
        print(f"{name:36s} trials={res.slack.size:7d} min_slack={res.min_slack:+.3e} "
              f"equality_cases={equal} {status}")
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_asymmetry(args) -> int:
    exps = _exponents_or_exit(args.n, args.p)
    try:
        u = parse_function_spec(args.spec, exps)
    except SpecParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    scheme = QuadratureScheme(resolution=args.resolution)
    try:
        grad = asymmetry_gradient(u, exps, scheme)
        lps = asymmetry_lpstar(u, exps, scheme)
    except SobolevLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for label, res in (("gradient_asymmetry", grad), ("lpstar_asymmetry", lps)):
        a = res.argmin
        print(f"{label} = {res.value:.10g}  c={a.c:.10g} lam={a.lam_scale:.10g} "
              f"center=[{', '.join(f'{t:.10g}' for t in a.center)}]  "
              f"multistarts={res.multistart_count} converged={res.converged} "
              f"evaluations={res.evaluations}")
    return EXIT_OK


def cmd_corpus(args) -> int:
    try:
        cfg = _config_from_args(args)
    except (SobolevLabError, OSError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    doc = {"config": asdict(cfg),
           "samples": [asdict(s) for s in generate_corpus(cfg)]}
    path = cfg.resolved_output()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"corpus: {path} ({cfg.samples} samples)")
    return EXIT_OK


def _add_run_flags(sp, default_output: str) -> None:
    sp.add_argument("--config", help="key = value config file (flags override it)")
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--eps-grid", type=_list_of_floats, help="comma-separated eps values")
    sp.add_argument("--kinds", type=_list_of_kinds,
                    help="comma-separated perturbation kinds (gaussian, compact, tangent)")
    sp.add_argument("--resolution", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--output", default=None,
                    help=f"output path (default {default_output}); relative paths are "
                         "placed under $SOBOLEV_LAB_OUTPUT_DIR when it is set")
    sp.add_argument("--format", choices=("csv", "json"))
    sp.add_argument("--constants", choices=("stated", "sound"))
    sp.add_argument("--shrink-constants", type=float,
                    help="divide both constants by this factor (checker mutation test)")
    sp.add_argument("--ratios", action="store_true", default=None,
                    help="also run the deficit / asymmetry^beta ratio study")
    sp.add_argument("--projected", action="store_true", default=None,
                    help="also certify against the nearest norm-matched bubble "
                         "(JSON reports carry these records)")
    sp.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sobolev-lab", description="Numerical checks of Sobolev stability.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("constant", help="optimal Sobolev constant S(n,p)")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--resolution", type=int, nargs="+", default=[256])
    sp.set_defaults(func=cmd_constant)

    sp = sub.add_parser("certify", help="certify the reduction inequality on a corpus")
    _add_run_flags(sp, "certify.csv")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("clarkson", help="random sweeps of the pointwise inequalities")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_clarkson)

    sp = sub.add_parser("asymmetry", help="distances of a described function to the manifold")
    sp.add_argument("spec", help="e.g. 'bubble(c=1, lam=1) + 0.2*gaussian(center=[1,0], width=0.5)'")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--resolution", type=int, default=64)
    sp.set_defaults(func=cmd_asymmetry)

    sp = sub.add_parser("corpus", help="generate a corpus and save its description as JSON")
    _add_run_flags(sp, "corpus.json")
    sp.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "corpus" and args.output is None:
        args.output = "corpus.json"
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "build_parser", "CSV_COLUMNS"]
