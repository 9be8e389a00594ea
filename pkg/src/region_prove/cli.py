"""Command-line front end.

Exit codes: 0 success, 2 unreadable or inconsistent inputs, 3 internal
invariant breach.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import io as rio
from .engine import EngineConfig, EngineTimeout, Heuristic, InvariantError, audit_safe_regions, check_outcome, run_eprove
from .network import ParseError, augment, load_network, load_property
from .oracle import OracleRefused, grid_safe_rate, mc_safe_rate, region_violation_fraction
from .tolerance import DEFAULT_ALPHA, DEFAULT_N, DEFAULT_RATE, ToleranceParams, max_regions, required_sample_size

log = logging.getLogger("region_prove")

EXIT_INPUT = 2
EXIT_INVARIANT = 3


class InputError(Exception):
    pass


def _pct(x: float) -> str:
    return f"{x * 100:.4g}%"


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("REGION_PROVE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"REGION_PROVE_THREADS must be an integer, got {env!r}") from None
    return 1


def resolve_tolerance(alpha: float, rate: float, n: int | None, m: int | None) -> ToleranceParams:
    """Turn the --alpha/--rate/--n/--m flags into a consistent parameter set."""
    if n is not None:
        if m is not None:
            log.warning("both --n and --m given; --n=%d wins and m is recomputed", n)
        bound = max_regions(n, rate, alpha)
        if bound < 1:
            raise InputError(f"n={n} cannot reach alpha={alpha} at rate={rate} even for one region")
        return ToleranceParams(alpha, rate, n, bound)
    if m is not None:
        return ToleranceParams.for_region_bound(alpha, rate, m)
    return ToleranceParams.for_sample_size(alpha, rate, DEFAULT_N)


def _engine_config(args, heuristic=None) -> EngineConfig:
    try:
        tol = resolve_tolerance(args.alpha, args.rate, args.n, args.m)
        return EngineConfig(
            tolerance=tol,
            heuristic=Heuristic.parse(heuristic or args.heuristic),
            max_splits=args.max_splits,
            min_side_eps=args.eps,
            master_seed=args.seed,
            beta=args.beta,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _load(args):
    try:
        net = load_network(args.network, normalize=not args.no_normalize)
        prop = load_property(args.property)
    except (OSError, ParseError) as exc:
        raise InputError(str(exc)) from None
    if prop.domain.dim != net.input_dim:
        raise InputError(f"property has {prop.domain.dim} inputs, network expects {net.input_dim}")
    if prop.output_dim != net.output_dim:
        raise InputError(f"property constrains {prop.output_dim} outputs, network has {net.output_dim}")
    return net, prop


def summary_line(outcome) -> str:
    p = outcome.params
    return (
        f"regions={len(outcome.safe)} safe_rate={_pct(outcome.safe_rate)} "
        f"unsafe_regions={len(outcome.unsafe)} unsafe_rate={_pct(outcome.unsafe_rate)} "
        f"unknown_regions={len(outcome.unknown)} unknown_rate={_pct(outcome.unknown_rate)} "
        f"time={outcome.wall_time:.3f}s n={p.n} m={p.m} "
        f"guarantee={'yes' if outcome.guarantee_holds else 'no'}"
    )


def cmd_verify(args) -> int:
    net, prop = _load(args)
    cfg = _engine_config(args)
    try:
        outcome = run_eprove(net, prop, cfg, threads=_threads(args))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    check_outcome(outcome)
    prefix = Path(args.output)
    if prefix.parent and not prefix.parent.exists():
        prefix.parent.mkdir(parents=True)
    formats = args.format or ["csv", "json"]
    if "csv" in formats:
        prefix.with_suffix(".csv").write_text(rio.write_regions_csv(outcome))
    if "json" in formats:
        prefix.with_suffix(".json").write_text(rio.write_outcome_json(outcome))
    if "svg" in formats:
        if outcome.domain.dim != 2:
            log.warning("skipping SVG: domain is %d-dimensional", outcome.domain.dim)
        else:
            prefix.with_suffix(".svg").write_text(rio.render_svg_2d(outcome))
    if not outcome.guarantee_holds:
        log.warning(
            "%d regions exceed the bound m=%d; rerun with a larger --m for the joint confidence to hold",
            outcome.region_count, outcome.params.m,
        )
    print(summary_line(outcome))
    return 0


def cmd_samplesize(args) -> int:
    try:
        n = required_sample_size(args.alpha, args.rate, args.m)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    t = ToleranceParams(args.alpha, args.rate, n, args.m)
    print(
        f"n={n} alpha={args.alpha} rate={args.rate} m={args.m} "
        f"per_region_confidence={t.per_region_confidence!r} joint_confidence={t.joint_confidence!r}"
    )
    return 0


def cmd_oracle(args) -> int:
    net, prop = _load(args)
    aug = augment(net, prop)
    try:
        if args.method == "grid":
            report = grid_safe_rate(aug, prop.domain, args.cells)
        else:
            report = mc_safe_rate(aug, prop.domain, args.samples, args.seed)
    except OracleRefused as exc:
        raise InputError(str(exc)) from None
    print(json.dumps(report.to_dict()))
    return 0


def cmd_compare(args) -> int:
    net, prop = _load(args)
    rows = []
    for h in Heuristic:
        cfg = _engine_config(args, heuristic=h)
        try:
            out = run_eprove(net, prop, cfg, threads=_threads(args), deadline=time.monotonic() + args.timeout)
            check_outcome(out)
            rows.append((h, out))
        except EngineTimeout:
            rows.append((h, None))
    done = [(h, o) for h, o in rows if o is not None]
    marked = None
    if done:
        top = max(o.safe_rate for _, o in done)
        near = [(len(o.safe), i) for i, (h, o) in enumerate(rows) if o is not None and o.safe_rate >= top - 0.005]
        marked = min(near)[1]
    for i, (h, o) in enumerate(rows):
        if o is None:
            print(f"heuristic={h.value} regions=- safe_rate=- time=- best=no")
        else:
            print(
                f"heuristic={h.value} regions={len(o.safe)} safe_rate={_pct(o.safe_rate)} "
                f"time={o.wall_time:.3f}s best={'yes' if i == marked else 'no'}"
            )
    return 0


def cmd_plot(args) -> int:
    try:
        outcome = rio.read_outcome_json(Path(args.outcome).read_text())
        svg = rio.render_svg_2d(outcome, args.width, args.height)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(str(exc)) from None
    Path(args.output).write_text(svg)
    print(f"rects={len(outcome.records)} output={args.output}")
    return 0


def cmd_audit(args) -> int:
    try:
        outcome = rio.read_outcome_json(Path(args.outcome).read_text())
        net = load_network(args.network, normalize=not args.no_normalize)
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(str(exc)) from None
    if outcome.prop is None:
        raise InputError("outcome file carries no property")
    aug = augment(net, outcome.prop)
    report = audit_safe_regions(outcome, lambda box: region_violation_fraction(aug, box, args.cells))
    for rec, frac in report.entries:
        bounds = "[" + ", ".join(f"[{a:.9g}, {b:.9g}]" for a, b in rec.box.bounds()) + "]"
        print(f"region={bounds} violation={frac * 100:.4f}%")
    print(
        f"audited={len(report.entries)} exceed={report.exceed_count} "
        f"threshold={_pct(report.threshold)} max_violation={report.max_fraction * 100:.4f}%"
    )
    return 0


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("network", help=".nnet or JSON network file")
    p.add_argument("property", help="JSON property file")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="joint confidence (default 0.999)")
    p.add_argument("--rate", type=float, default=DEFAULT_RATE, help="per-region safe fraction (default 0.995)")
    p.add_argument("--n", type=int, default=None, help="samples per region (default 3500)")
    p.add_argument("--m", type=int, default=None, help="region-count bound; derives n unless --n is given")
    p.add_argument("--heuristic", default="h5", choices=[h.value for h in Heuristic])
    p.add_argument("--max-splits", type=int, default=18)
    p.add_argument("--eps", type=float, default=None, help="also stop splitting below this side length")
    p.add_argument("--beta", type=float, default=0.05, help="minimum child fraction per split")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--no-normalize", action="store_true", help="ignore .nnet input/output normalization")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="region-prove", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="enumerate safe regions")
    _add_engine_flags(p)
    p.add_argument("--output", "-o", default="outcome", help="output path prefix (default ./outcome)")
    p.add_argument("--format", action="append", choices=["csv", "json", "svg"], help="repeatable; default csv+json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("samplesize", help="samples per region for a confidence target")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--rate", type=float, default=DEFAULT_RATE)
    p.add_argument("--m", type=int, default=1)
    p.set_defaults(func=cmd_samplesize)

    p = sub.add_parser("oracle", help="reference safe rate by grid or Monte Carlo")
    p.add_argument("network")
    p.add_argument("property")
    p.add_argument("--method", choices=["grid", "mc"], default="grid")
    p.add_argument("--cells", type=int, default=1000, help="grid cells per dimension")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare-heuristics", help="run verify once per heuristic")
    _add_engine_flags(p)
    p.add_argument("--timeout", type=float, default=300.0, help="per-heuristic wall-clock limit in seconds")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot", help="render a 2-D outcome JSON as SVG")
    p.add_argument("outcome")
    p.add_argument("--output", "-o", default="outcome.svg")
    p.add_argument("--width", type=int, default=400)
    p.add_argument("--height", type=int, default=400)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("audit", help="grid-measured violation rate of every safe region")
    p.add_argument("outcome")
    p.add_argument("network")
    p.add_argument("--cells", type=int, default=100, help="grid cells per dimension and region")
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
