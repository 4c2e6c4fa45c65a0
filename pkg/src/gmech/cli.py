"""Batch command surface: price, axioms, decompose, probe, recover, audit, synth.

Reports are JSON by default (sorted keys, so a fixed config and seed gives a
byte-identical report); the tabular commands also emit CSV.  Exit codes:
0 pass, 1 numerical failure or failed verdict, 2 usage, 3 bad input data.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import __version__
from .errors import ChainDataError, GmechError
from .generators import (
    BSMarketParams,
    Generator,
    abs_z_generator,
    black_scholes_generator,
    domination_generator,
    zero_generator,
)
from .lattice import build_grid, build_lattice
from .engine import (
    DividendStream,
    TerminalClaim,
    as_mechanism,
    make_underlying_map,
    price,
    solve_bsde,
)
from .analysis import (
    axiom_suite,
    doob_meyer,
    grid_points,
    recover_generator,
    z_probe,
)
from .market import load_chain, run_domination_test, synth_chain

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_DATA = 3


# -- spec parsers -------------------------------------------------------------

def parse_generator(spec: str) -> Generator:
    """zero | gmu:MU | abs_z:C | bs:r=..,b=..,sigma=.."""
    kind, _, rest = spec.partition(":")
    if kind == "zero":
        return zero_generator()
    if kind == "gmu":
        return domination_generator(float(rest))
    if kind == "abs_z":
        return abs_z_generator(float(rest))
    if kind == "bs":
        kv = dict(item.split("=", 1) for item in rest.split(",") if item)
        return black_scholes_generator(BSMarketParams(
            r=float(kv["r"]), b=float(kv["b"]), sigma=float(kv["sigma"])))
    raise ValueError(f"unknown generator spec {spec!r}")


def parse_payoff(spec: str, gen: Generator, args) -> TerminalClaim:
    """bm | linbm:Z | const:C | call:K | put:K"""
    kind, _, rest = spec.partition(":")
    if kind == "bm":
        return TerminalClaim(lambda b: np.asarray(b, dtype=float), name="bm")
    if kind == "linbm":
        zbar = float(rest)
        return TerminalClaim(lambda b: zbar * np.asarray(b, dtype=float),
                             name=spec)
    if kind == "const":
        c = float(rest)
        return TerminalClaim(lambda b: c + 0.0 * np.asarray(b, dtype=float),
                             name=spec)
    if kind in ("call", "put"):
        strike = float(rest)
        s0, vol, drift = _underlying_args(gen, args)
        to_price = make_underlying_map(s0, vol, args.T - args.t0, drift)
        if kind == "call":
            return TerminalClaim(lambda b: np.maximum(to_price(b) - strike, 0.0),
                                 name=spec)
        return TerminalClaim(lambda b: np.maximum(strike - to_price(b), 0.0),
                             name=spec)
    raise ValueError(f"unknown payoff spec {spec!r}")


def _underlying_args(gen: Generator, args):
    s0 = args.s0
    vol = args.vol
    drift = args.drift
    if gen.name.startswith("bs:"):
        kv = dict(item.split("=", 1) for item in gen.name[3:].split(","))
        vol = vol if vol is not None else float(kv["sigma"])
        drift = drift if drift is not None else float(kv["b"])
    if s0 is None or vol is None:
        raise ValueError("call/put payoffs need --s0 and --vol "
                         "(or a bs:... generator)")
    return s0, vol, (0.0 if drift is None else drift)


def _emit(args, payload: dict | str) -> None:
    text = payload if isinstance(payload, str) else json.dumps(
        payload, sort_keys=True, indent=2)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _lattice(args):
    return build_lattice(build_grid(args.t0, args.T, args.steps))


# -- subcommands ---------------------------------------------------------------

def cmd_price(args) -> int:
    gen = parse_generator(args.gen)
    lattice = _lattice(args)
    claim = parse_payoff(args.payoff, gen, args)
    dividends = (DividendStream.from_rate(lattice, args.div_rate)
                 if args.div_rate else None)
    res = solve_bsde(gen, claim, dividends, lattice)
    report = {
        "command": "price",
        "gen": args.gen,
        "payoff": args.payoff,
        "steps": args.steps,
        "t0": args.t0,
        "T": args.T,
        "y0": float(res.y.at(0)[0]),
        "picard_iters": res.picard_iters,
        "residual": res.residual,
    }
    if args.surface:
        report["surface"] = [res.y.at(i).tolist()
                             for i in range(lattice.n_steps + 1)]
    _emit(args, report)
    return EXIT_OK


def cmd_axioms(args) -> int:
    gen = parse_generator(args.gen)
    lattice = _lattice(args)
    mech = as_mechanism(gen, lattice)
    report = axiom_suite(mech, lattice, samples=args.samples, seed=args.seed)
    _emit(args, {
        "command": "axioms",
        "gen": args.gen,
        "samples": args.samples,
        "seed": args.seed,
        "all_passed": report.all_passed(),
        "laws": report.as_dict(),
    })
    return EXIT_OK if report.all_passed() else EXIT_FAIL


def cmd_decompose(args) -> int:
    gen = parse_generator(args.gen)
    lattice = _lattice(args)
    claim = parse_payoff(args.payoff, gen, args)
    stream = DividendStream.from_rate(lattice, args.div_rate)
    surface = solve_bsde(gen, claim, stream, lattice).y
    result = doob_meyer(gen, surface, None, lattice)
    worst = max(
        float(np.max(np.abs(result.increments.at(i) - stream.increment(i))))
        for i in range(lattice.n_steps)
    )
    ok = worst <= 1e-9 and result.reconstruction_error <= 1e-9
    _emit(args, {
        "command": "decompose",
        "gen": args.gen,
        "payoff": args.payoff,
        "div_rate": args.div_rate,
        "max_increment_error": worst,
        "reconstruction_error": result.reconstruction_error,
        "increasing": result.is_increasing(),
        "passed": ok,
    })
    return EXIT_OK if ok else EXIT_FAIL


def cmd_probe(args) -> int:
    gen = parse_generator(args.gen)
    lattice = _lattice(args)
    mech = as_mechanism(gen, lattice)
    zbars = [float(v) for v in args.zbar.split(",")]
    probes = {f"{z:g}": z_probe(mech, z, 0, lattice.n_steps) for z in zbars}
    _emit(args, {
        "command": "probe",
        "gen": args.gen,
        "horizon": args.T - args.t0,
        "probes": probes,
    })
    return EXIT_OK


def cmd_recover(args) -> int:
    gen = parse_generator(args.gen_hidden)
    steps = args.steps if args.steps else 2 ** args.level
    lattice = build_lattice(build_grid(args.t0, args.T, steps))
    mech = as_mechanism(gen, lattice)
    if args.points:
        with open(args.points) as fh:
            pts = [(float(a), float(b)) for a, b in json.load(fh)]
    else:
        ys = [float(v) for v in args.y_grid.split(",")]
        zs = [float(v) for v in args.z_grid.split(",")]
        pts = grid_points(ys, zs)
    time_indices = ([int(v) for v in args.times.split(",")]
                    if args.times else None)
    recovered = recover_generator(mech, args.level, pts, lattice,
                                  time_indices=time_indices)
    ok = (recovered.lipschitz_ratio <= recovered.mu + 1e-6
          and (recovered.zero_defect is None or recovered.zero_defect <= 1e-6))
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["t", "y", "z", "g"])
        for row in recovered.rows():
            w.writerow([repr(v) for v in row])
        _emit(args, buf.getvalue().rstrip("\n"))
    else:
        _emit(args, {
            "command": "recover",
            "gen_hidden": args.gen_hidden,
            "level": args.level,
            "certificate_ok": ok,
            **recovered.as_dict(),
        })
    return EXIT_OK if ok else EXIT_FAIL


def cmd_audit(args) -> int:
    chain = load_chain(args.chain)
    vol = args.vol
    report = run_domination_test(chain, mu=args.mu, n_steps=args.steps,
                                 vol_for_lattice=vol)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["family", "tested", "passed", "violated"])
        for name, count in report.families.items():
            w.writerow([name, count.tested, count.passed, count.violated])
        w.writerow(["anomalies", len(report.anomalies), "", ""])
        _emit(args, buf.getvalue().rstrip("\n"))
    else:
        _emit(args, {"command": "audit", "chain": args.chain,
                     **report.as_dict()})
    return EXIT_OK if report.clean() else EXIT_FAIL


def cmd_synth(args) -> int:
    params = BSMarketParams(r=args.r, b=args.b, sigma=args.sigma)
    strikes = np.linspace(args.lo, args.hi, args.n_strikes)
    chain = synth_chain(params, args.s0, strikes,
                        as_of=args.as_of_days / 365.0,
                        expiry=args.expiry_days / 365.0,
                        seed=args.seed, noise=args.noise)
    chain.to_csv(args.out)
    print(f"wrote {args.out} ({chain.n_strikes} strikes)")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def _add_lattice_args(p, steps_default=64):
    p.add_argument("--t0", type=float, default=0.0, help="start time (years)")
    p.add_argument("--T", type=float, default=1.0, help="horizon (years)")
    p.add_argument("--steps", type=int, default=steps_default,
                   help="lattice steps")


def _add_payoff_args(p):
    p.add_argument("--payoff", required=True,
                   help="bm | linbm:Z | const:C | call:K | put:K")
    p.add_argument("--s0", type=float, default=None, help="spot for call/put")
    p.add_argument("--vol", type=float, default=None,
                   help="volatility of the underlying map")
    p.add_argument("--drift", type=float, default=None,
                   help="drift of the underlying map")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gmech",
        description="Nonlinear pricing-mechanism laboratory on a binomial lattice",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price one claim under a named generator")
    p.add_argument("--gen", required=True,
                   help="zero | gmu:MU | abs_z:C | bs:r=..,b=..,sigma=..")
    _add_payoff_args(p)
    _add_lattice_args(p)
    p.add_argument("--div-rate", type=float, default=0.0,
                   help="constant payout rate")
    p.add_argument("--surface", action="store_true",
                   help="include the full node surface in the report")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_price)

    p = sub.add_parser("axioms", help="run the structural-law suite")
    p.add_argument("--gen", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    _add_lattice_args(p, steps_default=8)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_axioms)

    p = sub.add_parser("decompose",
                       help="round-trip a constructed supermartingale")
    p.add_argument("--gen", required=True)
    _add_payoff_args(p)
    _add_lattice_args(p, steps_default=16)
    p.add_argument("--div-rate", type=float, default=0.1,
                   help="payout rate of the constructed stream")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("probe", help="read driver values off a mechanism")
    p.add_argument("--gen", required=True)
    p.add_argument("--zbar", default="1.0", help="comma list of hedge levels")
    _add_lattice_args(p, steps_default=64)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("recover",
                       help="tabulate the generating function of a hidden generator")
    p.add_argument("--gen-hidden", required=True)
    p.add_argument("--level", type=int, default=6, help="dyadic refinement level")
    p.add_argument("--points", default=None,
                   help="JSON file with [[y, z], ...] sample points")
    p.add_argument("--y-grid", default="-2,-1,0,1,2")
    p.add_argument("--z-grid", default="-2,-1,0,1,2")
    p.add_argument("--times", default=None,
                   help="comma list of dyadic time indices (default: all)")
    p.add_argument("--steps", type=int, default=0,
                   help="lattice steps (default 2^level)")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_recover)

    p = sub.add_parser("audit", help="domination audit of an option chain")
    p.add_argument("--chain", required=True, help="chain CSV path")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--vol", type=float, default=0.2,
                   help="volatility of the lattice underlying map")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_audit)

    p = sub.add_parser("synth", help="write a synthetic chain CSV")
    p.add_argument("--s0", type=float, default=100.0)
    p.add_argument("--r", type=float, default=0.05)
    p.add_argument("--b", type=float, default=0.05)
    p.add_argument("--sigma", type=float, default=0.2)
    p.add_argument("--n-strikes", type=int, default=20)
    p.add_argument("--lo", type=float, default=80.0)
    p.add_argument("--hi", type=float, default=120.0)
    p.add_argument("--as-of-days", type=float, default=0.0)
    p.add_argument("--expiry-days", type=float, default=91.25)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.fn(args)
    except (ChainDataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GmechError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
