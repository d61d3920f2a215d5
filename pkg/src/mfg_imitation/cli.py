"""Command-line entry point: ``mfg-imitation {sweep,verify-bounds,adversarial,selfcheck}``.

Exit codes: 0 success, 1 invalid input, 2 verification failure.
Relative ``--out`` paths resolve against ``$MFG_IMITATION_OUTPUT_DIR`` when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import experiments as ex
from .attractor import alpha_family, alpha_policy
from .core import AttractorKernel, PolicySequence
from .errors import InvalidInputError, MfgError
from .gamespec import load_game
from .ipm import solve_mfc_adversarial, solve_vanilla_adversarial

OUTPUT_DIR_ENV = "MFG_IMITATION_OUTPUT_DIR"
EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _output_path(out: str | None, default_name: str) -> Path:
    path = Path(out) if out else Path(default_name)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _config(args) -> ex.SweepConfig:
    return ex.SweepConfig(
        alphas=args.alphas or ex.default_alphas(),
        lipschitz_values=args.lipschitz or ex.DEFAULT_LIPSCHITZ,
        horizons=args.horizons or ex.DEFAULT_HORIZONS,
        output_path=args.out,
        format=args.format,
        seed=args.seed,
    )


def cmd_sweep(args) -> int:
    config = _config(args)
    rows = ex.run_sweep(config)
    path = _output_path(config.output_path, f"sweep.{config.format}")
    ex.write_sweep(rows, path, config.format)
    bad = [r for r in rows if not r.agree]
    print(f"wrote {len(rows)} rows to {path}")
    if bad:
        print(f"{len(bad)} rows disagree beyond {ex.AGREEMENT_TOL:g}:", file=sys.stderr)
        for r in bad:
            print(f"  alpha={r.alpha} L={r.L} H={r.H} deviation={r.max_deviation:.3g}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_verify_bounds(args) -> int:
    config = _config(args)
    rows = ex.attractor_bound_rows(ex.run_sweep(config))
    if args.tabular_games > 0:
        rows += ex.tabular_bound_rows(args.tabular_games, seed=config.seed)
    path = _output_path(config.output_path, f"bounds.{config.format}")
    ex.write_bound_rows(rows, path, config.format)
    bad = [r for r in rows if not r.satisfied]
    print(f"checked {len(rows)} bounds, {len(bad)} violations; report in {path}")
    for r in bad:
        print(f"  {r.source} #{r.instance} alpha={r.alpha} L={r.L} H={r.H} {r.theorem}: "
              f"nig={r.nig:.6g} > bound={r.bound:.6g}", file=sys.stderr)
    return EXIT_VERIFY if bad else EXIT_OK


def cmd_adversarial(args) -> int:
    if not args.game:
        raise InvalidInputError("--game is required")
    mfg, expert = load_game(args.game)
    attractor = isinstance(mfg.kernel, AttractorKernel)
    if expert is None:
        if not attractor:
            raise InvalidInputError("the game spec must supply an expert policy for non-attractor games")
        expert = alpha_policy(0.0, mfg.horizon)
    if args.mode == "mfc":
        family = alpha_family(mfg.horizon, args.alpha_step) if attractor else None
        trace = solve_mfc_adversarial(mfg, expert, family)
    else:
        init = expert if args.init == "expert" else PolicySequence.uniform(*mfg.shape)
        trace = solve_vanilla_adversarial(mfg, expert, max_iters=args.max_iters, tolerance=args.tolerance, init=init)
    path = _output_path(args.out, f"trace_{args.mode}.json")
    try:
        path.write_text(json.dumps(trace.to_dict(), indent=1) + "\n")
    except OSError as exc:
        raise InvalidInputError(f"cannot write {path}: {exc.strerror or exc}") from None
    print(f"{args.mode}: objective {trace.final_objective:.12g} after {len(trace.iterations)} iterations "
          f"(converged={trace.converged}); trace in {path}")
    return EXIT_OK


def cmd_selfcheck(args, builder=None) -> int:
    kwargs = {} if builder is None else {"builder": builder}
    results = ex.run_selfcheck(seed=args.seed, **kwargs)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("selfcheck passed" if ok else "selfcheck FAILED")
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfg-imitation", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def grid_flags(p):
        p.add_argument("--alphas", type=_floats, help="comma-separated alpha values (default 0, 0.01, ..., 1)")
        p.add_argument("--lipschitz", type=_floats, help="comma-separated L values (default 0.01,0.1,0.5,1,2)")
        p.add_argument("--horizons", type=_ints, help="comma-separated horizons (default 3,25,50,75,100)")

    def io_flags(p):
        p.add_argument("--out", help=f"output file (relative paths go under ${OUTPUT_DIR_ENV} if set)")
        p.add_argument("--format", choices=ex.FORMATS, default="csv")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("sweep", help="attractor sweep, closed form vs generic pipeline")
    grid_flags(p)
    io_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-bounds", help="check the NIG bounds on the attractor grid and random games")
    grid_flags(p)
    io_flags(p)
    p.add_argument("--tabular-games", type=int, default=100, help="random population-independent games (0 to skip)")
    p.set_defaults(func=cmd_verify_bounds)

    p = sub.add_parser("adversarial", help="run an adversarial imitation solver on a JSON game spec")
    p.add_argument("--game", help="JSON game spec")
    p.add_argument("--mode", choices=("vanilla", "mfc"), default="mfc")
    p.add_argument("--out", help="trace JSON file")
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--init", choices=("uniform", "expert"), default="uniform", help="vanilla-mode starting policy")
    p.add_argument("--alpha-step", type=float, default=0.01, help="alpha grid step for the attractor MFC family")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_adversarial)

    p = sub.add_parser("selfcheck", help="run the built-in verification suites")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except (InvalidInputError, MfgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
