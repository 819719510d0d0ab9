"""``qmarket`` command line: market runs, gamma sweeps, game surfaces and Nash tables.

Every subcommand writes CSV files plus ``manifest.json`` into ``--out``.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import game as _game
from . import nash as _nash
from . import reports
from .experiments import DEFAULT_GAMMAS, DEFAULT_RUNS, gamma_sweep, run_experiment
from .market import MarketConfig

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

SEED_NOTE = ("run r uses run_seed = seed + r; streams are PCG64 seeded from "
             "SeedSequence([run_seed, tag, trader_id]), tag 0 init, 1 noise, 2 market")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_k_range(text: str) -> list[int]:
    """'23', '3-12' or '3,5,23'."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = (int(v) for v in part.split("-", 1))
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("k values must be positive integers")
    return sorted(set(out))


def _k_range(text: str) -> list[int]:
    try:
        return parse_k_range(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _shared(parser, *, runs=False, market=False, game=False, k_default="2-23"):
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--plot", action="store_true", help="also render PNG figures into --out")
    if runs:
        parser.add_argument("--seed", type=_seed, default=0, help="master seed (64-bit)")
        parser.add_argument("--runs", type=_positive_int, default=DEFAULT_RUNS)
        parser.add_argument("--threads", type=_positive_int, default=1, help="worker processes")
    if market:
        parser.add_argument("--rounds", type=_positive_int, default=1000)
        parser.add_argument("--agents", type=int, default=8, help="number of traders")
        parser.add_argument("--tolerance", type=float, default=1.0, help="bid-ask tolerance")
        parser.add_argument("--phase-policy", choices=("random", "fixed"), default="random")
        parser.add_argument("--fixed-phi", type=float, default=0.0)
        parser.add_argument("--fixed-psi", type=float, default=0.0)
        parser.add_argument("--reward", choices=("net-worth", "delta"), default="net-worth")
        parser.add_argument("--baseline", action="store_true", help="subtract a running reward mean")
        parser.add_argument("--normalize-obs", action="store_true")
        parser.add_argument("--match-order", choices=("id", "shuffle"), default="id")
        parser.add_argument("--allow-short", action="store_true")
    if game:
        parser.add_argument("--mode", choices=("quantum", "classical"), default="quantum")
        parser.add_argument("--gamma", type=float, default=math.pi / 2)
        parser.add_argument("--p", type=float, default=2 / 3)
        parser.add_argument("--phi1", type=float, default=0.0)
        parser.add_argument("--phi2", type=float, default=math.pi / 3)
    parser.add_argument("--config", type=Path, help="key=value file; explicit flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qmarket", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qmarket {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("market", help="repeated market runs")
    _shared(p, runs=True, market=True)
    p.add_argument("--mode", choices=("classical", "quantum"), default="classical")
    p.add_argument("--gamma", type=float, default=math.pi / 2)

    p = sub.add_parser("gamma-sweep", help="quantum market price change versus gamma")
    _shared(p, runs=True, market=True)
    p.add_argument("--gamma", dest="gammas", type=_float_list, default=list(DEFAULT_GAMMAS),
                   help="comma-separated gamma values")

    p = sub.add_parser("game-surface", help="two-player utilities and best responses on a grid")
    _shared(p, game=True)
    p.add_argument("--k", type=_positive_int, default=100, help="grid resolution")

    p = sub.add_parser("nash", help="mixed equilibria of the discretized game")
    _shared(p, game=True)
    p.add_argument("--k", type=_k_range, default=parse_k_range("1-23"),
                   help="k values, e.g. 23, 3-12 or 3,5,23")
    p.add_argument("--support-limit", type=int, default=_nash.SUPPORT_ENUM_LIMIT,
                   help="largest grid size solved by full support enumeration")
    return parser


def read_config(path: Path) -> list[str]:
    """Turn ``key = value`` lines into flags; ``#`` starts a comment."""
    argv: list[str] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            argv.append(flag)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            argv.extend([flag, value])
    return argv


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            extra = read_config(args.config)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        except UsageError as exc:
            parser.error(str(exc))
        # config first, so flags given on the command line override it
        args = parser.parse_args([argv[0], *extra, *argv[1:]])
    return args


def _market_config(args, mode: str, gamma: float) -> MarketConfig:
    return MarketConfig(
        n_traders=args.agents, tolerance=args.tolerance, rounds=args.rounds, mode=mode,
        gamma=gamma, phase_policy=args.phase_policy, fixed_phi=args.fixed_phi,
        fixed_psi=args.fixed_psi, seed=args.seed, reward=args.reward, baseline=args.baseline,
        normalize_obs=args.normalize_obs, match_order=args.match_order,
        allow_short=args.allow_short,
    )


def _game_spec(args) -> _game.GameSpec:
    if args.mode == "classical":
        return _game.GameSpec(2, args.p, scale=_game.CLASSICAL)
    return _game.GameSpec(2, args.p, args.gamma, phases=(args.phi1, args.phi2))


def _flags(args) -> dict:
    out = {}
    for key, value in vars(args).items():
        if isinstance(value, Path):
            value = str(value)
        out[key] = value
    return out


def cmd_market(args) -> dict:
    config = _market_config(args, args.mode, args.gamma)
    exp = run_experiment(config, args.runs, args.threads)
    files = reports.write_market(args.out, exp)
    if args.plot:
        from . import plotting

        prices = exp.prices()
        plotting.price_paths(prices, args.out / "prices.png", f"{config.mode} market, {args.runs} runs")
        worth = np.array([r.net_worth for r in exp.runs[0]])
        plotting.net_worth_paths(worth, args.out / "net_worth_run0.png", "run 0")
    final = exp.final_prices()
    print(f"mean final price {final.mean():.4f} (std {final.std():.4f}) over {args.runs} runs")
    return {"config": asdict(config), "files": files}


def cmd_gamma_sweep(args) -> dict:
    if not args.gammas:
        raise UsageError("need at least one gamma value")
    config = _market_config(args, "quantum", math.pi / 2)
    rows, _ = gamma_sweep(config, args.gammas, args.runs, args.threads)
    n = reports.write_sweep(args.out / "gamma_sweep.csv", rows)
    if args.plot:
        from . import plotting

        plotting.gamma_bars([r.gamma for r in rows], [r.mean_delta for r in rows],
                            [r.std_delta for r in rows], args.out / "gamma_sweep.png")
    for r in rows:
        print(f"gamma {r.gamma:.4f}: mean delta price {r.mean_delta:+.4f} (std {r.std_delta:.4f})")
    return {"config": asdict(config), "files": {"gamma_sweep.csv": n}}


def _analytic_applies(spec: _game.GameSpec) -> bool:
    ref = _game.MISMATCHED
    return (spec.is_quantum and math.isclose(spec.p, ref.p) and math.isclose(spec.gamma, ref.gamma)
            and np.allclose(spec.phases, ref.phases))


def cmd_game_surface(args) -> dict:
    spec = _game_spec(args)
    grid, u1, u2, br1, br2 = _game.best_response_sets(spec, args.k)
    out = args.out

    def surface():
        for player, u in ((1, u1), (2, u2)):
            for m in range(len(grid)):
                for n in range(len(grid)):
                    yield player, m, n, grid[m], grid[n], u[m, n]

    def responses():
        for n, rows in enumerate(br1):
            for m in rows:
                yield 1, "grid", grid[n], grid[m]
        for m, cols in enumerate(br2):
            for n in cols:
                yield 2, "grid", grid[m], grid[n]
        if _analytic_applies(spec):
            for t in grid:
                yield 1, "analytic", t, _game.best_response_p1(t, spec)
            for t in grid:
                yield 2, "analytic", t, _game.best_response_p2(t, spec)

    cells = sorted(set((m, n) for n, rows in enumerate(br1) for m in rows)
                   & set((m, n) for m, cols in enumerate(br2) for n in cols))
    files = {
        "utility_surface.csv": reports.write_table(out / "utility_surface.csv", reports.SURFACE_HEADER, surface()),
        "best_responses.csv": reports.write_table(out / "best_responses.csv", reports.BEST_RESPONSE_HEADER,
                                                  responses()),
        "pure_nash.csv": reports.write_table(out / "pure_nash.csv", reports.PURE_NASH_HEADER,
                                             ((grid[m], grid[n]) for m, n in cells)),
    }
    if args.plot:
        from . import plotting

        plotting.utility_surfaces(grid, u1, u2, br1, br2, out / "utility_surface.png")
    print(f"{len(cells)} pure equilibria on the k={args.k} grid")
    return {"game": asdict(spec), "files": files}


def nash_rows(spec: _game.GameSpec, ks, support_limit: int = _nash.SUPPORT_ENUM_LIMIT, log=None):
    """Rows of the Nash table, one per (k, equilibrium, player)."""
    rows = []
    for k in ks:
        t0 = time.perf_counter()
        game = _nash.build_bimatrix(spec, k)
        result = _nash.enumerate_mixed(game, support_limit)
        for idx, prof in enumerate(result.profiles):
            avg = _nash.average_strategy(prof, game)
            for player, w in ((1, prof.w1), (2, prof.w2)):
                support = np.flatnonzero(w)
                rows.append({
                    "k": k, "equilibrium_index": idx, "player": player, "avg_theta": avg[player - 1],
                    "support_size": len(support),
                    "weights": ";".join(f"{i}:{reports.fmt(w[i])}" for i in support),
                    "solver": result.method, "completeness": result.completeness,
                })
        if log:
            log(f"k={k}: {len(result.profiles)} equilibria ({result.method}, {result.completeness}) "
                f"in {time.perf_counter() - t0:.2f}s")
    return rows


def cmd_nash(args) -> dict:
    spec = _game_spec(args)
    rows = nash_rows(spec, args.k, args.support_limit, log=print)
    n = reports.write_table(args.out / "nash.csv", reports.NASH_HEADER,
                            ([r[h] for h in reports.NASH_HEADER] for r in rows))
    if args.plot:
        from . import plotting

        plotting.nash_averages(rows, args.out / "nash.png")
    return {"game": asdict(spec), "files": {"nash.csv": n}}


COMMANDS = {
    "market": cmd_market,
    "gamma-sweep": cmd_gamma_sweep,
    "game-surface": cmd_game_surface,
    "nash": cmd_nash,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        info = COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        # bad flag values surface as ValueError from the config types
        print(f"qmarket: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"qmarket: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    manifest = {
        "command": args.command,
        "flags": _flags(args),
        "seed_derivation": SEED_NOTE,
        "version": __version__,
        **info,
    }
    reports.write_manifest(args.out, manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
