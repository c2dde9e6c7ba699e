"""Command-line interface.

One subcommand per experiment: ``quote`` and ``settle`` for the pool and
batch primitives, ``backtest`` / ``sweep-fees`` / ``sweep-noise`` for the
counterfactual return studies, ``attack`` for the operator-vs-arbitrageur
profit bounds, ``mc-risk`` for the spread Monte Carlo, and ``split-demo``
for the trade-splitting path-dependence table.

Human-readable tables go to stdout; when ``--out-dir`` is given, every
numeric result is also written as CSV/JSON alongside a ``manifest.json``
recording the command, resolved parameters, input digests, seed, and tool
version, so identical manifests reproduce outputs byte for byte (no
wall-clock state enters any output).

Exit codes: 0 success, 2 input validation, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from fmamm import __version__
from fmamm.amm import (
    ConvergenceError,
    Reserves,
    cpamm_average_price,
    effective_price,
    pre_fee_price,
)
from fmamm.arbitrage import cpamm_arbitrage_profit, malicious_operator_attack
from fmamm.backtest import (
    BlockClock,
    NO_NOISE,
    ScenarioConfig,
    balanced_reserves,
    block_grid_series,
    compare_returns,
    fee_sweep,
    noise_volume_sweep,
    risk_monte_carlo,
    run_fmamm_backtest,
)
from fmamm.batch import load_order_batches, settle_batch, split_trade_experiment
from fmamm.market_data import format_number, load_price_series
from fmamm.uniswap import load_swap_records, per_block_swap_volume, run_baseline

__all__ = ["main"]

# external labeling estimate: share of a typical venue's volume that is noise
# trading rather than arbitrage or attack flow; used only to annotate the
# noise sweep's second volume label, never in any computation
NOISE_SHARE_OF_VOLUME = 0.6


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(
    out_dir: Path, command: str, parameters: dict, inputs: list, seed, config=None
) -> None:
    manifest = {
        "command": command,
        "config": str(config) if config is not None else None,
        "parameters": parameters,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "seed": seed,
        "version": __version__,
    }
    _write_json(out_dir / "manifest.json", manifest)


def _out_dir(args) -> Path | None:
    if args.out_dir is None:
        return None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_long_format(path, runs: dict) -> None:
    """Plot-ready long format: run_id,timestamp,metric,value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "timestamp", "metric", "value"])
        for run_id, series in runs.items():
            for metric, column in (("value", series.values), ("cumulative_roi", series.roi)):
                for t, v in zip(series.timestamps, column):
                    writer.writerow([run_id, format_number(t), metric, repr(float(v))])


def _reserves(args) -> Reserves:
    return Reserves(args.y, args.x_reserve)


def cmd_quote(args) -> int:
    reserves = _reserves(args)
    sign = args.side_sign if args.side_sign is not None else (1.0 if args.trade >= 0 else -1.0)
    base = pre_fee_price(reserves, args.trade, args.fee)
    effective = effective_price(reserves, args.trade, args.fee, sign)
    print(f"pre-fee price    {base:.6f}")
    print(f"effective price  {effective:.6f}")
    if args.trade != 0.0 and args.trade < reserves.x:
        print(f"cpamm average    {cpamm_average_price(reserves, args.trade):.6f}")
    out = _out_dir(args)
    if out is not None:
        _write_json(
            out / "quote.json",
            {"pre_fee_price": base, "effective_price": effective, "net_trade": args.trade,
             "fee": args.fee, "order_sign": sign, "y": reserves.y, "x": reserves.x},
        )
        _write_manifest(out, "quote", vars_without(args, "func"), [], None)
    return 0


def cmd_settle(args) -> int:
    reserves = _reserves(args)
    batches = load_order_batches(args.orders)
    reports = []
    for batch in batches:
        reserves, report = settle_batch(reserves, batch, args.fee)
        reports.append(report.to_dict())
        fills = ", ".join(
            f"{f.order_id}@{f.price:.6f}" for f in report.fills
        )
        print(
            f"block {batch.block_index}: net {report.net_trade:+.6f} "
            f"matched {report.matched_volume:.6f} pre-fee {report.pre_fee_price:.6f} | {fills}"
        )
    print(f"final reserves: y={reserves.y!r} x={reserves.x!r}")
    out = _out_dir(args)
    if out is not None:
        _write_json(out / "settlements.json", {"reports": reports,
                                               "final_reserves": {"y": reserves.y, "x": reserves.x}})
        _write_manifest(out, "settle", vars_without(args, "func"), [args.orders], None)
    return 0


def _load_scenario(args):
    cfg = ScenarioConfig.from_json(args.config)
    prices = load_price_series(cfg.price_csv, cfg.pair)
    clock = BlockClock.for_series(prices, mu=cfg.mu, gamma=cfg.gamma)
    p0 = float(prices.prices[0])
    initial = balanced_reserves(p0, cfg.initial_x)
    return cfg, prices, clock, initial


def cmd_backtest(args) -> int:
    cfg, prices, clock, initial = _load_scenario(args)
    result = run_fmamm_backtest(prices, clock, cfg.fee, NO_NOISE, initial)
    print(f"{cfg.pair}: {clock.n_blocks} blocks, fee {cfg.fee}")
    print(f"fm_amm terminal roi {result.terminal_roi:+.6%} ({result.n_rebalances} rebalances)")
    runs = {"fm_amm": result.series}
    summary = {"config": cfg.to_dict(), "fm_amm": result.summary}
    inputs = [cfg.price_csv]
    if cfg.swap_csv is not None:
        records = load_swap_records(cfg.swap_csv)
        marks = block_grid_series(prices, clock)
        baseline = run_baseline(records, marks, cfg.baseline_liquidity, cfg.compound_cadence)
        comparison = compare_returns(result.series, baseline)
        print(f"uniswap terminal roi {baseline.terminal_roi:+.6%}")
        print(f"difference {comparison.terminal_difference_pp:+.4f}pp (fm_amm minus uniswap)")
        runs["uniswap_v3_full_range"] = baseline
        summary["uniswap_v3_full_range"] = {"terminal_roi": baseline.terminal_roi}
        summary["terminal_difference_pp"] = comparison.terminal_difference_pp
        inputs.append(cfg.swap_csv)
    out = _out_dir(args)
    if out is not None:
        for run_id, series in runs.items():
            series.write_csv(out / f"{run_id}_returns.csv")
        if cfg.swap_csv is not None:
            comparison.write_csv(out / "comparison.csv")
        _write_json(out / "summary.json", summary)
        _write_long_format(out / "long.csv", runs)
        _write_manifest(out, "backtest", cfg.to_dict(), [args.config] + inputs, cfg.seed,
                        config=args.config)
    return 0


def cmd_sweep_fees(args) -> int:
    cfg, prices, clock, initial = _load_scenario(args)
    results = fee_sweep(prices, clock, cfg.fee_grid, initial)
    print(f"{cfg.pair}: zero-noise terminal roi by fee")
    rows = []
    for tau, result in results.items():
        print(f"  fee {tau:<8g} roi {result.terminal_roi:+.6%}  rebalances {result.n_rebalances}")
        rows.append({"fee": tau, "terminal_roi": result.terminal_roi,
                     "n_rebalances": result.n_rebalances})
    out = _out_dir(args)
    if out is not None:
        runs = {f"fee_{tau:g}": result.series for tau, result in results.items()}
        for run_id, series in runs.items():
            series.write_csv(out / f"{run_id}_returns.csv")
        _write_json(out / "summary.json", {"config": cfg.to_dict(), "rows": rows})
        _write_long_format(out / "long.csv", runs)
        _write_manifest(out, "sweep-fees", cfg.to_dict(), [args.config, cfg.price_csv],
                        cfg.seed, config=args.config)
    return 0


def cmd_sweep_noise(args) -> int:
    cfg, prices, clock, initial = _load_scenario(args)
    if cfg.swap_csv is None or cfg.pool_fee is None:
        raise ValueError("sweep-noise needs 'swap_csv' and 'pool_fee' in the config "
                         "to infer per-block baseline volume")
    records = load_swap_records(cfg.swap_csv)
    volume = per_block_swap_volume(records, clock.settlement_times(), cfg.pool_fee)
    results = noise_volume_sweep(
        prices, clock, cfg.fee, cfg.noise_fractions, volume, initial,
        cfg.noise_direction, cfg.seed,
    )
    zero_roi = results[0.0].terminal_roi
    print(f"{cfg.pair}: terminal roi by noise fraction (fee {cfg.fee}, {cfg.noise_direction})")
    print(f"  (fractions are of TOTAL baseline volume; the share of its noise volume "
          f"assumes ~{NOISE_SHARE_OF_VOLUME:.0%} of volume is noise)")
    rows = []
    for fraction, result in results.items():
        diff_pp = 100.0 * (result.terminal_roi - zero_roi)
        noise_share = fraction / NOISE_SHARE_OF_VOLUME
        print(f"  fraction {fraction:<6g} (~{noise_share:.0%} of noise volume) "
              f"roi {result.terminal_roi:+.6%}  vs zero-noise {diff_pp:+.4f}pp")
        rows.append({"fraction": fraction, "approx_noise_volume_share": noise_share,
                     "terminal_roi": result.terminal_roi,
                     "diff_vs_zero_noise_pp": diff_pp})
    out = _out_dir(args)
    if out is not None:
        runs = {f"noise_{fraction:g}": result.series for fraction, result in results.items()}
        for run_id, series in runs.items():
            series.write_csv(out / f"{run_id}_returns.csv")
        _write_json(out / "summary.json", {"config": cfg.to_dict(), "rows": rows})
        _write_long_format(out / "long.csv", runs)
        _write_manifest(out, "sweep-noise", cfg.to_dict(),
                        [args.config, cfg.price_csv, cfg.swap_csv], cfg.seed,
                        config=args.config)
    return 0


def cmd_attack(args) -> int:
    reserves = _reserves(args)
    x_op, op_profit = malicious_operator_attack(reserves, args.p_star)
    x_arb, arb_profit = cpamm_arbitrage_profit(reserves, args.p_star)
    print(f"batch-operator attack:  trade {x_op:+.6f}  profit {op_profit:.6f}")
    print(f"cpamm arbitrageur:      trade {x_arb:+.6f}  profit {arb_profit:.6f}")
    ratio = op_profit / arb_profit if arb_profit > 0 else 0.5
    print(f"operator/cpamm profit ratio: {ratio:.6f}")
    out = _out_dir(args)
    if out is not None:
        _write_json(out / "attack.json", {
            "p_star": args.p_star, "y": reserves.y, "x": reserves.x,
            "operator_trade": x_op, "operator_profit": op_profit,
            "cpamm_trade": x_arb, "cpamm_profit": arb_profit, "ratio": ratio,
        })
        _write_manifest(out, "attack", vars_without(args, "func"), [], None)
    return 0


def cmd_mc_risk(args) -> int:
    reserves = _reserves(args)
    base_price = args.base_price if args.base_price is not None else reserves.spot_price
    base = np.full(args.n_draws, base_price)
    result = risk_monte_carlo(base, args.epsilon_sd, reserves, args.fee,
                              n_draws=args.n_draws, seed=args.seed)
    print(f"mean objective, base prices:   {result.mean_value_base:.6f}")
    print(f"mean objective, spread prices: {result.mean_value_spread:.6f}")
    print(f"difference {result.difference:.6f} (paired se {result.paired_se:.6f}, "
          f"z {result.z_score:.2f}, n {result.n_draws})")
    out = _out_dir(args)
    if out is not None:
        _write_json(out / "mc_risk.json", result.to_dict())
        _write_manifest(out, "mc-risk", vars_without(args, "func"), [], args.seed)
    return 0


def cmd_split_demo(args) -> int:
    reserves = _reserves(args)
    print(f"splitting a trade of {args.trade} into n sequential batches:")
    rows = []
    for n in args.n:
        final = split_trade_experiment(reserves, args.trade, n)[-1]
        print(f"  n {n:<8d} final numeraire reserve {final.y:.6f}")
        rows.append({"n": n, "final_y": final.y, "final_x": final.x})
    if args.trade < reserves.x:
        limit = reserves.y * reserves.x / (reserves.x - args.trade)
        print(f"  constant-product limit       {limit:.6f}")
    out = _out_dir(args)
    if out is not None:
        _write_json(out / "split_demo.json", {"rows": rows})
        _write_manifest(out, "split-demo", vars_without(args, "func"), [], None)
    return 0


def vars_without(args, *skip) -> dict:
    return {k: v for k, v in vars(args).items() if k not in skip and not callable(v)}


def _add_reserves_args(parser) -> None:
    parser.add_argument("--y", type=float, required=True, help="numeraire reserve")
    parser.add_argument("--x-reserve", type=float, required=True, help="asset reserve")


def _add_out_dir(parser) -> None:
    parser.add_argument("--out-dir", default=None, help="write CSV/JSON outputs and a manifest here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmamm",
        description="Batch-settled function-maximizing AMM simulator",
    )
    parser.add_argument("--version", action="version", version=f"fmamm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quote", help="price a net batch trade")
    _add_reserves_args(p)
    p.add_argument("--trade", type=float, required=True, help="signed net trade in asset units")
    p.add_argument("--fee", type=float, default=0.0)
    p.add_argument("--buy", dest="side_sign", action="store_const", const=1.0,
                   help="price the buy side of the batch")
    p.add_argument("--sell", dest="side_sign", action="store_const", const=-1.0,
                   help="price the sell side of the batch")
    _add_out_dir(p)
    p.set_defaults(func=cmd_quote, side_sign=None)

    p = sub.add_parser("settle", help="settle JSON-lines order batches")
    _add_reserves_args(p)
    p.add_argument("--orders", required=True, help="JSON-lines file of {block, trader_kind, amount}")
    p.add_argument("--fee", type=float, default=0.0)
    _add_out_dir(p)
    p.set_defaults(func=cmd_settle)

    p = sub.add_parser("backtest", help="zero-noise counterfactual backtest from a scenario config")
    p.add_argument("--config", required=True, help="scenario JSON path")
    _add_out_dir(p)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("sweep-fees", help="zero-noise backtest per fee in the config grid")
    p.add_argument("--config", required=True)
    _add_out_dir(p)
    p.set_defaults(func=cmd_sweep_fees)

    p = sub.add_parser("sweep-noise", help="backtest per noise fraction of baseline volume")
    p.add_argument("--config", required=True)
    _add_out_dir(p)
    p.set_defaults(func=cmd_sweep_noise)

    p = sub.add_parser("attack", help="censoring-operator vs cpamm arbitrage profits")
    _add_reserves_args(p)
    p.add_argument("--p-star", type=float, required=True, help="external price")
    _add_out_dir(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("mc-risk", help="value-function Monte Carlo under a price spread")
    _add_reserves_args(p)
    p.add_argument("--fee", type=float, default=0.003)
    p.add_argument("--epsilon-sd", type=float, required=True, help="spread size in price units")
    p.add_argument("--base-price", type=float, default=None,
                   help="degenerate base price (default: pool spot)")
    p.add_argument("--n-draws", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    _add_out_dir(p)
    p.set_defaults(func=cmd_mc_risk)

    p = sub.add_parser("split-demo", help="path dependence of split trades")
    _add_reserves_args(p)
    p.add_argument("--trade", type=float, required=True)
    p.add_argument("--n", type=int, nargs="+", default=[1, 10, 100, 10_000])
    _add_out_dir(p)
    p.set_defaults(func=cmd_split_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
