"""Block-level LP-return backtests of the batch-settled pool.

Every ``mu`` seconds a block settles one batch: noise orders per the chosen
scenario plus the competitive arbitrageurs' response to the external price
sampled ``gamma`` seconds before settlement.  Reserves evolve through the
batch engine and the LP portfolio is marked each block at the external
price, so the resulting series is directly comparable with an external
benchmark such as the full-range baseline in :mod:`fmamm.uniswap`.

Zero-noise runs are the revenue floor: noise adds fee income and nothing
else, so any balanced-noise scenario ends at or above the zero-noise return
on the same price path.

The module also provides the fee and noise-volume sweeps over a shared
price path, and a paired Monte Carlo measuring how the pool's maximized
objective responds to a mean-preserving spread of the settlement price (the
value function is flat inside the no-trade band and convex outside it, so
spreads can only help).

Runs are deterministic given config and seeds; scenario configs load from
JSON (see :class:`ScenarioConfig`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from typing import NamedTuple, Sequence

import numpy as np

from fmamm.amm import Reserves
from fmamm.arbitrage import optimal_rebalance
from fmamm.batch import Batch, Order, settle_batch
from fmamm.market_data import LpReturnSeries, PriceSeries, mean_preserving_spread, sample_at

__all__ = [
    "BlockClock",
    "NoiseScenario",
    "NO_NOISE",
    "TradeRecord",
    "BacktestResult",
    "ReturnComparison",
    "RiskMonteCarloResult",
    "ScenarioConfig",
    "DEFAULT_FEE_GRID",
    "balanced_reserves",
    "run_fmamm_backtest",
    "compare_returns",
    "fee_sweep",
    "noise_volume_sweep",
    "value_function",
    "risk_monte_carlo",
]

DEFAULT_FEE_GRID = (0.0, 0.0005, 0.003, 0.01)

NOISE_MODES = ("none", "fraction_of_baseline_volume")
NOISE_DIRECTIONS = ("balanced", "random_sign")


@dataclass(frozen=True)
class BlockClock:
    """Block cadence: settlement every ``mu`` seconds from ``start``,
    prices observed ``gamma`` seconds before each settlement."""

    mu: float = 12.0
    gamma: float = 0.0
    start: float = 0.0
    end: float = 0.0

    def __post_init__(self) -> None:
        if not self.mu > 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not 0.0 <= self.gamma < self.mu:
            raise ValueError(f"need 0 <= gamma < mu, got gamma={self.gamma}, mu={self.mu}")
        if self.end < self.start:
            raise ValueError(f"end {self.end} before start {self.start}")

    @property
    def n_blocks(self) -> int:
        return int((self.end - self.start) // self.mu)

    def settlement_times(self) -> np.ndarray:
        return self.start + self.mu * np.arange(1, self.n_blocks + 1)

    @classmethod
    def for_series(cls, series: PriceSeries, mu: float = 12.0, gamma: float = 0.0) -> "BlockClock":
        return cls(mu=mu, gamma=gamma, start=series.start, end=series.end)


@dataclass(frozen=True)
class NoiseScenario:
    """How much noise flow each block receives and how it is signed.

    ``fraction_of_baseline_volume`` scales a caller-supplied per-block
    volume series; ``balanced`` splits it into an equal buy and sell (net
    zero, the conservative reading), ``random_sign`` puts the whole volume
    on one seeded random side.
    """

    mode: str = "none"
    fraction: float = 0.0
    direction: str = "balanced"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in NOISE_MODES:
            raise ValueError(f"mode must be one of {NOISE_MODES}, got {self.mode!r}")
        if self.direction not in NOISE_DIRECTIONS:
            raise ValueError(f"direction must be one of {NOISE_DIRECTIONS}, got {self.direction!r}")
        if self.fraction < 0.0:
            raise ValueError(f"fraction must be non-negative, got {self.fraction}")


NO_NOISE = NoiseScenario()


class TradeRecord(NamedTuple):
    """One block of the backtest log."""

    block: int
    time: float
    p_star: float
    noise_net: float
    arb_trade: float
    net_trade: float
    rebalanced: bool
    y_before: float
    x_before: float
    y_after: float
    x_after: float
    fee_numeraire: float
    fee_asset: float


@dataclass(frozen=True)
class BacktestResult:
    series: LpReturnSeries
    trades: list[TradeRecord]
    summary: dict

    @property
    def terminal_roi(self) -> float:
        return self.series.terminal_roi

    @property
    def n_rebalances(self) -> int:
        return sum(1 for t in self.trades if t.rebalanced)


def balanced_reserves(price: float, asset_depth: float = 1.0) -> Reserves:
    """Reserves whose two sides hold equal value at the given price."""
    if not (price > 0.0 and asset_depth > 0.0):
        raise ValueError("price and asset_depth must be positive")
    return Reserves(price * asset_depth, asset_depth)


def block_grid_series(series: PriceSeries, clock: BlockClock) -> PriceSeries:
    """The price series resampled onto the clock's block boundaries.

    Dense (e.g. per-second) series can be marked per block this way, which
    also makes their timestamps intersect a backtest's series exactly.
    """
    times = np.concatenate(([clock.start], clock.settlement_times()))
    return PriceSeries(series.pair, times, sample_at(series, times))


def _noise_orders(block: int, volume: float, direction: str, sign: int) -> list[Order]:
    if volume <= 0.0:
        return []
    if direction == "balanced":
        half = 0.5 * volume
        return [
            Order(f"{block}:noise-buy", "noise", half),
            Order(f"{block}:noise-sell", "noise", -half),
        ]
    return [Order(f"{block}:noise", "noise", sign * volume)]


def run_fmamm_backtest(
    prices: PriceSeries,
    clock: BlockClock,
    tau: float,
    noise: NoiseScenario = NO_NOISE,
    initial: Reserves | None = None,
    baseline_volume: Sequence[float] | None = None,
) -> BacktestResult:
    """Drive the pool over the price path, one batch per block.

    Per block: sample the external price, generate the scenario's noise
    orders, add the arbitrageurs' equilibrium order, settle, and mark the
    reserves at the external price.  ``initial`` defaults to value-balanced
    reserves of one asset unit at the first price (the fixed point of the
    zero-fee strategy, so the run starts neutral).
    """
    times = clock.settlement_times()
    n = times.size
    p_stars = np.asarray(sample_at(prices, times - clock.gamma), dtype=np.float64)
    p0 = float(sample_at(prices, [clock.start])[0])
    if initial is None:
        initial = balanced_reserves(p0)

    if noise.mode == "fraction_of_baseline_volume":
        if baseline_volume is None:
            raise ValueError("noise scenario needs a per-block baseline_volume series")
        volume = np.asarray(baseline_volume, dtype=np.float64)
        if volume.shape != (n,):
            raise ValueError(
                f"baseline volume series misaligned: {volume.size} entries for {n} blocks"
            )
        volumes = noise.fraction * volume
    else:
        volumes = np.zeros(n)
    if noise.direction == "random_sign":
        signs = np.random.default_rng(noise.seed).integers(0, 2, size=n) * 2 - 1
    else:
        signs = np.ones(n, dtype=np.int64)

    reserves = initial
    out_times = np.empty(n + 1)
    out_values = np.empty(n + 1)
    out_times[0] = clock.start
    out_values[0] = initial.value_at(p0)
    trades: list[TradeRecord] = []
    for i in range(n):
        block = i + 1
        p_star = float(p_stars[i])
        orders = _noise_orders(block, float(volumes[i]), noise.direction, int(signs[i]))
        noise_net = math.fsum(o.amount for o in orders)
        decision = optimal_rebalance(reserves, noise_net, tau, p_star)
        if decision.trade != 0.0:
            orders.append(Order(f"{block}:arb", "arbitrageur", decision.trade))
        before = reserves
        if orders:
            reserves, report = settle_batch(reserves, Batch(block, tuple(orders)), tau)
            net, fee_n, fee_a = report.net_trade, report.fee_numeraire, report.fee_asset
        else:
            net, fee_n, fee_a = 0.0, 0.0, 0.0
        out_times[i + 1] = times[i]
        out_values[i + 1] = reserves.value_at(p_star)
        trades.append(
            TradeRecord(
                block, float(times[i]), p_star, noise_net, decision.trade, net,
                decision.rebalanced, before.y, before.x, reserves.y, reserves.x,
                fee_n, fee_a,
            )
        )

    series = LpReturnSeries.from_values("fm_amm", out_times, out_values)
    summary = {
        "venue": "fm_amm",
        "tau": tau,
        "noise_mode": noise.mode,
        "noise_fraction": noise.fraction,
        "noise_direction": noise.direction,
        "seed": noise.seed,
        "n_blocks": n,
        "n_rebalances": sum(1 for t in trades if t.rebalanced),
        "initial_value": float(out_values[0]),
        "terminal_value": float(out_values[-1]),
        "terminal_roi": float(series.roi[-1]),
        "fee_numeraire_total": math.fsum(t.fee_numeraire for t in trades),
        "fee_asset_total": math.fsum(t.fee_asset for t in trades),
    }
    return BacktestResult(series, trades, summary)


@dataclass(frozen=True)
class ReturnComparison:
    """Pointwise ROI difference between two venues on common timestamps."""

    venue_a: str
    venue_b: str
    timestamps: np.ndarray
    roi_difference: np.ndarray

    @property
    def terminal_difference_pp(self) -> float:
        """Terminal ROI gap in percentage points (a minus b)."""
        return float(100.0 * self.roi_difference[-1])

    def write_csv(self, path) -> None:
        import csv

        from fmamm.market_data import format_number

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "roi_difference"])
            for t, d in zip(self.timestamps, self.roi_difference):
                writer.writerow([format_number(t), repr(float(d))])


def compare_returns(a: LpReturnSeries, b: LpReturnSeries) -> ReturnComparison:
    """ROI difference a minus b on the timestamp intersection."""
    common, ia, ib = np.intersect1d(a.timestamps, b.timestamps, return_indices=True)
    if common.size == 0:
        raise ValueError(f"{a.venue} and {b.venue} share no timestamps")
    return ReturnComparison(a.venue, b.venue, common, a.roi[ia] - b.roi[ib])


def fee_sweep(
    prices: PriceSeries,
    clock: BlockClock,
    fees: Sequence[float] = DEFAULT_FEE_GRID,
    initial: Reserves | None = None,
) -> dict[float, BacktestResult]:
    """One zero-noise backtest per fee, on the same path and start state."""
    return {tau: run_fmamm_backtest(prices, clock, tau, NO_NOISE, initial) for tau in fees}


def noise_volume_sweep(
    prices: PriceSeries,
    clock: BlockClock,
    tau: float,
    fractions: Sequence[float],
    baseline_volume: Sequence[float],
    initial: Reserves | None = None,
    direction: str = "balanced",
    seed: int = 0,
) -> dict[float, BacktestResult]:
    """One backtest per noise fraction of the baseline per-block volume.

    A zero fraction is always included so callers can report each entry's
    gap to the zero-noise floor.
    """
    fracs = list(fractions)
    if 0.0 not in fracs:
        fracs.insert(0, 0.0)
    out: dict[float, BacktestResult] = {}
    for fraction in fracs:
        scenario = NoiseScenario("fraction_of_baseline_volume", fraction, direction, seed)
        out[fraction] = run_fmamm_backtest(prices, clock, tau, scenario, initial, baseline_volume)
    return out


def value_function(prices, reserves: Reserves, tau: float) -> np.ndarray:
    """Maximized trade objective at each settlement price (vectorized).

    Inside the no-trade band the pool keeps ``x*y/(1-tau)``; outside it the
    optimal buy/sell branch applies.  Piecewise linear-over-quadratic in the
    price and convex, strictly so wherever a trade happens.
    """
    p = np.asarray(prices, dtype=np.float64)
    if not (p > 0.0).all():
        raise ValueError("prices must be positive")
    keep = 1.0 - tau
    y, x = reserves.y, reserves.x
    buy_threshold = y / (keep * x)
    sell_threshold = keep * y / x
    with np.errstate(invalid="ignore"):
        x_buy = 0.5 * (x - y / (keep * p))
        v_buy = (x - x_buy) * (y / keep + p * x_buy)
        x_sell = 0.5 * (x / keep - y / p)
        v_sell = (x / keep - x_sell) * (y + p * x_sell)
    flat = x * y / keep
    return np.where(p > buy_threshold, v_buy, np.where(p < sell_threshold, v_sell, flat))


@dataclass(frozen=True)
class RiskMonteCarloResult:
    mean_value_base: float
    mean_value_spread: float
    difference: float
    paired_se: float
    z_score: float
    n_draws: int

    def to_dict(self) -> dict:
        return {
            "mean_value_base": self.mean_value_base,
            "mean_value_spread": self.mean_value_spread,
            "difference": self.difference,
            "paired_se": self.paired_se,
            "z_score": self.z_score,
            "n_draws": self.n_draws,
        }


def risk_monte_carlo(
    base_draws,
    epsilon_sd: float,
    reserves: Reserves,
    tau: float,
    n_draws: int = 100_000,
    seed: int = 0,
) -> RiskMonteCarloResult:
    """Paired Monte Carlo of the value function under a mean-preserving spread.

    Draws settlement prices from the supplied base sample (resampling with
    replacement if sizes differ), perturbs each with exact conditional-mean-
    zero noise, and compares the pool's maximized objective under the two.
    The paired difference is non-negative draw by draw; it is zero whenever
    both prices fall inside the no-trade band.
    """
    base = np.asarray(base_draws, dtype=np.float64)
    if base.size == 0:
        raise ValueError("base_draws must be non-empty")
    rng = np.random.default_rng(seed)
    draws = base if base.size == n_draws else rng.choice(base, size=n_draws, replace=True)
    spread = mean_preserving_spread(draws, epsilon_sd, rng)
    v_base = value_function(draws, reserves, tau)
    v_spread = value_function(spread, reserves, tau)
    diffs = v_spread - v_base
    difference = float(diffs.mean())
    se = float(diffs.std(ddof=1) / math.sqrt(diffs.size)) if diffs.size > 1 else 0.0
    if se > 0.0:
        z = difference / se
    else:
        z = 0.0 if difference == 0.0 else math.inf
    return RiskMonteCarloResult(
        mean_value_base=float(v_base.mean()),
        mean_value_spread=float(v_spread.mean()),
        difference=difference,
        paired_se=se,
        z_score=z,
        n_draws=int(diffs.size),
    )


@dataclass
class ScenarioConfig:
    """Backtest scenario loaded from JSON; unknown keys are rejected.

    ``swap_csv`` plus ``pool_fee`` enable the baseline comparison and the
    fee-implied per-block volume used by noise sweeps.
    """

    pair: str
    price_csv: str
    swap_csv: str | None = None
    pool_fee: float | None = None
    fee: float = 0.003
    fee_grid: tuple[float, ...] = DEFAULT_FEE_GRID
    noise_fractions: tuple[float, ...] = (0.0, 0.1, 0.3, 0.5)
    noise_direction: str = "balanced"
    mu: float = 12.0
    gamma: float = 0.0
    seed: int = 0
    initial_x: float = 1.0
    baseline_liquidity: float = 1.0
    compound_cadence: str = "block"

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: invalid JSON: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        if "pair" not in raw or "price_csv" not in raw:
            raise ValueError(f"{path}: config requires 'pair' and 'price_csv'")
        for key in ("fee_grid", "noise_fractions"):
            if key in raw:
                raw[key] = tuple(float(v) for v in raw[key])
        return cls(**raw)

    def to_dict(self) -> dict:
        return {
            "pair": self.pair,
            "price_csv": self.price_csv,
            "swap_csv": self.swap_csv,
            "pool_fee": self.pool_fee,
            "fee": self.fee,
            "fee_grid": list(self.fee_grid),
            "noise_fractions": list(self.noise_fractions),
            "noise_direction": self.noise_direction,
            "mu": self.mu,
            "gamma": self.gamma,
            "seed": self.seed,
            "initial_x": self.initial_x,
            "baseline_liquidity": self.baseline_liquidity,
            "compound_cadence": self.compound_cadence,
        }
