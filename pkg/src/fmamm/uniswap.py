"""Full-range Uniswap-v3-style LP returns replayed from swap event records.

A full-range liquidity position with liquidity ``L`` at price ``p`` (token1
per token0) holds ``L/sqrt(p)`` token0 and ``L*sqrt(p)`` token1, worth
``2*L*sqrt(p)`` in token1 terms.  That identity replaces any tick-level
bookkeeping: fees earned by a simulated position are credited pro rata to
``L_sim / L_active`` per swap and periodically converted into extra
liquidity ``pending_value / (2*sqrt(p))`` at zero cost.

Each swap's fee is shared at its post-swap active liquidity only; intra-swap
tick crossings are ignored.  The position is assumed small enough not to
move anyone's incentives, and the resulting ROI series is invariant to the
initial position size.

Swap records load from CSVs with schema
``block,timestamp,fee_amount,fee_token,active_liquidity,post_price`` where
``fee_token`` is ``token0`` (asset) or ``token1`` (numeraire).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from fmamm.market_data import LpReturnSeries, PriceSeries, sample_at

__all__ = [
    "SwapRecord",
    "SimPosition",
    "accrue_swap_fees",
    "compound_fees",
    "position_value",
    "run_baseline",
    "load_swap_records",
    "per_block_swap_volume",
]

FEE_TOKENS = ("token0", "token1")

COMPOUND_CADENCES = ("swap", "block", "day")


@dataclass(frozen=True)
class SwapRecord:
    """One pool swap: the fee it paid and the liquidity that shared it."""

    block: int
    timestamp: int
    fee_amount: float
    fee_token: str
    active_liquidity: float
    post_price: float

    def __post_init__(self) -> None:
        if self.fee_token not in FEE_TOKENS:
            raise ValueError(f"fee_token must be one of {FEE_TOKENS}, got {self.fee_token!r}")
        if not self.fee_amount >= 0.0:
            raise ValueError(f"fee_amount must be non-negative, got {self.fee_amount}")
        if not self.active_liquidity > 0.0:
            raise ValueError(f"active_liquidity must be positive, got {self.active_liquidity}")
        if not self.post_price > 0.0:
            raise ValueError(f"post_price must be positive, got {self.post_price}")


@dataclass(frozen=True)
class SimPosition:
    """Simulated full-range position: liquidity plus uncompounded fees."""

    liquidity: float
    fees_token0: float = 0.0
    fees_token1: float = 0.0

    def __post_init__(self) -> None:
        if not self.liquidity > 0.0:
            raise ValueError(f"liquidity must be positive, got {self.liquidity}")


def accrue_swap_fees(position: SimPosition, record: SwapRecord) -> SimPosition:
    """Credit the position its pro-rata share of one swap's fee."""
    share = position.liquidity / record.active_liquidity
    earned = record.fee_amount * share
    if record.fee_token == "token0":
        return replace(position, fees_token0=position.fees_token0 + earned)
    return replace(position, fees_token1=position.fees_token1 + earned)


def compound_fees(position: SimPosition, price: float) -> SimPosition:
    """Convert pending fees into extra full-range liquidity at ``price``.

    Frictionless by assumption: the pending value ``fees0*p + fees1`` buys
    ``value / (2*sqrt(p))`` liquidity with no slippage or gas.
    """
    if not price > 0.0:
        raise ValueError(f"price must be positive, got {price}")
    pending = position.fees_token0 * price + position.fees_token1
    if pending == 0.0:
        return position
    return SimPosition(position.liquidity + pending / (2.0 * math.sqrt(price)))


def position_value(position: SimPosition, price: float) -> float:
    """Position value in token1 terms: 2*L*sqrt(p) plus pending fees."""
    if not price > 0.0:
        raise ValueError(f"price must be positive, got {price}")
    return (
        2.0 * position.liquidity * math.sqrt(price)
        + position.fees_token0 * price
        + position.fees_token1
    )


def run_baseline(
    records: Sequence[SwapRecord],
    price_series: PriceSeries,
    initial_liquidity: float,
    compound_cadence: str = "block",
) -> LpReturnSeries:
    """Replay swap records against a price grid and return the ROI series.

    Each point of ``price_series`` is one mark (a block boundary, in the
    usual setup): fees from records up to that time are accrued, compounding
    runs per the cadence at the external mark price, and the position is
    valued at the mark price.  Records must be sorted by block.
    """
    if not initial_liquidity > 0.0:
        raise ValueError(f"initial_liquidity must be positive, got {initial_liquidity}")
    if compound_cadence not in COMPOUND_CADENCES:
        raise ValueError(f"compound_cadence must be one of {COMPOUND_CADENCES}")
    blocks = [r.block for r in records]
    if any(b2 < b1 for b1, b2 in zip(blocks, blocks[1:])):
        raise ValueError("swap records must be sorted by block")

    share = max((initial_liquidity / r.active_liquidity for r in records), default=0.0)
    if share > 0.01:
        warnings.warn(
            f"position is {share:.1%} of active liquidity; the small-position "
            "approximation may be poor",
            stacklevel=2,
        )
    if compound_cadence == "swap":
        record_prices = sample_at(price_series, [r.timestamp for r in records]) if records else []

    position = SimPosition(initial_liquidity)
    values = []
    rec_i = 0
    prev_day = math.floor(price_series.start / 86400.0)
    for t, price in zip(price_series.timestamps, price_series.prices):
        while rec_i < len(records) and records[rec_i].timestamp <= t:
            position = accrue_swap_fees(position, records[rec_i])
            if compound_cadence == "swap":
                position = compound_fees(position, float(record_prices[rec_i]))
            rec_i += 1
        day = math.floor(t / 86400.0)
        if compound_cadence == "block" or (compound_cadence == "day" and day != prev_day):
            position = compound_fees(position, float(price))
        prev_day = day
        values.append(position_value(position, float(price)))
    if rec_i < len(records):
        warnings.warn(
            f"{len(records) - rec_i} swap records after the last price mark were ignored",
            stacklevel=2,
        )
    return LpReturnSeries.from_values("uniswap_v3_full_range", price_series.timestamps, values)


def load_swap_records(path) -> list[SwapRecord]:
    """Load swap records from CSV, reporting bad rows by line number."""
    expected = ["block", "timestamp", "fee_amount", "fee_token", "active_liquidity", "post_price"]
    records: list[SwapRecord] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[: len(expected)]] != expected:
            raise ValueError(f"{path}:1: expected header {','.join(expected)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                records.append(
                    SwapRecord(
                        block=int(row[0]),
                        timestamp=int(row[1]),
                        fee_amount=float(row[2]),
                        fee_token=row[3].strip(),
                        active_liquidity=float(row[4]),
                        post_price=float(row[5]),
                    )
                )
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed swap record {row}: {exc}") from exc
    return records


def per_block_swap_volume(
    records: Sequence[SwapRecord], settlement_times: np.ndarray, pool_fee: float
) -> np.ndarray:
    """Asset-unit trade volume per block interval, inferred from fees paid.

    Each swap's volume is ``fee / pool_fee`` in its sell token, converted to
    asset units at the swap's own price when the fee was paid in numeraire.
    Volumes are summed into the half-open block intervals ending at each
    settlement time.
    """
    if not 0.0 < pool_fee < 1.0:
        raise ValueError(f"pool_fee must be in (0, 1), got {pool_fee}")
    settlement_times = np.asarray(settlement_times, dtype=np.float64)
    volumes = np.zeros(settlement_times.size)
    if not records:
        return volumes
    times = np.array([r.timestamp for r in records], dtype=np.float64)
    sizes = np.array(
        [
            r.fee_amount / pool_fee / (r.post_price if r.fee_token == "token1" else 1.0)
            for r in records
        ]
    )
    idx = np.searchsorted(settlement_times, times, side="left")
    keep = idx < settlement_times.size
    np.add.at(volumes, idx[keep], sizes[keep])
    return volumes
