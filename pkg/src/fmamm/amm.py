"""Pricing and trade math for constant-product and batch-clearing pools.

Two mechanisms share the same reserve state ``(y, x)`` of numeraire and asset
tokens:

* a constant-product AMM (CPAMM) keeps ``y * x`` invariant, so a trade of
  ``x_trade`` asset units fills at the average price ``y / (x - x_trade)``;
* a function-maximizing AMM (FM-AMM) fills the whole batch at one uniform
  price equal to its own marginal price *after* the trade, which for the
  product function is ``y / (x - 2 * x_trade)`` -- twice the denominator
  shift, hence twice the price impact of the CPAMM.

Sign convention used throughout the package: positive trades mean the pool
sells asset (the batch buys), negative trades mean the pool buys.

With a fee ``tau`` charged in each order's sell token, buyers pay the pre-fee
price marked up by ``1/(1-tau)`` and sellers receive it marked down by
``(1-tau)``; a net-selling batch only moves ``(1-tau)`` of its volume through
the pool, so its pre-fee price is evaluated at the fee-shrunk trade.

All amounts and prices are 64-bit floats (desk-scale simulation, not token
integer accounting). Closed forms are used where they exist; the generalized
weighted-geometric pool with asset weight ``alpha`` is solved by bracketed
root-finding (``alpha = 1/2`` recovers the product function).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

__all__ = [
    "Reserves",
    "InfeasibleTradeError",
    "ConvergenceError",
    "POLE_MARGIN",
    "cpamm_average_price",
    "fmamm_price",
    "fmamm_supply",
    "marginal_price",
    "solve_clearing_price_consistent",
    "solve_function_maximizing",
    "pre_fee_price",
    "effective_price",
    "objective_value",
    "apply_trade",
]

# Trades are rejected when the post-trade price-pole denominator falls below
# this fraction of the asset reserve.
POLE_MARGIN = 1e-12

_MAX_BRACKET_STEPS = 200


class InfeasibleTradeError(ValueError):
    """Trade cannot be filled from the current reserves."""


class ConvergenceError(RuntimeError):
    """Iterative solver failed to bracket or converge on a solution."""


@dataclass(frozen=True)
class Reserves:
    """Pool state: ``y`` numeraire units and ``x`` asset units."""

    y: float
    x: float

    def __post_init__(self) -> None:
        # the negated comparison also rejects NaN
        if not (self.y >= 0.0 and self.x >= 0.0):
            raise ValueError(f"reserves must be non-negative, got y={self.y}, x={self.x}")

    @property
    def spot_price(self) -> float:
        """Marginal price y/x of the product-function pool."""
        if self.x <= 0.0:
            raise ValueError("marginal price undefined with zero asset reserve")
        return self.y / self.x

    def value_at(self, price: float) -> float:
        """Total reserve value in numeraire terms at an external price."""
        return self.y + price * self.x


def _check_fee(tau: float) -> None:
    if not 0.0 <= tau < 1.0:
        raise ValueError(f"fee must satisfy 0 <= tau < 1, got {tau}")


def _check_weight(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"asset weight must satisfy 0 < alpha < 1, got {alpha}")


def _check_price(price: float) -> None:
    if not price > 0.0:
        raise ValueError(f"price must be positive, got {price}")


def cpamm_average_price(reserves: Reserves, x_trade: float) -> float:
    """Average price y/(x - x_trade) paid on a constant-product pool.

    The fill keeps the reserve product constant: after trading ``x_trade``
    at this price, ``y' * x' == y * x``.
    """
    if x_trade >= reserves.x:
        raise InfeasibleTradeError(
            f"trade {x_trade} would drain the asset reserve {reserves.x}"
        )
    return reserves.y / (reserves.x - x_trade)


def fmamm_price(reserves: Reserves, x_trade: float) -> float:
    """Uniform batch price y/(x - 2*x_trade) of the function-maximizing pool.

    Equals the pool's marginal price after the trade executes, so buys only
    clear up to the pole at ``x_trade = x/2``.
    """
    denom = reserves.x - 2.0 * x_trade
    if denom <= POLE_MARGIN * reserves.x:
        raise InfeasibleTradeError(
            f"trade {x_trade} is at or beyond the price pole x/2 = {reserves.x / 2.0}"
        )
    return reserves.y / denom


def fmamm_supply(reserves: Reserves, price: float) -> float:
    """Asset amount (x - y/price)/2 the pool supplies at a given price.

    Inverse of :func:`fmamm_price`: positive when the quoted price exceeds
    the marginal price y/x, negative below it, zero at it.
    """
    _check_price(price)
    return 0.5 * (reserves.x - reserves.y / price)


def marginal_price(reserves: Reserves, alpha: float = 0.5) -> float:
    """Marginal price of the weighted pool: (alpha/(1-alpha)) * y/x.

    Ratio of the partial derivatives (asset over numeraire) of the weighted
    geometric mean ``y**(1-alpha) * x**alpha``; ``alpha = 1/2`` gives y/x.
    """
    _check_weight(alpha)
    if reserves.x <= 0.0 or reserves.y <= 0.0:
        raise ValueError("marginal price requires strictly positive reserves")
    return (alpha / (1.0 - alpha)) * reserves.y / reserves.x


def _bracketed_root(f, lo: float, hi: float, lo_floor: float, hi_cap: float) -> float:
    """Root of f on a bracket grown geometrically from [lo, hi].

    Both ends are pushed outward by 10x per step (clipped to the open
    domain ``(lo_floor, hi_cap)``) until f changes sign, then the root is
    polished with Brent's method.
    """
    flo, fhi = f(lo), f(hi)
    for _ in range(_MAX_BRACKET_STEPS):
        if flo == 0.0:
            return lo
        if fhi == 0.0:
            return hi
        if flo * fhi < 0.0:
            try:
                # near-zero xtol leaves the relative tolerance in charge
                return brentq(f, lo, hi, xtol=1e-300, maxiter=200)
            except RuntimeError as exc:
                raise ConvergenceError(str(exc)) from exc
        lo = lo_floor + 0.1 * (lo - lo_floor)
        hi = hi * 10.0 if math.isinf(hi_cap) else hi_cap - 0.1 * (hi_cap - hi)
        flo, fhi = f(lo), f(hi)
    raise ConvergenceError(
        f"no sign change found in [{lo}, {hi}] after {_MAX_BRACKET_STEPS} expansions"
    )


def solve_clearing_price_consistent(
    reserves: Reserves, x_trade: float, alpha: float = 0.5
) -> float:
    """Price p(x) at which the trade's average price equals the post-trade
    marginal price of the weighted pool.

    Solved by bracketed root-finding on
    ``p - marginal_price(y + p*x_trade, x - x_trade)``, starting from
    [marginal/10, marginal*10] and widening geometrically.  For
    ``alpha = 1/2`` the result agrees with :func:`fmamm_price`.
    """
    _check_weight(alpha)
    mid = marginal_price(reserves, alpha)
    if x_trade == 0.0:
        return mid
    # price pole of the weighted pool sits at x_trade = (1-alpha)*x
    if (1.0 - alpha) * reserves.x - x_trade <= POLE_MARGIN * reserves.x:
        raise InfeasibleTradeError(
            f"trade {x_trade} is at or beyond the price pole at {(1.0 - alpha) * reserves.x}"
        )
    ratio = alpha / (1.0 - alpha)
    x_after = reserves.x - x_trade

    def gap(p: float) -> float:
        return p - ratio * (reserves.y + p * x_trade) / x_after

    return _bracketed_root(gap, mid / 10.0, mid * 10.0, 0.0, math.inf)


def solve_function_maximizing(
    reserves: Reserves, price: float, alpha: float = 0.5
) -> float:
    """Trade maximizing the weighted reserve function at a quoted price.

    Maximizes ``(y + price*x_trade)**(1-alpha) * (x - x_trade)**alpha`` by
    root-finding its first-order condition
    ``(1-alpha)*price*(x - x_trade) - alpha*(y + price*x_trade) = 0``
    (the objective is strictly quasiconcave, so the stationary point is the
    maximum).  For ``alpha = 1/2`` this matches :func:`fmamm_supply`.
    """
    _check_weight(alpha)
    _check_price(price)
    if reserves.x <= 0.0 or reserves.y <= 0.0:
        raise ValueError("maximization requires strictly positive reserves")

    def foc(x_trade: float) -> float:
        return (1.0 - alpha) * price * (reserves.x - x_trade) - alpha * (
            reserves.y + price * x_trade
        )

    # trades must leave both post-trade reserves positive
    lo_floor = -reserves.y / price * (1.0 - 1e-12)
    hi_cap = reserves.x * (1.0 - 1e-12)
    d0 = 1e-6 * min(reserves.x, reserves.y / price)
    return _bracketed_root(foc, max(-d0, lo_floor), min(d0, hi_cap), lo_floor, hi_cap)


def pre_fee_price(reserves: Reserves, net_trade: float, tau: float = 0.0) -> float:
    """Uniform price before fees for a batch with the given net trade.

    A net-selling batch only routes ``(1-tau)`` of its volume through the
    pool (the rest is retained as fee), so its price is evaluated at the
    fee-shrunk trade; an exactly-netted batch prices at the spot ratio y/x.
    """
    _check_fee(tau)
    if net_trade > 0.0:
        return fmamm_price(reserves, net_trade)
    if net_trade < 0.0:
        return fmamm_price(reserves, net_trade * (1.0 - tau))
    return reserves.spot_price


def effective_price(
    reserves: Reserves, net_trade: float, tau: float, order_sign: float
) -> float:
    """Price actually paid (buy) or received (sell) by one order in a batch.

    ``net_trade`` is the whole batch's net trade against the pool and fixes
    the pre-fee price; ``order_sign`` is the sign of the individual order
    being priced.  The fee is charged in each order's sell token: buyers pay
    ``pre_fee / (1-tau)``, sellers receive ``(1-tau) * pre_fee``.
    """
    if order_sign == 0.0 or not math.isfinite(order_sign):
        raise ValueError("order_sign must be a nonzero finite value")
    base = pre_fee_price(reserves, net_trade, tau)
    if order_sign > 0.0:
        return base / (1.0 - tau)
    return (1.0 - tau) * base


def objective_value(
    x_trade: float, price: float, tau: float, reserves: Reserves
) -> float:
    """Reserve-product objective the pool maximizes when trading at ``price``.

    Two branches by trade sign; the fee grosses up the reserve of whichever
    token the batch is selling to the pool, and both branches agree at
    ``x_trade = 0`` where the objective is ``x * y / (1-tau)``.
    """
    _check_fee(tau)
    _check_price(price)
    if x_trade >= 0.0:
        return (reserves.x - x_trade) * (reserves.y / (1.0 - tau) + price * x_trade)
    return (reserves.x / (1.0 - tau) - x_trade) * (reserves.y + price * x_trade)


def apply_trade(reserves: Reserves, x_trade: float, tau: float = 0.0) -> Reserves:
    """Reserves after filling a net trade, fee retained in the pool.

    The pool's asset reserve changes by the full traded amount (a selling
    batch's asset fee stays in the pool); the numeraire leg moves at the
    trade's effective price.  With ``tau = 0`` the post-trade reserve values
    are equal at the trade price: ``price * x' == y'``.
    """
    _check_fee(tau)
    if x_trade == 0.0:
        return reserves
    price = effective_price(reserves, x_trade, tau, x_trade)
    return Reserves(reserves.y + x_trade * price, reserves.x - x_trade)
