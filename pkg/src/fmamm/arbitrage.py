"""Competitive arbitrage response and worst-case extraction bounds.

Competing arbitrageurs watch an external venue price ``p_star`` and trade on
the batch whenever doing so is profitable.  With fee ``tau`` the batch's buy
and sell effective prices straddle the pre-fee price by a factor
``1/(1-tau)`` on each side, so there is a no-trade band: only when
``p_star`` leaves it do arbitrageurs submit the order that pins their own
effective price exactly to ``p_star``.

The module also prices the worst case of the off-chain batching step: an
operator that censors everyone else's orders and rebalances the pool alone.
Its maximal extraction is exactly half the profit an arbitrageur makes
rebalancing a constant-product pool from the same reserves.

All functions are pure; prices are taken as given (whatever latency produced
them is the caller's concern).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from fmamm.amm import (
    ConvergenceError,
    Reserves,
    effective_price,
    pre_fee_price,
)

__all__ = [
    "RebalanceDecision",
    "no_trade_band",
    "optimal_rebalance",
    "malicious_operator_attack",
    "cpamm_arbitrage_profit",
]

# relative tolerance required of the pinned post-rebalance effective price
_PIN_RTOL = 1e-9


@dataclass(frozen=True)
class RebalanceDecision:
    """Arbitrageurs' equilibrium order for one batch.

    ``trade`` is the collective arbitrageur order (zero inside the band);
    when nonzero, the effective price of the batch's net trade at the
    arbitrageurs' order sign equals the external price.
    """

    trade: float
    rebalanced: bool
    band: tuple[float, float]


def no_trade_band(reserves: Reserves, net_noise: float, tau: float) -> tuple[float, float]:
    """External-price interval in which arbitrage on the batch cannot profit.

    Centered on the pre-fee price the batch would clear at with noise alone:
    buying on top of the batch costs at least ``pre_fee / (1-tau)`` and
    selling yields at most ``(1-tau) * pre_fee``, so the band is
    ``[(1-tau) * pre_fee, pre_fee / (1-tau)]`` (degenerate at zero fee).
    """
    base = pre_fee_price(reserves, net_noise, tau)
    return ((1.0 - tau) * base, base / (1.0 - tau))


def optimal_rebalance(
    reserves: Reserves, net_noise: float, tau: float, p_star: float
) -> RebalanceDecision:
    """Collective arbitrageur order given noise flow and the external price.

    Outside the band, arbitrageurs trade until their own effective price
    equals ``p_star``: closed form when their order leaves the batch's net
    trade on their own side, bracketed root-finding on the relevant
    effective-price branch when it does not (the price curve is only
    piecewise continuous across the netting point).  Ties at the band edge
    are treated as no-trade.
    """
    if not p_star > 0.0:
        raise ValueError(f"external price must be positive, got {p_star}")
    band = no_trade_band(reserves, net_noise, tau)
    if band[0] <= p_star <= band[1]:
        return RebalanceDecision(0.0, False, band)

    keep = 1.0 - tau
    y, x = reserves.y, reserves.x
    if p_star > band[1]:
        # arbitrageurs buy; same-sign closed form from Y/((1-tau)(x-2n)) = p*
        net = 0.5 * (x - y / (keep * p_star))
        if net < 0.0:
            # order buys but the batch still net-sells: pin the buy-side
            # price of a fee-shrunk net trade, Y/((1-tau)(x-2(1-tau)n)) = p*
            net = _pin_branch(reserves, tau, p_star, +1.0, net_noise, 0.0)
    else:
        # arbitrageurs sell; same-sign closed form from (1-tau)Y/(x-2(1-tau)n) = p*
        net = 0.5 * (x / keep - y / p_star)
        if net > 0.0:
            # order sells but the batch still net-buys: (1-tau)Y/(x-2n) = p*
            net = _pin_branch(reserves, tau, p_star, -1.0, 0.0, net_noise)

    trade = net - net_noise
    if trade == 0.0:
        # p_star is within rounding of the band edge; treat as the tie case
        return RebalanceDecision(0.0, False, band)
    pinned = effective_price(reserves, net, tau, trade)
    if not math.isclose(pinned, p_star, rel_tol=_PIN_RTOL):
        raise ConvergenceError(
            f"rebalance solve left effective price {pinned} != target {p_star}"
        )
    return RebalanceDecision(trade, True, band)


def _pin_branch(
    reserves: Reserves,
    tau: float,
    p_star: float,
    order_sign: float,
    lo: float,
    hi: float,
) -> float:
    """Net trade in [lo, hi] whose effective price at order_sign is p_star."""

    def gap(net: float) -> float:
        return effective_price(reserves, net, tau, order_sign) - p_star

    try:
        return brentq(gap, lo, hi, xtol=1e-300, maxiter=200)
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceError(f"sign-mixing rebalance solve failed: {exc}") from exc


def malicious_operator_attack(reserves: Reserves, p_star: float) -> tuple[float, float]:
    """Censoring batch operator's optimal trade and profit.

    An operator that suppresses all other orders maximizes
    ``x_trade * (p_star - y/(x - 2*x_trade))``, which peaks at
    ``x_trade = (x - sqrt(x*y/p_star))/2`` with value
    ``(y + p_star*x)/2 - sqrt(x*y*p_star)`` -- non-negative, zero only when
    the pool already sits at ``p_star``, and exactly half of
    :func:`cpamm_arbitrage_profit`.
    """
    if not p_star > 0.0:
        raise ValueError(f"external price must be positive, got {p_star}")
    x_attack = 0.5 * (reserves.x - math.sqrt(reserves.x * reserves.y / p_star))
    gap = reserves.y + p_star * reserves.x - 2.0 * math.sqrt(reserves.x * reserves.y * p_star)
    return x_attack, 0.5 * max(gap, 0.0)


def cpamm_arbitrage_profit(reserves: Reserves, p_star: float) -> tuple[float, float]:
    """Arbitrageur's optimal trade and profit rebalancing a constant-product pool.

    Maximizes ``x_trade * (p_star - y/(x - x_trade))``; the optimum
    ``x_trade = x - sqrt(x*y/p_star)`` brings the pool's marginal price to
    ``p_star`` and earns ``y + p_star*x - 2*sqrt(x*y*p_star)``.
    """
    if not p_star > 0.0:
        raise ValueError(f"external price must be positive, got {p_star}")
    x_arb = reserves.x - math.sqrt(reserves.x * reserves.y / p_star)
    gap = reserves.y + p_star * reserves.x - 2.0 * math.sqrt(reserves.x * reserves.y * p_star)
    return x_arb, max(gap, 0.0)
