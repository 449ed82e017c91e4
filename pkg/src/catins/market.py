"""Market mechanics shared by the demand phase and government interventions.

These helpers mutate a world in place: they move premiums between
households, insurers and the treasury and keep every ledger in step.
"""

from __future__ import annotations

import numpy as np

from .individual import GOVERNMENT, NO_PROVIDER
from .insurer import InsurerState, insurer_reserve_per_policy, supply_capacity


def active_insurers(world) -> list[InsurerState]:
    return [ins for ins in world.insurers if ins.active]


def _capacity(ins: InsurerState) -> int:
    # an insurer that models no risk charges nothing and so writes nothing
    if ins.premium_rate <= 0:
        return 0
    reserve = insurer_reserve_per_policy(ins)
    return supply_capacity(ins, reserve) if reserve > 0 else 0


def remaining_capacity(world) -> dict[int, int]:
    """Unused underwriting capacity of each active insurer."""
    return {ins.id: max(_capacity(ins) - len(ins.policies), 0) for ins in active_insurers(world)}


def total_capacity(world) -> int:
    return sum(_capacity(ins) for ins in active_insurers(world))


def best_quotes(world) -> np.ndarray:
    """Cheapest private quote per individual ignoring capacity (inf if none)."""
    rates = [ins.premium_rate for ins in active_insurers(world)]
    if not rates:
        return np.full(world.pop.n, np.inf)
    return min(rates) * world.pop.exposure


def sell_private(world, i: int, ins: InsurerState, rate: float, paid: float,
                 subsidy: float = 0.0) -> None:
    """Household ``i`` buys a one-step contract from ``ins``.

    ``paid`` is what the household pays; ``subsidy`` is what the treasury
    adds, so the insurer collects ``paid + subsidy``.
    """
    pop = world.pop
    X = pop.lambda_R[i] * pop.W[i]
    gross = paid + subsidy
    pop.provider[i] = ins.id
    pop.premium[i] = gross
    pop.rate[i] = rate
    pop.W[i] -= paid
    world.flows.premiums -= paid
    ins.policies.append(i)
    ins.sales += 1
    income = gross - ins.admin_cost * ins.loss_model.p * X
    ins.profits += income
    ins.step_profit += income
    if subsidy > 0:
        pop.subsidized[i] = True
        world.government.pay(subsidy, "subsidies")


def sell_government(world, i: int, premium: float) -> None:
    pop = world.pop
    fair = world.cfg.env.theta * pop.lambda_R[i] * pop.W[i]
    pop.provider[i] = GOVERNMENT
    pop.premium[i] = premium
    pop.rate[i] = world.cfg.env.theta
    pop.W[i] -= premium
    world.flows.premiums -= premium
    world.government.receive(premium, "gov_premiums")
    world.government.deficit += max(fair - premium, 0.0)


def cancel_private(world, i: int, refund: bool = True) -> None:
    """Void household ``i``'s private contract, refunding the premium it paid."""
    pop = world.pop
    ins = world.insurer_by_id(int(pop.provider[i]))
    ins.policies.remove(i)
    if refund:
        gross = pop.premium[i]
        ins.profits -= gross
        ins.step_profit -= gross
        pop.W[i] += gross
        world.flows.refunds += gross
    pop.provider[i] = NO_PROVIDER
    pop.premium[i] = 0.0
    pop.rate[i] = 0.0
    pop.subsidized[i] = False


def reopen_market(world, candidates, pricing, subsidy_share: float = 0.0) -> list[int]:
    """Let uninsured ``candidates`` buy at the given per-insurer rates.

    ``pricing`` maps insurer id to a premium rate on the true loss base. The
    household pays ``(1 - subsidy_share)`` of the quote. Candidates are served
    in id order; returns the ids that bought.
    """
    pop = world.pop
    capacity = remaining_capacity(world)
    offers = sorted((rate, ins_id) for ins_id, rate in pricing.items())
    bought = []
    for i in sorted(int(c) for c in candidates):
        if pop.provider[i] != NO_PROVIDER:
            continue
        X = pop.lambda_R[i] * pop.W[i]
        for rate, ins_id in offers:
            if capacity.get(ins_id, 0) <= 0 or rate <= 0:
                continue
            quote = rate * X
            paid = (1.0 - subsidy_share) * quote
            if paid <= pop.pmax[i] and paid <= pop.W[i]:
                ins = world.insurer_by_id(ins_id)
                sell_private(world, i, ins, rate, paid, quote - paid)
                capacity[ins_id] -= 1
                bought.append(i)
            break  # offers are sorted: the cheapest with capacity decides
    return bought
