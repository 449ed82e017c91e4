"""Government: treasury and debt, progressive taxes, and the eight interventions.

Each intervention handler mutates the world and returns an
:class:`InterventionEffects` record holding what the welfare module needs to
price the intervention: the affected households, their policyholder status
before the change, and the cost bases.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .individual import GOVERNMENT, NO_PROVIDER, pmax_rational
from .insurer import total_assets
from .market import active_insurers, cancel_private, reopen_market, sell_government


class Intervention(IntEnum):
    NoAction = 0
    StateInsurance = 1
    EaseSolvency = 2
    Awareness = 3
    Subsidy = 4
    PremiumRegulation = 5
    Prevention = 6
    Reinsurance = 7


@dataclass
class GovernmentState:
    treasury: float = 0.0
    debt: float = 0.0
    tax_thresholds: tuple = (0.0, 12000.0, 50000.0)
    tax_rates: tuple = (0.02, 0.05, 0.10)
    receptiveness: np.ndarray | None = None
    catastrophe_since_campaign: bool = False
    subsidy_share: float = 0.3
    reinsurance_book: list = field(default_factory=list)  # (insurer id, rate)
    last_resort: bool = False
    deficit: float = 0.0  # cumulative shortfall of government premiums below fair
    inflows: dict = field(default_factory=dict)
    outflows: dict = field(default_factory=dict)
    borrowed: float = 0.0
    repaid: float = 0.0
    # flows since the last tax collection
    pending_out: float = 0.0
    pending_in: float = 0.0

    def receive(self, amount: float, kind: str) -> None:
        if amount <= 0:
            return
        self.treasury += amount
        self.inflows[kind] = self.inflows.get(kind, 0.0) + amount
        if kind != "taxes":
            self.pending_in += amount

    def pay(self, amount: float, kind: str) -> None:
        """Pay from the treasury, borrowing whatever it cannot cover."""
        if amount <= 0:
            return
        self.outflows[kind] = self.outflows.get(kind, 0.0) + amount
        if kind != "debt_interest":
            self.pending_out += amount
        if amount <= self.treasury:
            self.treasury -= amount
        else:
            self.debt += amount - self.treasury
            self.borrowed += amount - self.treasury
            self.treasury = 0.0

    def repay_debt(self) -> None:
        amount = min(self.treasury, self.debt)
        self.treasury -= amount
        self.debt -= amount
        self.repaid += amount


@dataclass
class InterventionEffects:
    action: Intervention
    ids: list = field(default_factory=list)  # affected households
    H0: list = field(default_factory=list)  # 1 = was not a policyholder
    pmax: list = field(default_factory=list)
    p_pre: list = field(default_factory=list)  # premium rate before
    p_post: list = field(default_factory=list)  # premium rate after
    lamP_W: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    W: list = field(default_factory=list)
    lamR_pre: list = field(default_factory=list)
    lamR_post: list = field(default_factory=list)
    epsilon: list = field(default_factory=list)
    pmax_post: list = field(default_factory=list)
    new_policies: int = 0
    class_counts: tuple = (0, 0, 0)
    subsidy_base: float = 0.0  # sum of p_j * lambda_P * W over subsidized contracts
    prevention_units: float = 0.0
    shortfalls: float = 0.0
    subsidy_share: float = 0.0
    cash_cost: float = 0.0

    def add(self, **kw) -> None:
        for key, value in kw.items():
            getattr(self, key).append(float(value))


# ------------------------------------------------------------------ taxes

def bracket_rates(Y: np.ndarray, thresholds, rates) -> np.ndarray:
    idx = np.searchsorted(np.asarray(thresholds), Y, side="right") - 1
    return np.asarray(rates)[np.clip(idx, 0, len(rates) - 1)]


def tax_schedule(Y: np.ndarray, thresholds, rates, required_revenue: float,
                 debt_service: float = 0.0) -> tuple[np.ndarray, float]:
    """Per-household tax bill and the common rate multiplier.

    Baseline rates always apply. If they raise less than the requirement,
    every rate is scaled by the same factor, capped at 100% of income.
    """
    base_rates = bracket_rates(Y, thresholds, rates)
    baseline = float(np.sum(base_rates * Y))
    need = required_revenue + debt_service
    multiplier = 1.0
    if need > baseline and baseline > 0:
        multiplier = need / baseline
    return np.minimum(base_rates * multiplier, 1.0) * Y, multiplier


def collect_taxes(world, required_revenue: float) -> float:
    """Levy income taxes; return the extra raised above the baseline schedule."""
    if required_revenue < 0:
        raise ValueError("required revenue must be non-negative")
    gov = world.government
    pop = world.pop
    interest = world.cfg.env.r * gov.debt
    base_bill, _ = tax_schedule(pop.Y, gov.tax_thresholds, gov.tax_rates, 0.0)
    bill, _ = tax_schedule(pop.Y, gov.tax_thresholds, gov.tax_rates, required_revenue, interest)
    paid = np.minimum(bill, pop.W)  # taxes come out of wealth, never below zero
    pop.W -= paid
    world.flows.taxes -= float(paid.sum())
    gov.receive(float(paid.sum()), "taxes")
    gov.pay(interest, "debt_interest")
    gov.repay_debt()
    gov.pending_in = gov.pending_out = 0.0
    return max(float(paid.sum() - np.minimum(base_bill, pop.W + paid).sum()), 0.0)


# ------------------------------------------------------------------ interventions

def _uninsured_candidates(world) -> np.ndarray:
    pop = world.pop
    return np.flatnonzero((pop.provider == NO_PROVIDER) & ~world.inert)


def provide_state_insurance(world) -> InterventionEffects:
    """Insure the household that values cover most, at a capped fair premium."""
    fx = InterventionEffects(Intervention.StateInsurance)
    pop = world.pop
    eligible = pop.gov_eligible & (pop.provider != GOVERNMENT)
    if not eligible.any():
        return fx
    score = np.where(pop.provider >= 0, pop.pmax - pop.premium, pop.pmax)
    score = np.where(eligible, score, -np.inf)
    i = int(np.argmax(score))
    X = pop.lambda_R[i] * pop.W[i]
    fair = world.cfg.env.theta * X
    premium = min(fair, pop.pmax[i])
    was_holder = pop.provider[i] >= 0
    p_pre = pop.rate[i] if was_holder else 0.0
    if was_holder:
        cancel_private(world, i)
    sell_government(world, i, premium)
    g = premium / X if X > 0 else 0.0
    fx.ids.append(i)
    fx.add(H0=0 if was_holder else 1, pmax=pop.pmax[i], p_pre=p_pre, p_post=g,
           lamP_W=pop.lambda_P[i] * pop.W[i])
    fx.new_policies = 1
    cost = world.cfg.government.cost_state_insurance
    world.government.pay(cost, "admin")
    fx.cash_cost = cost
    return fx


def ease_solvency(world) -> InterventionEffects:
    fx = InterventionEffects(Intervention.EaseSolvency)
    gcfg = world.cfg.government
    insurers = active_insurers(world)
    if not insurers:
        return fx
    for ins in insurers:
        if ins.rho > gcfg.rho_floor:
            ins.rho = max(gcfg.rho_floor, ins.rho * gcfg.ease_factor)
    pricing = {ins.id: ins.premium_rate for ins in insurers}
    for i in reopen_market(world, _uninsured_candidates(world), pricing):
        fx.ids.append(i)
        fx.add(H0=1, pmax=world.pop.pmax[i])
    world.government.pay(gcfg.cost_ease_solvency, "admin")
    fx.cash_cost = gcfg.cost_ease_solvency
    return fx


def run_awareness(world) -> InterventionEffects:
    """Inform every household of the true risk, weighted by its receptiveness."""
    fx = InterventionEffects(Intervention.Awareness)
    gov = world.government
    pop = world.pop
    theta = world.cfg.env.theta
    params = world.params
    rec = gov.receptiveness
    pre = pmax_rational(pop, params)
    W = pop.W.copy()
    gap = np.maximum(theta - pop.alpha, 0.0)
    world.log.cry_wolf += float(np.sum((1.0 - rec) * gap * pop.lambda_R * W))
    pop.alpha = pop.alpha + rec * (theta - pop.alpha)
    pop.lambda_P = pop.lambda_P + rec * (pop.lambda_R - pop.lambda_P)
    post = pmax_rational(pop, params)
    fx.ids = list(range(pop.n))
    fx.pmax = list(map(float, pre))
    fx.pmax_post = list(map(float, post))
    if not gov.catastrophe_since_campaign:
        gov.receptiveness = rec * world.cfg.government.cry_wolf_decay
    gov.catastrophe_since_campaign = False
    fx.class_counts = tuple(int(c) for c in np.bincount(pop.social_class, minlength=3))
    x = world.cfg.government.cost_awareness
    cost = x * (1.5 * fx.class_counts[0] + fx.class_counts[1] + 0.5 * fx.class_counts[2])
    gov.pay(cost, "admin")
    fx.cash_cost = cost
    return fx


def apply_subsidy(world, s: float | None = None) -> InterventionEffects:
    """Pay share ``s`` of every private premium in force and on new sales."""
    s = world.government.subsidy_share if s is None else s
    fx = InterventionEffects(Intervention.Subsidy, subsidy_share=s)
    if s <= 0:
        return fx
    pop = world.pop
    base = 0.0
    for i in np.flatnonzero(pop.provider >= 0):
        refund = s * pop.premium[i]
        pop.W[i] += refund
        world.flows.subsidies += refund
        world.government.pay(refund, "subsidies")
        pop.subsidized[i] = True
        ins = world.insurer_by_id(int(pop.provider[i]))
        lamP_W = pop.lambda_P[i] * pop.W[i]
        fx.ids.append(int(i))
        fx.add(H0=0, pmax=pop.pmax[i], p_pre=pop.rate[i], lamP_W=lamP_W)
        base += ins.loss_model.p * lamP_W
    insurers = active_insurers(world)
    pricing = {ins.id: ins.premium_rate for ins in insurers}
    for i in reopen_market(world, _uninsured_candidates(world), pricing, subsidy_share=s):
        ins = world.insurer_by_id(int(pop.provider[i]))
        lamP_W = pop.lambda_P[i] * pop.W[i]
        fx.ids.append(i)
        fx.add(H0=1, pmax=pop.pmax[i], p_pre=pop.rate[i], lamP_W=lamP_W)
        base += ins.loss_model.p * lamP_W
    fx.subsidy_base = s * base
    return fx


def regulate_premiums(world) -> InterventionEffects:
    """Cap risk rates at theta and loadings at the ceiling for this round."""
    fx = InterventionEffects(Intervention.PremiumRegulation)
    gcfg = world.cfg.government
    theta = world.cfg.env.theta
    pop = world.pop
    insurers = active_insurers(world)
    pricing = {ins.id: min(ins.loss_model.p, theta) * (1.0 + min(ins.loading, gcfg.loading_cap))
               for ins in insurers}
    for i in np.flatnonzero(pop.provider >= 0):
        ins = world.insurer_by_id(int(pop.provider[i]))
        reg = pricing[ins.id]
        if reg < pop.rate[i]:
            refund = pop.premium[i] * (1.0 - reg / pop.rate[i])
            ins.profits -= refund
            ins.step_profit -= refund
            pop.W[i] += refund
            world.flows.refunds += refund
            fx.ids.append(int(i))
            fx.add(H0=0, pmax=pop.pmax[i], p_pre=pop.rate[i], p_post=reg,
                   lamP_W=pop.lambda_P[i] * pop.W[i])
            pop.premium[i] -= refund
            pop.rate[i] = reg
    for i in reopen_market(world, _uninsured_candidates(world), pricing):
        fx.ids.append(i)
        fx.add(H0=1, pmax=pop.pmax[i], p_pre=0.0, p_post=pop.rate[i],
               lamP_W=pop.lambda_P[i] * pop.W[i])
    world.government.pay(gcfg.cost_regulation, "admin")
    fx.cash_cost = gcfg.cost_regulation
    return fx


def grant_prevention(world) -> InterventionEffects:
    """Cut the true loss fraction of the most exposed household."""
    fx = InterventionEffects(Intervention.Prevention)
    pop = world.pop
    if not np.any(pop.lambda_R > 0):
        return fx
    i = int(np.argmax(pop.lambda_R))
    old = pop.lambda_R[i]
    new = max(0.0, old - world.cfg.government.prevention_delta)
    pop.lambda_P[i] = pop.lambda_P[i] * new / old
    pop.lambda_R[i] = new
    fx.ids.append(i)
    fx.add(lamR_pre=old, lamR_post=new, alpha=pop.alpha[i], W=pop.W[i])
    fx.prevention_units = (old - new) * pop.W[i]
    cost = world.cfg.government.cost_prevention * fx.prevention_units
    world.government.pay(cost, "admin")
    fx.cash_cost = cost
    return fx


def provide_reinsurance(world) -> InterventionEffects:
    """Sell every insurer cover for its book at the fair rate until the next settlement."""
    fx = InterventionEffects(Intervention.Reinsurance)
    pop = world.pop
    theta = world.cfg.env.theta
    gov = world.government
    gov.last_resort = True
    gov.reinsurance_book = []
    for ins in active_insurers(world):
        liability = float(np.sum(pop.lambda_R[ins.policies] * pop.W[ins.policies])) if ins.policies else 0.0
        if liability <= 0:
            continue
        fx.shortfalls += max(liability - total_assets(ins), 0.0)
        premium = theta * liability
        ins.kappa -= premium
        gov.receive(premium, "reinsurance_premiums")
        ins.reinsurance = liability
        ins.reinsured = True
        gov.reinsurance_book.append((ins.id, theta))
    for i in np.flatnonzero(pop.provider >= 0):
        ins = world.insurer_by_id(int(pop.provider[i]))
        fx.ids.append(int(i))
        fx.add(H0=0, epsilon=ins.epsilon, alpha=pop.alpha[i], lamP_W=pop.lambda_P[i] * pop.W[i])
    return fx


def apply_intervention(world, intervention) -> InterventionEffects:
    action = Intervention(int(intervention))
    if action == Intervention.NoAction:
        return InterventionEffects(action)
    handler = {
        Intervention.StateInsurance: provide_state_insurance,
        Intervention.EaseSolvency: ease_solvency,
        Intervention.Awareness: run_awareness,
        Intervention.Subsidy: apply_subsidy,
        Intervention.PremiumRegulation: regulate_premiums,
        Intervention.Prevention: grant_prevention,
        Intervention.Reinsurance: provide_reinsurance,
    }[action]
    return handler(world)
