"""World state, catastrophe process, and the per-step episode loop.

One time-step runs, in order: catastrophe trial, loss and claim settlement,
risk-perception update, consumption and saving, insurance demand and
purchase (premiums are collected at purchase), then insurer loss-model
updates, loading drift, exit and entry. When a government is present it
intervenes once after the market has cleared.

The reward of an intervention at step ``t`` is its MVPF, priced once the
market of step ``t + 1`` has run, so the fiscal side effects it triggers
(moral hazard, the next catastrophe's losses, insurer failures and exits)
fall inside its window.

Randomness comes from :class:`RandomStreams`: every (episode, step, role)
triple owns an independent generator derived from the single seed, so
extra logging or reordering of unrelated code cannot shift any draw.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .config import ScenarioConfig, validate
from .government import (
    GovernmentState,
    Intervention,
    InterventionEffects,
    apply_intervention,
    collect_taxes,
)
from .individual import (
    GOVERNMENT,
    NO_PROVIDER,
    BiasProfile,
    ParetoUtilityParams,
    Population,
    peer_means,
    perceived_loss_rate,
    plan_consumption,
    pmax_rational,
    pmax_simplified,
    update_risk_perception,
)
from .insurer import (
    InsurerState,
    adjust_loading,
    apply_exit_events,
    draw_insurer,
    loss_moments,
    total_assets,
    update_loss_model,
)
from .market import active_insurers, cancel_private, remaining_capacity, sell_government, sell_private
from .metrics import coverage_rate, gini_index
from .welfare import StepLog, WelfareRecord, welfare_record

logger = logging.getLogger(__name__)

ROLE_CATASTROPHE, ROLE_DEMAND, ROLE_ENTRY, ROLE_INIT = range(4)


class RandomStreams:
    """Independent generators keyed by (episode, step, role)."""

    def __init__(self, seed: int, episode: int = 0):
        self.seed = int(seed)
        self.episode = int(episode)

    def get(self, t: int, role: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.episode, int(t), int(role)))
        return np.random.default_rng(seq)


@dataclass
class WealthFlows:
    """Signed household wealth changes within one step."""

    savings: float = 0.0
    interest: float = 0.0
    losses: float = 0.0
    claims: float = 0.0
    premiums: float = 0.0
    refunds: float = 0.0
    subsidies: float = 0.0
    taxes: float = 0.0

    def total(self) -> float:
        return (self.savings + self.interest + self.losses + self.claims + self.premiums
                + self.refunds + self.subsidies + self.taxes)


@dataclass
class WorldState:
    cfg: ScenarioConfig
    params: ParetoUtilityParams
    pop: Population
    insurers: list
    government: GovernmentState
    streams: RandomStreams
    government_enabled: bool = False
    t: int = 0
    catastrophe_log: list = field(default_factory=list)
    next_insurer_id: int = 0
    log: StepLog = field(default_factory=StepLog)
    flows: WealthFlows = field(default_factory=WealthFlows)
    inert: np.ndarray = None
    catastrophe_now: bool = False
    unaffordable: int = 0
    mean_quote_rate: float = float("nan")
    exits: int = 0
    entries: int = 0
    _by_id: dict = field(default_factory=dict)

    @property
    def individuals(self) -> Population:
        return self.pop

    def insurer_by_id(self, ins_id: int) -> InsurerState:
        return self._by_id[ins_id]

    def add_insurer(self, ins: InsurerState) -> None:
        self.insurers.append(ins)
        self._by_id[ins.id] = ins
        self.next_insurer_id = max(self.next_insurer_id, ins.id + 1)


# ------------------------------------------------------------------ setup

def _class_counts(n: int, shares) -> np.ndarray:
    """Largest-remainder apportionment of n households to classes."""
    raw = np.asarray(shares, dtype=float) * n
    counts = np.floor(raw).astype(int)
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[: n - counts.sum()]] += 1
    return counts


def draw_population(cfg: ScenarioConfig, rng: np.random.Generator) -> Population:
    pc = cfg.population
    n = cfg.env.n
    classes = np.repeat(np.arange(3), _class_counts(n, pc.class_shares))
    classes = rng.permutation(classes)

    def per_class(ranges):
        lo = np.array([r[0] for r in ranges])[classes]
        hi = np.array([r[1] for r in ranges])[classes]
        return rng.uniform(lo, hi)

    Y = np.asarray(pc.income, dtype=float)[classes]
    W = per_class(pc.wealth)
    alpha = per_class(pc.alpha0)
    lam = per_class(pc.lambda_R)
    b = {name: rng.uniform(*getattr(pc, name), size=n)
         for name in ("beta_u", "beta_o", "beta_m", "beta_f", "beta_n", "beta_h")}
    biases = BiasProfile(**b)
    return Population(
        social_class=classes, Y=Y, W=W, lambda_R=lam,
        lambda_P=perceived_loss_rate(lam, biases.beta_o), alpha=alpha, biases=biases,
    )


def build_world(cfg: ScenarioConfig, seed: Optional[int] = None, episode: int = 0,
                government: bool = False) -> WorldState:
    """Draw the initial population and insurers for one episode."""
    seed = cfg.env.seed if seed is None else seed
    streams = RandomStreams(seed, episode)
    rng = streams.get(0, ROLE_INIT)
    pop = draw_population(cfg, rng)
    gcfg = cfg.government
    gov = GovernmentState(
        treasury=gcfg.initial_treasury,
        tax_thresholds=tuple(gcfg.tax_thresholds), tax_rates=tuple(gcfg.tax_rates),
        receptiveness=np.ones(pop.n), subsidy_share=gcfg.subsidy_share,
    )
    world = WorldState(cfg=cfg, params=ParetoUtilityParams(cfg.utility.phi, cfg.utility.k),
                       pop=pop, insurers=[], government=gov, streams=streams,
                       government_enabled=government)
    world.inert = np.zeros(pop.n, dtype=bool)
    exposures = pop.exposure
    for j in range(cfg.env.m0):
        world.add_insurer(draw_insurer(rng, j, cfg.insurer, cfg.env.theta, exposures))
    return world


# ------------------------------------------------------------------ catastrophe

def draw_catastrophe(rng: np.random.Generator, theta: float) -> bool:
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    return bool(rng.random() < theta)


def apply_catastrophe(world: WorldState) -> None:
    """Destroy wealth, settle claims, and remove insurers that cannot pay."""
    pop = world.pop
    gov = world.government
    loss = pop.lambda_R * pop.W
    pop.W = pop.W - loss
    world.flows.losses -= float(loss.sum())
    world.log.catastrophe_losses += float(loss.sum())

    for ins in active_insurers(world):
        if not ins.policies:
            continue
        ids = np.asarray(ins.policies)
        claims = loss[ids]
        due = float(claims.sum())
        rest = due
        take = min(rest, max(ins.reserves, 0.0))
        ins.reserves -= take
        rest -= take
        if rest > 0:
            ins.capital_drawn = True
        take = min(rest, max(ins.kappa, 0.0))
        ins.kappa -= take
        rest -= take
        take = min(rest, max(ins.profits, 0.0))
        ins.profits -= take
        rest -= take
        paid = due - rest
        ins.claims_paid += paid
        ins.step_profit -= paid
        covered = paid
        if rest > 0 and ins.reinsured and world.government_enabled:
            gov.pay(rest, "reinsurance_claims")
            covered += rest
            rest = 0.0
        if rest > 0:
            ins.insolvent = True
            ins.unmet = rest
            world.log.insolvency += rest
            if gov.last_resort and world.government_enabled:
                gov.pay(rest, "last_resort")
                covered += rest
        share = covered / due if due > 0 else 0.0
        pop.W[ids] += claims * share
        world.flows.claims += float((claims * share).sum())
        if ins.insolvent:
            _exit_insurer(world, ins, refund=False)

    gov_ids = np.flatnonzero(pop.provider == GOVERNMENT)
    if gov_ids.size:
        amount = float(loss[gov_ids].sum())
        gov.pay(amount, "claims")
        pop.W[gov_ids] += loss[gov_ids]
        world.flows.claims += amount
    gov.receptiveness = np.ones(pop.n)
    gov.catastrophe_since_campaign = True


def apply_moral_hazard(individual, insured, benefiting=True, m_h: float = 1.02):
    """Raise the true loss fraction of insured households whose cover is subsidized.

    Works on one household or a population; returns the total increase in
    expected loss (delta lambda_R times wealth).
    """
    old = np.asarray(individual.lambda_R, dtype=float)
    mask = np.asarray(insured, dtype=bool) & np.asarray(benefiting, dtype=bool)
    new = np.where(mask, np.minimum(old * m_h, 1.0), old)
    ratio = np.divide(new, old, out=np.ones_like(old), where=old > 0)
    lam_p = np.asarray(individual.lambda_P, dtype=float) * ratio
    if np.ndim(old) == 0:
        individual.lambda_R, individual.lambda_P = float(new), float(lam_p)
    else:
        individual.lambda_R, individual.lambda_P = new, lam_p
    return float(np.sum((new - old) * np.asarray(individual.W, dtype=float)))


# ------------------------------------------------------------------ market phase

def _exit_insurer(world: WorldState, ins: InsurerState, refund: bool = True) -> None:
    pop = world.pop
    for i in list(ins.policies):
        cancel_private(world, i, refund=refund)
    ins.policies = []
    if world.government_enabled:
        gov_ids = np.flatnonzero(pop.provider == GOVERNMENT)
        if gov_ids.size and np.any(pop.premium[gov_ids] < ins.premium_rate * pop.exposure[gov_ids]):
            world.log.crowding_out += max(total_assets(ins), 0.0)
    ins.active = False
    world.exits += 1


def _start_step(world: WorldState) -> None:
    r = world.cfg.env.r
    for ins in active_insurers(world):
        if world.t > 0:
            ins.kappa = ins.kappa * (1.0 + r) + ins.profits
            ins.profits = 0.0
        ins.sales = 0
        ins.step_profit = 0.0
        ins.claims_paid = 0.0
        ins.capital_drawn = False
        ins.unmet = 0.0
    world.flows = WealthFlows()
    world.exits = world.entries = 0


def _expire_contracts(world: WorldState) -> None:
    """Private contracts last one step; reinsurance lasts one settlement."""
    pop = world.pop
    private = pop.provider >= 0
    pop.provider[private] = NO_PROVIDER
    pop.premium[private] = 0.0
    pop.rate[private] = 0.0
    pop.subsidized[:] = False
    for ins in world.insurers:
        ins.policies = []
        ins.reinsurance = 0.0
        ins.reinsured = False
    world.government.last_resort = False
    world.government.reinsurance_book = []


def _demand(world: WorldState, rng: np.random.Generator) -> None:
    pop = world.pop
    n = pop.n
    theta = world.cfg.env.theta
    u = rng.random((2, n))
    simplified = u[0] < pop.biases.beta_f
    world.inert = u[1] < pop.biases.beta_n
    prev = pop.pmax.copy()
    rational = pmax_rational(pop, world.params)
    herd = pmax_simplified(prev, peer_means(prev, pop.social_class), pop.biases.beta_h)
    pop.pmax = np.where(simplified, herd, rational)

    insurers = active_insurers(world)
    X = pop.exposure
    if insurers:
        rates = np.array([ins.premium_rate for ins in insurers])
        world.mean_quote_rate = float(rates.mean())
        cheapest = rates.min() * X
        world.unaffordable = int(np.sum((pop.pmax > 0) & (pop.pmax < cheapest)))
    else:
        world.mean_quote_rate = float("nan")
        world.unaffordable = 0
    if not world.cfg.env.insurance_enabled:
        return

    capacity = remaining_capacity(world)
    offers = sorted((ins.premium_rate, ins.id) for ins in insurers)
    gov_held = pop.provider == GOVERNMENT
    open_offers = [o for o in offers if capacity[o[1]] > 0]
    if open_offers:
        reachable = ~world.inert & (pop.pmax >= open_offers[0][0] * X)
    else:
        reachable = np.zeros(n, dtype=bool)
    for i in np.flatnonzero(reachable | gov_held):
        offer = next(((rate, j) for rate, j in offers if capacity[j] > 0), None)
        private_q = offer[0] * X[i] if offer else np.inf
        affordable = private_q <= pop.pmax[i] and private_q <= pop.W[i]
        if gov_held[i]:
            gov_q = min(theta * X[i], pop.pmax[i])
            if not world.inert[i] and affordable and private_q < gov_q:
                pop.provider[i] = NO_PROVIDER
                pop.gov_eligible[i] = False
            else:
                sell_government(world, i, gov_q)
                continue
        if affordable:
            rate, j = offer
            sell_private(world, i, world.insurer_by_id(j), rate, private_q)
            capacity[j] -= 1


def update_exit_and_entry(world: WorldState) -> None:
    """Apply exit events to incumbents, then admit at most one entrant."""
    cfg = world.cfg
    incumbents = active_insurers(world)
    mean_profit = float(np.mean([ins.step_profit for ins in incumbents])) if incumbents else 0.0
    for ins in incumbents:
        if apply_exit_events(ins, cfg.insurer.exit_increment):
            _exit_insurer(world, ins)
    empty = not active_insurers(world)
    if (incumbents and mean_profit > 0) or (empty and cfg.env.entry_when_empty):
        rng = world.streams.get(world.t, ROLE_ENTRY)
        ins = draw_insurer(rng, world.next_insurer_id, cfg.insurer, cfg.env.theta, world.pop.exposure)
        world.add_insurer(ins)
        world.entries += 1


def market_phase(world: WorldState) -> None:
    """Run one step of the market, everything before government action."""
    cfg = world.cfg
    env = cfg.env
    pop = world.pop
    _start_step(world)
    cat = draw_catastrophe(world.streams.get(world.t, ROLE_CATASTROPHE), env.theta)
    world.catastrophe_now = cat
    if cat:
        world.catastrophe_log.append(world.t)
        apply_catastrophe(world)
    _expire_contracts(world)

    pop.alpha = np.asarray(update_risk_perception(pop.alpha, pop.biases, cat))
    C, S = plan_consumption(pop, env.r, world.params, env.liquid_wealth_share, guess=pop.C)
    pop.C, pop.S = np.asarray(C), np.asarray(S)
    interest = env.r * pop.W
    pop.W = pop.W + interest + pop.S
    world.flows.savings += float(pop.S.sum())
    world.flows.interest += float(interest.sum())

    _demand(world, world.streams.get(world.t, ROLE_DEMAND))

    exposures = pop.exposure
    insurers = active_insurers(world)
    if insurers:
        mean_loading = float(np.mean([ins.loading for ins in insurers]))
        moments = loss_moments(exposures)
        for ins in insurers:
            update_loss_model(ins, exposures, cat, cfg.insurer.rho_cap, moments)
            adjust_loading(ins, mean_loading, ins.sales, cfg.insurer.loading_adjust)
    update_exit_and_entry(world)


def intervention_phase(world: WorldState, action) -> InterventionEffects:
    """Apply one intervention, then moral hazard and taxes."""
    pop = world.pop
    effects = apply_intervention(world, action)
    fair = world.cfg.env.theta * pop.exposure
    benefiting = pop.subsidized | ((pop.provider == GOVERNMENT) & (pop.premium < fair))
    world.log.moral_hazard += apply_moral_hazard(pop, pop.insured, benefiting,
                                                 world.cfg.env.moral_hazard)
    gov = world.government
    required = max(gov.pending_out - gov.pending_in, 0.0)
    world.log.debt_tax += collect_taxes(world, required)
    return effects


# ------------------------------------------------------------------ episodes

@dataclass
class EpisodeTrace:
    wealth: np.ndarray
    alpha: np.ndarray
    pmax: np.ndarray
    best_quote: np.ndarray
    insured: np.ndarray
    coverage: np.ndarray
    gini: np.ndarray
    mean_quote_rate: np.ndarray
    catastrophe: np.ndarray
    active_insurers: np.ndarray
    exits: np.ndarray
    entries: np.ndarray
    unaffordable: np.ndarray
    interventions: np.ndarray
    states: np.ndarray
    rewards: np.ndarray
    wtp: np.ndarray
    g_net: np.ndarray
    treasury: np.ndarray
    debt: np.ndarray
    insurer_rows: list
    welfare: list

    @property
    def T(self) -> int:
        return len(self.coverage)

    @property
    def premium_quotes(self) -> np.ndarray:
        return self.mean_quote_rate


PolicySource = Union[None, str, Sequence[int], Callable[[WorldState], int]]


def _resolve_policy(policy_source: PolicySource):
    if policy_source is None or (isinstance(policy_source, str) and policy_source in ("none", "no-government")):
        return None
    if callable(policy_source):
        return policy_source
    seq = [int(Intervention(int(a))) for a in policy_source]
    return lambda world: seq[world.t] if world.t < len(seq) else int(Intervention.NoAction)


def run_episode(config: ScenarioConfig, policy_source: PolicySource = None, seed: Optional[int] = None,
                episode: int = 0, classifier: Optional[Callable[[WorldState], int]] = None) -> EpisodeTrace:
    """Simulate one episode and return its per-step trace.

    ``policy_source`` is ``None`` (no government), a sequence of intervention
    codes (padded with NoAction), or a callable mapping the world to an
    intervention. ``classifier`` optionally labels each step's market state.
    """
    config = validate(config)
    policy = _resolve_policy(policy_source)
    world = build_world(config, seed, episode, government=policy is not None)
    T, n = config.env.T, config.env.n
    mats = {k: np.zeros((T, n)) for k in ("wealth", "alpha", "pmax", "best_quote")}
    insured = np.zeros((T, n), dtype=bool)
    series = {k: np.zeros(T) for k in ("coverage", "gini", "mean_quote_rate", "rewards", "wtp",
                                       "g_net", "treasury", "debt")}
    ints = {k: np.zeros(T, dtype=np.int64) for k in ("active_insurers", "exits", "entries",
                                                     "unaffordable", "interventions", "states")}
    cat = np.zeros(T, dtype=bool)
    insurer_rows, welfare = [], []
    pending = None

    def settle(pending_step):
        step, action, effects = pending_step
        rec: WelfareRecord = welfare_record(action, effects, world.log, config.government)
        series["rewards"][step] = rec.mvpf
        series["wtp"][step] = rec.wtp
        series["g_net"][step] = rec.g_net
        welfare.append((step, rec))

    for t in range(T):
        world.t = t
        market_phase(world)
        if pending is not None:
            settle(pending)
            pending = None
        ints["states"][t] = classifier(world) if classifier else -1
        action = -1
        if policy is not None:
            world.log = StepLog()
            action = int(policy(world))
            effects = intervention_phase(world, action)
            pending = (t, action, effects)
        pop = world.pop
        mats["wealth"][t] = pop.W
        mats["alpha"][t] = pop.alpha
        mats["pmax"][t] = pop.pmax
        rates = [ins.premium_rate for ins in active_insurers(world)]
        mats["best_quote"][t] = (min(rates) * pop.exposure) if rates else np.inf
        insured[t] = pop.insured
        series["coverage"][t] = coverage_rate(world)
        series["gini"][t] = gini_index(pop.W)
        series["mean_quote_rate"][t] = world.mean_quote_rate
        series["treasury"][t] = world.government.treasury
        series["debt"][t] = world.government.debt
        ints["active_insurers"][t] = len(rates)
        ints["exits"][t] = world.exits
        ints["entries"][t] = world.entries
        ints["unaffordable"][t] = world.unaffordable
        ints["interventions"][t] = action
        cat[t] = world.catastrophe_now
        for ins in active_insurers(world):
            insurer_rows.append((t, ins.id, ins.loss_model.p, ins.loading, ins.premium_rate,
                                 ins.rho, ins.gamma, ins.epsilon, ins.sales, total_assets(ins)))
    if pending is not None:
        settle(pending)

    return EpisodeTrace(
        wealth=mats["wealth"], alpha=mats["alpha"], pmax=mats["pmax"], best_quote=mats["best_quote"],
        insured=insured, coverage=series["coverage"], gini=series["gini"],
        mean_quote_rate=series["mean_quote_rate"], catastrophe=cat,
        active_insurers=ints["active_insurers"], exits=ints["exits"], entries=ints["entries"],
        unaffordable=ints["unaffordable"], interventions=ints["interventions"], states=ints["states"],
        rewards=series["rewards"], wtp=series["wtp"], g_net=series["g_net"],
        treasury=series["treasury"], debt=series["debt"], insurer_rows=insurer_rows, welfare=welfare,
    )
