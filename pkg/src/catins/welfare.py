"""Welfare accounting: willingness to pay, net government cost, and MVPF.

The reward of an intervention is its marginal value of public funds: what
the affected households would pay for it divided by what it costs the
government once fiscal side effects are included.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import GovernmentConfig
from .government import Intervention, InterventionEffects

EXTERNALITIES = (
    "crowding_out",
    "debt_tax",
    "insolvency",
    "cry_wolf",
    "moral_hazard",
    "catastrophe_losses",
)


@dataclass
class StepLog:
    """Fiscal side effects accumulated over one reward window."""

    crowding_out: float = 0.0
    debt_tax: float = 0.0
    insolvency: float = 0.0
    cry_wolf: float = 0.0
    moral_hazard: float = 0.0
    catastrophe_losses: float = 0.0


@dataclass
class WelfareRecord:
    intervention: Intervention
    wtp: float
    mechanical_cost: float
    externalities: dict = field(default_factory=dict)
    g_net: float = 0.0
    mvpf: float = 0.0


def _pos(x):
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def wtp(intervention, effects: InterventionEffects, subsidy_reading: str = "saved") -> float:
    """Households' total willingness to pay for the intervention just applied."""
    action = Intervention(int(intervention))
    if effects.action != action:
        raise ValueError(f"effects of {effects.action.name} cannot price {action.name}")
    fx = effects
    if action == Intervention.NoAction or not fx.ids:
        return 0.0
    H0 = np.asarray(fx.H0)
    if action == Intervention.StateInsurance:
        pmax, p, g, base = (np.asarray(v) for v in (fx.pmax, fx.p_pre, fx.p_post, fx.lamP_W))
        return float(np.sum(H0 * _pos(pmax) + (1 - H0) * _pos((p - g) * base)))
    if action == Intervention.EaseSolvency:
        return float(np.sum(H0 * _pos(fx.pmax)))
    if action == Intervention.Awareness:
        return float(np.sum(_pos(np.asarray(fx.pmax_post) - np.asarray(fx.pmax))))
    if action == Intervention.Subsidy:
        s = fx.subsidy_share
        pmax, p, base = (np.asarray(v) for v in (fx.pmax, fx.p_pre, fx.lamP_W))
        if subsidy_reading == "literal":
            incumbent = _pos((p - s) * base)
        else:
            incumbent = _pos(s * p * base)
        entrant = _pos(pmax - (1.0 - s) * p * base)
        return float(np.sum(H0 * entrant + (1 - H0) * incumbent))
    if action == Intervention.PremiumRegulation:
        pmax, p, preg, base = (np.asarray(v) for v in (fx.pmax, fx.p_pre, fx.p_post, fx.lamP_W))
        return float(np.sum(H0 * _pos(pmax - preg * base) + (1 - H0) * _pos((p - preg) * base)))
    if action == Intervention.Prevention:
        d = np.asarray(fx.lamR_pre) - np.asarray(fx.lamR_post)
        return float(np.sum(_pos(d * np.asarray(fx.alpha) * np.asarray(fx.W))))
    if action == Intervention.Reinsurance:
        terms = np.asarray(fx.epsilon) * np.asarray(fx.alpha) * np.asarray(fx.lamP_W)
        return float(np.sum((1 - H0) * _pos(terms)))
    raise AssertionError(action)


def mechanical_cost(intervention, effects: InterventionEffects, costs: GovernmentConfig) -> float:
    """Direct government outlay attributed to the intervention."""
    action = Intervention(int(intervention))
    fx = effects
    if action == Intervention.NoAction:
        return 0.0
    if action == Intervention.StateInsurance:
        return costs.cost_state_insurance * fx.new_policies
    if action == Intervention.EaseSolvency:
        return costs.cost_ease_solvency
    if action == Intervention.Awareness:
        low, mid, up = fx.class_counts
        return costs.cost_awareness * (1.5 * low + mid + 0.5 * up)
    if action == Intervention.Subsidy:
        return fx.subsidy_base
    if action == Intervention.PremiumRegulation:
        return costs.cost_regulation
    if action == Intervention.Prevention:
        return costs.cost_prevention * fx.prevention_units
    if action == Intervention.Reinsurance:
        return fx.shortfalls
    raise AssertionError(action)


def fiscal_externalities(step_log: StepLog) -> dict:
    return {name: max(float(getattr(step_log, name)), 0.0) for name in EXTERNALITIES}


def mvpf(wtp_value: float, g_net: float, reward_cap: float = 10.0) -> float:
    if wtp_value < 0:
        raise ValueError("willingness to pay must be non-negative")
    if g_net > 0:
        return min(wtp_value / g_net, reward_cap)
    return reward_cap if wtp_value > 0 else 0.0


def welfare_record(intervention, effects: InterventionEffects, step_log: StepLog,
                   gcfg: GovernmentConfig) -> WelfareRecord:
    action = Intervention(int(intervention))
    w = wtp(action, effects, gcfg.subsidy_wtp)
    mech = mechanical_cost(action, effects, gcfg)
    ext = fiscal_externalities(step_log)
    g = mech + sum(ext.values())
    return WelfareRecord(action, w, mech, ext, g, mvpf(w, g, gcfg.reward_cap))
