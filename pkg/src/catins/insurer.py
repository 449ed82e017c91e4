"""Insurers: loss models, reserves, pricing, and market entry and exit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from statistics import NormalDist

import numpy as np

from .config import InsurerConfig


@dataclass
class LossModel:
    p: float  # modeled catastrophe probability, the risk premium rate
    mu_loss: float
    sigma_loss: float
    modeler_fee: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("modeled loss probability must lie in [0, 1]")
        if self.sigma_loss < 0:
            raise ValueError("sigma_loss must be non-negative")


@dataclass
class InsurerState:
    id: int
    kappa: float  # capital
    gamma: float  # share of assets available for underwriting
    epsilon: float  # exit parameter
    loading: float
    rho: float  # solvency percentile
    beta_prime: float
    admin_cost: float
    loss_model: LossModel
    profits: float = 0.0
    reserves: float = 0.0
    reinsurance: float = 0.0
    policies: list = field(default_factory=list)
    active: bool = True
    insolvent: bool = False
    # per-step bookkeeping, reset at the start of each step
    sales: int = 0
    step_profit: float = 0.0
    claims_paid: float = 0.0
    capital_drawn: bool = False
    unmet: float = 0.0
    reinsured: bool = False

    @property
    def premium_rate(self) -> float:
        return self.loss_model.p * (1.0 + self.loading)


def loss_moments(exposures) -> tuple[float, float]:
    """Mean and population standard deviation of the exposures lambda_R * W."""
    x = np.asarray(exposures, dtype=float)
    return float(x.mean()), float(x.std())


def choose_loss_model(rng: np.random.Generator, theta: float, exposures,
                      error_range=(0.5, 1.5), modeler_fee: float = 1000.0) -> LossModel:
    """Buy a loss model: a noisy view of theta plus the society's loss moments."""
    lo, hi = error_range
    e = lo if lo == hi else rng.uniform(lo, hi)
    mu, sigma = loss_moments(exposures)
    return LossModel(p=min(theta * e, 1.0), mu_loss=mu, sigma_loss=sigma, modeler_fee=modeler_fee)


def reserve_per_policy(rho: float, mu_loss: float, sigma_loss: float) -> float:
    if not 0.0 < rho < 1.0:
        raise ValueError("solvency percentile must lie strictly inside (0, 1)")
    if sigma_loss == 0:
        return max(mu_loss, 0.0)
    return _normal_quantile(float(rho), float(mu_loss), float(sigma_loss))


@lru_cache(maxsize=4096)
def _normal_quantile(rho: float, mu: float, sigma: float) -> float:
    return max(NormalDist(mu, sigma).inv_cdf(rho), 0.0)


def insurer_reserve_per_policy(ins: InsurerState) -> float:
    return reserve_per_policy(ins.rho, ins.loss_model.mu_loss, ins.loss_model.sigma_loss)


def respond_to_catastrophe(ins: InsurerState, rho_cap: float = 0.999) -> InsurerState:
    """Price and reserve more cautiously after a catastrophe."""
    b = ins.beta_prime
    ins.loss_model.p = min(ins.loss_model.p * (1.0 + b), 1.0)
    ins.rho = min(rho_cap, ins.rho * (1.0 + b))
    ins.gamma = ins.gamma * (1.0 - b)
    return ins


def total_assets(ins: InsurerState) -> float:
    return ins.kappa + ins.profits + ins.reserves + ins.reinsurance


def supply_capacity(ins: InsurerState, reserve: float | None = None) -> int:
    """Number of policies the insurer is willing to hold."""
    reserve = insurer_reserve_per_policy(ins) if reserve is None else reserve
    if reserve <= 0:
        raise ValueError("reserve per policy must be positive")
    return max(int(math.floor(ins.gamma * max(total_assets(ins), 0.0) / reserve)), 0)


def premium_quote(ins: InsurerState, lambda_R, W, p_cap=None, loading_cap=None):
    p = ins.loss_model.p if p_cap is None else min(ins.loss_model.p, p_cap)
    l = ins.loading if loading_cap is None else min(ins.loading, loading_cap)
    return p * (1.0 + l) * np.asarray(lambda_R) * np.asarray(W)


def expected_profit(ins: InsurerState, X: float, c_prime: float) -> float:
    p = ins.loss_model.p
    return p * (1.0 + ins.loading) * X - p * X - c_prime * p * X


def adjust_loading(ins: InsurerState, market_mean_loading: float, sales_this_step: int,
                   kappa_l: float = 0.1) -> InsurerState:
    """Without sales, drift the loading down toward the market mean."""
    if sales_this_step == 0:
        target = min(ins.loading, market_mean_loading)
        ins.loading -= kappa_l * (ins.loading - target)
    return ins


def update_loss_model(ins: InsurerState, exposures, catastrophe_this_step: bool,
                      rho_cap: float = 0.999, moments=None) -> InsurerState:
    """Refresh loss moments, react to a catastrophe, and rebalance reserves.

    ``moments`` may carry precomputed ``loss_moments(exposures)``.
    """
    ins.loss_model.mu_loss, ins.loss_model.sigma_loss = moments or loss_moments(exposures)
    if catastrophe_this_step:
        respond_to_catastrophe(ins, rho_cap)
    rebalance_reserves(ins)
    return ins


def rebalance_reserves(ins: InsurerState) -> float:
    """Move capital into or out of reserves to match the policy book.

    Returns the amount moved into reserves (negative when released).
    """
    target = insurer_reserve_per_policy(ins) * len(ins.policies)
    delta = target - ins.reserves
    ins.kappa -= delta
    ins.reserves = target
    return delta


def draw_insurer(rng: np.random.Generator, ins_id: int, cfg: InsurerConfig, theta: float,
                 exposures) -> InsurerState:
    """Fresh insurer with attributes drawn from the calibration ranges.

    The draw order is fixed so that a given generator state always yields
    the same insurer.
    """
    u = lambda pair: float(rng.uniform(*pair))  # noqa: E731
    kappa = max(float(rng.normal(cfg.capital_mean, cfg.capital_sd)), 0.0)
    gamma, epsilon, loading = u(cfg.gamma), u(cfg.epsilon), u(cfg.loading)
    rho = min(max(u(cfg.rho), 1e-6), cfg.rho_cap)
    beta_prime, admin = u(cfg.beta_prime), u(cfg.admin_cost)
    model = choose_loss_model(rng, theta, exposures, tuple(cfg.model_error), cfg.modeler_fee)
    ins = InsurerState(ins_id, kappa, gamma, epsilon, loading, rho, beta_prime, admin, model)
    ins.kappa -= cfg.modeler_fee
    return ins


def apply_exit_events(ins: InsurerState, increment: float = 0.25) -> bool:
    """Count this step's adverse events; return True if the insurer exits."""
    if ins.insolvent:
        return True
    events = int(ins.step_profit < 0) + int(ins.sales == 0) + int(ins.capital_drawn)
    ins.epsilon = min(1.0, ins.epsilon + increment * events)
    return ins.epsilon >= 1.0
