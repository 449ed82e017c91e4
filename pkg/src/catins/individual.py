"""Households: beliefs, consumption planning, and insurance demand.

The functions in this module read attributes from an ``individual`` object
(``W``, ``Y``, ``alpha``, ``lambda_P``, ``biases`` ...). Both a single
:class:`IndividualState` and the struct-of-arrays :class:`Population` expose
those attributes, so every rule works on scalars and on whole populations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

SOCIAL_CLASSES = ("low", "middle", "upper")

NO_PROVIDER = -1
GOVERNMENT = -2


def _as_output(x):
    arr = np.asarray(x, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def _check_range(name, value, lo, hi):
    arr = np.asarray(value, dtype=float)
    if np.any(arr < lo) or np.any(arr > hi) or np.any(np.isnan(arr)):
        raise ValueError(f"{name} must lie in [{lo}, {hi}]")


@dataclass(frozen=True)
class BiasProfile:
    """Behavioural parameters fixed for the life of an individual.

    Fields may be floats (one household) or equal-length arrays (a population).
    """

    beta_u: float | np.ndarray
    beta_o: float | np.ndarray
    beta_m: float | np.ndarray
    beta_f: float | np.ndarray
    beta_n: float | np.ndarray
    beta_h: float | np.ndarray

    def __post_init__(self):
        _check_range("beta_u", self.beta_u, 2.0, 3.0)
        for name in ("beta_o", "beta_m", "beta_f", "beta_n", "beta_h"):
            _check_range(name, getattr(self, name), 0.0, 1.0)

    def at(self, i: int) -> "BiasProfile":
        return BiasProfile(*(float(np.asarray(getattr(self, f))[i]) for f in _BIAS_FIELDS))


_BIAS_FIELDS = ("beta_u", "beta_o", "beta_m", "beta_f", "beta_n", "beta_h")


@dataclass(frozen=True)
class ParetoUtilityParams:
    phi: float
    k: float

    def __post_init__(self):
        if not (self.phi > 0 and self.k > 0):
            raise ValueError("phi and k must be strictly positive")


@dataclass
class Contract:
    provider: int  # insurer id, or GOVERNMENT
    premium: float
    government: bool = False


@dataclass
class IndividualState:
    id: int
    social_class: str
    Y: float
    W: float
    lambda_R: float
    lambda_P: float
    alpha: float
    biases: BiasProfile
    C: float = 0.0
    S: float = 0.0
    contract: Optional[Contract] = None
    gov_eligible: bool = True
    pmax: float = 0.0

    def __post_init__(self):
        if self.social_class not in SOCIAL_CLASSES:
            raise ValueError(f"social_class must be one of {SOCIAL_CLASSES}")
        if self.W < 0:
            raise ValueError("wealth must be non-negative")
        for name in ("lambda_R", "lambda_P", "alpha"):
            _check_range(name, getattr(self, name), 0.0, 1.0)


@dataclass
class Population:
    """All households of a world, stored column-wise."""

    social_class: np.ndarray  # int codes into SOCIAL_CLASSES
    Y: np.ndarray
    W: np.ndarray
    lambda_R: np.ndarray
    lambda_P: np.ndarray
    alpha: np.ndarray
    biases: BiasProfile
    C: np.ndarray = None
    S: np.ndarray = None
    pmax: np.ndarray = None
    provider: np.ndarray = None  # NO_PROVIDER, GOVERNMENT, or insurer id
    premium: np.ndarray = None  # premium actually paid for the current contract
    rate: np.ndarray = None  # premium rate on the true loss base
    subsidized: np.ndarray = None
    gov_eligible: np.ndarray = None

    def __post_init__(self):
        n = len(self.Y)
        zeros = lambda: np.zeros(n)  # noqa: E731
        for name in ("C", "S", "pmax", "premium", "rate"):
            if getattr(self, name) is None:
                setattr(self, name, zeros())
        if self.provider is None:
            self.provider = np.full(n, NO_PROVIDER, dtype=np.int64)
        if self.subsidized is None:
            self.subsidized = np.zeros(n, dtype=bool)
        if self.gov_eligible is None:
            self.gov_eligible = np.ones(n, dtype=bool)

    @property
    def n(self) -> int:
        return len(self.Y)

    @property
    def insured(self) -> np.ndarray:
        return self.provider != NO_PROVIDER

    @property
    def exposure(self) -> np.ndarray:
        return self.lambda_R * self.W

    def individual(self, i: int) -> IndividualState:
        contract = None
        if self.provider[i] != NO_PROVIDER:
            contract = Contract(int(self.provider[i]), float(self.premium[i]),
                                bool(self.provider[i] == GOVERNMENT))
        return IndividualState(
            id=i, social_class=SOCIAL_CLASSES[self.social_class[i]], Y=float(self.Y[i]),
            W=float(self.W[i]), lambda_R=float(self.lambda_R[i]),
            lambda_P=float(self.lambda_P[i]), alpha=float(self.alpha[i]),
            biases=self.biases.at(i), C=float(self.C[i]), S=float(self.S[i]),
            contract=contract, gov_eligible=bool(self.gov_eligible[i]), pmax=float(self.pmax[i]),
        )

    def copy(self) -> "Population":
        b = self.biases
        arrays = {f: np.array(getattr(self, f)) for f in (
            "social_class", "Y", "W", "lambda_R", "lambda_P", "alpha", "C", "S", "pmax",
            "provider", "premium", "rate", "subsidized", "gov_eligible")}
        return Population(biases=b, **arrays)


# ---------------------------------------------------------------- beliefs

def update_risk_perception(alpha, biases, just_hit):
    """Spike perceived risk after a catastrophe, otherwise let it fade."""
    alpha = np.asarray(alpha, dtype=float)
    hit = alpha * (1.0 + np.asarray(biases.beta_u))
    fade = alpha * (1.0 - np.asarray(biases.beta_o))
    return _as_output(np.clip(np.where(just_hit, hit, fade), 0.0, 1.0))


def perceived_loss_rate(lambda_R, beta_o):
    return _as_output((1.0 - np.asarray(beta_o, dtype=float)) * np.asarray(lambda_R, dtype=float))


# ---------------------------------------------------------------- utility

def pareto_utility(W, params: ParetoUtilityParams):
    W = np.asarray(W, dtype=float)
    if np.any(W < 0):
        raise ValueError("utility is undefined for negative wealth")
    return _as_output(-np.expm1(-params.k * np.log1p(W / params.phi)))


def pareto_utility_inverse(u, params: ParetoUtilityParams):
    u = np.asarray(u, dtype=float)
    if np.any(u >= 1) or np.any(u < 0):
        raise ValueError("utility must lie in [0, 1)")
    return _as_output(params.phi * np.expm1(-np.log1p(-u) / params.k))


def marginal_utility(C, params: ParetoUtilityParams):
    C = np.asarray(C, dtype=float)
    return (params.k / params.phi) * (1.0 + C / params.phi) ** (-(params.k + 1.0))


def _marginal_slope(C, params: ParetoUtilityParams):
    """Second derivative of the utility function."""
    return (-params.k * (params.k + 1.0) / params.phi ** 2) * (1.0 + C / params.phi) ** (-(params.k + 2.0))


def _disutility(W, params):
    # 1 - U(W); kept separate from U to avoid cancellation near U = 1
    return (1.0 + W / params.phi) ** (-params.k)


# ---------------------------------------------------------------- consumption

def euler_residual(C, resources, beta_m, r, alpha, lambda_P, params):
    """u'(C) - beta_m (1+r) E[u'(C_next)] for a plan consuming C now."""
    nxt = (1.0 + r) * (resources - C)
    expected = (1.0 - alpha) * marginal_utility(nxt, params) + alpha * marginal_utility(
        (1.0 - lambda_P) * nxt, params
    )
    return marginal_utility(C, params) - beta_m * (1.0 + r) * expected


def plan_consumption(individual, r, params: ParetoUtilityParams, liquid_wealth_share=1.0,
                     tol=1e-10, max_iter=200, guess=None):
    """Split this step's resources between consumption now and next step.

    Resources are income plus the liquid share of wealth. Whatever is not
    consumed earns ``r`` and funds next-step consumption, which shrinks by
    the perceived loss fraction if a catastrophe is expected. Returns
    ``(C, S)`` with ``S = Y - C``. ``guess`` seeds the root search; it only
    affects speed.
    """
    Y = np.asarray(individual.Y, dtype=float)
    W = np.asarray(individual.W, dtype=float)
    beta_m = np.asarray(individual.biases.beta_m, dtype=float)
    alpha = np.asarray(individual.alpha, dtype=float)
    lam = np.asarray(individual.lambda_P, dtype=float)
    X = Y + liquid_wealth_share * W

    args = (X, beta_m, r, alpha, lam, params)
    corner = euler_residual(X, *args) >= 0.0
    saver = ~corner & (euler_residual(np.zeros_like(X), *args) <= 0.0)
    # safeguarded Newton: the residual falls monotonically in C on (0, X)
    lo = np.zeros_like(X)
    hi = X.copy()
    C = 0.5 * X
    if guess is not None:
        g = np.asarray(guess, dtype=float)
        C = np.where((g > 0.0) & (g < X), g, C)
    R = 1.0 + r
    done = corner | saver
    for _ in range(max_iter):
        f = euler_residual(C, *args)
        lo = np.where(f > 0.0, C, lo)
        hi = np.where(f > 0.0, hi, C)
        nxt = R * (X - C)
        slope = _marginal_slope(C, params) + beta_m * R * R * (
            (1.0 - alpha) * _marginal_slope(nxt, params)
            + alpha * (1.0 - lam) * _marginal_slope((1.0 - lam) * nxt, params))
        step = np.where(slope < 0.0, C - f / np.where(slope < 0.0, slope, -1.0), np.inf)
        inside = (step >= lo) & (step <= hi)
        new = np.where(inside, step, 0.5 * (lo + hi))
        new = np.where(done, C, new)
        done = done | (np.abs(new - C) <= tol * np.maximum(X, 1.0))
        C = new
        if np.all(done):
            break
    C = np.where(corner, X, np.where(saver, 0.0, C))
    return _as_output(C), _as_output(Y - C)


def accrue_wealth(W, S, r):
    return _as_output((1.0 + r) * np.asarray(W, dtype=float) + np.asarray(S, dtype=float))


# ---------------------------------------------------------------- demand

def pmax_rational(individual, params: ParetoUtilityParams):
    """Largest premium worth paying to remove the perceived catastrophe risk."""
    W = np.asarray(individual.W, dtype=float)
    alpha = np.asarray(individual.alpha, dtype=float)
    lam = np.asarray(individual.lambda_P, dtype=float)
    expected_d = (1.0 - alpha) * _disutility(W, params) + alpha * _disutility((1.0 - lam) * W, params)
    certainty_equivalent = params.phi * np.expm1(-np.log(expected_d) / params.k)
    expected_wealth = W - alpha * lam * W
    return _as_output(np.maximum(expected_wealth - certainty_equivalent, 0.0))


def pmax_simplified(pmax_prev, peer_mean_pmax, beta_h):
    beta_h = np.asarray(beta_h, dtype=float)
    return _as_output((1.0 - beta_h) * np.asarray(pmax_prev, dtype=float)
                      + beta_h * np.asarray(peer_mean_pmax, dtype=float))


def peer_means(pmax_prev: np.ndarray, social_class: np.ndarray) -> np.ndarray:
    """Mean previous pmax of the other members of each individual's class."""
    sums = np.bincount(social_class, weights=pmax_prev, minlength=3)
    counts = np.bincount(social_class, minlength=3)
    own_sum = sums[social_class] - pmax_prev
    own_count = counts[social_class] - 1
    safe = np.maximum(own_count, 1)
    return np.where(own_count > 0, own_sum / safe, pmax_prev)


@dataclass
class PurchaseDecision:
    provider: int  # NO_PROVIDER, GOVERNMENT, or insurer id
    premium: float = 0.0
    simplified: bool = False
    inert: bool = False


def choose_offer(pmax: float, wealth: float, quotes: Sequence[tuple[int, float]],
                 gov_quote: Optional[float] = None) -> tuple[int, float]:
    """Cheapest affordable offer; the government wins ties, then lowest id."""
    best_id, best_q = NO_PROVIDER, np.inf
    if gov_quote is not None and gov_quote <= pmax:
        best_id, best_q = GOVERNMENT, gov_quote
    for ins_id, q in sorted(quotes):
        if q <= pmax and q <= wealth and q < best_q:
            best_id, best_q = ins_id, q
    return best_id, (0.0 if best_id == NO_PROVIDER else float(best_q))


def decide_and_purchase(individual, insurer_quotes, gov_quote, rng, params,
                        peer_mean=0.0) -> PurchaseDecision:
    """Single-household purchase decision.

    ``insurer_quotes`` lists ``(insurer_id, quote)`` for insurers that still
    have capacity. Consumes exactly two uniform draws from ``rng``.
    """
    u_simplify, u_inert = rng.random(2)
    simplified = bool(u_simplify < individual.biases.beta_f)
    if simplified:
        pmax = pmax_simplified(individual.pmax, peer_mean, individual.biases.beta_h)
    else:
        pmax = pmax_rational(individual, params)
    individual.pmax = float(pmax)
    if u_inert < individual.biases.beta_n:
        if gov_quote is not None:
            return PurchaseDecision(GOVERNMENT, float(gov_quote), simplified, True)
        return PurchaseDecision(NO_PROVIDER, 0.0, simplified, True)
    provider, premium = choose_offer(individual.pmax, individual.W, insurer_quotes, gov_quote)
    return PurchaseDecision(provider, premium, simplified, False)
