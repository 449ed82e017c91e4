"""Builders for small hand-made worlds, households and insurers."""

from __future__ import annotations

import numpy as np

from catins.config import ScenarioConfig, with_overrides
from catins.individual import BiasProfile
from catins.insurer import InsurerState, LossModel

# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def make_config(**env):
    base = {"n": 4, "m0": 1, "T": 5}
    base.update(env)
    return with_overrides(ScenarioConfig(), env=base)


def calm_biases(n, **overrides):
    """Bias profile for ``n`` households with no behavioural noise."""
    values = dict(beta_u=2.0, beta_o=0.0, beta_m=0.9, beta_f=0.0, beta_n=0.0, beta_h=0.0)
    values.update(overrides)
    return BiasProfile(**{k: np.full(n, float(v)) for k, v in values.items()})


def make_insurer(ins_id=0, kappa=500000.0, gamma=0.5, epsilon=0.0, loading=0.5, rho=0.9,
                 beta_prime=0.0, admin_cost=0.1, p=0.02, mu=100.0, sigma=10.0):
    return InsurerState(ins_id, kappa, gamma, epsilon, loading, rho, beta_prime, admin_cost,
                        LossModel(p, mu, sigma))


def set_households(world, W, lambda_R, alpha=None, lambda_P=None, social_class=None, **bias):
    """Replace the world's households with the given ones (all uninsured)."""
    from catins.individual import Population

    W = np.asarray(W, dtype=float)
    n = W.size
    lam = np.asarray(lambda_R, dtype=float)
    pop = Population(
        social_class=np.zeros(n, dtype=np.int64) if social_class is None else np.asarray(social_class),
        Y=np.full(n, 5000.0), W=W, lambda_R=lam,
        lambda_P=lam.copy() if lambda_P is None else np.asarray(lambda_P, dtype=float),
        alpha=np.full(n, 0.01) if alpha is None else np.asarray(alpha, dtype=float),
        biases=calm_biases(n, **bias),
    )
    world.pop = pop
    world.inert = np.zeros(n, dtype=bool)
    world.government.receptiveness = np.ones(n)
    return pop


def replace_insurers(world, *insurers):
    world.insurers = []
    world._by_id = {}
    for ins in insurers:
        world.add_insurer(ins)
