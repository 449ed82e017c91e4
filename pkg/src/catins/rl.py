"""Tabular Q-learning for the government agent.

The market state is a cell of a 2x2x2 lattice (awareness, supply,
affordability) and actions are the eight interventions. One training
episode is one decision: observe the state, intervene, wait for the next
market phase, collect the MVPF reward and update the table. The simulated
world keeps running across decisions and is redrawn every ``T`` steps.

The learner itself only needs an environment with ``reset()`` returning a
state index and ``step(action)`` returning ``(next_state, reward, done)``,
so it runs unchanged on small hand-built MDPs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .config import RLConfig, ScenarioConfig, validate
from .env import WorldState, build_world, intervention_phase, market_phase
from .government import Intervention
from .market import active_insurers, total_capacity
from .welfare import StepLog, WelfareRecord, welfare_record

N_STATES = 8
N_ACTIONS = len(Intervention)

# Named cells of the lattice: (awareness high, supply high, unaffordable).
NAMED_STATES = {
    "State 1": (False, False, False),
    "State 2": (False, True, False),
    "State 3": (False, True, True),
    "State 4": (True, False, True),
    "State 5": (True, True, True),
}

TrainingConfig = RLConfig


@dataclass(frozen=True)
class MarketStateId:
    awareness_high: bool
    supply_high: bool
    unaffordable: bool

    @property
    def index(self) -> int:
        return 4 * int(self.awareness_high) + 2 * int(self.supply_high) + int(self.unaffordable)

    @classmethod
    def from_index(cls, index: int) -> "MarketStateId":
        if not 0 <= index < N_STATES:
            raise ValueError(f"state index must lie in [0, {N_STATES - 1}]")
        return cls(bool(index & 4), bool(index & 2), bool(index & 1))

    @property
    def label(self) -> str:
        for name, cell in NAMED_STATES.items():
            if cell == (self.awareness_high, self.supply_high, self.unaffordable):
                return name
        return "{} awareness, {} supply, {}".format(
            "high" if self.awareness_high else "low",
            "high" if self.supply_high else "low",
            "unaffordable" if self.unaffordable else "affordable",
        )


def state_index(name: str) -> int:
    return MarketStateId(*NAMED_STATES[name]).index


def _median(x: np.ndarray) -> float:
    a = np.sort(x, axis=None)
    mid = a.size // 2
    return float(a[mid]) if a.size % 2 else 0.5 * float(a[mid - 1] + a[mid])


def classify_state(world: WorldState, awareness_threshold: float = 0.5,
                   supply_threshold: float = 0.5) -> MarketStateId:
    pop = world.pop
    theta = world.cfg.env.theta
    if theta > 0:
        awareness = _median(pop.alpha / theta) >= awareness_threshold
    else:
        awareness = True
    insurers = active_insurers(world)
    if not insurers:
        return MarketStateId(awareness, False, True)
    supply = total_capacity(world) >= supply_threshold * pop.n
    quotes = min(ins.premium_rate for ins in insurers) * pop.exposure
    affordable = _median(quotes) <= _median(pop.pmax)
    return MarketStateId(awareness, supply, not affordable)


# ------------------------------------------------------------------ table

@dataclass
class QTable:
    q: np.ndarray
    visits: np.ndarray
    fingerprint: str = ""
    meta: dict = field(default_factory=dict)

    @classmethod
    def zeros(cls, n_states: int = N_STATES, n_actions: int = N_ACTIONS, fingerprint: str = "") -> "QTable":
        return cls(np.zeros((n_states, n_actions)), np.zeros((n_states, n_actions), dtype=np.int64),
                   fingerprint)

    @property
    def shape(self) -> tuple:
        return self.q.shape

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "meta": self.meta,
            "q": [[float(v) for v in row] for row in self.q],
            "visits": [[int(v) for v in row] for row in self.visits],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QTable":
        q = np.asarray(data["q"], dtype=float)
        visits = np.asarray(data["visits"], dtype=np.int64)
        if q.ndim != 2 or q.shape != visits.shape:
            raise ValueError("q and visits must be matrices of the same shape")
        if not np.all(np.isfinite(q)):
            raise ValueError("q-table contains non-finite values")
        return cls(q, visits, str(data.get("fingerprint", "")), dict(data.get("meta", {})))

    def dumps(self) -> str:
        # repr-exact floats and sorted keys keep the file byte-stable
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "QTable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def select_action(q: QTable | np.ndarray, state: int, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy choice; greedy ties go to the lowest action index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    row = (q.q if isinstance(q, QTable) else q)[state]
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(row.size))
    return int(np.argmax(row))


def q_update(q: QTable | np.ndarray, s: int, a: int, reward: float, s_next: Optional[int],
             eta: float, delta: float, literal: bool = False) -> float:
    """One tabular update in place; returns the absolute change.

    ``s_next=None`` marks a terminal transition (no bootstrap). With
    ``literal`` the reward is left out of the target.
    """
    table = q.q if isinstance(q, QTable) else q
    if not np.isfinite(reward):
        raise ValueError("reward must be finite")
    future = 0.0 if s_next is None else float(table[s_next].max())
    target = delta * future if literal else reward + delta * future
    old = table[s, a]
    table[s, a] = (1.0 - eta) * old + eta * target
    if isinstance(q, QTable):
        q.visits[s, a] += 1
    return abs(table[s, a] - old)


def epsilon_at(i: int, training: RLConfig) -> float:
    horizon = training.decay_fraction * training.episodes
    if horizon <= 0:
        return training.epsilon_end
    frac = min(i / horizon, 1.0)
    return training.epsilon_start + (training.epsilon_end - training.epsilon_start) * frac


def extract_policy(q: QTable | np.ndarray) -> dict:
    """Per state, (best, second best) action indices; ties favour lower indices."""
    table = q.q if isinstance(q, QTable) else np.asarray(q, dtype=float)
    out = {}
    for s, row in enumerate(table):
        order = np.lexsort((np.arange(row.size), -row))
        second = int(order[1]) if row.size > 1 else int(order[0])
        out[s] = (int(order[0]), second)
    return out


# ------------------------------------------------------------------ environments

class CatastropheEnv:
    """The simulated market seen as a continuing decision process.

    ``stream`` and ``stride`` split world indices between parallel copies so
    that each copy draws fresh, non-overlapping worlds.
    """

    n_states = N_STATES
    n_actions = N_ACTIONS

    def __init__(self, config: ScenarioConfig, seed: Optional[int] = None, stream: int = 0,
                 stride: int = 1):
        self.config = validate(config)
        self.seed = self.config.env.seed if seed is None else int(seed)
        self.stream = stream
        self.stride = stride
        self.worlds_drawn = 0
        self.world: Optional[WorldState] = None
        self.last_record: Optional[WelfareRecord] = None

    def _classify(self) -> int:
        rl = self.config.rl
        return classify_state(self.world, rl.awareness_threshold, rl.supply_threshold).index

    def reset(self) -> int:
        episode = self.stream + self.stride * self.worlds_drawn
        self.worlds_drawn += 1
        self.world = build_world(self.config, self.seed, episode, government=True)
        self.world.t = 0
        market_phase(self.world)
        return self._classify()

    def step(self, action: int):
        world = self.world
        world.log = StepLog()
        effects = intervention_phase(world, action)
        done = world.t + 1 >= self.config.env.T
        if not done:
            world.t += 1
            market_phase(world)
        rec = welfare_record(action, effects, world.log, self.config.government)
        self.last_record = rec
        return self._classify(), rec.mvpf, done


class TabularMDP:
    """Finite MDP with explicit transition probabilities and rewards.

    ``P[s, a]`` is a distribution over next states and ``R[s, a]`` the
    reward. Runs forever from ``start``; ``done`` is always False.
    """

    def __init__(self, P, R, start: int = 0, seed: int = 0):
        self.P = np.asarray(P, dtype=float)
        self.R = np.asarray(R, dtype=float)
        self.n_states, self.n_actions = self.R.shape
        if self.P.shape != (self.n_states, self.n_actions, self.n_states):
            raise ValueError("P must have shape (states, actions, states)")
        self.start = start
        self.rng = np.random.default_rng(seed)
        self._cdf = np.cumsum(self.P, axis=2)
        self.state = start

    def reset(self) -> int:
        self.state = self.start
        return self.state

    def step(self, action: int):
        s, a = self.state, int(action)
        row = self.P[s, a]
        if np.count_nonzero(row) == 1:
            nxt = int(np.flatnonzero(row)[0])
        else:
            nxt = int(np.searchsorted(self._cdf[s, a], self.rng.random() * self._cdf[s, a, -1], side="right"))
        self.state = nxt
        return nxt, float(self.R[s, a]), False


def value_iteration(P, R, delta: float, tol: float = 1e-13, max_iter: int = 100000) -> np.ndarray:
    """Optimal action values of a finite MDP by repeated Bellman backups."""
    P = np.asarray(P, dtype=float)
    R = np.asarray(R, dtype=float)
    q = np.zeros_like(R)
    for _ in range(max_iter):
        new = R + delta * P @ q.max(axis=1)
        if np.max(np.abs(new - q)) < tol:
            return new
        q = new
    return q


# ------------------------------------------------------------------ training

@dataclass
class TrainingLog:
    epoch_max_delta: list = field(default_factory=list)
    epoch_mean_reward: list = field(default_factory=list)
    action_counts: np.ndarray = field(default_factory=lambda: np.zeros(N_ACTIONS, dtype=np.int64))
    state_counts: np.ndarray = field(default_factory=lambda: np.zeros(N_STATES, dtype=np.int64))


def q_learning(envs: Sequence, training: RLConfig, table: Optional[QTable] = None,
               on_step: Optional[Callable] = None) -> tuple[QTable, TrainingLog]:
    """Run ``training.episodes`` decisions spread over ``envs``.

    With one environment this is classic sequential Q-learning. With k
    environments each round lets every copy act on a frozen snapshot of the
    table; the k updates are then applied in environment order.
    """
    envs = list(envs)
    if not envs:
        raise ValueError("need at least one environment")
    n_s, n_a = envs[0].n_states, envs[0].n_actions
    table = table or QTable.zeros(n_s, n_a)
    log = TrainingLog(action_counts=np.zeros(n_a, dtype=np.int64),
                      state_counts=np.zeros(n_s, dtype=np.int64))
    rng = np.random.default_rng(np.random.SeedSequence(training.seed, spawn_key=(0x51,)))
    if training.episodes <= 0:
        return table, log

    states = [env.reset() for env in envs]
    epoch_delta, epoch_reward, epoch_n = 0.0, 0.0, 0
    i = 0
    k = len(envs)
    while i < training.episodes:
        batch = min(k, training.episodes - i)
        snapshot = table.q.copy() if k > 1 else table.q
        moves = []
        for j in range(batch):
            eps = epsilon_at(i + j, training)
            a = select_action(snapshot, states[j], eps, rng)
            s_next, reward, done = envs[j].step(a)
            moves.append((states[j], a, reward, s_next))
            states[j] = envs[j].reset() if done else s_next
        for s, a, reward, s_next in moves:
            # truncation at the world horizon still bootstraps from s_next
            d = q_update(table, s, a, reward, s_next, training.eta, training.delta,
                         training.literal_update)
            log.action_counts[a] += 1
            log.state_counts[s] += 1
            epoch_delta = max(epoch_delta, d)
            epoch_reward += reward
            epoch_n += 1
            if on_step is not None:
                on_step(s, a, reward, s_next)
            if epoch_n == training.epoch_length:
                log.epoch_max_delta.append(epoch_delta)
                log.epoch_mean_reward.append(epoch_reward / epoch_n)
                epoch_delta, epoch_reward, epoch_n = 0.0, 0.0, 0
        i += batch
    if epoch_n:
        log.epoch_max_delta.append(epoch_delta)
        log.epoch_mean_reward.append(epoch_reward / epoch_n)
    return table, log


def train(config: ScenarioConfig, training: Optional[RLConfig] = None) -> tuple[QTable, TrainingLog]:
    """Learn intervention values on the simulated market."""
    config = validate(config)
    training = training or config.rl
    k = max(int(training.parallel_envs), 1)
    envs = [CatastropheEnv(config, stream=j, stride=k) for j in range(k)]
    table = QTable.zeros(fingerprint=config.fingerprint())
    table, log = q_learning(envs, training, table)
    table.meta = {
        "episodes": int(training.episodes),
        "eta": float(training.eta),
        "delta": float(training.delta),
        "seed": int(training.seed),
        "env_seed": int(config.env.seed),
        "parallel_envs": k,
        "literal_update": bool(training.literal_update),
    }
    return table, log


def greedy_policy(table: QTable, awareness_threshold: float = 0.5,
                  supply_threshold: float = 0.5) -> Callable[[WorldState], int]:
    def policy(world: WorldState) -> int:
        s = classify_state(world, awareness_threshold, supply_threshold).index
        return int(np.argmax(table.q[s]))
    return policy


def evaluate_policy(config: ScenarioConfig, table: QTable, decisions: int = 1000,
                    seed: Optional[int] = None) -> dict:
    """Follow the greedy policy and average the MVPF it earns in each state.

    Returns ``{state index: (visits, mean reward, action)}`` for visited states.
    """
    config = validate(config)
    if table.fingerprint and table.fingerprint != config.fingerprint():
        raise ValueError("q-table was trained under a different configuration")
    env = CatastropheEnv(config, seed=seed, stream=1 << 20)
    s = env.reset()
    sums = np.zeros(N_STATES)
    counts = np.zeros(N_STATES, dtype=np.int64)
    for _ in range(decisions):
        a = int(np.argmax(table.q[s]))
        s_next, reward, done = env.step(a)
        sums[s] += reward
        counts[s] += 1
        s = env.reset() if done else s_next
    return {int(i): (int(counts[i]), float(sums[i] / counts[i]), int(np.argmax(table.q[i])))
            for i in np.flatnonzero(counts)}
