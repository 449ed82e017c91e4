"""Market observables and automated checks of the six stylized facts.

Fact checks work on a finished no-government trace:

1. terminal coverage below a threshold;
2. coverage in the window after a catastrophe exceeds the window before;
3. most post-catastrophe buyers let their cover lapse within ``lapse_steps``;
4. the mean quoted premium rate rises in the step after a catastrophe;
5. at least one insurer exits within ``exit_window`` steps of a catastrophe;
6. at some step a household values cover (pmax > 0) but every quote is higher.

Facts 2 to 4 are judged per catastrophe; a fact holds when it holds for at
least half of the catastrophes whose windows can be evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def coverage_rate(world_or_pop, insured=None) -> float:
    """Insured share of total expected catastrophe loss."""
    if insured is None:
        pop = getattr(world_or_pop, "pop", world_or_pop)
        exposure, insured = pop.exposure, pop.insured
    else:
        exposure = np.asarray(world_or_pop, dtype=float)
        insured = np.asarray(insured, dtype=bool)
    total = float(exposure.sum())
    if total <= 0:
        return 0.0
    return float(exposure[insured].sum() / total)


def gini_index(wealths) -> float:
    w = np.sort(np.asarray(wealths, dtype=float))
    if w.size == 0:
        raise ValueError("gini of an empty population is undefined")
    if np.any(w < 0):
        raise ValueError("wealth must be non-negative")
    total = w.sum()
    if total <= 0:
        return 0.0
    n = w.size
    # sum_i sum_j |w_i - w_j| = 2 * sum_i (2i - n - 1) w_(i) for sorted w
    ranks = np.arange(1, n + 1)
    return float(np.sum((2 * ranks - n - 1) * w) / (n * total))


@dataclass
class StylizedFactReport:
    verdicts: dict = field(default_factory=dict)  # fact number -> True/False/None (not applicable)
    peak_coverage: float = 0.0
    terminal_coverage: float = 0.0
    coverage_deltas: list = field(default_factory=list)
    lapse_times: list = field(default_factory=list)
    premium_deltas: list = field(default_factory=list)
    exits_after: list = field(default_factory=list)
    unaffordable_max: int = 0

    def summary(self) -> str:
        def show(v):
            return "n/a" if v is None else ("true" if v else "false")
        return ", ".join(f"fact {k}: {show(v)}" for k, v in sorted(self.verdicts.items()))


def _majority(flags: list) -> Optional[bool]:
    if not flags:
        return None
    return sum(flags) * 2 >= len(flags)


def check_stylized_facts(trace, terminal_threshold: float = 0.05, window: int = 3,
                         lapse_steps: int = 10, exit_window: int = 3) -> StylizedFactReport:
    cov = np.asarray(trace.coverage, dtype=float)
    cat = np.asarray(trace.catastrophe, dtype=bool)
    insured = np.asarray(trace.insured, dtype=bool)
    quotes = np.asarray(trace.mean_quote_rate, dtype=float)
    exits = np.asarray(trace.exits)
    T = cov.size
    rep = StylizedFactReport(peak_coverage=float(cov.max()), terminal_coverage=float(cov[-1]),
                             unaffordable_max=int(np.max(trace.unaffordable)))
    rep.verdicts[1] = bool(cov[-1] < terminal_threshold)
    rep.verdicts[6] = bool(np.any(np.asarray(trace.unaffordable) > 0))
    cats = np.flatnonzero(cat)
    if cats.size == 0:
        for k in (2, 3, 4, 5):
            rep.verdicts[k] = None
        return rep

    fact2, fact4 = [], []
    for c in cats:
        before = cov[max(c - window, 0):c]
        after = cov[c:c + window]
        if before.size and after.size:
            delta = float(after.mean() - before.mean())
            rep.coverage_deltas.append(delta)
            fact2.append(delta > 0)
        if c + 1 < T and np.isfinite(quotes[c]) and np.isfinite(quotes[c + 1]):
            d = float(quotes[c + 1] - quotes[c])
            rep.premium_deltas.append(d)
            fact4.append(d > 0)
        n_exit = int(exits[c:c + exit_window + 1].sum())
        rep.exits_after.append(n_exit)

    # fact 3: households that buy right after a catastrophe, and how long they keep cover
    for idx, c in enumerate(cats):
        nxt = cats[idx + 1] if idx + 1 < cats.size else T
        prior = insured[c - 1] if c > 0 else np.zeros(insured.shape[1], dtype=bool)
        stop = min(c + window, nxt)
        for i in np.flatnonzero(~prior):
            bought = np.flatnonzero(insured[c:stop, i])
            if bought.size == 0:
                continue
            first = c + int(bought[0])
            lapse = np.flatnonzero(~insured[first:nxt, i])
            if lapse.size:
                rep.lapse_times.append(float(lapse[0]))
            elif nxt - first > lapse_steps:
                rep.lapse_times.append(float("inf"))

    rep.verdicts[2] = _majority(fact2)
    rep.verdicts[3] = (bool(np.median(rep.lapse_times) <= lapse_steps)
                       if rep.lapse_times else None)
    rep.verdicts[4] = _majority(fact4)
    rep.verdicts[5] = bool(sum(rep.exits_after) > 0)
    return rep
