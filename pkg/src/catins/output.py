"""CSV writers for simulation traces, fact reports and plot data.

Every writer formats floats with ``repr`` and emits rows in a fixed order,
so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .env import EpisodeTrace
from .government import Intervention
from .metrics import StylizedFactReport
from .rl import N_STATES, NAMED_STATES, MarketStateId, QTable, extract_policy

STEP_COLUMNS = (
    "t", "catastrophe", "coverage", "gini", "mean_quote_rate", "active_insurers", "exits",
    "entries", "unaffordable", "intervention", "state", "reward", "wtp", "g_net",
    "treasury", "debt",
)
HOUSEHOLD_COLUMNS = ("t", "household", "wealth", "alpha", "pmax", "best_quote", "insured")
INSURER_COLUMNS = ("t", "insurer", "p", "loading", "premium_rate", "rho", "gamma", "epsilon",
                   "sales", "assets")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def step_rows(trace: EpisodeTrace, prefix: Sequence = ()) -> list:
    rows = []
    for t in range(trace.T):
        rows.append((*prefix, t, trace.catastrophe[t], trace.coverage[t], trace.gini[t],
                     trace.mean_quote_rate[t], trace.active_insurers[t], trace.exits[t],
                     trace.entries[t], trace.unaffordable[t], trace.interventions[t],
                     trace.states[t], trace.rewards[t], trace.wtp[t], trace.g_net[t],
                     trace.treasury[t], trace.debt[t]))
    return rows


def write_trace(trace: EpisodeTrace, path, prefix_header: Sequence[str] = (),
                prefix: Sequence = ()) -> Path:
    return write_csv(path, (*prefix_header, *STEP_COLUMNS), step_rows(trace, prefix))


def household_rows(trace: EpisodeTrace, households: Sequence[int] | None = None,
                   prefix: Sequence = ()) -> list:
    ids = range(trace.wealth.shape[1]) if households is None else households
    return [(*prefix, t, i, trace.wealth[t, i], trace.alpha[t, i], trace.pmax[t, i],
             trace.best_quote[t, i], trace.insured[t, i])
            for t in range(trace.T) for i in ids]


def write_households(trace: EpisodeTrace, path, households=None) -> Path:
    return write_csv(path, HOUSEHOLD_COLUMNS, household_rows(trace, households))


def write_insurers(trace: EpisodeTrace, path) -> Path:
    return write_csv(path, INSURER_COLUMNS, trace.insurer_rows)


def write_fact_reports(reports: Sequence[tuple[int, StylizedFactReport]], path) -> Path:
    header = ("seed", "catastrophes", "peak_coverage", "terminal_coverage",
              *(f"fact_{k}" for k in range(1, 7)))
    rows = []
    for seed, rep in reports:
        verdicts = ["na" if rep.verdicts.get(k) is None else int(rep.verdicts[k]) for k in range(1, 7)]
        rows.append((seed, len(rep.premium_deltas) if rep.verdicts.get(2) is not None else 0,
                     rep.peak_coverage, rep.terminal_coverage, *verdicts))
    return write_csv(path, header, rows)


def render_qtable(table: QTable, named_only: bool = True) -> str:
    """Text grid of q-values; ``*`` marks the best action and ``+`` the runner-up."""
    policy = extract_policy(table)
    names = [a.name for a in Intervention][: table.q.shape[1]]
    width = max(12, max(len(n) for n in names) + 2)
    lines = ["state".ljust(34) + "".join(n.rjust(width) for n in names)]
    if named_only:
        cells = [(name, MarketStateId(*cell).index) for name, cell in NAMED_STATES.items()]
    else:
        cells = [(MarketStateId.from_index(s).label, s) for s in range(min(N_STATES, table.q.shape[0]))]
    for label, s in cells:
        best, second = policy[s]
        parts = []
        for a in range(table.q.shape[1]):
            mark = "*" if a == best else ("+" if a == second else " ")
            parts.append(f"{table.q[s, a]:.3f}{mark}".rjust(width))
        lines.append(f"{label} [{s}]".ljust(34) + "".join(parts))
    lines.append("* best action, + second best")
    return "\n".join(lines) + "\n"
