"""Command-line entry points.

Subcommands: simulate, train, evaluate, stylized-facts, export-plots and
print-qtable. ``CATINS_SEED`` and ``CATINS_OUTPUT_DIR`` override the
default seed and output directory; explicit flags win over both.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ScenarioConfig, load_scenario, validate, with_overrides
from .env import run_episode
from .government import Intervention
from .metrics import check_stylized_facts
from .output import (
    household_rows, render_qtable, step_rows, write_csv, write_fact_reports, write_households,
    write_insurers, write_trace, HOUSEHOLD_COLUMNS, INSURER_COLUMNS, STEP_COLUMNS,
)
from .rl import MarketStateId, QTable, evaluate_policy, greedy_policy, train

log = logging.getLogger("catins")

SEED_ENV = "CATINS_SEED"
OUTPUT_ENV = "CATINS_OUTPUT_DIR"


def _scenario(args) -> ScenarioConfig:
    cfg = load_scenario(args.config) if args.config else ScenarioConfig()
    seed = args.seed
    if seed is None and os.environ.get(SEED_ENV):
        seed = int(os.environ[SEED_ENV])
    if seed is not None:
        cfg = with_overrides(cfg, env={"seed": seed}, rl={"seed": seed})
    return validate(cfg)


def _outdir(args) -> Path:
    out = args.output_dir or os.environ.get(OUTPUT_ENV) or "results"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _policy_source(args, cfg):
    if args.no_government or (args.policy is None and args.qtable is None):
        return None
    if args.qtable:
        table = QTable.load(args.qtable)
        if table.fingerprint and table.fingerprint != cfg.fingerprint():
            raise ConfigError("q-table was trained under a different configuration")
        return greedy_policy(table, cfg.rl.awareness_threshold, cfg.rl.supply_threshold)
    codes = []
    for token in args.policy.split(","):
        token = token.strip()
        codes.append(int(Intervention[token]) if token in Intervention.__members__ else int(token))
    return codes


def _classifier(cfg):
    from .rl import classify_state
    return lambda world: classify_state(world, cfg.rl.awareness_threshold,
                                        cfg.rl.supply_threshold).index


def cmd_simulate(args) -> int:
    cfg = _scenario(args)
    out = _outdir(args)
    source = _policy_source(args, cfg)
    rows, hh, ins = [], [], []
    for ep in range(args.episodes):
        trace = run_episode(cfg, source, episode=ep, classifier=_classifier(cfg))
        rows += step_rows(trace, (ep,))
        hh += [(ep, *r) for r in household_rows(trace)]
        ins += [(ep, *r) for r in trace.insurer_rows]
        log.info("episode %d: peak coverage %.4f, catastrophes %d", ep, trace.coverage.max(),
                 int(trace.catastrophe.sum()))
    seed = cfg.env.seed
    write_csv(out / f"trace_seed{seed}.csv", ("episode", *STEP_COLUMNS), rows)
    write_csv(out / f"households_seed{seed}.csv", ("episode", *HOUSEHOLD_COLUMNS), hh)
    write_csv(out / f"insurers_seed{seed}.csv", ("episode", *INSURER_COLUMNS), ins)
    print(f"wrote {args.episodes} episode(s) to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _scenario(args)
    rl = {}
    if args.episodes is not None:
        rl["episodes"] = args.episodes
    if args.parallel_envs is not None:
        rl["parallel_envs"] = args.parallel_envs
    if args.literal_update:
        rl["literal_update"] = True
    cfg = with_overrides(cfg, rl=rl) if rl else cfg
    out = _outdir(args)
    table, tlog = train(cfg)
    path = Path(args.qtable) if args.qtable else out / f"qtable_seed{cfg.rl.seed}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    table.save(path)
    write_csv(out / f"training_seed{cfg.rl.seed}.csv", ("epoch", "max_abs_delta", "mean_reward"),
              [(i, d, r) for i, (d, r) in enumerate(zip(tlog.epoch_max_delta, tlog.epoch_mean_reward))])
    print(f"trained {cfg.rl.episodes} episodes; q-table written to {path}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _scenario(args)
    table = QTable.load(args.qtable)
    try:
        result = evaluate_policy(cfg, table, args.decisions)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _outdir(args)
    rows = []
    for s, (visits, mean_reward, action) in sorted(result.items()):
        label = MarketStateId.from_index(s).label
        rows.append((s, label, Intervention(action).name, visits, mean_reward))
        print(f"{label:<40} {Intervention(action).name:<18} visits={visits:<6} mean MVPF={mean_reward:.4f}")
    write_csv(out / f"evaluation_seed{cfg.env.seed}.csv",
              ("state", "label", "action", "visits", "mean_mvpf"), rows)
    return 0


def cmd_stylized_facts(args) -> int:
    cfg = _scenario(args)
    out = _outdir(args)
    m = cfg.metrics
    reports = []
    base = cfg.env.seed
    for seed in range(base, base + args.seeds):
        trace = run_episode(cfg, None, seed=seed)
        reports.append((seed, check_stylized_facts(trace, m.terminal_coverage, m.window,
                                                   m.lapse_steps, m.exit_window)))
    write_fact_reports(reports, out / f"stylized_facts_seed{base}.csv")
    for k in range(1, 7):
        judged = [r.verdicts[k] for _, r in reports if r.verdicts.get(k) is not None]
        share = float(np.mean(judged)) if judged else float("nan")
        print(f"fact {k}: holds in {sum(judged)}/{len(judged)} applicable seeds ({share:.0%})")
    return 0


def _first_seed(cfg, start: int, want_catastrophe: bool, limit: int = 1000) -> int:
    for seed in range(start, start + limit):
        trace = run_episode(cfg, None, seed=seed)
        if bool(trace.catastrophe.any()) == want_catastrophe:
            return seed
    raise RuntimeError("no matching seed found")


def cmd_export_plots(args) -> int:
    cfg = _scenario(args)
    out = _outdir(args)
    base = cfg.env.seed
    episodes = {"quiet": _first_seed(cfg, base, False), "catastrophe": _first_seed(cfg, base, True)}

    cov_rows, gini_rows, hh_rows, ins_rows = [], [], [], []
    no_ins = with_overrides(cfg, env={"insurance_enabled": False})
    for label, seed in episodes.items():
        trace = run_episode(cfg, None, seed=seed)
        cov_rows += [(label, seed, t, trace.coverage[t], trace.catastrophe[t]) for t in range(trace.T)]
        bare = run_episode(no_ins, None, seed=seed)
        gini_rows += [(label, seed, t, bare.gini[t], bare.catastrophe[t]) for t in range(bare.T)]
        ins_rows += [(label, seed, *r) for r in trace.insurer_rows]
        for i in _showcase_households(trace):
            hh_rows += [(label, seed, *r) for r in household_rows(trace, [i])]

    write_csv(out / "coverage.csv", ("episode", "seed", "t", "coverage", "catastrophe"), cov_rows)
    write_csv(out / "gini.csv", ("episode", "seed", "t", "gini", "catastrophe"), gini_rows)
    write_csv(out / "households.csv", ("episode", "seed", *HOUSEHOLD_COLUMNS), hh_rows)
    write_csv(out / "insurers.csv", ("episode", "seed", *INSURER_COLUMNS), ins_rows)
    print(f"plot data written to {out}")
    return 0


def _showcase_households(trace) -> list[int]:
    """A household that never buys, and the first ones insured at any step."""
    ever = np.flatnonzero(trace.insured.any(axis=0))
    never = np.flatnonzero(~trace.insured.any(axis=0))
    picks = list(never[:1]) + list(ever[:2])
    return sorted(int(i) for i in picks)


def cmd_print_qtable(args) -> int:
    table = QTable.load(args.qtable)
    sys.stdout.write(render_qtable(table, named_only=not args.all_states))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML scenario file (defaults fill anything missing)")
    common.add_argument("--seed", type=int, default=None, help=f"seed (env: {SEED_ENV})")
    common.add_argument("--output-dir", default=None, help=f"output directory (env: {OUTPUT_ENV})")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="catins", description="Catastrophe insurance market simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run episodes and write traces")
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--no-government", action="store_true")
    p.add_argument("--policy", help="comma-separated interventions per step, by name or code")
    p.add_argument("--qtable", help="follow the greedy policy of a trained q-table")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", parents=[common], help="learn intervention values")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--parallel-envs", type=int, default=None)
    p.add_argument("--literal-update", action="store_true",
                   help="leave the reward out of the update target")
    p.add_argument("--qtable", help="where to write the q-table")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score a q-table's greedy policy")
    p.add_argument("--qtable", required=True)
    p.add_argument("--decisions", type=int, default=1000)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stylized-facts", parents=[common], help="check the market regularities")
    p.add_argument("--seeds", type=int, default=50)
    p.set_defaults(func=cmd_stylized_facts)

    p = sub.add_parser("export-plots", parents=[common], help="write CSV data for plots")
    p.set_defaults(func=cmd_export_plots)

    p = sub.add_parser("print-qtable", parents=[common], help="show a q-table grid")
    p.add_argument("--qtable", required=True)
    p.add_argument("--all-states", action="store_true")
    p.set_defaults(func=cmd_print_qtable)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
