"""Command-line entry points: single runs, suites, and rule re-printing.

A config file in ``key=value`` form can preset any engine constant
(initial_energy, learning_rate, fisher_decay, lambda_c, lambda_e,
genesis_cost, wedge_cost, reward_correct, penalty_wrong, energy_decay,
structural_phase_steps, max_structural_moves, max_rules, min_positives,
min_negatives, cooldown); explicit command-line flags override file
values.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import EngineConfig
from .harness import (
    RuleLine,
    RunConfig,
    export_rules,
    format_rule,
    load_jsonl,
    run,
    suite,
    write_run_files,
)

CONFIG_KEYS = {
    "initial_energy": ("engine", "initial_energy", float),
    "energy_decay": ("engine", "energy_decay", float),
    "reward_correct": ("engine", "reward_correct", float),
    "penalty_wrong": ("engine", "penalty_wrong", float),
    "genesis_cost": ("engine", "genesis_cost", float),
    "wedge_cost": ("engine", "wedge_cost", float),
    "lambda_c": ("engine", "complexity_weight", float),
    "lambda_e": ("engine", "energy_weight", float),
    "structural_phase_steps": ("engine", "structural_phase_steps", float),
    "max_structural_moves": ("engine", "max_structural_moves", float),
    "max_rules": ("engine", "max_rules", int),
    "min_positives": ("engine", "min_positives", int),
    "min_negatives": ("engine", "min_negatives", int),
    "cooldown": ("engine", "cooldown", int),
    "learning_rate": ("natgrad", "learning_rate", float),
    "fisher_decay": ("natgrad", "fisher_decay", float),
    "epsilon": ("natgrad", "epsilon", float),
    "fisher_exponent": ("natgrad", "fisher_exponent", float),
}


def parse_config_file(path) -> dict[str, float]:
    values = {}
    for line_num, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_num}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{line_num}: unknown configuration key {key!r}")
        values[key] = value.strip()
    return values


def build_engine_config(file_values: dict) -> EngineConfig:
    engine = EngineConfig()
    for key, raw in file_values.items():
        target, attr, cast = CONFIG_KEYS[key]
        obj = engine if target == "engine" else engine.natgrad
        setattr(obj, attr, cast(raw))
    return engine


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=20)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument(
        "--no-natgrad", action="store_true", help="plain gradient step ablation"
    )
    parser.add_argument("--lambda-c", type=float, default=None, help="complexity weight")
    parser.add_argument("--lambda-e", type=float, default=None, help="energy cost weight")
    parser.add_argument("--cooldown", type=int, default=None)


def _run_config(args, dataset: str, regime: str, seed: int) -> RunConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    engine = build_engine_config(file_values)
    if args.lambda_c is not None:
        engine.complexity_weight = args.lambda_c
    if args.lambda_e is not None:
        engine.energy_weight = args.lambda_e
    if args.cooldown is not None:
        engine.cooldown = args.cooldown
    return RunConfig(
        dataset=dataset,
        regime=regime,
        seed=seed,
        epochs=args.epochs,
        engine=engine,
        no_natural_gradient=args.no_natgrad,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="distinction-engine",
        description="energy-budgeted structural rule learner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="single experiment")
    run_parser.add_argument("--dataset", default="iris")
    run_parser.add_argument("--regime", default="B", choices=("A", "B", "C"))
    run_parser.add_argument("--seed", type=int, default=0)
    _add_common(run_parser)

    suite_parser = sub.add_parser("suite", help="datasets x regimes x seeds")
    suite_parser.add_argument("--datasets", default="iris")
    suite_parser.add_argument("--regimes", default="B")
    suite_parser.add_argument("--seeds", type=int, default=10)
    _add_common(suite_parser)

    rules_parser = sub.add_parser("rules", help="re-print rules from a trajectory file")
    rules_parser.add_argument("--from", dest="source", required=True)

    args = parser.parse_args(argv)

    if args.command == "run":
        config = _run_config(args, args.dataset, args.regime, args.seed)
        record = run(config)
        if args.out:
            stem = f"{args.dataset}_{args.regime}_seed{args.seed}"
            write_run_files(record, args.out, stem)
        print(
            f"{record.dataset} regime {config.regime} seed {config.seed}: "
            f"test accuracy {record.test_accuracy:.3f}, "
            f"structural moves {record.structural_moves}, "
            f"freeze step {record.freeze_step}, "
            f"final energy {record.final_energy:.1f}"
        )
        print(export_rules(record))
        return 0

    if args.command == "suite":
        if not args.out:
            parser.error("suite requires --out")
        datasets = [d.strip() for d in args.datasets.split(",") if d.strip()]
        regimes = [r.strip() for r in args.regimes.split(",") if r.strip()]
        base = _run_config(args, datasets[0], regimes[0], 0)
        suite(datasets, regimes, args.seeds, args.out, epochs=args.epochs, base=base)
        return 0

    if args.command == "rules":
        payload = load_jsonl(args.source)
        for rule in payload["final"]["rules"]:
            print(format_rule(RuleLine(**rule)))
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
