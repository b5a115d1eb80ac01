"""Experiment runner: regimes, seeds, ablations, diagnostics, rule export.

A run streams the stratified, standardized train split through an
engine for a number of epochs (per-epoch seeded reshuffle), measures
test accuracy after each epoch with learning disabled, and records a
step-level log sufficient to replay the energy ledger and the
diagnostics.  The suite fans runs out over datasets x regimes x seeds
and writes JSON-lines trajectories plus a CSV summary.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Split, load_dataset, standardize, stratified_split
from .engine import (
    STRUCTURAL_ACTIONS,
    EngineConfig,
    EngineState,
    infer,
    new_state,
    step,
    total_complexity,
)
from .forms import alias, render
from .hypotheses import tropical_cost

REGIMES = ("A", "B", "C")

_ENGINE_STREAM = 1
_SHUFFLE_STREAM = 2


@dataclass
class RunConfig:
    """One experiment: dataset, regime, seed, epochs, and ablation switches."""

    dataset: str = "iris"
    regime: str = "B"
    seed: int = 0
    epochs: int = 20
    train_fraction: float = 0.7
    engine: EngineConfig = field(default_factory=EngineConfig)
    no_natural_gradient: bool = False
    no_complexity: bool = False
    no_energy_cost: bool = False

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")


def effective_engine_config(config: RunConfig) -> EngineConfig:
    """Engine constants after applying the regime and ablation switches.

    Regime A removes the schedule caps, B keeps them, C forbids
    scored structural moves outright (mandatory class coverage remains).
    """
    engine = replace(config.engine, natgrad=replace(config.engine.natgrad))
    if config.regime == "A":
        engine.structural_phase_steps = math.inf
        engine.max_structural_moves = math.inf
    elif config.regime == "C":
        engine.max_structural_moves = 0
    if config.no_natural_gradient:
        engine.natgrad.preconditioned = False
    if config.no_complexity:
        engine.complexity_weight = 0.0
    if config.no_energy_cost:
        engine.energy_weight = 0.0
    return engine


@dataclass
class StepLog:
    t: int
    action: str
    energy: float
    complexity: float
    n_hyp: int
    correct: bool
    hyp_ids: tuple[int, ...]


@dataclass
class EpochLog:
    epoch: int
    train_accuracy: float
    test_accuracy: float


@dataclass
class RuleLine:
    id: int
    outcome: int
    label: str
    text: str
    alias: str | None
    reliability: float
    cost: float


@dataclass
class RunRecord:
    config: dict
    dataset: str
    label_names: tuple[str, ...]
    notes: tuple[str, ...]
    steps: list[StepLog]
    epochs: list[EpochLog]
    rules: list[RuleLine]
    test_accuracy: float
    freeze_step: int | None
    structural_moves: int
    final_energy: float
    final_complexity: float

    def jsonl_lines(self):
        """Serialize as JSON lines: header, one object per step, final block."""
        yield json.dumps(
            {
                "dataset": self.dataset,
                "label_names": list(self.label_names),
                "notes": list(self.notes),
                "config": self.config,
            },
            sort_keys=True,
        )
        for s in self.steps:
            yield json.dumps(
                {
                    "t": s.t,
                    "action": s.action,
                    "E": s.energy,
                    "C": s.complexity,
                    "n_hyp": s.n_hyp,
                    "correct": s.correct,
                },
                sort_keys=True,
            )
        yield json.dumps({"final": self.final_block()}, sort_keys=True)

    def final_block(self) -> dict:
        return {
            "test_accuracy": self.test_accuracy,
            "freeze_step": self.freeze_step,
            "structural_moves": self.structural_moves,
            "final_energy": self.final_energy,
            "final_complexity": self.final_complexity,
            "epochs": [asdict(e) for e in self.epochs],
            "rules": [asdict(r) for r in self.rules],
        }


def evaluate_accuracy(state: EngineState, X, y) -> float:
    """Inference-only accuracy; never mutates the engine."""
    hits = 0
    for row, label in zip(X, y):
        hits += infer(state, row, cache={}).prediction == int(label)
    return hits / len(y)


def _rule_snapshot(state: EngineState, label_names) -> list[RuleLine]:
    rules = []
    for h in state.hypotheses:
        text = render(h.form, state.registry)
        nice = alias(h.form, state.registry)
        rules.append(
            RuleLine(
                id=h.id,
                outcome=h.outcome,
                label=label_names[h.outcome],
                text=text,
                alias=nice if nice != text else None,
                reliability=h.reliability,
                cost=tropical_cost(h, state.registry),
            )
        )
    rules.sort(key=lambda r: r.id)
    return rules


def run(config: RunConfig, observer=None) -> RunRecord:
    """Execute one experiment and return its complete record.

    ``observer`` may define ``before_step(state, x, y)`` and
    ``after_step(state, x, y, obs)``; both hooks see the live state and
    are intended for replay-oracle tests.
    """
    dataset = load_dataset(config.dataset)
    split = standardize(stratified_split(dataset, config.train_fraction, config.seed))
    engine_config = effective_engine_config(config)
    state = new_state(
        split.train.dim,
        engine_config,
        np.random.default_rng(np.random.SeedSequence([config.seed, _ENGINE_STREAM])),
    )
    shuffle_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, _SHUFFLE_STREAM])
    )

    steps: list[StepLog] = []
    epochs: list[EpochLog] = []
    notes = []
    if config.regime == "C":
        notes.append(
            "regime C permits mandatory coverage genesis despite "
            "max_structural_moves=0; without it the engine could never "
            "predict unseen classes"
        )

    X_train, y_train = split.train.X, split.train.y
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(y_train))
        epoch_hits = 0
        for i in order:
            x, y = X_train[i], int(y_train[i])
            n_before = len(state.hypotheses)
            if observer is not None:
                observer.before_step(state, x, y)
            obs = step(state, x, y)
            if observer is not None:
                observer.after_step(state, x, y, obs)
            correct = bool(n_before) and obs.prediction == y
            epoch_hits += correct
            steps.append(
                StepLog(
                    t=state.step_count,
                    action=obs.action,
                    energy=state.energy,
                    complexity=total_complexity(state.hypotheses, state.registry),
                    n_hyp=len(state.hypotheses),
                    correct=correct,
                    hyp_ids=tuple(h.id for h in state.hypotheses),
                )
            )
        epochs.append(
            EpochLog(
                epoch=epoch,
                train_accuracy=epoch_hits / len(y_train),
                test_accuracy=evaluate_accuracy(state, split.test.X, split.test.y),
            )
        )

    config_dict = asdict(config)
    config_dict["engine"] = asdict(engine_config)
    return RunRecord(
        config=config_dict,
        dataset=dataset.name,
        label_names=dataset.label_names,
        notes=tuple(notes),
        steps=steps,
        epochs=epochs,
        rules=_rule_snapshot(state, dataset.label_names),
        test_accuracy=epochs[-1].test_accuracy,
        freeze_step=state.freeze_step,
        structural_moves=state.structural_moves,
        final_energy=state.energy,
        final_complexity=total_complexity(state.hypotheses, state.registry),
    )


def transition_rate(record: RunRecord, window: int) -> list[float]:
    """Windowed frequency of structural actions at every step.

    The rate at step t counts structural actions over steps [t-window, t]
    (clipped to the start of the log) divided by the window size.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    structural = [1 if s.action in STRUCTURAL_ACTIONS else 0 for s in record.steps]
    prefix = [0]
    for flag in structural:
        prefix.append(prefix[-1] + flag)
    rates = []
    for t in range(len(structural)):
        lo = max(0, t - window)
        rates.append((prefix[t + 1] - prefix[lo]) / window)
    return rates


def survival_rate(record: RunRecord, lag: int) -> list[float]:
    """Fraction of hypothesis ids at each step that already existed ``lag``
    steps earlier; the undefined prefix is omitted."""
    if lag < 1:
        raise ValueError("lag must be at least 1")
    rates = []
    for t in range(lag, len(record.steps)):
        old = set(record.steps[t - lag].hyp_ids)
        if not old:
            continue
        now = set(record.steps[t].hyp_ids)
        rates.append(len(now & old) / len(old))
    return rates


def format_rule(rule: RuleLine) -> str:
    shown = rule.text if rule.alias is None else f"{rule.text} :: {rule.alias}"
    return (
        f"H{rule.id} [class={rule.label}] {shown} "
        f"(r={rule.reliability:.2f}, cost={rule.cost:.2f})"
    )


def export_rules(record: RunRecord) -> str:
    """One deterministic line per final hypothesis, ordered by id."""
    return "\n".join(format_rule(r) for r in record.rules)


def running_train_accuracy(record: RunRecord) -> list[float]:
    hits = 0
    out = []
    for i, s in enumerate(record.steps, start=1):
        hits += s.correct
        out.append(hits / i)
    return out


def write_run_files(record: RunRecord, out_dir, stem: str) -> None:
    """Write the JSONL trajectory and the phase-trajectory CSV for one run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / f"{stem}.jsonl").open("w", encoding="utf-8") as handle:
        for line in record.jsonl_lines():
            handle.write(line + "\n")
    running = running_train_accuracy(record)
    with (out_dir / f"phase_{stem}.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "complexity", "energy", "train_accuracy"])
        for s, acc in zip(record.steps, running):
            writer.writerow([s.t, repr(s.complexity), repr(s.energy), repr(acc)])


SUMMARY_FIELDS = (
    "dataset",
    "regime",
    "seed",
    "test_accuracy",
    "structural_moves",
    "freeze_step",
    "final_energy",
    "final_complexity",
)


def suite(
    datasets,
    regimes,
    seeds: int,
    out_dir,
    epochs: int = 20,
    base: RunConfig | None = None,
) -> list[dict]:
    """Run the cross product of datasets, regimes, and seeds.

    Writes one JSONL trajectory and one phase CSV per run plus a
    ``summary.csv``, prints the mean and standard deviation of test
    accuracy per (dataset, regime) cell, and returns the summary rows.
    """
    base = base if base is not None else RunConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[dict] = []
    for dataset in datasets:
        for regime in regimes:
            for seed in range(seeds):
                config = replace(
                    base, dataset=dataset, regime=regime, seed=seed, epochs=epochs
                )
                record = run(config)
                stem = f"{dataset}_{regime}_seed{seed}"
                write_run_files(record, out_dir, stem)
                rows.append(
                    {
                        "dataset": dataset,
                        "regime": regime,
                        "seed": seed,
                        "test_accuracy": record.test_accuracy,
                        "structural_moves": record.structural_moves,
                        "freeze_step": record.freeze_step,
                        "final_energy": record.final_energy,
                        "final_complexity": record.final_complexity,
                    }
                )
    with (out_dir / "summary.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_FIELDS)
        for row in rows:
            writer.writerow(
                [
                    row["dataset"],
                    row["regime"],
                    row["seed"],
                    repr(row["test_accuracy"]),
                    row["structural_moves"],
                    "" if row["freeze_step"] is None else row["freeze_step"],
                    repr(row["final_energy"]),
                    repr(row["final_complexity"]),
                ]
            )
    for dataset in datasets:
        for regime in regimes:
            cell = [
                r["test_accuracy"]
                for r in rows
                if r["dataset"] == dataset and r["regime"] == regime
            ]
            spread = statistics.pstdev(cell) if len(cell) > 1 else 0.0
            print(
                f"{dataset} regime {regime}: "
                f"{statistics.mean(cell):.3f} ± {spread:.3f} over {len(cell)} seed(s)"
            )
    return rows


def load_jsonl(path) -> dict:
    """Parse a run trajectory file into header, step dicts, and final block."""
    header = None
    final = None
    steps = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            obj = json.loads(line)
            if "final" in obj:
                final = obj["final"]
            elif "t" in obj:
                steps.append(obj)
            else:
                header = obj
    if header is None or final is None:
        raise ValueError(f"{path}: missing header or final block")
    return {"header": header, "steps": steps, "final": final}
