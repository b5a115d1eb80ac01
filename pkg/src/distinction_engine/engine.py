"""Online learner coupling structural actions with parametric updates.

Each step runs a fixed pipeline: inference, energy reward, history
append, death check, hard class coverage, preconditioned gradient
update, structural action selection by a local objective, and a freeze
check.  Structural actions (genesis, wedge) spend energy; correct
predictions earn it.  Once frozen, only parameters keep adapting.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .forms import (
    EMPTY_REGISTRY,
    Atom,
    Call,
    Cross,
    Form,
    Registry,
    accumulate_grad,
    complexity,
    eval_soft,
)
from .hypotheses import (
    Hypothesis,
    compress,
    effective_weight,
    record_memory,
    tropical_cost,
    update_reliability,
)
from .manifold import (
    NatGradConfig,
    ParamStore,
    fisher_update,
    fit_separator,
    genesis_atom_init,
    natural_step,
)

NOOP = "noop"
GENESIS = "genesis"
WEDGE = "wedge"
DEATH = "death"
COVERAGE_GENESIS = "coverage-genesis"

STRUCTURAL_ACTIONS = (GENESIS, WEDGE, COVERAGE_GENESIS)


@dataclass
class EngineConfig:
    """Run-time constants; defaults match the benchmark configuration."""

    initial_energy: float = 10_000.0
    energy_decay: float = 1.0
    reward_correct: float = 10.0
    penalty_wrong: float = -10.0
    genesis_cost: float = 5.0
    wedge_cost: float = 8.0
    complexity_weight: float = 0.001
    energy_weight: float = 0.001
    structural_phase_steps: float = 500
    max_structural_moves: float = 20
    max_rules: int = 30
    min_positives: int = 2
    min_negatives: int = 1
    cooldown: int = 0
    reliability_rate: float = 0.1
    loss_floor: float = 1e-12
    ridge: float = 1.0
    memory_cap: int = 64
    natgrad: NatGradConfig = field(default_factory=NatGradConfig)

    def __post_init__(self):
        if self.genesis_cost < 0 or self.wedge_cost < 0:
            raise ValueError("action costs must be non-negative")
        if self.max_rules < 0 or self.cooldown < 0:
            raise ValueError("caps must be non-negative")


@dataclass
class Observation:
    """What one step looked like from outside."""

    prediction: int
    confidence: float
    winner: int | None
    energy_delta: float
    action: str


class InferResult(NamedTuple):
    prediction: int
    confidence: float
    winner: int | None
    logits: dict


@dataclass
class EngineState:
    config: EngineConfig
    params: ParamStore
    rng: np.random.Generator
    hypotheses: list[Hypothesis] = field(default_factory=list)
    energy: float = 0.0
    history: list = field(default_factory=list)
    registry: Registry = EMPTY_REGISTRY
    step_count: int = 0
    structural_moves: int = 0
    frozen: bool = False
    freeze_step: int | None = None
    last_structural_step: int = -(10**9)
    classes_seen: set = field(default_factory=set)
    next_hypothesis_id: int = 0


def new_state(dim: int, config: EngineConfig | None = None, seed=0) -> EngineState:
    """Fresh engine for ``dim``-dimensional inputs.

    ``seed`` may be an int or a ready numpy Generator.
    """
    config = config if config is not None else EngineConfig()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return EngineState(
        config=config, params=ParamStore(dim), rng=rng, energy=config.initial_energy
    )


def _hypothesis_by_id(state: EngineState, hypothesis_id: int) -> Hypothesis:
    for h in state.hypotheses:
        if h.id == hypothesis_id:
            return h
    raise KeyError(f"no hypothesis with id {hypothesis_id}")


def total_complexity(hypotheses, registry: Registry = EMPTY_REGISTRY) -> float:
    return sum(complexity(h.form, registry) for h in hypotheses)


def infer(state: EngineState, x, cache: dict | None = None) -> InferResult:
    """Class prediction plus the tropical winner used for structural decisions.

    Logits are per-class sums of effective-weight-scaled form evaluations;
    classes without hypotheses contribute logit 0.  The winner is the
    cheapest (tropical cost, then id) hypothesis evaluating above 0.5, or
    None when nothing fires.
    """
    x = np.asarray(x, dtype=float)
    classes = sorted(state.classes_seen | {h.outcome for h in state.hypotheses})
    if not classes:
        return InferResult(0, 1.0, None, {})
    logits = {k: 0.0 for k in classes}
    winner = None
    best = None
    for h in state.hypotheses:
        value = eval_soft(h.form, x, state.params, state.registry, cache=cache)
        logits[h.outcome] += effective_weight(h) * value
        if value > 0.5:
            rank = (tropical_cost(h, state.registry), h.id)
            if best is None or rank < best:
                best = rank
                winner = h.id
    u = np.array([logits[k] for k in classes])
    e = np.exp(u - u.max())
    p = e / e.sum()
    idx = int(np.argmax(p))
    return InferResult(classes[idx], float(p[idx]), winner, logits)


def loss_of(
    hypotheses,
    params: ParamStore,
    registry: Registry,
    x,
    y: int,
    known_classes,
    loss_floor: float = 1e-12,
    cache: dict | None = None,
) -> float:
    """Cross-entropy of the label under a candidate hypothesis set.

    When no candidate hypothesis carries the label's class, returns the
    worst-case loss log(#classes + 1) instead.
    """
    classes = sorted(set(known_classes) | {h.outcome for h in hypotheses})
    if not any(h.outcome == y for h in hypotheses):
        return math.log(len(classes) + 1)
    x = np.asarray(x, dtype=float)
    logits = {k: 0.0 for k in classes}
    for h in hypotheses:
        logits[h.outcome] += effective_weight(h) * eval_soft(
            h.form, x, params, registry, cache=cache
        )
    u = np.array([logits[k] for k in classes])
    e = np.exp(u - u.max())
    p = e / e.sum()
    return -math.log(float(p[classes.index(y)]) + loss_floor)


@dataclass
class ActionCandidate:
    """A hypothetical successor: action name, hypothesis set, params, cost."""

    action: str
    hypotheses: list[Hypothesis]
    params: ParamStore
    cost: float
    id_advance: int = 0


def evaluate_J(
    state: EngineState, candidate: ActionCandidate, x, y: int, cache: dict | None = None
) -> float:
    """Local action score: candidate loss + weighted complexity change + weighted cost."""
    cfg = state.config
    loss = loss_of(
        candidate.hypotheses,
        candidate.params,
        state.registry,
        x,
        y,
        state.classes_seen,
        cfg.loss_floor,
        cache=cache,
    )
    delta_c = total_complexity(candidate.hypotheses, state.registry) - total_complexity(
        state.hypotheses, state.registry
    )
    return loss + cfg.complexity_weight * delta_c + cfg.energy_weight * candidate.cost


def _genesis_parts(state: EngineState, x, y: int) -> tuple[np.ndarray, float, Hypothesis]:
    """Draw a fresh atom and hypothesis for the current sample.

    Consumes rng; the caller decides whether to commit the draw.
    """
    w, b = genesis_atom_init(state.rng, x)
    alpha = 1.0 + 0.05 * float(state.rng.random())
    idx = len(state.history) - 1
    hyp = Hypothesis(
        id=state.next_hypothesis_id,
        form=Atom(len(state.params)),
        outcome=int(y),
        reliability=0.5,
        pos_memory=[idx] if idx >= 0 else [],
        neg_memory=[],
        weight=alpha,
    )
    return w, b, hyp


def apply_genesis(state: EngineState, x, y: int) -> int | None:
    """Create a single-atom hypothesis for label ``y`` anchored at ``x``.

    Returns the new hypothesis id, or None if the rule cap blocks it.
    """
    cfg = state.config
    if len(state.hypotheses) >= cfg.max_rules:
        return None
    if state.energy <= 0:
        raise ValueError("genesis requires positive energy")
    w, b, hyp = _genesis_parts(state, x, y)
    state.params.alloc_atom(w, b)
    state.hypotheses.append(hyp)
    state.energy -= cfg.genesis_cost
    state.next_hypothesis_id += 1
    return hyp.id


def _wedge_forms(original: Form, separator: Form) -> tuple[Form, Form]:
    """Shrunk region (original AND separator) and exception region
    (original AND NOT separator)."""
    shrunk = Cross(Call((Cross(original), Cross(separator))))
    exception = Cross(Call((Cross(original), separator)))
    return shrunk, exception


def _wedge_parts(
    state: EngineState, winner: Hypothesis, x, y: int
) -> tuple[np.ndarray, float, Hypothesis, Hypothesis]:
    x = np.asarray(x, dtype=float)
    X_pos = [state.history[i][0] for i in winner.pos_memory]
    if not X_pos:
        X_pos = [x]
    X_neg = [state.history[i][0] for i in winner.neg_memory]
    if not any(np.array_equal(xi, x) for xi in X_neg):
        X_neg.append(x)
    w_sep, b_sep = fit_separator(X_pos, X_neg, state.config.ridge)
    separator = Atom(len(state.params))
    shrunk_form, exception_form = _wedge_forms(winner.form, separator)
    shrunk = Hypothesis(
        id=state.next_hypothesis_id,
        form=shrunk_form,
        outcome=winner.outcome,
        reliability=winner.reliability,
        pos_memory=list(winner.pos_memory),
        neg_memory=list(winner.neg_memory),
        weight=winner.weight,
    )
    idx = len(state.history) - 1
    exception = Hypothesis(
        id=state.next_hypothesis_id + 1,
        form=exception_form,
        outcome=int(y),
        reliability=0.5,
        pos_memory=[idx] if idx >= 0 else [],
        neg_memory=[],
        weight=1.0 + 0.05 * float(state.rng.random()),
    )
    return w_sep, b_sep, shrunk, exception


def _wedge_eligible(state: EngineState, winner: Hypothesis, y: int) -> bool:
    cfg = state.config
    return (
        winner.outcome != y
        and len(winner.pos_memory) >= cfg.min_positives
        and len(winner.neg_memory) >= cfg.min_negatives
        and len(state.hypotheses) < cfg.max_rules
    )


def apply_wedge(state: EngineState, winner_id: int, x, y: int) -> tuple[int, int]:
    """Split a mispredicting winner along a fitted separator.

    The winner is replaced in place by its shrunk version (a new id with
    the winner's outcome, reliability, memory, and weight); an exception
    hypothesis for label ``y`` is appended.  Returns both new ids.
    """
    cfg = state.config
    winner = _hypothesis_by_id(state, winner_id)
    if not _wedge_eligible(state, winner, y):
        raise ValueError("wedge preconditions unmet")
    if state.energy < cfg.wedge_cost:
        raise ValueError("wedge is unaffordable")
    w_sep, b_sep, shrunk, exception = _wedge_parts(state, winner, x, y)
    state.params.alloc_atom(w_sep, b_sep)
    slot = state.hypotheses.index(winner)
    state.hypotheses[slot] = shrunk
    state.hypotheses.append(exception)
    state.energy -= cfg.wedge_cost
    state.next_hypothesis_id += 2
    return shrunk.id, exception.id


def structural_candidates(
    state: EngineState, x, y: int, inference: InferResult | None = None
) -> list[ActionCandidate]:
    """Candidate actions for this sample: noop first, then genesis or wedge.

    Applies the per-action eligibility rules (winner presence, evidence
    thresholds, rule cap) but not the schedule gates, which the step
    function owns.  Building a genesis or wedge candidate consumes rng
    draws whether or not the candidate is committed.
    """
    if inference is None:
        inference = infer(state, x)
    candidates = [
        ActionCandidate(NOOP, state.hypotheses, state.params, 0.0, id_advance=0)
    ]
    cfg = state.config
    if inference.winner is None:
        if len(state.hypotheses) < cfg.max_rules:
            w, b, hyp = _genesis_parts(state, x, y)
            params = state.params.copy()
            params.alloc_atom(w, b)
            candidates.append(
                ActionCandidate(
                    GENESIS,
                    state.hypotheses + [hyp],
                    params,
                    cfg.genesis_cost,
                    id_advance=1,
                )
            )
    else:
        winner = _hypothesis_by_id(state, inference.winner)
        if _wedge_eligible(state, winner, y):
            w_sep, b_sep, shrunk, exception = _wedge_parts(state, winner, x, y)
            params = state.params.copy()
            params.alloc_atom(w_sep, b_sep)
            hyps = [shrunk if h is winner else h for h in state.hypotheses]
            hyps.append(exception)
            candidates.append(
                ActionCandidate(WEDGE, hyps, params, cfg.wedge_cost, id_advance=2)
            )
    return candidates


def _covered(state: EngineState) -> bool:
    outcomes = {h.outcome for h in state.hypotheses}
    return state.classes_seen <= outcomes


def _structural_window_open(state: EngineState) -> bool:
    cfg = state.config
    return (
        not state.frozen
        and state.step_count < cfg.structural_phase_steps
        and state.structural_moves < cfg.max_structural_moves
        and state.step_count - state.last_structural_step >= cfg.cooldown
    )


def _advance_to_decision(state: EngineState, x, y: int):
    """Stages shared by the step and the freeze diagnostic.

    Runs inference, the energy reward, history append, the death check,
    hard class coverage, and the parametric update.  Returns the
    inference result, the energy reward, and, for short-circuited steps,
    the finished observation.
    """
    cfg = state.config
    x = np.asarray(x, dtype=float)
    y = int(y)
    cache: dict = {}
    inference = infer(state, x, cache=cache)
    # With no hypotheses the prediction is a placeholder and counts as wrong.
    correct = bool(state.hypotheses) and inference.prediction == y
    delta = cfg.reward_correct if correct else cfg.penalty_wrong
    state.energy = cfg.energy_decay * state.energy + delta
    state.history.append((x, y))
    state.classes_seen.add(y)

    if state.energy <= 0.0:
        state.hypotheses = []
        state.energy = 0.0
        return inference, delta, Observation(
            inference.prediction, inference.confidence, inference.winner, delta, DEATH
        )

    if all(h.outcome != y for h in state.hypotheses):
        created = apply_genesis(state, x, y)
        if created is not None:
            state.structural_moves += 1
            state.last_structural_step = state.step_count
            action = COVERAGE_GENESIS
        else:
            action = NOOP
        return inference, delta, Observation(
            inference.prediction, inference.confidence, inference.winner, delta, action
        )

    if inference.winner is not None:
        grads = _loss_gradient(state, x, y, cache)
        fisher_update(state.params, grads, cfg.natgrad.fisher_decay)
        natural_step(state.params, grads, cfg.natgrad)
        winner = _hypothesis_by_id(state, inference.winner)
        winner_correct = winner.outcome == y
        update_reliability(winner, winner_correct, cfg.reliability_rate)
        record_memory(winner, len(state.history) - 1, winner_correct, cfg.memory_cap)

    return inference, delta, None


def _loss_gradient(state: EngineState, x, y: int, cache: dict) -> dict:
    """Gradient of the softmax cross-entropy through every hypothesis form."""
    classes = sorted(state.classes_seen | {h.outcome for h in state.hypotheses})
    logits = {k: 0.0 for k in classes}
    values = []
    for h in state.hypotheses:
        value = eval_soft(h.form, x, state.params, state.registry, cache=cache)
        values.append(value)
        logits[h.outcome] += effective_weight(h) * value
    u = np.array([logits[k] for k in classes])
    e = np.exp(u - u.max())
    p = e / e.sum()
    prob = dict(zip(classes, p))
    grads: dict = {}
    for h in state.hypotheses:
        coef = (prob[h.outcome] - (1.0 if h.outcome == y else 0.0)) * effective_weight(h)
        accumulate_grad(h.form, x, state.params, state.registry, 0, coef, grads, cache)
    return grads


def step(state: EngineState, x, y: int) -> Observation:
    """One full pipeline pass for a labelled sample."""
    inference, delta, short = _advance_to_decision(state, x, y)
    if short is not None:
        # Death and mandatory coverage skip action selection and the
        # freeze check entirely.
        state.step_count += 1
        return short
    action = NOOP
    if _structural_window_open(state):
        candidates = structural_candidates(state, x, y, inference)
        affordable = [c for c in candidates if c.cost <= state.energy]
        cache: dict = {}
        best = affordable[0]
        best_score = evaluate_J(state, best, x, y, cache=cache)
        for candidate in affordable[1:]:
            score = evaluate_J(state, candidate, x, y, cache=cache)
            if score < best_score:
                best, best_score = candidate, score
        if best.action != NOOP:
            state.hypotheses = best.hypotheses
            state.params = best.params
            state.energy -= best.cost
            state.structural_moves += 1
            state.last_structural_step = state.step_count
            state.next_hypothesis_id += best.id_advance
            action = best.action
    state.step_count += 1
    _freeze_check(state)
    return Observation(
        inference.prediction, inference.confidence, inference.winner, delta, action
    )


def _freeze_check(state: EngineState) -> None:
    cfg = state.config
    if state.frozen:
        return
    schedule_hit = (
        state.step_count >= cfg.structural_phase_steps
        or state.structural_moves >= cfg.max_structural_moves
    )
    if schedule_hit and _covered(state):
        state.frozen = True
        state.freeze_step = state.step_count
        state.hypotheses, state.registry = compress(state.hypotheses, state.registry)


def check_freeze_condition(state: EngineState, x, y: int) -> bool:
    """Diagnostic: would noop win the action comparison on this sample?

    Simulates the step on a cloned state (the live state, including its
    rng, is untouched) and reports whether noop's score is at most every
    available structural candidate's.  Vacuously true when no candidate
    is available.
    """
    sim = clone_state(state)
    inference, _, short = _advance_to_decision(sim, x, y)
    if short is not None or not _structural_window_open(sim):
        return True
    candidates = structural_candidates(sim, x, y, inference)
    affordable = [c for c in candidates if c.cost <= sim.energy]
    cache: dict = {}
    noop_score = evaluate_J(sim, affordable[0], x, y, cache=cache)
    return all(
        noop_score <= evaluate_J(sim, c, x, y, cache=cache) for c in affordable[1:]
    )


def clone_state(state: EngineState) -> EngineState:
    """Independent deep-enough copy: mutating the clone never touches the original."""
    return EngineState(
        config=state.config,
        params=state.params.copy(),
        rng=copy.deepcopy(state.rng),
        hypotheses=[
            replace(h, pos_memory=list(h.pos_memory), neg_memory=list(h.neg_memory))
            for h in state.hypotheses
        ],
        energy=state.energy,
        history=list(state.history),
        registry=state.registry,
        step_count=state.step_count,
        structural_moves=state.structural_moves,
        frozen=state.frozen,
        freeze_step=state.freeze_step,
        last_structural_step=state.last_structural_step,
        classes_seen=set(state.classes_seen),
        next_hypothesis_id=state.next_hypothesis_id,
    )


def state_digest(state: EngineState) -> str:
    """Stable fingerprint of everything a step may mutate."""
    from .forms import render

    payload = {
        "energy": repr(state.energy),
        "step_count": state.step_count,
        "structural_moves": state.structural_moves,
        "frozen": state.frozen,
        "freeze_step": state.freeze_step,
        "last_structural_step": state.last_structural_step,
        "classes_seen": sorted(state.classes_seen),
        "history_len": len(state.history),
        "next_hypothesis_id": state.next_hypothesis_id,
        "registry": sorted(
            (k, render(f, state.registry)) for k, f in state.registry.entries.items()
        ),
        "hypotheses": [
            (
                h.id,
                render(h.form, state.registry),
                h.outcome,
                repr(h.reliability),
                repr(h.weight),
                tuple(h.pos_memory),
                tuple(h.neg_memory),
            )
            for h in state.hypotheses
        ],
        "rng": json.dumps(state.rng.bit_generator.state, sort_keys=True, default=str),
    }
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode())
    for atom_id in range(len(state.params)):
        digest.update(state.params.extended(atom_id).tobytes())
        digest.update(state.params.fisher(atom_id).tobytes())
    return digest.hexdigest()
