"""Hypothesis records: a form bound to an outcome class, with bookkeeping.

Each hypothesis carries a reliability (EMA of winner correctness), an
example memory of history indices split by polarity, and an output
weight used for logit contributions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .forms import EMPTY_REGISTRY, Form, Registry, compress_shared, complexity

MEMORY_CAP = 64

TROPICAL_RELIABILITY_WEIGHT = 5.0


@dataclass
class Hypothesis:
    id: int
    form: Form
    outcome: int
    reliability: float = 0.5
    pos_memory: list[int] = field(default_factory=list)
    neg_memory: list[int] = field(default_factory=list)
    weight: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.reliability <= 1.0:
            raise ValueError("reliability must lie in [0, 1]")
        if self.weight <= 0.0:
            raise ValueError("weight must be positive")


def tropical_cost(h: Hypothesis, registry: Registry = EMPTY_REGISTRY) -> float:
    """Structural complexity plus 5 times the unreliability."""
    return complexity(h.form, registry) + TROPICAL_RELIABILITY_WEIGHT * (1.0 - h.reliability)


def update_reliability(h: Hypothesis, correct: bool, rate: float) -> None:
    """Move reliability toward 1 (correct) or 0 (wrong) by an EMA step."""
    if not 0.0 < rate <= 1.0:
        raise ValueError("rate must lie in (0, 1]")
    target = 1.0 if correct else 0.0
    h.reliability = min(1.0, max(0.0, (1.0 - rate) * h.reliability + rate * target))


def effective_weight(h: Hypothesis) -> float:
    """Output weight scaled into [weight/2, weight] by reliability."""
    return h.weight * (0.5 + 0.5 * h.reliability)


def record_memory(h: Hypothesis, idx: int, positive: bool, cap: int = MEMORY_CAP) -> None:
    """Append a history index to the matching polarity, keeping the newest ``cap``."""
    memory = h.pos_memory if positive else h.neg_memory
    memory.append(idx)
    if len(memory) > cap:
        del memory[: len(memory) - cap]


def compress(
    hypotheses: list[Hypothesis], registry: Registry = EMPTY_REGISTRY
) -> tuple[list[Hypothesis], Registry]:
    """Share repeated subforms across hypotheses through the registry.

    Evaluation of every hypothesis form is unchanged; total complexity
    never increases.
    """
    new_forms, new_registry = compress_shared([h.form for h in hypotheses], registry)
    rewritten = [
        replace(h, form=f, pos_memory=list(h.pos_memory), neg_memory=list(h.neg_memory))
        for h, f in zip(hypotheses, new_forms)
    ]
    return rewritten, new_registry
