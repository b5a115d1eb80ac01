"""Expression algebra for soft logical regions over input space.

A form is an immutable tree built from six constructors: the unmarked
state (void), the marked state (mark), sigmoid halfspace atoms,
complement (cross), disjunction over children (call, noisy-OR
semantics), and registry references (reentry).  Evaluation maps a form
and an input vector to a probability in [0, 1]; gradients backpropagate
through the tree into per-atom parameter space.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterable, Iterator, Mapping, MutableMapping, Sequence

import numpy as np

if TYPE_CHECKING:
    from .manifold import ParamStore

DEFAULT_MAX_DEPTH = 8

GradMap = dict  # atom id -> ndarray of length dim+1 (weight grad then bias grad)


class UnresolvedReEntryError(LookupError):
    """A reentry key has no entry in the registry."""


@dataclass(frozen=True)
class Form:
    """Base class for expression nodes.  Instances are immutable and hashable."""


@dataclass(frozen=True)
class Void(Form):
    """The unmarked state; always evaluates to 0."""


@dataclass(frozen=True)
class Mark(Form):
    """The marked state; always evaluates to 1."""


@dataclass(frozen=True)
class Atom(Form):
    """Primitive distinction: a sigmoid halfspace indexed into a ParamStore."""

    index: int


@dataclass(frozen=True)
class Cross(Form):
    """Complement of a single child form."""

    child: Form


@dataclass(frozen=True)
class Call(Form):
    """Disjunction over an ordered, non-empty collection of children.

    Children are kept as an ordered tuple and duplicates are permitted;
    duplicate children change the noisy-OR value.
    """

    children: tuple[Form, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValueError("Call requires at least one child form")


@dataclass(frozen=True)
class ReEntry(Form):
    """Reference to a shared subform stored in a registry."""

    key: int


VOID = Void()
MARK = Mark()


@dataclass(frozen=True, eq=False)
class Registry:
    """Map from reentry keys to shared subforms, with an evaluation depth cap.

    Immutable after construction: extensions return a new registry.
    """

    entries: Mapping[int, Form] = field(default_factory=dict)
    max_depth: int = DEFAULT_MAX_DEPTH

    def resolve(self, key: int) -> Form:
        try:
            return self.entries[key]
        except KeyError:
            raise UnresolvedReEntryError(f"no registry entry for reentry key {key}") from None

    def with_entries(self, new_entries: Mapping[int, Form]) -> Registry:
        merged = dict(self.entries)
        for key, form in new_entries.items():
            if key in merged:
                raise ValueError(f"registry key {key} already in use")
            merged[key] = form
        return Registry(entries=merged, max_depth=self.max_depth)

    def next_key(self) -> int:
        return max(self.entries) + 1 if self.entries else 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: int) -> bool:
        return key in self.entries


EMPTY_REGISTRY = Registry()


def complexity(f: Form, registry: Registry = EMPTY_REGISTRY) -> float:
    """Count of primitive distinctions in a form.

    Atoms cost 1, crosses cost 1 plus their child, calls are additive,
    void and mark are free.  A reentry reference costs a flat 0.5 and is
    not expanded, but its key must resolve.
    """
    if isinstance(f, (Void, Mark)):
        return 0.0
    if isinstance(f, Atom):
        return 1.0
    if isinstance(f, Cross):
        return 1.0 + complexity(f.child, registry)
    if isinstance(f, Call):
        return sum(complexity(g, registry) for g in f.children)
    if isinstance(f, ReEntry):
        registry.resolve(f.key)
        return 0.5
    raise TypeError(f"not a form: {f!r}")


def eval_soft(
    f: Form,
    x,
    params: ParamStore,
    registry: Registry = EMPTY_REGISTRY,
    depth: int = 0,
    cache: MutableMapping | None = None,
) -> float:
    """Probabilistic evaluation of a form at input ``x``.

    Void is 0, mark is 1, atoms are sigmoid halfspaces, cross is the
    complement, and call is the noisy-OR of its children (the probability
    that at least one disjunct holds).  Reentry evaluates the registry
    entry one level deeper; past the registry's depth cap the value is
    a noncommittal 0.5.

    ``cache`` memoizes node values keyed by node identity and depth; it
    is only valid for a single (x, parameter-state) pair.
    """
    return _eval(f, np.asarray(x, dtype=float), params, registry, depth, cache)


def _eval(f, x, params, registry, depth, cache):
    if depth > registry.max_depth:
        return 0.5
    if cache is not None:
        key = (id(f), depth)
        hit = cache.get(key)
        if hit is not None:
            return hit
    if isinstance(f, Void):
        value = 0.0
    elif isinstance(f, Mark):
        value = 1.0
    elif isinstance(f, Atom):
        value = params.activation(f.index, x)
    elif isinstance(f, Cross):
        value = 1.0 - _eval(f.child, x, params, registry, depth, cache)
    elif isinstance(f, Call):
        miss = 1.0
        for g in f.children:
            miss *= 1.0 - _eval(g, x, params, registry, depth, cache)
        value = 1.0 - miss
    elif isinstance(f, ReEntry):
        value = _eval(registry.resolve(f.key), x, params, registry, depth + 1, cache)
    else:
        raise TypeError(f"not a form: {f!r}")
    if cache is not None:
        cache[key] = value
    return value


def grad_soft(
    f: Form,
    x,
    params: ParamStore,
    registry: Registry = EMPTY_REGISTRY,
    cache: MutableMapping | None = None,
) -> GradMap:
    """Gradient of ``eval_soft`` with respect to every touched atom.

    Returns a map from atom id to a vector of length dim+1 holding the
    weight gradient followed by the bias gradient.  Atoms contribute
    p(1-p)[x; 1]; cross negates its child; each call child is weighted
    by the product of (1 - eval) over its siblings, which equals
    (1 - eval(call)) / (1 - eval(child)) away from saturation and is the
    continuous extension of that ratio when some child saturates at 1.
    """
    x = np.asarray(x, dtype=float)
    out: GradMap = {}
    if cache is None:
        cache = {}
    accumulate_grad(f, x, params, registry, 0, 1.0, out, cache)
    return out


def accumulate_grad(f, x, params, registry, depth, scale, out, cache):
    """Add ``scale`` times the gradient of ``f`` into ``out`` in place."""
    if depth > registry.max_depth or scale == 0.0:
        return
    if isinstance(f, (Void, Mark)):
        return
    if isinstance(f, Atom):
        p = _eval(f, x, params, registry, depth, cache)
        s = scale * p * (1.0 - p)
        vec = out.get(f.index)
        if vec is None:
            vec = np.zeros(x.shape[0] + 1)
            out[f.index] = vec
        vec[:-1] += s * x
        vec[-1] += s
        return
    if isinstance(f, Cross):
        accumulate_grad(f.child, x, params, registry, depth, -scale, out, cache)
        return
    if isinstance(f, Call):
        misses = [1.0 - _eval(g, x, params, registry, depth, cache) for g in f.children]
        for i, g in enumerate(f.children):
            weight = 1.0
            for j, m in enumerate(misses):
                if j != i:
                    weight *= m
            accumulate_grad(g, x, params, registry, depth, scale * weight, out, cache)
        return
    if isinstance(f, ReEntry):
        accumulate_grad(registry.resolve(f.key), x, params, registry, depth + 1, scale, out, cache)
        return
    raise TypeError(f"not a form: {f!r}")


def conj(f: Form, g: Form) -> Form:
    """Conjunction of two forms, encoded as the complement of a noisy-OR.

    eval(conj(f, g)) equals eval(f) * eval(g) under the recursive semantics.
    """
    return Cross(Call((Cross(f), Cross(g))))


def render(f: Form, registry: Registry = EMPTY_REGISTRY) -> str:
    """Deterministic, parse-stable text for a form.

    Grammar: ``0`` for void, ``()`` for mark, ``A<i>`` for atoms,
    ``~(...)`` for cross, ``|[f, g, ...]`` for call, ``@<k>`` for reentry.
    """
    if isinstance(f, Void):
        return "0"
    if isinstance(f, Mark):
        return "()"
    if isinstance(f, Atom):
        return f"A{f.index}"
    if isinstance(f, Cross):
        return f"~({render(f.child, registry)})"
    if isinstance(f, Call):
        return "|[" + ", ".join(render(g, registry) for g in f.children) + "]"
    if isinstance(f, ReEntry):
        return f"@{f.key}"
    raise TypeError(f"not a form: {f!r}")


def alias(f: Form, registry: Registry = EMPTY_REGISTRY, _depth: int = 0) -> str | None:
    """Best-effort human-readable rewrite using conjunction and negation.

    Matches the conjunction / exception shapes produced by structural
    refinement (``~(|[~(a), ~(b)])`` reads ``a ∧ b``, a plain child under
    the call reads negated).  Returns None for shapes with no such
    reading.
    """
    if _depth > registry.max_depth:
        return None
    if isinstance(f, Atom):
        return f"A{f.index}"
    if isinstance(f, ReEntry):
        if f.key not in registry:
            return None
        return alias(registry.resolve(f.key), registry, _depth + 1)
    if isinstance(f, Cross):
        if isinstance(f.child, Call):
            parts = []
            for g in f.child.children:
                if isinstance(g, Cross):
                    part = alias(g.child, registry, _depth)
                else:
                    inner = alias(g, registry, _depth)
                    part = None if inner is None else "¬" + _parenthesize(inner)
                if part is None:
                    return None
                parts.append(_parenthesize(part) if " ∧ " in part else part)
            return " ∧ ".join(parts)
        inner = alias(f.child, registry, _depth)
        return None if inner is None else "¬" + _parenthesize(inner)
    return None


def _parenthesize(text: str) -> str:
    if " ∧ " in text or (text.startswith("¬") and len(text) > 2 and text[1] == "("):
        return f"({text})" if not (text.startswith("(") and text.endswith(")")) else text
    return text


def subforms(f: Form) -> Iterator[Form]:
    """All nodes of a form tree, root first, without expanding reentries."""
    yield f
    if isinstance(f, Cross):
        yield from subforms(f.child)
    elif isinstance(f, Call):
        for g in f.children:
            yield from subforms(g)


def _contains(outer: Form, inner: Form) -> bool:
    return outer != inner and any(sub == inner for sub in subforms(outer))


def compress_shared(
    forms: Sequence[Form], registry: Registry = EMPTY_REGISTRY
) -> tuple[tuple[Form, ...], Registry]:
    """Extract subforms shared across forms into registry references.

    Every maximal subform occurring structurally identically in at least
    two distinct input forms, with complexity at least 2, is stored once
    in the registry and replaced by reentry references.  Evaluation is
    unchanged and total complexity never increases.
    """
    first_seen: dict[Form, int] = {}
    owners: dict[Form, set[int]] = {}
    order = 0
    for i, f in enumerate(forms):
        for sub in subforms(f):
            if sub not in first_seen:
                first_seen[sub] = order
            order += 1
            owners.setdefault(sub, set()).add(i)
    shared = [
        sub
        for sub, who in owners.items()
        if len(who) >= 2 and complexity(sub, registry) >= 2.0
    ]
    maximal = [
        sub for sub in shared if not any(_contains(other, sub) for other in shared)
    ]
    maximal.sort(key=first_seen.__getitem__)
    if not maximal:
        return tuple(forms), registry

    base = registry.next_key()
    replacement = {sub: ReEntry(base + j) for j, sub in enumerate(maximal)}
    new_registry = registry.with_entries(
        {base + j: sub for j, sub in enumerate(maximal)}
    )

    def rewrite(f: Form) -> Form:
        ref = replacement.get(f)
        if ref is not None:
            return ref
        if isinstance(f, Cross):
            return Cross(rewrite(f.child))
        if isinstance(f, Call):
            return Call(tuple(rewrite(g) for g in f.children))
        return f

    return tuple(rewrite(f) for f in forms), new_registry
