import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distinction_engine.forms import (
    EMPTY_REGISTRY,
    MARK,
    VOID,
    Atom,
    Call,
    Cross,
    ReEntry,
    Registry,
    UnresolvedReEntryError,
    alias,
    complexity,
    compress_shared,
    conj,
    eval_soft,
    grad_soft,
    render,
    subforms,
)
from distinction_engine.manifold import ParamStore


def make_store(params, dim=1):
    """Store with the given [w..., b] rows."""
    store = ParamStore(dim)
    for row in params:
        store.alloc_atom(row[:-1], row[-1])
    return store


def logit(p):
    return math.log(p / (1.0 - p))


def store_with_probs(probs, x):
    """1-d store whose atom i evaluates to probs[i] at the given x."""
    store = ParamStore(1)
    for p in probs:
        store.alloc_atom([0.0], logit(p))
    return store


# -- complexity ---------------------------------------------------------------


def test_complexity_examples():
    assert complexity(Atom(3)) == 1.0
    assert complexity(Cross(Cross(Atom(0)))) == 3.0
    registry = Registry({7: Atom(0)})
    f = Call((Atom(0), Cross(Atom(1)), ReEntry(7)))
    assert complexity(f, registry) == 3.5


def test_complexity_void_mark_free():
    assert complexity(VOID) == 0.0
    assert complexity(MARK) == 0.0


def test_complexity_unresolved_reentry():
    with pytest.raises(UnresolvedReEntryError):
        complexity(ReEntry(0), EMPTY_REGISTRY)


def test_call_requires_children():
    with pytest.raises(ValueError):
        Call(())


# -- eval_soft ----------------------------------------------------------------


def test_eval_constants():
    store = make_store([[0.0, 0.0]])
    x = [1.0]
    assert eval_soft(VOID, x, store) == 0.0
    assert eval_soft(MARK, x, store) == 1.0
    assert eval_soft(Cross(MARK), x, store) == 0.0


def test_eval_atom_is_sigmoid():
    store = make_store([[2.0, -1.0]])
    x = [3.0]
    expected = 1.0 / (1.0 + math.exp(-(2.0 * 3.0 - 1.0)))
    assert eval_soft(Atom(0), x, store) == pytest.approx(expected, abs=1e-15)


def test_eval_noisy_or():
    store = store_with_probs([0.5, 0.5], x=[0.0])
    value = eval_soft(Call((Atom(0), Atom(1))), [0.0], store)
    assert value == pytest.approx(0.75, abs=1e-12)


def test_eval_reentry_and_depth_guard():
    registry = Registry({0: Atom(0)}, max_depth=8)
    store = store_with_probs([0.9], x=[0.0])
    assert eval_soft(ReEntry(0), [0.0], store, registry) == pytest.approx(0.9, abs=1e-12)
    # self-referential entry bottoms out at the guard value
    loop = Registry({0: ReEntry(0)}, max_depth=8)
    assert eval_soft(ReEntry(0), [0.0], store, loop) == 0.5


def test_eval_unresolved_reentry():
    store = make_store([[0.0, 0.0]])
    with pytest.raises(UnresolvedReEntryError):
        eval_soft(ReEntry(3), [0.0], store)


def test_eval_dimension_mismatch():
    store = make_store([[1.0, 0.0]])  # dim 1
    with pytest.raises(ValueError):
        eval_soft(Atom(0), [1.0, 2.0], store)


# -- grad_soft ----------------------------------------------------------------


def test_grad_constant_forms_empty():
    store = make_store([[0.0, 0.0]])
    assert grad_soft(MARK, [1.0], store) == {}
    assert grad_soft(VOID, [1.0], store) == {}


def test_grad_atom_example():
    # p = 0.5 at x = [2]: gradient is 0.25 * [x; 1]
    store = make_store([[0.0, 0.0]])
    grads = grad_soft(Atom(0), [2.0], store)
    np.testing.assert_allclose(grads[0], [0.5, 0.25], atol=1e-15)


def test_grad_cross_negates():
    store = make_store([[0.0, 0.0]])
    grads = grad_soft(Cross(Atom(0)), [2.0], store)
    np.testing.assert_allclose(grads[0], [-0.5, -0.25], atol=1e-15)


def random_form(rng, n_atoms, depth):
    roll = rng.random()
    if depth == 0 or roll < 0.35:
        return Atom(int(rng.integers(0, n_atoms)))
    if roll < 0.55:
        return Cross(random_form(rng, n_atoms, depth - 1))
    if roll < 0.6:
        return VOID if rng.random() < 0.5 else MARK
    width = int(rng.integers(1, 4))
    return Call(tuple(random_form(rng, n_atoms, depth - 1) for _ in range(width)))


def central_difference(f, x, store, step=1e-5):
    """Independent gradient oracle."""
    out = {}
    for atom_id, _ in grad_soft(f, x, store).items():
        vec = store.extended(atom_id)
        fd = np.zeros(len(vec))
        for j in range(len(vec)):
            orig = vec[j]
            vec[j] = orig + step
            up = eval_soft(f, x, store)
            vec[j] = orig - step
            down = eval_soft(f, x, store)
            vec[j] = orig
            fd[j] = (up - down) / (2 * step)
        out[atom_id] = fd
    return out


def atoms_unsaturated(f, x, store):
    return all(
        0.01 < store.activation(a.index, x) < 0.99
        for a in subforms(f)
        if isinstance(a, Atom)
    )


def test_grad_matches_central_differences():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 300:
        d = int(rng.integers(1, 5))
        store = ParamStore(d)
        for _ in range(4):
            store.alloc_atom(rng.normal(size=d) * 0.6, rng.normal() * 0.6)
        f = random_form(rng, 4, depth=5)
        x = rng.normal(size=d)
        if not atoms_unsaturated(f, x, store):
            continue
        grads = grad_soft(f, x, store)
        oracle = central_difference(f, x, store)
        for atom_id, vec in grads.items():
            scale = max(np.max(np.abs(oracle[atom_id])), np.max(np.abs(vec)), 1e-8)
            np.testing.assert_allclose(vec, oracle[atom_id], atol=scale * 1e-4)
        checked += 1


def test_grad_saturated_call_finite():
    # one child pinned at exactly 1.0: the limit form assigns its weight from
    # the siblings and zero to everyone else
    store = ParamStore(1)
    store.alloc_atom([0.0], 1000.0)  # p = 1.0 exactly in floating point
    store.alloc_atom([0.0], 0.0)  # p = 0.5
    f = Call((Atom(0), Atom(1)))
    assert eval_soft(Atom(0), [0.0], store) == 1.0
    grads = grad_soft(f, [0.0], store)
    # saturated child: weight (1 - p_sibling) = 0.5, but p(1-p) = 0 kills it
    assert np.all(np.isfinite(grads[0]))
    np.testing.assert_allclose(grads[0], [0.0, 0.0], atol=1e-300)
    # unsaturated child gets weight 1 - p_saturated = 0
    np.testing.assert_allclose(grads[1], [0.0, 0.0], atol=1e-300)


# -- conj ---------------------------------------------------------------------


def test_conj_truth_table():
    store = make_store([[0.0, 0.0]])
    x = [0.0]
    assert eval_soft(conj(MARK, MARK), x, store) == 1.0
    assert eval_soft(conj(VOID, MARK), x, store) == 0.0


def test_conj_multiplies():
    store = store_with_probs([0.8, 0.5], x=[0.0])
    x = [0.0]
    product = eval_soft(Atom(0), x, store) * eval_soft(Atom(1), x, store)
    assert eval_soft(conj(Atom(0), Atom(1)), x, store) == pytest.approx(0.4, abs=1e-9)
    assert eval_soft(conj(Atom(0), Atom(1)), x, store) == pytest.approx(product, abs=1e-12)


# -- render and alias ---------------------------------------------------------


def test_render_examples():
    assert render(Atom(0)) == "A0"
    assert render(Cross(Atom(3))) == "~(A3)"
    assert render(conj(Atom(0), Cross(Atom(3)))) == "~(|[~(A0), ~(~(A3))])"
    assert render(VOID) == "0"
    assert render(MARK) == "()"
    assert render(ReEntry(4)) == "@4"
    assert render(Call((Atom(0), Atom(1)))) == "|[A0, A1]"


def test_alias_conjunction_patterns():
    assert alias(conj(Atom(0), Cross(Atom(3)))) == "A0 ∧ ¬A3"
    assert alias(conj(Cross(Atom(0)), Atom(5))) == "¬A0 ∧ A5"
    assert alias(Atom(2)) == "A2"
    # exception shape: original AND NOT separator
    exception = Cross(Call((Cross(Atom(1)), Atom(2))))
    assert alias(exception) == "A1 ∧ ¬A2"


def test_alias_none_for_plain_call():
    assert alias(Call((Atom(0), Atom(1)))) is None
    assert alias(VOID) is None


def test_alias_through_registry():
    registry = Registry({0: Cross(Atom(1))})
    shrunk = Cross(Call((ReEntry(0), Cross(Atom(2)))))
    # reentry child resolves, reads as the negation of its registry entry
    assert alias(shrunk, registry) == "¬A1 ∧ A2"


# -- compress -----------------------------------------------------------------


def test_compress_extracts_shared_subform():
    shared = Cross(Atom(1))
    f1 = Call((Atom(0), shared))
    f2 = Call((Atom(2), Cross(Atom(1))))
    (g1, g2), registry = compress_shared([f1, f2])
    assert len(registry) == 1
    key = next(iter(registry.entries))
    assert registry.resolve(key) == shared
    assert ReEntry(key) in g1.children and ReEntry(key) in g2.children


def test_compress_identity_when_nothing_shared():
    forms = [Atom(0), Cross(Atom(1))]
    new_forms, registry = compress_shared(forms)
    assert list(new_forms) == forms
    assert len(registry) == 0


def test_compress_ignores_low_complexity_and_single_owner():
    # a bare atom is shared but complexity 1 < 2: left alone
    forms = [Call((Atom(0), Atom(1))), Call((Atom(0), Atom(2)))]
    new_forms, registry = compress_shared(forms)
    assert list(new_forms) == forms
    assert len(registry) == 0


def test_compress_prefers_maximal_subform():
    inner = Cross(Atom(0))
    outer = Call((inner, Atom(1)))
    f1 = Cross(outer)
    f2 = Cross(Cross(outer))
    (g1, g2), registry = compress_shared([f1, f2])
    assert len(registry) == 1
    stored = registry.resolve(registry.next_key() - 1)
    assert stored == outer


def test_compress_preserves_semantics_and_complexity():
    rng = np.random.default_rng(3)
    for _ in range(30):
        d = int(rng.integers(1, 4))
        store = ParamStore(d)
        for _ in range(4):
            store.alloc_atom(rng.normal(size=d), rng.normal())
        base = random_form(rng, 4, depth=3)
        forms = [
            Call((base, Atom(0))),
            Cross(Call((base, Atom(1)))),
            random_form(rng, 4, depth=3),
        ]
        new_forms, registry = compress_shared(forms)
        before = sum(complexity(f) for f in forms)
        after = sum(complexity(f, registry) for f in new_forms)
        assert after <= before + 1e-12
        for _ in range(100 // len(forms) + 1):
            x = rng.normal(size=d)
            for old, new in zip(forms, new_forms):
                assert eval_soft(new, x, store, registry) == pytest.approx(
                    eval_soft(old, x, store), abs=1e-12
                )


# -- algebraic properties ------------------------------------------------------


@st.composite
def form_and_input(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    store = ParamStore(d)
    for _ in range(4):
        store.alloc_atom(rng.normal(size=d), rng.normal())
    f = random_form(rng, 4, depth=4)
    x = rng.normal(size=d)
    return f, x, store


@given(form_and_input())
@settings(max_examples=150, deadline=None)
def test_eval_in_unit_interval(case):
    f, x, store = case
    assert 0.0 <= eval_soft(f, x, store) <= 1.0


@given(form_and_input())
@settings(max_examples=150, deadline=None)
def test_condensation_exact(case):
    f, x, store = case
    assert eval_soft(Cross(Cross(f)), x, store) == pytest.approx(
        eval_soft(f, x, store), abs=1e-12
    )


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_cancellation_sharp_limit(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    store = ParamStore(d)
    store.alloc_atom(rng.normal(size=d), rng.normal())
    x = rng.normal(size=d)
    z = float(store.weights(0) @ x) + store.bias(0)
    if abs(z) < 0.01:
        return
    store.extended(0)[:] *= 1e3
    value = eval_soft(Call((Atom(0), Cross(Atom(0)))), x, store)
    assert value >= 1.0 - 1e-3


def test_noisy_or_monotone_in_children():
    x = [0.0]
    for low, high in [(0.1, 0.3), (0.4, 0.9), (0.0, 1.0)]:
        lo = store_with_probs([min(max(low, 1e-9), 1 - 1e-9), 0.5], x)
        hi = store_with_probs([min(max(high, 1e-9), 1 - 1e-9), 0.5], x)
        f = Call((Atom(0), Atom(1)))
        assert eval_soft(f, x, hi) >= eval_soft(f, x, lo)


@given(st.lists(st.sampled_from([0, 1, 2]), min_size=1, max_size=5))
@settings(max_examples=60, deadline=None)
def test_complexity_additive_over_call(indices):
    children = tuple(Cross(Atom(i)) for i in indices)
    assert complexity(Call(children)) == sum(complexity(c) for c in children)
