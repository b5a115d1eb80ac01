"""Energy-budgeted structural rule learner with natural-gradient inner updates."""

from .data import Dataset, Split, load_builtin, load_csv, load_dataset, standardize, stratified_split
from .engine import (
    EngineConfig,
    EngineState,
    Observation,
    apply_genesis,
    apply_wedge,
    check_freeze_condition,
    evaluate_J,
    infer,
    loss_of,
    new_state,
    step,
)
from .forms import (
    Atom,
    Call,
    Cross,
    Form,
    Mark,
    ReEntry,
    Registry,
    Void,
    alias,
    complexity,
    conj,
    eval_soft,
    grad_soft,
    render,
)
from .harness import RunConfig, RunRecord, export_rules, run, suite, survival_rate, transition_rate
from .hypotheses import Hypothesis, compress, effective_weight, record_memory, tropical_cost, update_reliability
from .manifold import NatGradConfig, ParamStore, fisher_update, fit_separator, genesis_atom_init, natural_step
from .baseline import logistic_baseline

__all__ = [
    "Atom", "Call", "Cross", "Dataset", "EngineConfig", "EngineState", "Form",
    "Hypothesis", "Mark", "NatGradConfig", "Observation", "ParamStore", "ReEntry",
    "Registry", "RunConfig", "RunRecord", "Split", "Void", "alias", "apply_genesis",
    "apply_wedge", "check_freeze_condition", "complexity", "compress", "conj",
    "effective_weight", "eval_soft", "evaluate_J", "export_rules", "fisher_update",
    "fit_separator", "genesis_atom_init", "grad_soft", "infer", "load_builtin",
    "load_csv", "load_dataset", "logistic_baseline", "loss_of", "natural_step",
    "new_state", "record_memory", "render", "run", "standardize", "step",
    "stratified_split", "suite", "survival_rate", "transition_rate",
    "tropical_cost", "update_reliability",
]

__version__ = "0.1.0"
