"""Atom parameter storage and information-geometric updates.

Each atom owns a weight vector, a bias, and a diagonal Fisher
accumulator estimated online from squared gradients.  Updates are
preconditioned RMSProp-style: the step divides by the square root of
the Fisher diagonal plus a floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forms import GradMap


@dataclass
class NatGradConfig:
    """Knobs for the preconditioned gradient step.

    ``fisher_exponent`` controls the preconditioner power (0.5 gives the
    square-root form; 1.0 would divide by the Fisher diagonal itself).
    ``preconditioned=False`` falls back to a plain gradient step, used by
    the ablation harness.
    """

    learning_rate: float = 0.02
    fisher_decay: float = 0.95
    epsilon: float = 1e-8
    fisher_exponent: float = 0.5
    preconditioned: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.fisher_decay < 1.0:
            raise ValueError("fisher_decay must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def _sigmoid(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


class ParamStore:
    """Dense, append-only store of atom parameters.

    Atom ids are assigned sequentially from 0 and never deleted.  Each
    atom holds an extended parameter vector [w; b] of length dim+1 and a
    matching Fisher diagonal initialised to ones.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("input dimension must be at least 1")
        self.dim = int(dim)
        self._params: list[np.ndarray] = []
        self._fisher: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._params)

    def alloc_atom(self, w, b: float) -> int:
        """Append a new atom; returns its id."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            raise ValueError(f"weight vector has shape {w.shape}, expected ({self.dim},)")
        vec = np.empty(self.dim + 1)
        vec[:-1] = w
        vec[-1] = float(b)
        self._params.append(vec)
        self._fisher.append(np.ones(self.dim + 1))
        return len(self._params) - 1

    def extended(self, atom_id: int) -> np.ndarray:
        """Extended parameter vector [w; b].  A live view, not a copy."""
        return self._check(atom_id)

    def weights(self, atom_id: int) -> np.ndarray:
        return self._check(atom_id)[:-1]

    def bias(self, atom_id: int) -> float:
        return float(self._check(atom_id)[-1])

    def fisher(self, atom_id: int) -> np.ndarray:
        self._check(atom_id)
        return self._fisher[atom_id]

    def activation(self, atom_id: int, x) -> float:
        """Sigmoid response of one atom at input x."""
        vec = self._check(atom_id)
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"input has shape {x.shape}, expected ({self.dim},)")
        return _sigmoid(float(vec[:-1] @ x) + float(vec[-1]))

    def copy(self) -> ParamStore:
        dup = ParamStore(self.dim)
        dup._params = [v.copy() for v in self._params]
        dup._fisher = [v.copy() for v in self._fisher]
        return dup

    def _check(self, atom_id: int) -> np.ndarray:
        if not 0 <= atom_id < len(self._params):
            raise KeyError(f"atom {atom_id} not allocated")
        return self._params[atom_id]


def genesis_atom_init(rng: np.random.Generator, x) -> tuple[np.ndarray, float]:
    """Random unit direction with a bias placing x just inside the halfspace.

    The bias is chosen so that w.x + b = 0.1, so the fresh atom fires at
    its triggering sample with activation sigmoid(0.1).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] < 1:
        raise ValueError("input must be a vector of dimension >= 1")
    while True:
        v = rng.standard_normal(x.shape[0])
        norm = float(np.linalg.norm(v))
        if norm > 0.0:
            break
    w = v / norm
    b = 0.1 - float(w @ x)
    return w, b


def fisher_update(store: ParamStore, grads: GradMap, decay: float) -> None:
    """Exponential moving average of squared gradients, per touched atom.

    Atoms absent from the gradient map are left untouched; coordinates of
    touched atoms decay toward the squared gradient component.
    """
    keep = 1.0 - decay
    for atom_id, g in grads.items():
        fisher = store.fisher(atom_id)
        fisher *= decay
        fisher += keep * g * g


def natural_step(store: ParamStore, grads: GradMap, cfg: NatGradConfig) -> None:
    """Preconditioned descent step; expects the Fisher update already applied."""
    lr = cfg.learning_rate
    for atom_id, g in grads.items():
        vec = store.extended(atom_id)
        if cfg.preconditioned:
            vec -= lr * g / (store.fisher(atom_id) ** cfg.fisher_exponent + cfg.epsilon)
        else:
            vec -= lr * g


def fit_separator(X_pos, X_neg, ridge: float = 1.0) -> tuple[np.ndarray, float]:
    """Ridge least-squares separator between two point sets.

    Solves (A^T A + ridge I) v = A^T y on inputs extended with a constant
    1, targets +1 for positives and -1 for negatives.  The ridge block
    regularizes the bias together with the weights and guarantees
    solvability for ridge > 0.
    """
    P = np.atleast_2d(np.asarray(X_pos, dtype=float))
    N = np.atleast_2d(np.asarray(X_neg, dtype=float))
    if P.shape[0] == 0 or N.shape[0] == 0:
        raise ValueError("both classes must be non-empty")
    if P.shape[1] != N.shape[1]:
        raise ValueError("positive and negative examples disagree on dimension")
    A = np.vstack([P, N])
    A = np.hstack([A, np.ones((A.shape[0], 1))])
    y = np.concatenate([np.ones(P.shape[0]), -np.ones(N.shape[0])])
    M = A.T @ A + ridge * np.eye(A.shape[1])
    v = np.linalg.solve(M, A.T @ y)
    return v[:-1].copy(), float(v[-1])
