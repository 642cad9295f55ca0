"""Reading the layer factor Y of a fitted NNTuck."""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import NNTuckModel
from .tensor import mode_product

MAX_CONDITION = 1e8


class SingularReferenceError(ValueError):
    """The chosen reference layers do not span the layer-community space."""


def _rows(Y, order):
    Y = np.asarray(Y, dtype=float)
    norms = np.linalg.norm(Y, ord=order, axis=1)
    if (norms == 0).any():
        raise ValueError(f"Y has an all-zero row at {np.flatnonzero(norms == 0).tolist()}")
    return Y / norms[:, None]


def row_normalize_l1(Y):
    """Scale each row of Y to unit L1 norm."""
    return _rows(Y, 1)


def row_normalize_l2(Y):
    return _rows(Y, 2)


def layer_similarity(Y):
    """Cosine similarity between layers, ``Y2 @ Y2.T`` with L2-normalized rows."""
    Y2 = row_normalize_l2(Y)
    S = Y2 @ Y2.T
    np.fill_diagonal(S, 1.0)
    return S


@dataclass
class ReferenceBasis:
    reference_layers: tuple
    Y_star: np.ndarray
    core_star: np.ndarray


def reference_basis_transform(model, reference_layers, max_condition=MAX_CONDITION):
    """Rewrite the core in the basis of the affinity matrices of ``reference_layers``.

    Slice ``l`` of the new core is the affinity matrix of layer
    ``reference_layers[l]``, and row ``r`` of ``Y_star`` expresses layer ``r``
    as a linear combination of the reference layers. Entries of ``Y_star``
    may be negative.
    """
    r = tuple(int(x) for x in reference_layers)
    Y, core = model.Y, model.core
    L, C = Y.shape
    if len(r) != C or len(set(r)) != C:
        raise ValueError(f"need {C} distinct reference layers, got {r}")
    if any(not 0 <= x < L for x in r):
        raise IndexError(f"reference layers {r} out of range for {L} layers")
    Y_ref = Y[list(r)]
    cond = np.linalg.cond(Y_ref)
    if not cond < max_condition:
        raise SingularReferenceError(
            f"layers {r} give a reference block with condition number {cond:.3g}"
        )
    Y_star = np.linalg.solve(Y_ref.T, Y.T).T
    Y_star[list(r)] = np.eye(C)
    core_star = mode_product(core, Y_ref, 3)
    return ReferenceBasis(r, Y_star, core_star)


def basis_model(model, basis):
    """The model with its core and Y replaced by the reference-basis pair."""
    return NNTuckModel(model.U, model.V, basis.Y_star, basis.core_star)


def _abs_det(Y, subset):
    return abs(np.linalg.det(Y[list(subset)]))


def choose_reference_layers(Y, C=None, cap=10_000, seed=0, restarts=20, rel_tol=1e-12):
    """C layers whose rows of Y have the determinant furthest from zero.

    Every subset is scored when there are at most ``cap`` of them; otherwise
    a swap-based local search runs from ``restarts`` seeded random subsets.
    Returns the indices in increasing order.
    """
    Y = np.asarray(Y, dtype=float)
    L, C_Y = Y.shape
    C = C_Y if C is None else C
    if C != C_Y:
        raise ValueError(f"Y has {C_Y} columns, cannot pick {C} reference layers")
    if L < C:
        raise ValueError(f"only {L} layers for {C} reference layers")

    if math.comb(L, C) <= cap:
        best = max(itertools.combinations(range(L), C), key=lambda s: _abs_det(Y, s))
    else:
        rng = np.random.default_rng(seed)
        best = None
        for _ in range(restarts):
            current = tuple(sorted(rng.choice(L, C, replace=False).tolist()))
            value = _abs_det(Y, current)
            improved = True
            while improved:
                improved = False
                for pos, out in itertools.product(range(C), range(L)):
                    if out in current:
                        continue
                    trial = tuple(sorted(current[:pos] + (out,) + current[pos + 1:]))
                    trial_value = _abs_det(Y, trial)
                    if trial_value > value:
                        current, value, improved = trial, trial_value, True
                        break
            if best is None or value > _abs_det(Y, best):
                best = current
    # Hadamard's bound makes the singularity threshold scale-free
    bound = np.prod(np.linalg.norm(Y[list(best)], axis=1))
    if not _abs_det(Y, best) > rel_tol * bound:
        raise SingularReferenceError("every candidate set of reference layers is singular")
    return tuple(int(x) for x in best)
