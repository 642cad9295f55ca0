"""Binary observation masks for link prediction and sample splitting."""

import enum
from dataclasses import dataclass

import numpy as np


class Task(str, enum.Enum):
    INDEPENDENT = "independent"
    TUBULAR = "tubular"


@dataclass(frozen=True)
class MaskSpec:
    """How held-out entries are drawn.

    ``independent`` hides each entry with probability ``1/folds`` on its own;
    ``tubular`` hides whole tubes ``(i, j, :)`` so a pair is either seen in
    every layer or in none.
    """

    task: Task = Task.INDEPENDENT
    folds: int = 5
    seed: int = 0
    symmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        if self.folds < 2:
            raise ValueError("need at least two folds")


def _symmetrize(hidden):
    # mirror the upper triangle (diagonal included) onto the lower one
    upper = np.triu(np.ones(hidden.shape[:2], dtype=bool))
    return np.where(upper[:, :, None], hidden, hidden.transpose(1, 0, 2))


def random_mask(dims, p_hidden, rng, tubular=False, symmetric=False):
    """Mask with 1 = observed, 0 = hidden; entries hidden with probability ``p_hidden``."""
    N, N2, L = dims
    if tubular:
        hidden = np.repeat((rng.random((N, N2)) < p_hidden)[:, :, None], L, axis=2)
    else:
        hidden = rng.random((N, N2, L)) < p_hidden
    if symmetric:
        if N != N2:
            raise ValueError("a symmetric mask needs frontally square dims")
        hidden = _symmetrize(hidden)
    return (~hidden).astype(float)


def make_mask(spec, dims, fold=0):
    """Mask for fold ``fold``; each fold is an independent draw, not a partition."""
    rng = np.random.default_rng([spec.seed, fold])
    return random_mask(dims, 1.0 / spec.folds, rng,
                       tubular=spec.task is Task.TUBULAR, symmetric=spec.symmetric)


def split_mask(dims, seed, symmetric=False):
    """Entrywise fair-coin split; returns the mask selecting the first half."""
    rng = np.random.default_rng(seed)
    return random_mask(dims, 0.5, rng, symmetric=symmetric)
