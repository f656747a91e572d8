"""Categorical return distributions on a fixed, evenly spaced support.

Distributions are plain float64 numpy vectors of probabilities; the batched
helpers accept a leading batch axis. ``project`` is the categorical (C51)
projection: every target atom is clipped into ``[v_min, v_max]`` and its mass
split linearly between the two neighbouring support atoms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

MASS_TOL = 1e-9
_RENORM_TOL = 1e-12
# Target atoms closer than this (in atom units) to a support atom snap onto it.
_SNAP = 1e-10


@dataclass(frozen=True)
class Support:
    v_min: float = -100.0
    v_max: float = 0.0
    n_atoms: int = 51
    atoms: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.v_min < self.v_max:
            raise ValueError(f"v_min ({self.v_min}) must be < v_max ({self.v_max})")
        if self.n_atoms < 2:
            raise ValueError(f"n_atoms must be >= 2, got {self.n_atoms}")
        atoms = self.v_min + np.arange(self.n_atoms, dtype=np.float64) * self.delta
        atoms[-1] = self.v_max
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def delta(self) -> float:
        return (self.v_max - self.v_min) / (self.n_atoms - 1)

    def uniform(self) -> np.ndarray:
        return np.full(self.n_atoms, 1.0 / self.n_atoms)

    def one_hot(self, i: int) -> np.ndarray:
        p = np.zeros(self.n_atoms)
        p[i] = 1.0
        return p


def validate(probs: np.ndarray, sup: Support) -> None:
    probs = np.asarray(probs)
    if probs.shape[-1] != sup.n_atoms:
        raise ValueError(f"expected {sup.n_atoms} atoms, got {probs.shape[-1]}")
    if np.any(probs < 0):
        raise ValueError("negative probability mass")
    if np.any(np.abs(probs.sum(axis=-1) - 1.0) > MASS_TOL):
        raise ValueError("probabilities do not sum to 1")


def mean(probs: np.ndarray, sup: Support) -> np.ndarray | float:
    return np.asarray(probs) @ sup.atoms


def std(probs: np.ndarray, sup: Support) -> np.ndarray | float:
    probs = np.asarray(probs)
    m = probs @ sup.atoms
    var = probs @ (sup.atoms**2) - m**2
    return np.sqrt(np.maximum(var, 0.0))


def project(target_atoms: np.ndarray, target_probs: np.ndarray, sup: Support) -> np.ndarray:
    """Project mass located at ``target_atoms`` onto the support.

    Both arguments have shape ``(..., k)``; the result has shape
    ``(..., n_atoms)``. A target sitting exactly on a support atom keeps all
    of its mass there.
    """
    t = np.asarray(target_atoms, dtype=np.float64)
    p = np.asarray(target_probs, dtype=np.float64)
    t, p = np.broadcast_arrays(t, p)
    batch_shape = t.shape[:-1]
    t = t.reshape(-1, t.shape[-1])
    p = p.reshape(-1, p.shape[-1])
    n = sup.n_atoms

    b = (np.clip(t, sup.v_min, sup.v_max) - sup.v_min) / sup.delta
    nearest = np.rint(b)
    b = np.where(np.abs(b - nearest) < _SNAP, nearest, b)
    lower = np.floor(b).astype(np.int64)
    upper = np.minimum(lower + 1, n - 1)
    w_upper = b - lower
    w_lower = 1.0 - w_upper

    rows = np.arange(t.shape[0])[:, None] * n
    out = np.bincount(
        np.concatenate([(rows + lower).ravel(), (rows + upper).ravel()]),
        weights=np.concatenate([(p * w_lower).ravel(), (p * w_upper).ravel()]),
        minlength=t.shape[0] * n,
    ).reshape(t.shape[0], n)

    total = out.sum(axis=1, keepdims=True)
    drift = np.abs(total - 1.0)
    if np.any(drift > _RENORM_TOL):
        log.warning("renormalising projected mass (max drift %.3g)", float(drift.max()))
        out /= total
    return out.reshape(*batch_shape, n)


def bellman_target(
    probs: np.ndarray,
    r: float | np.ndarray,
    gamma: float,
    terminal: bool | np.ndarray,
    sup: Support,
) -> tuple[np.ndarray, np.ndarray]:
    """Shifted atoms ``r + gamma * z`` paired with the successor's probabilities.

    For terminal transitions every atom collapses onto ``r``, i.e. a unit mass
    at the immediate reward. Works on a single distribution or a batch.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    probs = np.asarray(probs, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)[..., None]
    cont = 1.0 - np.asarray(terminal, dtype=np.float64)[..., None]
    atoms = r + gamma * cont * sup.atoms
    return np.broadcast_to(atoms, probs.shape).copy(), probs
