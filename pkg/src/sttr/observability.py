"""Rank analysis of the stacked bearing / bearing-rate observability matrix."""

from dataclasses import dataclass, field

import numpy as np

from .geometry import projector
from .measurement import bearing_blocks, rate_blocks

DEFAULT_TOL = 1e-9
PARALLEL_TOL = 1e-9


@dataclass
class ObservabilityReport:
    rank: int
    singular_values: np.ndarray
    full_rank: bool
    contributing_observers: list = field(default_factory=list)

    @property
    def margin(self):
        s = self.singular_values
        return float(s[-1] / s[0]) if s[0] > 0 else 0.0


def measurement_rows(g, h):
    """``[H_g; H_h]`` (6 x 6) built from exact geometry; z does not matter here."""
    zero = np.zeros(np.shape(g))
    _, Hg = bearing_blocks(g, zero)
    _, Hh = rate_blocks(g, h, zero, zero)
    return np.concatenate([Hg, Hh], axis=-2)


def observability_matrix(entries, k, model):
    """Stack ``w_ij H_g A^k`` and ``w_ij H_h A^k`` over ``(g_j, h_j, w_ij)`` entries."""
    if not entries:
        raise ValueError("observability matrix needs at least one entry")
    Ak = model.power(k)
    blocks = [w * measurement_rows(np.asarray(g, float), np.asarray(h, float)) @ Ak
              for g, h, w in entries]
    return np.vstack(blocks)


def singular_values6(Q):
    """The six singular values of a (batch of) n x 6 matrices, descending."""
    Q = np.asarray(Q, dtype=float)
    s = np.linalg.svd(Q, compute_uv=False)
    if s.shape[-1] < 6:
        pad = np.zeros(s.shape[:-1] + (6 - s.shape[-1],))
        s = np.concatenate([s, pad], axis=-1)
    return s


def numeric_rank(s, tol=DEFAULT_TOL):
    s = np.asarray(s, dtype=float)
    top = s[..., :1]
    return np.sum((s > tol * top) & (top > 0), axis=-1)


def is_observable(Q, tol=DEFAULT_TOL, contributing=None):
    Q = np.asarray(Q, dtype=float)
    if Q.shape[-1] != 6:
        raise ValueError("observability matrix must have 6 columns")
    s = singular_values6(Q)
    r = int(numeric_rank(s, tol))
    return ObservabilityReport(r, s, r == 6, list(contributing or []))


def projector_pair_rank(g1, g2, tol=DEFAULT_TOL):
    s = np.linalg.svd(projector(g1) + projector(g2), compute_uv=False)
    return int(numeric_rank(s, tol))


def is_parallel(g1, g2, tol=PARALLEL_TOL):
    return abs(float(np.dot(g1, g2))) >= 1.0 - tol


def batch_singular_values(g, h, adjacency, k, model):
    """Singular values of every observer's matrix for a batch of geometries.

    ``g``, ``h`` are (..., n, 3); ``adjacency`` is (..., n, n) without self
    loops. Rows of unavailable observers are zeroed (w_ij = 0), which leaves
    the singular values unchanged.
    """
    rows = measurement_rows(g, h) @ model.power(k)  # (..., n, 6, 6)
    n = rows.shape[-3]
    W = np.asarray(adjacency, dtype=float) + np.eye(n)  # (..., n, n)
    Q = W[..., :, :, None, None] * rows[..., None, :, :, :]  # (..., i, j, 6, 6)
    Q = Q.reshape(Q.shape[:-4] + (n, n * 6, 6))
    return singular_values6(Q)
