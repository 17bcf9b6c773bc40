"""Pseudo-linear measurement pairs ``(z, H)`` for bearing and bearing-rate data.

Both constructions are exact for noise-free inputs: ``z == H @ x_true``.
The noise terms they induce depend on the unknown range and true bearing,
so estimators treat them as zero-mean with fixed weights.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import projector

BEARING = "bearing"
RATE = "rate"


@dataclass
class PseudoLinearMeasurement:
    z: np.ndarray
    H: np.ndarray
    kind: str
    observer_id: int = 0
    timestamp: float = 0.0

    def residual(self, x):
        return self.z - self.H @ np.asarray(x, dtype=float)

    def to_row(self):
        """Flat record: kind, observer_id, timestamp, z (3), H row-major (18)."""
        return [self.kind, int(self.observer_id), float(self.timestamp), *map(float, self.z),
                *map(float, self.H.ravel())]

    @classmethod
    def from_row(cls, row):
        if len(row) != 24:
            raise ValueError(f"expected 24 fields, got {len(row)}")
        kind = str(row[0])
        if kind not in (BEARING, RATE):
            raise ValueError(f"unknown measurement kind {kind!r}")
        vals = np.array([float(v) for v in row[3:]])
        return cls(z=vals[:3], H=vals[3:].reshape(3, 6), kind=kind,
                   observer_id=int(row[1]), timestamp=float(row[2]))


def bearing_blocks(g_tilde, observer_pos):
    """Arrays ``(z, H)`` of the bearing pseudo-measurement; broadcasts over leading axes."""
    P = projector(g_tilde)
    z = np.einsum("...ij,...j->...i", P, observer_pos)
    H = np.concatenate([P, np.zeros_like(P)], axis=-1)
    return z, H


def rate_blocks(g_tilde, h_tilde, observer_pos, observer_vel):
    """Arrays ``(z, H)`` of the bearing-rate pseudo-measurement.

    ``H = [-h g^T, P_g]`` and ``z = -h g^T p_i + P_g v_i``.
    """
    g_tilde = np.asarray(g_tilde, dtype=float)
    h_tilde = np.asarray(h_tilde, dtype=float)
    P = projector(g_tilde)
    hg = -h_tilde[..., :, None] * g_tilde[..., None, :]
    z = np.einsum("...ij,...j->...i", hg, observer_pos) + np.einsum(
        "...ij,...j->...i", P, observer_vel
    )
    H = np.concatenate([hg, P], axis=-1)
    return z, H


def pseudo_bearing(g_tilde, observer_pos, observer_id=0, timestamp=0.0):
    z, H = bearing_blocks(np.asarray(g_tilde, dtype=float), np.asarray(observer_pos, dtype=float))
    return PseudoLinearMeasurement(z, H, BEARING, observer_id, timestamp)


def pseudo_rate(g_tilde, h_tilde, observer_pos, observer_vel, observer_id=0, timestamp=0.0):
    z, H = rate_blocks(g_tilde, h_tilde, np.asarray(observer_pos, dtype=float),
                       np.asarray(observer_vel, dtype=float))
    return PseudoLinearMeasurement(z, H, RATE, observer_id, timestamp)
