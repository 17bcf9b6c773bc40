"""Bearing and bearing-rate geometry.

All functions operate on the trailing axis and broadcast over any leading
batch dimensions, so the same code serves a single observer and a whole
Monte Carlo batch.
"""

import numpy as np

COINCIDENT_TOL = 1e-9


class GeometryError(ValueError):
    pass


def unit_bearing(target_pos, observer_pos):
    """Return ``(g, r)``: the unit vector from observer to target and the range."""
    rel = np.asarray(target_pos, dtype=float) - np.asarray(observer_pos, dtype=float)
    r = np.linalg.norm(rel, axis=-1)
    if np.any(r <= COINCIDENT_TOL):
        raise GeometryError("target and observer positions coincide")
    return rel / r[..., None], r


def projector(g):
    """Orthogonal projector ``I - g g^T`` onto the plane normal to ``g``."""
    g = np.asarray(g, dtype=float)
    return np.eye(3) - g[..., :, None] * g[..., None, :]


def range_rate(g, rel_vel):
    return np.einsum("...i,...i->...", g, rel_vel)


def bearing_rate_true(g, r, rel_vel):
    """Time derivative of the bearing, ``P_g (v_T - v_i) / r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise GeometryError("range must be positive")
    g = np.asarray(g, dtype=float)
    rel_vel = np.asarray(rel_vel, dtype=float)
    radial = range_rate(g, rel_vel)
    return (rel_vel - radial[..., None] * g) / r[..., None]


def skew(w):
    """Cross-product matrix: ``skew(w) @ x == cross(w, x)``."""
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def rotation_derivative(R, w):
    """``R @ [w]x`` for a body-frame angular velocity ``w``."""
    return np.asarray(R, dtype=float) @ skew(w)


def axis_angle(axis, angle):
    """Rodrigues rotation matrix for a unit ``axis`` and ``angle`` in radians."""
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)[..., None, None]
    K = skew(axis)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def orthonormal_completion(g):
    """Two unit vectors ``(e1, e2)`` with ``(e1, e2, g)`` right-handed orthonormal."""
    g = np.asarray(g, dtype=float)
    # seed with the world axis least aligned with g
    idx = np.argmin(np.abs(g), axis=-1)
    seed = np.eye(3)[idx]
    e1 = seed - np.einsum("...i,...i->...", seed, g)[..., None] * g
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(g, e1)
    return e1, e2


def rotate_bearing(g, eps, theta):
    """Rotate ``g`` by ``eps`` about the unit axis at angle ``theta`` in the plane normal to ``g``.

    Deterministic core of :func:`perturb_bearing`; the rotation is applied as
    an explicit Rodrigues matrix so the result is exactly ``R_eps @ g``.
    """
    g = np.asarray(g, dtype=float)
    e1, e2 = orthonormal_completion(g)
    theta = np.asarray(theta, dtype=float)[..., None]
    axis = np.cos(theta) * e1 + np.sin(theta) * e2
    R = axis_angle(axis, eps)
    out = np.einsum("...ij,...j->...i", R, g)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def perturb_bearing(g, sigma_eps, rng):
    """Noisy bearing: rotation by ``eps ~ N(0, sigma_eps^2)`` about a random orthogonal axis."""
    g = np.asarray(g, dtype=float)
    if sigma_eps == 0:
        return g.copy()
    shape = g.shape[:-1]
    eps = rng.normal(0.0, sigma_eps, size=shape)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    return rotate_bearing(g, eps, theta)


def angle_between(a, b):
    """Unsigned angle between vectors, robust near 0 and pi."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    dot = np.einsum("...i,...i->...", a, b)
    return np.arctan2(cross, dot)
