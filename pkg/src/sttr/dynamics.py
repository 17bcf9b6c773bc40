"""Target transition model and ground-truth trajectories."""

from dataclasses import dataclass

import numpy as np

from .geometry import axis_angle, unit_bearing


@dataclass(frozen=True)
class TransitionModel:
    A: np.ndarray
    B: np.ndarray
    dt: float
    sigma_w: float = 0.0

    def power(self, k):
        """``A**k``; closed form since A is a double integrator."""
        Ak = np.eye(6)
        Ak[:3, 3:] = k * self.dt * np.eye(3)
        return Ak


@dataclass
class ObserverPose:
    position: np.ndarray
    velocity: np.ndarray
    R_cw: np.ndarray
    omega: np.ndarray


def make_transition(dt, sigma_w=0.0):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    I = np.eye(3)
    A = np.block([[I, dt * I], [np.zeros((3, 3)), I]])
    B = np.vstack([0.5 * dt**2 * I, dt * I])
    return TransitionModel(A=A, B=B, dt=float(dt), sigma_w=float(sigma_w))


def propagate(x, model, w=None):
    x = np.asarray(x, dtype=float)
    out = x @ model.A.T
    if w is not None:
        out = out + np.asarray(w, dtype=float) @ model.B.T
    return out


def process_noise_cov(q, dt):
    """Continuous white-acceleration covariance ``q [dt^3/3, dt^2/2; dt^2/2, dt] (x) I3``."""
    blk = np.array([[dt**3 / 3.0, dt**2 / 2.0], [dt**2 / 2.0, dt]])
    return q * np.kron(blk, np.eye(3))


# -- target trajectories ------------------------------------------------------


def eight_shape_velocity(t):
    t = np.asarray(t, dtype=float)
    return 10.0 * np.stack(
        [-np.sin(t * np.pi / 10.0), np.cos(t * np.pi / 5.0), np.zeros_like(t)], axis=-1
    )


def eight_shape_position(t, center=(0.0, 0.0, 0.0)):
    """Closed-form integral of :func:`eight_shape_velocity`, centred on ``center``."""
    t = np.asarray(t, dtype=float)
    x = (100.0 / np.pi) * np.cos(t * np.pi / 10.0)
    y = (50.0 / np.pi) * np.sin(t * np.pi / 5.0)
    return np.asarray(center, dtype=float) + np.stack([x, y, np.zeros_like(t)], axis=-1)


SQUARE_SPEED = 8.0
SQUARE_LEG = 5.0


def square_shape_velocity(t, speed=SQUARE_SPEED, leg=SQUARE_LEG):
    """Constant speed, heading +x first, turning 90 degrees left every ``leg`` seconds."""
    t = np.asarray(t, dtype=float)
    k = np.floor(t / leg).astype(int) % 4
    heading = k * (np.pi / 2.0)
    return speed * np.stack(
        [np.rint(np.cos(heading)), np.rint(np.sin(heading)), np.zeros_like(t)], axis=-1
    )


def square_shape_position(t, center=(0.0, 0.0, 0.0), speed=SQUARE_SPEED, leg=SQUARE_LEG):
    t = np.asarray(t, dtype=float)
    side = speed * leg
    corners = np.array(
        [[-0.5, -0.5, 0.0], [0.5, -0.5, 0.0], [0.5, 0.5, 0.0], [-0.5, 0.5, 0.0]]
    ) * side
    k = np.floor(t / leg).astype(int)
    tau = t - k * leg
    start = corners[k % 4]
    return np.asarray(center, dtype=float) + start + tau[..., None] * square_shape_velocity(
        t, speed, leg
    )


def constant_velocity_position(t, p0, v0):
    t = np.asarray(t, dtype=float)
    return np.asarray(p0, dtype=float) + t[..., None] * np.asarray(v0, dtype=float)


# -- observers -----------------------------------------------------------------


def look_at_rotation(g, up=(0.0, 0.0, 1.0)):
    """Camera-to-world rotation whose optical (third) axis is ``g``."""
    g = np.asarray(g, dtype=float)
    u = np.cross(np.asarray(up, dtype=float), g)
    n = np.linalg.norm(u, axis=-1, keepdims=True)
    if np.any(n < 1e-9):
        # looking straight along the up axis; use world x as the reference
        u = np.where(n < 1e-9, np.cross([1.0, 0.0, 0.0], g), u)
        n = np.linalg.norm(u, axis=-1, keepdims=True)
    x = u / n
    y = np.cross(g, x)
    return np.stack([x, y, g], axis=-1)


def look_at_angular_velocity(g, gdot, up=(0.0, 0.0, 1.0)):
    """Body-frame angular velocity of :func:`look_at_rotation` while ``g`` moves at ``gdot``."""
    g = np.asarray(g, dtype=float)
    gdot = np.asarray(gdot, dtype=float)
    up = np.asarray(up, dtype=float)
    R = look_at_rotation(g, up)
    x, y = R[..., 0], R[..., 1]
    u = np.cross(up, g)
    n = np.linalg.norm(u, axis=-1, keepdims=True)
    udot = np.cross(up, gdot)
    xdot = (udot - np.einsum("...i,...i->...", x, udot)[..., None] * x) / n
    w_world = np.cross(g, gdot) + np.einsum("...i,...i->...", xdot, y)[..., None] * g
    return np.einsum("...ji,...j->...i", R, w_world)


def circular_observer(t, center, radius, omega, phase, target=None, R_fixed=None):
    """Observer on a horizontal circle.

    ``target`` is an optional ``(p_T, v_T)`` pair. When given, the camera is an
    ideal gimbal whose optical axis points at the target; otherwise the
    attitude is fixed at ``R_fixed`` (identity by default) with zero rate.
    """
    if not np.all(np.asarray(radius) > 0):
        raise ValueError("radius must be positive")
    t = np.asarray(t, dtype=float)
    center = np.asarray(center, dtype=float)
    radius = np.asarray(radius, dtype=float)
    omega = np.asarray(omega, dtype=float)
    ang = omega * t + phase
    c, s = np.cos(ang), np.sin(ang)
    z = np.zeros_like(c)
    pos = center + radius[..., None] * np.stack([c, s, z], axis=-1)
    vel = (radius * omega)[..., None] * np.stack([-s, c, z], axis=-1)
    if target is None:
        R = np.broadcast_to(np.eye(3) if R_fixed is None else R_fixed, pos.shape + (3,)).copy()
        w = np.zeros_like(pos)
        return ObserverPose(pos, vel, R, w)
    p_T, v_T = target
    g, r = unit_bearing(p_T, pos)
    rel = np.asarray(v_T, dtype=float) - vel
    gdot = (rel - np.einsum("...i,...i->...", g, rel)[..., None] * g) / r[..., None]
    return ObserverPose(pos, vel, look_at_rotation(g), look_at_angular_velocity(g, gdot))


def integrate_rotation(R, omega, dt):
    """One exact step of ``Rdot = R [omega]x`` for constant body rate."""
    omega = np.asarray(omega, dtype=float)
    n = np.linalg.norm(omega)
    if n == 0:
        return np.asarray(R, dtype=float).copy()
    return np.asarray(R, dtype=float) @ axis_angle(omega / n, n * dt)

