"""Synthetic pinhole camera: ground truth -> pixels -> world-frame bearing and rate.

The pixel stage stands in for a detector plus optical flow. Inputs broadcast
over leading axes so a whole batch of observers converts in one call.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, bearing_rate_true, projector, skew, unit_bearing


class BehindCameraError(GeometryError):
    pass


@dataclass(frozen=True)
class PinholeIntrinsics:
    K_pix_to_cam: np.ndarray

    @classmethod
    def from_focal(cls, focal=500.0, cx=320.0, cy=240.0):
        K = np.array([[focal, 0.0, cx], [0.0, focal, cy], [0.0, 0.0, 1.0]])
        return cls(np.linalg.inv(K))

    @property
    def K_cam_to_pix(self):
        return np.linalg.inv(self.K_pix_to_cam)

    @property
    def focal(self):
        return float(self.K_cam_to_pix[0, 0])


@dataclass
class PixelDetection:
    center: np.ndarray
    pixel_velocity: np.ndarray


@dataclass
class WorldMeasurement:
    g_tilde: np.ndarray
    h_tilde: np.ndarray
    timestamp: float = 0.0
    observer_id: int = 0


@dataclass(frozen=True)
class CameraNoise:
    """Pixel-domain noise stds plus gyro noise (rad/s, per axis)."""

    sigma_pixel: float = 0.0
    sigma_pixel_rate: float = 0.0
    sigma_gyro: float = 0.0

    @classmethod
    def from_angular(cls, focal, sigma_g, sigma_h, sigma_omega):
        # Near the optical axis one pixel subtends 1/focal radians. The bearing
        # error angle has RMS sigma_g in the angular path, so each of the two
        # pixel axes gets sigma_g / sqrt(2); rate noise is per tangent axis.
        return cls(focal * sigma_g / np.sqrt(2.0), focal * sigma_h, sigma_omega)


def _hom(xy, last):
    xy = np.asarray(xy, dtype=float)
    return np.concatenate([xy, np.full(xy.shape[:-1] + (1,), last)], axis=-1)


def _apply(M, v):
    return np.einsum("...ij,...j->...i", M, v)


def synthesize_detection(target_pos, target_vel, observer, intrinsics, noise=None, rng=None):
    """Pixel centre and pixel velocity of the target as seen by ``observer``."""
    g, r = unit_bearing(target_pos, observer.position)
    h = bearing_rate_true(g, r, np.asarray(target_vel, dtype=float) - observer.velocity)
    Rt = np.swapaxes(observer.R_cw, -1, -2)
    g_c = _apply(Rt, g)
    if np.any(g_c[..., 2] <= 0):
        raise BehindCameraError("target is behind the camera")
    # d/dt (R^T g) = -[w]x R^T g + R^T h
    gdot_c = _apply(Rt, h) - np.cross(observer.omega, g_c)
    depth = g_c[..., 2:3]
    d = g_c / depth
    ddot = (gdot_c - d * gdot_c[..., 2:3]) / depth
    K = intrinsics.K_cam_to_pix
    center = _apply(K, d)[..., :2]
    pix_vel = _apply(K, ddot)[..., :2]
    if noise is not None and rng is not None:
        if noise.sigma_pixel > 0:
            center = center + rng.normal(0.0, noise.sigma_pixel, size=center.shape)
        if noise.sigma_pixel_rate > 0:
            pix_vel = pix_vel + rng.normal(0.0, noise.sigma_pixel_rate, size=pix_vel.shape)
    return PixelDetection(center, pix_vel)


def pixel_to_bearing_cam(detection, intrinsics):
    ray = _apply(intrinsics.K_pix_to_cam, _hom(detection.center, 1.0))
    n = np.linalg.norm(ray, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise GeometryError("degenerate pixel ray")
    return ray / n


def bearing_cam_to_world(g_c, R_cw):
    return _apply(R_cw, g_c)


def pixel_velocity_to_rate_cam(detection, g_c, intrinsics):
    """Camera-frame bearing rate from the pixel velocity of the box centre.

    Differentiating ``g_c = d / |d|`` with ``d = K [x, y, 1]^T`` gives
    ``P_{g_c} K [vx, vy, 0]^T / |d|``; pixel velocities carry a zero
    homogeneous component.
    """
    K = intrinsics.K_pix_to_cam
    d = _apply(K, _hom(detection.center, 1.0))
    ddot = _apply(K, _hom(detection.pixel_velocity, 0.0))
    scale = np.linalg.norm(d, axis=-1, keepdims=True)
    return _apply(projector(g_c), ddot) / scale


def rate_cam_to_world(h_c, g_c, R_cw, omega):
    """World-frame rate ``P_g (R [w]x g_c + R h_c)``, projected with the measured bearing."""
    Rdot = np.asarray(R_cw) @ skew(omega)
    g_w = _apply(R_cw, g_c)
    return _apply(projector(g_w), _apply(Rdot, g_c) + _apply(R_cw, h_c))


def detection_to_world(detection, observer, intrinsics, gyro_noise=0.0, rng=None):
    """Full conversion: returns world-frame ``(g_tilde, h_tilde)``."""
    g_c = pixel_to_bearing_cam(detection, intrinsics)
    h_c = pixel_velocity_to_rate_cam(detection, g_c, intrinsics)
    omega = np.asarray(observer.omega, dtype=float)
    if gyro_noise > 0 and rng is not None:
        omega = omega + rng.normal(0.0, gyro_noise, size=omega.shape)
    return bearing_cam_to_world(g_c, observer.R_cw), rate_cam_to_world(
        h_c, g_c, observer.R_cw, omega
    )


def world_measurement(detection, observer, intrinsics, observer_id=0, timestamp=0.0):
    g, h = detection_to_world(detection, observer, intrinsics)
    return WorldMeasurement(g, h, timestamp, observer_id)
