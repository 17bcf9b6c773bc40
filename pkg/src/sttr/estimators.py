"""STT-R recursion and baseline estimators.

Two layers live here. The per-observer functions (``sttr_predict``,
``sttr_innovate``, ``sttr_correct``, ``ckf_update`` ...) follow the textbook
recursion one observer at a time and are the reference. The ``*Bank``
classes run the same algebra over arrays shaped ``(batch, n, ...)`` so a full
Monte Carlo batch advances one time step per call; tests pin the banks to the
reference functions.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import process_noise_cov
from .measurement import BEARING, RATE

log = logging.getLogger(__name__)

COND_LIMIT = 1e12
JITTER = 1e-9
# floor for r * sigma**2 so a zero-noise run keeps the Kalman baselines defined
VAR_FLOOR = 1e-12


class NumericalError(RuntimeError):
    pass


# -- parameters ----------------------------------------------------------------


@dataclass(frozen=True)
class SttrParams:
    """Weights of the recursive least-squares objective.

    ``zeta`` is the consensus weight given to each neighbour; the observer's
    own weight is ``1 - |N_i| * zeta`` so the weights over self and
    neighbours sum to one.
    """

    alpha: float = 1.328
    beta: float = 1.442
    gamma1: float = 8.1481
    gamma2: float = 6.0
    c1: float = 0.165
    c2: float = 0.032
    zeta: float = 0.25

    def __post_init__(self):
        for name in ("alpha", "beta", "c1", "c2", "zeta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("gamma1", "gamma2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def self_weight(self, n_neighbors):
        w = 1.0 - n_neighbors * self.zeta
        if w < -1e-12:
            raise ValueError(
                f"zeta={self.zeta} with {n_neighbors} neighbours leaves a negative self weight"
            )
        return max(w, 0.0)


STT_DEFAULTS = SttrParams(alpha=1.328, beta=0.0, gamma1=8.1481, gamma2=6.0, c1=0.354, c2=0.0,
                          zeta=0.25)
STTR_DEFAULTS = SttrParams()


@dataclass(frozen=True)
class KalmanParams:
    """Baseline Kalman tuning: measurement covariances ``r * sigma**2 * I`` and ``Q(q)``.

    ``r_h=None`` means the filter ignores bearing-rate data.
    """

    r_g: float
    q: float
    r_h: float | None = None
    zeta: float = 0.25
    p0: float = 100.0

    def __post_init__(self):
        if not (self.r_g > 0 and self.q > 0 and self.p0 > 0):
            raise ValueError("r_g, q and p0 must be positive")
        if self.r_h is not None and not self.r_h > 0:
            raise ValueError("r_h must be positive")
        if self.zeta < 0:
            raise ValueError("zeta must be nonnegative")


CKF_DEFAULTS = KalmanParams(r_g=0.984, r_h=6.354, q=8.96e-3)
CIKF_DEFAULTS = KalmanParams(r_g=1.135, q=1.48e-2, zeta=0.25)
CMKF_DEFAULTS = KalmanParams(r_g=3.543, q=6.96e-2, zeta=0.25)


# -- state ---------------------------------------------------------------------


@dataclass
class EstimatorState:
    x_hat: np.ndarray
    M_hat: np.ndarray
    observer_id: int = 0
    k: int = 0


@dataclass
class NeighborPacket:
    sender_id: int
    x_pred: np.ndarray
    measurements: list = field(default_factory=list)
    k: int = 0


def init_estimate(observer_pos, M0=None, observer_id=0):
    x = np.concatenate([np.asarray(observer_pos, dtype=float), np.zeros(3)])
    M = np.eye(6) if M0 is None else np.array(M0, dtype=float)
    return EstimatorState(x, M, observer_id, 0)


def init_central(observer_positions, P0=100.0):
    """CKF start: mean of the observer positions, zero velocity."""
    p = np.asarray(observer_positions, dtype=float).mean(axis=-2)
    x = np.concatenate([p, np.zeros(p.shape[:-1] + (3,))], axis=-1)
    return x, np.broadcast_to(P0 * np.eye(6), x.shape + (6,)).copy()


# -- linear algebra ------------------------------------------------------------


def _sym(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def _trace(M):
    return np.trace(M, axis1=-2, axis2=-1)


def spd_inv(M):
    """Inverse of a (batch of) symmetric positive-definite matrix.

    ``tr(M) tr(M^-1)`` bounds the condition number from above; members whose
    bound exceeds ``COND_LIMIT`` get ``JITTER * I`` added and a warning is
    logged. A matrix that still fails a Cholesky test raises
    :class:`NumericalError`.
    """
    M = _sym(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise NumericalError("non-finite matrix in inversion")
    try:
        out = np.linalg.inv(M)
    except np.linalg.LinAlgError:
        out = np.full_like(M, np.nan)
    bound = _trace(M) * _trace(out)
    bad = ~np.isfinite(bound) | (bound > COND_LIMIT) | (_trace(out) <= 0)
    if np.any(bad):
        log.warning("ill-conditioned matrix in %d member(s); adding jitter",
                    int(np.count_nonzero(bad)))
        M = M + JITTER * np.eye(M.shape[-1]) * bad[..., None, None]
        try:
            np.linalg.cholesky(M)
            out = np.linalg.inv(M)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("matrix is not positive definite") from exc
    return _sym(out)


def _mv(M, v):
    return np.einsum("...ij,...j->...i", M, v)


# -- STT-R, one observer -----------------------------------------------------------


def sttr_predict(state, model, gamma1):
    """``x- = A x``; ``M- = (A M A^T)^-1 / gamma1`` (information form)."""
    A = model.A
    x_pred = _mv(A, state.x_hat)
    M_pred = spd_inv(A @ state.M_hat @ A.T) / gamma1
    return replace(state, x_hat=x_pred, M_hat=M_pred, k=state.k + 1)


def sttr_innovate(predicted, measurements, neighbor_predictions, params):
    """Innovation terms ``(e_g, e_h, e_cons, S)`` for one observer.

    ``measurements`` holds the pseudo-linear pairs of the observer and its
    neighbours; ``neighbor_predictions`` holds the neighbours' predicted states.
    """
    x = predicted.x_hat
    e_g = np.zeros(6)
    e_h = np.zeros(6)
    S = np.eye(6)
    for m in measurements:
        if m.kind == BEARING:
            w = params.c1 * params.alpha
        elif m.kind == RATE:
            w = params.c2 * params.beta
        else:
            raise ValueError(f"unknown measurement kind {m.kind!r}")
        if w == 0:
            continue
        HtH = m.H.T @ m.H
        e = w * (m.H.T @ (m.z - m.H @ x))
        if m.kind == BEARING:
            e_g += e
        else:
            e_h += e
        S += w * HtH
    e_cons = np.zeros(6)
    for xj in neighbor_predictions:
        e_cons += params.zeta * (np.asarray(xj, dtype=float) - x)
    params.self_weight(len(neighbor_predictions))
    return e_g, e_h, e_cons, S


def sttr_correct(predicted, innovations, gamma2):
    """``M = (gamma2 M- + S)^-1``; ``x = x- + M (e_g + e_h + e_cons)``."""
    if not gamma2 > 0:
        raise ValueError("gamma2 must be positive")
    e_g, e_h, e_cons, S = innovations
    M = spd_inv(gamma2 * predicted.M_hat + S)
    x = predicted.x_hat + M @ (e_g + e_h + e_cons)
    return replace(predicted, x_hat=x, M_hat=M)


def sttr_step(state, model, measurements, neighbor_predictions, params, predicted=None):
    if predicted is None:
        predicted = sttr_predict(state, model, params.gamma1)
    innov = sttr_innovate(predicted, measurements, neighbor_predictions, params)
    return sttr_correct(predicted, innov, params.gamma2)


def stt_step(state, model, measurements, neighbor_predictions, params, predicted=None):
    """Bearing-only STT: the STT-R recursion with every rate term removed."""
    bearings = [m for m in measurements if m.kind == BEARING]
    return sttr_step(state, model, bearings, neighbor_predictions,
                     replace(params, c2=0.0), predicted=predicted)


def one_step_objective_minimizer(predicted, measurements, neighbor_predictions, params):
    """Direct minimiser of the one-step quadratic the correction should solve.

    Builds the normal equations of
    ``gamma2 |x - x-|^2_{M-} + sum w |z - H x|^2 + sum zeta |x_j- - x|^2``
    (self term included) and solves them; used as a test oracle.
    """
    xp = predicted.x_hat
    n_nb = len(neighbor_predictions)
    zeta_self = params.self_weight(n_nb)
    lhs = params.gamma2 * predicted.M_hat + zeta_self * np.eye(6)
    rhs = params.gamma2 * predicted.M_hat @ xp + zeta_self * xp
    for xj in neighbor_predictions:
        lhs = lhs + params.zeta * np.eye(6)
        rhs = rhs + params.zeta * np.asarray(xj, dtype=float)
    for m in measurements:
        w = params.c1 * params.alpha if m.kind == BEARING else params.c2 * params.beta
        lhs = lhs + w * m.H.T @ m.H
        rhs = rhs + w * m.H.T @ m.z
    return np.linalg.solve(lhs, rhs)


# -- Kalman baselines, one filter --------------------------------------------------


def kf_predict(x, P, model, q):
    A = model.A
    return _mv(A, x), _sym(A @ P @ np.swapaxes(A, -1, -2) + process_noise_cov(q, model.dt))


def ckf_update(x, P, H, z, R):
    """Gain-form Kalman update for a stacked measurement ``z = H x + v``, ``cov(v) = R``.

    Joseph form keeps ``P`` symmetric positive definite.
    """
    Ht = np.swapaxes(H, -1, -2)
    S = H @ P @ Ht + R
    try:
        K = np.swapaxes(np.linalg.solve(S, H @ P), -1, -2)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("innovation covariance is singular") from exc
    x_new = x + _mv(K, z - _mv(H, x))
    IKH = np.eye(P.shape[-1]) - K @ H
    P_new = IKH @ P @ np.swapaxes(IKH, -1, -2) + K @ R @ np.swapaxes(K, -1, -2)
    return x_new, _sym(P_new)


def stack_measurements(measurements, sigma_g, sigma_h, params):
    """Stack pseudo-linear pairs into ``(H, z, R)`` using the baseline's covariance model."""
    Hs, zs, rs = [], [], []
    for m in measurements:
        if m.kind == BEARING:
            var = max(params.r_g * sigma_g**2, VAR_FLOOR)
        elif params.r_h is not None:
            var = max(params.r_h * sigma_h**2, VAR_FLOOR)
        else:
            continue
        Hs.append(m.H)
        zs.append(m.z)
        rs.extend([var] * 3)
    return np.vstack(Hs), np.concatenate(zs), np.diag(rs)


def ckf_step(x, P, measurements, model, sigma_g, sigma_h, params=CKF_DEFAULTS):
    x, P = kf_predict(x, P, model, params.q)
    if not measurements:
        return x, P
    H, z, R = stack_measurements(measurements, sigma_g, sigma_h, params)
    return ckf_update(x, P, H, z, R)


def info_contribution(measurements, sigma_g, sigma_h, params):
    """Local information pair ``(U, u) = (sum H^T R^-1 H, sum H^T R^-1 z)``."""
    U = np.zeros((6, 6))
    u = np.zeros(6)
    for m in measurements:
        if m.kind == BEARING:
            var = max(params.r_g * sigma_g**2, VAR_FLOOR)
        elif params.r_h is not None:
            var = max(params.r_h * sigma_h**2, VAR_FLOOR)
        else:
            continue
        U += m.H.T @ m.H / var
        u += m.H.T @ m.z / var
    return U, u


def cmkf_step(priors, own_measurements, neighbors, model, sigma_g, sigma_h, n_total,
              params=CMKF_DEFAULTS):
    """Consensus on measurements, one exchange.

    ``priors`` is a list of ``(x, P)`` per node, ``own_measurements[i]`` the
    node's own pseudo-linear pairs and ``neighbors[i]`` its neighbour ids. The
    averaged measurement information is scaled by the network size
    ``n_total`` so that, over a complete graph, the update equals the central
    one.
    """
    preds = [kf_predict(x, P, model, params.q) for x, P in priors]
    contrib = [info_contribution(ms, sigma_g, sigma_h, params) for ms in own_measurements]
    out = []
    for i, (xp, Pp) in enumerate(preds):
        w_self = 1.0 - len(neighbors[i]) * params.zeta
        U = w_self * contrib[i][0]
        u = w_self * contrib[i][1]
        for j in neighbors[i]:
            U = U + params.zeta * contrib[j][0]
            u = u + params.zeta * contrib[j][1]
        Y = spd_inv(Pp) + n_total * U
        y = spd_inv(Pp) @ xp + n_total * u
        P = spd_inv(Y)
        out.append((P @ y, P))
    return out


def cikf_step(priors, own_measurements, neighbors, model, sigma_g, sigma_h,
              params=CIKF_DEFAULTS):
    """Consensus on information, one exchange.

    Each node folds its own measurements into its predicted information pair,
    then replaces the pair by the ``zeta``-weighted average over itself and
    its neighbours.
    """
    local = []
    for (x, P), ms in zip(priors, own_measurements):
        xp, Pp = kf_predict(x, P, model, params.q)
        Yp = spd_inv(Pp)
        U, u = info_contribution(ms, sigma_g, sigma_h, params)
        local.append((Yp + U, Yp @ xp + u))
    out = []
    for i in range(len(priors)):
        w_self = 1.0 - len(neighbors[i]) * params.zeta
        Y = w_self * local[i][0]
        y = w_self * local[i][1]
        for j in neighbors[i]:
            Y = Y + params.zeta * local[j][0]
            y = y + params.zeta * local[j][1]
        P = spd_inv(Y)
        out.append((P @ y, P))
    return out


# -- vectorised banks ---------------------------------------------------------------


def _gram(H, z, weight):
    """``(H^T H, H^T z)`` scaled by ``weight``; shapes (..., 6, 6) and (..., 6)."""
    Ht = np.swapaxes(H, -1, -2)
    return weight * (Ht @ H), weight * (Ht @ z[..., None])[..., 0]


def _mix(W, X):
    """``sum_j W[..., i, j] X[..., j, ...]`` for per-node arrays ``X``."""
    lead = X.shape[: W.ndim - 1]
    flat = X.reshape(lead + (-1,))
    return (W @ flat).reshape(X.shape)


def consensus_matrix(adjacency, zeta):
    """Weights ``Z[i, j]``: ``zeta`` for neighbours, ``1 - |N_i| zeta`` on the diagonal.

    ``adjacency`` excludes self and may carry leading batch axes.
    """
    adj = np.asarray(adjacency, dtype=float)
    Z = zeta * adj
    deg = adj.sum(axis=-1)
    self_w = 1.0 - deg * zeta
    if np.any(self_w < -1e-12):
        raise ValueError("consensus weights would be negative; reduce zeta")
    n = adj.shape[-1]
    return Z + np.maximum(self_w, 0.0)[..., None] * np.eye(n)


def _info_check(J):
    """Guard for information matrices that dominate ``I``.

    Their smallest eigenvalue is at least one, so the trace bounds the
    condition number.
    """
    tr = _trace(J)
    if not np.all(np.isfinite(tr)):
        raise NumericalError("non-finite information matrix")
    bad = tr > COND_LIMIT
    if np.any(bad):
        log.warning("ill-conditioned information matrix in %d member(s); adding jitter",
                    int(np.count_nonzero(bad)))
        J = J + JITTER * np.eye(6) * bad[..., None, None]
    return J


class SttrBank:
    """STT-R (or STT with ``use_rate=False``) for every observer of every trial.

    Carries the information matrix ``J = M^-1``: the prediction
    ``(A M A^T)^-1 / gamma1`` becomes ``A^-T J A^-1 / gamma1`` and the
    correction is one linear solve, which is the same recursion with one
    inversion fewer.
    """

    def __init__(self, positions, params, use_rate=True, M0=None):
        positions = np.asarray(positions, dtype=float)
        self.params = params if use_rate else replace(params, c2=0.0)
        self.use_rate = use_rate
        self.x = np.concatenate([positions, np.zeros_like(positions)], axis=-1)
        M0 = np.eye(6) if M0 is None else np.asarray(M0, dtype=float)
        self.J = np.broadcast_to(spd_inv(M0), self.x.shape + (6,)).copy()

    @property
    def M(self):
        return spd_inv(self.J)

    def step(self, model, adjacency, zg, Hg, zh=None, Hh=None):
        """Advance one step.

        ``adjacency[b, i, j]`` is true when ``j`` is a neighbour of ``i``
        (diagonal false); ``zg``/``Hg`` are shaped (B, n, 3) / (B, n, 3, 6).
        """
        p = self.params
        Ainv = np.linalg.inv(model.A)
        x_pred = self.x @ model.A.T
        J_pred = (Ainv.T @ self.J @ Ainv) / p.gamma1
        adj = np.asarray(adjacency, dtype=float)
        W = adj + np.eye(adj.shape[-1])  # sums run over self and neighbours
        G, b = _gram(Hg, zg, p.c1 * p.alpha)
        if self.use_rate and p.c2 * p.beta > 0:
            Gh, bh = _gram(Hh, zh, p.c2 * p.beta)
            G = G + Gh
            b = b + bh
        Gsum = _mix(W, G)
        e = _mix(W, b) - (Gsum @ x_pred[..., None])[..., 0]
        e = e + _mix(consensus_matrix(adj, p.zeta), x_pred) - x_pred
        J = _info_check(_sym(p.gamma2 * J_pred + Gsum + np.eye(6)))
        self.J = J
        self.x = x_pred + np.linalg.solve(J, e[..., None])[..., 0]
        return self.x


class CkfBank:
    """Central Kalman filter in information form; one estimate per trial."""

    def __init__(self, positions, params, sigma_g, sigma_h):
        self.params = params
        self.var_g = max(params.r_g * sigma_g**2, VAR_FLOOR)
        self.var_h = None if params.r_h is None else max(params.r_h * sigma_h**2, VAR_FLOOR)
        self.n = positions.shape[-2]
        self.x, self.P = init_central(positions, params.p0)

    def step(self, model, adjacency, zg, Hg, zh=None, Hh=None):
        p = self.params
        xp, Pp = kf_predict(self.x, self.P, model, p.q)
        Y = spd_inv(Pp)
        U, u = _gram(Hg, zg, 1.0 / self.var_g)
        Y = Y + U.sum(axis=-3)
        r = u.sum(axis=-2) - (U.sum(axis=-3) @ xp[..., None])[..., 0]
        if self.var_h is not None and Hh is not None:
            Uh, uh = _gram(Hh, zh, 1.0 / self.var_h)
            Y = Y + Uh.sum(axis=-3)
            r = r + uh.sum(axis=-2) - (Uh.sum(axis=-3) @ xp[..., None])[..., 0]
        self.P = spd_inv(Y)
        self.x = xp + (self.P @ r[..., None])[..., 0]
        B = self.x.shape[0]
        return np.broadcast_to(self.x[:, None, :], (B, self.n, 6))


class ConsensusKfBank:
    """CIKF (``mode='information'``) or CMKF (``mode='measurements'``), one exchange per step."""

    def __init__(self, positions, params, sigma_g, sigma_h, mode):
        if mode not in ("information", "measurements"):
            raise ValueError(f"unknown consensus mode {mode!r}")
        positions = np.asarray(positions, dtype=float)
        self.mode = mode
        self.params = params
        self.var_g = max(params.r_g * sigma_g**2, VAR_FLOOR)
        self.var_h = None if params.r_h is None else max(params.r_h * sigma_h**2, VAR_FLOOR)
        self.n = positions.shape[-2]
        self.x = np.concatenate([positions, np.zeros_like(positions)], axis=-1)
        self.P = np.broadcast_to(params.p0 * np.eye(6), self.x.shape + (6,)).copy()

    def step(self, model, adjacency, zg, Hg, zh=None, Hh=None):
        p = self.params
        xp, Pp = kf_predict(self.x, self.P, model, p.q)
        Yp = spd_inv(Pp)
        yp = (Yp @ xp[..., None])[..., 0]
        U, u = _gram(Hg, zg, 1.0 / self.var_g)
        if self.var_h is not None and Hh is not None:
            Uh, uh = _gram(Hh, zh, 1.0 / self.var_h)
            U = U + Uh
            u = u + uh
        Z = consensus_matrix(adjacency, p.zeta)
        if self.mode == "measurements":
            Y = Yp + self.n * _mix(Z, U)
            y = yp + self.n * _mix(Z, u)
        else:
            Y = _mix(Z, Yp + U)
            y = _mix(Z, yp + u)
        self.P = spd_inv(Y)
        self.x = (self.P @ y[..., None])[..., 0]
        return self.x
