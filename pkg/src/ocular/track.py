"""Kalman and box-constrained Kalman filtering of the iris centre, and the tracking loop."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .iris import LocalizationError


class ConstraintError(ValueError):
    pass


class TrackLost(RuntimeError):
    """Carries the points tracked so far and the frame where the track was dropped."""

    def __init__(self, msg: str, points=(), frame: int = -1):
        super().__init__(msg)
        self.points = list(points)
        self.frame = frame


@dataclass(frozen=True)
class KfModel:
    A: np.ndarray
    B: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    T: float

    @classmethod
    def constant_velocity(cls, fps: float, q=(1.0, 1.0, 4.0, 4.0), r=(4.0, 4.0, 16.0, 16.0)) -> "KfModel":
        """State (px, py, vx, vy); velocities in pixels per frame."""
        if fps <= 0:
            raise ValueError("fps must be positive")
        T = 1.0 / fps
        A = np.eye(4)
        A[0, 2] = A[1, 3] = 1.0
        B = np.array([[T, 0], [0, T], [T, 0], [0, T]], dtype=np.float64)
        return cls(A, B, np.eye(4), np.diag(np.asarray(q, float)), np.diag(np.asarray(r, float)), T)


@dataclass(frozen=True)
class KfState:
    x: np.ndarray
    P: np.ndarray


def _sym(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def kf_predict(model: KfModel, state: KfState, u=None) -> KfState:
    x = model.A @ state.x
    if u is not None:
        x = x + model.B @ np.asarray(u, float)
    return KfState(x, _sym(model.A @ state.P @ model.A.T + model.Q))


def kf_step(model: KfModel, state: KfState, z, u=None) -> KfState:
    """One-step predictor: gain, state and Riccati update."""
    A, H = model.A, model.H
    z = np.asarray(z, dtype=np.float64)
    if not np.isfinite(z).all():
        raise ValueError("measurement must be finite; use kf_predict for a missing frame")
    S = H @ state.P @ H.T + model.R
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError(f"innovation covariance is singular (cond {cond:.3g})")
    K = A @ state.P @ H.T @ np.linalg.inv(S)
    x = A @ state.x + K @ (z - H @ state.x)
    if u is not None:
        x = x + model.B @ np.asarray(u, float)
    P = (A - K @ H) @ state.P @ A.T + model.Q
    return KfState(x, _sym(P))


@dataclass(frozen=True)
class BoxConstraint:
    D: np.ndarray
    d_min: np.ndarray
    d_max: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, float))
        lo = np.atleast_1d(np.asarray(self.d_min, float))
        hi = np.atleast_1d(np.asarray(self.d_max, float))
        if D.shape[0] != lo.shape[0] or lo.shape != hi.shape:
            raise ConstraintError("D rows and bound lengths differ")
        if np.linalg.matrix_rank(D) < D.shape[0]:
            raise ConstraintError("D must have full row rank")
        if not (lo < hi).all():
            raise ConstraintError("infeasible box: need d_min < d_max")
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "d_min", lo)
        object.__setattr__(self, "d_max", hi)

    @classmethod
    def positions(cls, x_range, y_range, margin: float = 2.0, n: int = 4) -> "BoxConstraint":
        """Bounds on (px, py) only, widened by ``margin``."""
        D = np.zeros((2, n))
        D[0, 0] = D[1, 1] = 1.0
        return cls(D, [x_range[0] - margin, y_range[0] - margin], [x_range[1] + margin, y_range[1] + margin])

    def satisfied(self, x, tol: float = 1e-9) -> bool:
        v = self.D @ np.asarray(x, float)
        return bool(((v >= self.d_min - tol) & (v <= self.d_max + tol)).all())


def qp_objective(x_tilde, x_hat, P) -> float:
    """``x~' P^-1 x~ - 2 x^' P^-1 x~``."""
    W = np.linalg.inv(P)
    xt = np.asarray(x_tilde, float)
    return float(xt @ W @ xt - 2 * np.asarray(x_hat, float) @ W @ xt)


def project(x_hat, P, c: BoxConstraint) -> np.ndarray:
    """Minimizer of the P^-1-metric distance to ``x_hat`` over the box, by active-set enumeration."""
    x_hat = np.asarray(x_hat, float)
    if c.satisfied(x_hat, 0.0):
        return x_hat.copy()
    P = _sym(np.asarray(P, float))
    if np.linalg.eigvalsh(P).min() <= 1e-12:
        P = P + 1e-9 * np.eye(len(x_hat))
    W = np.linalg.inv(P)
    s = c.D.shape[0]
    best, best_f = None, np.inf
    # each row free (0), at its lower bound (1) or at its upper bound (2)
    for combo in itertools.product((0, 1, 2), repeat=s):
        act = [i for i in range(s) if combo[i]]
        if not act:
            continue
        Da = c.D[act]
        b = np.array([c.d_min[i] if combo[i] == 1 else c.d_max[i] for i in act])
        G = Da @ P @ Da.T
        x = x_hat - P @ Da.T @ np.linalg.solve(G, Da @ x_hat - b)
        if not c.satisfied(x, 1e-12):
            continue
        d = x - x_hat
        f = float(d @ W @ d)
        if f < best_f - 1e-15:
            best, best_f = x, f
    if best is None:
        raise ConstraintError("no feasible active set found")
    return best


def constrain(state: KfState, c: BoxConstraint) -> KfState:
    """Project the estimate onto the box; the covariance is left unchanged."""
    return KfState(project(state.x, state.P, c), state.P)


# ---------------------------------------------------------------------------
# filtering a measurement series

def velocity_measurements(pos: np.ndarray) -> np.ndarray:
    """(px, py, vx, vy) rows; velocity by frame differencing, zero on the first frame."""
    pos = np.asarray(pos, float)
    v = np.vstack([np.zeros((1, 2)), np.diff(pos, axis=0)])
    return np.hstack([pos, v])


def filter_series(model: KfModel, z: np.ndarray, constraint: BoxConstraint | None = None,
                  P0: np.ndarray | None = None) -> np.ndarray:
    """Filtered states for every row of ``z`` (rows with NaN are predict-only).

    Returns the estimate of the state at each measurement time.
    """
    z = np.asarray(z, float)
    first = next(i for i in range(len(z)) if np.isfinite(z[i]).all())
    state = KfState(z[first].copy(), model.R.copy() if P0 is None else np.asarray(P0, float))
    if constraint is not None:
        state = constrain(state, constraint)
    out = np.full((len(z), z.shape[1]), np.nan)
    out[first] = state.x
    for k in range(first + 1, len(z)):
        # the predictor form gives x(k|k-1); fold in z(k) through one more step
        state = kf_predict(model, state)
        if np.isfinite(z[k]).all():
            state = _filter_update(model, state, z[k])
        if constraint is not None:
            state = constrain(state, constraint)
        out[k] = state.x
    return out


def _filter_update(model: KfModel, state: KfState, z: np.ndarray) -> KfState:
    H = model.H
    S = H @ state.P @ H.T + model.R
    K = state.P @ H.T @ np.linalg.inv(S)
    x = state.x + K @ (z - H @ state.x)
    P = (np.eye(len(x)) - K @ H) @ state.P
    return KfState(x, _sym(P))


def settle_frame(est: np.ndarray, ref: np.ndarray, start: int, tol: float = 1.0, hold: int = 5) -> int:
    """First frame >= ``start`` opening a run of ``hold`` frames with |est - ref| <= ``tol``.

    ``ref`` is normally the same filter run on the measurements without the
    disturbance, so measurement noise common to both cancels.
    """
    err = np.abs(np.asarray(est, float) - np.asarray(ref, float))
    if err.ndim > 1:
        err = err.max(axis=1)
    ok = err <= tol
    for k in range(start, len(ok) - hold + 1):
        if ok[k:k + hold].all():
            return k
    return len(ok)


# ---------------------------------------------------------------------------
# tracking loop

@dataclass(frozen=True)
class TrackPoint:
    frame: int
    px: float
    py: float
    vx: float
    vy: float
    constrained: bool
    measured: bool


@dataclass
class TrackConfig:
    fps: float = 30.0
    verify_every: int = 6
    max_misses: int = 12
    gate: float = 8.0  # accepted distance from the prediction between verifications
    q: tuple = (1.0, 1.0, 4.0, 4.0)
    r: tuple = (4.0, 4.0, 16.0, 16.0)


def _point(c):
    if hasattr(c, "cx"):
        return float(c.cx), float(c.cy)
    return float(c[0]), float(c[1])


def track_iris(frames: Sequence[np.ndarray], detector: Callable, cfg: TrackConfig | None = None,
               constraint: BoxConstraint | None = None) -> list[TrackPoint]:
    """One TrackPoint per frame once the iris has been found.

    Between verification frames a detection is only used if it falls within
    ``cfg.gate`` pixels of the prediction; every ``verify_every``-th frame any
    detection is accepted. Frames before the first detection get NaN rows.
    """
    cfg = cfg or TrackConfig()
    model = KfModel.constant_velocity(cfg.fps, cfg.q, cfg.r)
    out: list[TrackPoint] = []
    state = None
    last_meas, last_k = None, 0
    misses = 0
    since_verify = 0
    for k, frame in enumerate(frames):
        try:
            meas = _point(detector(frame))
        except LocalizationError:
            meas = None
        if state is None:
            if meas is None:
                out.append(TrackPoint(k, np.nan, np.nan, np.nan, np.nan, False, False))
                continue
            state = KfState(np.array([meas[0], meas[1], 0.0, 0.0]), model.R.copy())
            last_meas, last_k = meas, k
            flag = False
            if constraint is not None:
                cs = constrain(state, constraint)
                flag = not np.array_equal(cs.x, state.x)
                state = cs
            out.append(TrackPoint(k, *map(float, state.x), flag, True))
            continue
        pred = kf_predict(model, state)
        since_verify += 1
        verify = since_verify >= cfg.verify_every
        if meas is not None and not verify:
            if np.hypot(meas[0] - pred.x[0], meas[1] - pred.x[1]) > cfg.gate:
                meas = None
        if verify:
            since_verify = 0
        if meas is None:
            misses += 1
            if misses >= cfg.max_misses:
                raise TrackLost(f"{misses} consecutive frames without a detection (frame {k})", out, k)
            state = pred
        else:
            misses = 0
            gap = k - last_k
            z = np.array([meas[0], meas[1], (meas[0] - last_meas[0]) / gap, (meas[1] - last_meas[1]) / gap])
            last_meas, last_k = meas, k
            state = _filter_update(model, pred, z)
        flag = False
        if constraint is not None:
            cs = constrain(state, constraint)
            flag = not np.array_equal(cs.x, state.x)
            state = cs
        out.append(TrackPoint(k, *map(float, state.x), flag, meas is not None))
    return out
