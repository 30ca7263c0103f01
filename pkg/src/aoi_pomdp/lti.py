"""
LTI plant, sensor-side Kalman filter and remote error covariances.

The plant is

    x[k+1] = A x[k] + w[k],   w ~ N(0, R_w)
    y[k]   = C x[k] + v[k],   v ~ N(0, R_v)

and the smart sensor runs a standard predict/correct Kalman filter on it.
The remote estimator's covariance after ``q`` consecutive losses is tabulated
by :func:`aoi_cov_table`.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, NumericalError

log = logging.getLogger(__name__)

COV_TOL = 1e-10


def _as_matrix(name, value, shape=None):
    M = np.atleast_2d(np.asarray(value, dtype=float))
    if M.ndim != 2:
        raise ValueError(f"{name} must be a matrix, got array of shape {M.shape}")
    if shape is not None and M.shape != shape:
        raise ValueError(f"{name} has shape {M.shape}, expected {shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def check_covariance(name, M, tol=COV_TOL, definite=False):
    """Raise ValueError unless ``M`` is symmetric PSD (PD if ``definite``) within ``tol``."""
    M = np.asarray(M, dtype=float)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if np.max(np.abs(M - M.T), initial=0.0) > tol:
        raise ValueError(f"{name} is not symmetric")
    eig_min = np.linalg.eigvalsh(0.5 * (M + M.T)).min()
    if definite and eig_min <= 0.0:
        raise ValueError(f"{name} must be positive definite (min eigenvalue {eig_min:.3e})")
    if eig_min < -tol:
        raise ValueError(f"{name} must be positive semidefinite (min eigenvalue {eig_min:.3e})")


def psd_sqrt(M):
    """Principal square root of a symmetric PSD matrix.

    Unlike a Cholesky factor this works for singular ``M``, and unlike an
    arbitrary eigenvector basis it is unique, so sampled noise does not depend
    on the sign conventions of the LAPACK build.
    """
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    w = np.clip(w, 0.0, None)
    S = (V * np.sqrt(w)) @ V.T
    return 0.5 * (S + S.T)


@dataclass(frozen=True, eq=False)
class LtiModel:
    """Plant and sensor parameters.

    Matrices are coerced to 2-D float arrays; scalars are accepted for the
    one-dimensional case.
    """

    A: np.ndarray
    C: np.ndarray
    R_w: np.ndarray
    R_v: np.ndarray
    Sigma0: np.ndarray
    _w_factor: np.ndarray = field(init=False, repr=False, compare=False)
    _v_factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = _as_matrix("A", self.A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got shape {A.shape}")
        C = _as_matrix("C", self.C)
        if C.shape[1] != n:
            raise ValueError(f"C has shape {C.shape}, expected (m, {n})")
        m = C.shape[0]
        R_w = _as_matrix("R_w", self.R_w, (n, n))
        R_v = _as_matrix("R_v", self.R_v, (m, m))
        Sigma0 = _as_matrix("Sigma0", self.Sigma0, (n, n))
        check_covariance("R_w", R_w)
        check_covariance("R_v", R_v, definite=True)
        check_covariance("Sigma0", Sigma0)
        for name, value in (("A", A), ("C", C), ("R_w", R_w), ("R_v", R_v), ("Sigma0", Sigma0)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "_w_factor", psd_sqrt(R_w))
        object.__setattr__(self, "_v_factor", psd_sqrt(R_v))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True, eq=False)
class PlantState:
    x: np.ndarray
    k: int = 0


@dataclass(frozen=True, eq=False)
class KalmanState:
    """Posterior estimate and covariance of the sensor filter."""

    x_hat: np.ndarray
    P: np.ndarray


@dataclass(frozen=True, eq=False)
class AoiCovTable:
    """Remote error covariance indexed by the number of slots since the last delivery."""

    entries: list
    traces: np.ndarray

    def __len__(self):
        return len(self.entries)


def initial_state(model: LtiModel, rng: np.random.Generator) -> PlantState:
    """Draw x[0] ~ N(0, Sigma0)."""
    return PlantState(psd_sqrt(model.Sigma0) @ rng.standard_normal(model.n), 0)


def initial_filter(model: LtiModel, x_hat0=None, P0=None) -> KalmanState:
    """Sensor filter initialisation; defaults to x_hat = 0, P = Sigma0."""
    x_hat = np.zeros(model.n) if x_hat0 is None else np.asarray(x_hat0, dtype=float).reshape(model.n)
    P = model.Sigma0 if P0 is None else _as_matrix("P0", P0, (model.n, model.n))
    check_covariance("P0", P)
    return KalmanState(x_hat, np.array(P))


def simulate_step(model: LtiModel, state: PlantState, rng: np.random.Generator):
    """Advance the plant one slot and measure it.

    Draws n process-noise then m measurement-noise standard normals from
    ``rng`` (always in that order, even for zero covariances).

    Returns:
        (PlantState, y)
    """
    w = model._w_factor @ rng.standard_normal(model.n)
    v = model._v_factor @ rng.standard_normal(model.m)
    x = model.A @ state.x + w
    y = model.C @ x + v
    return PlantState(x, state.k + 1), y


def _riccati(model: LtiModel, P):
    """One prediction/correction pass of the covariance recursion.

    Returns (P_prior, gain, P_posterior).
    """
    A, C = model.A, model.C
    P_prior = A @ P @ A.T + model.R_w
    S = C @ P_prior @ C.T + model.R_v
    try:
        # K = P⁻ Cᵀ S⁻¹, S symmetric
        K = np.linalg.solve(S, C @ P_prior).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError("innovation covariance is singular") from exc
    P_post = P_prior - K @ C @ P_prior
    return P_prior, K, 0.5 * (P_post + P_post.T)


def kf_step(model: LtiModel, state: KalmanState, y) -> KalmanState:
    """One predict/correct cycle of the sensor's Kalman filter."""
    _, K, P = _riccati(model, state.P)
    x_prior = model.A @ state.x_hat
    y = np.asarray(y, dtype=float).reshape(model.m)
    x_post = x_prior + K @ (y - model.C @ x_prior)
    return KalmanState(x_post, P)


def steady_state_covariance(model: LtiModel, tol: float = 1e-12, max_iter: int = 10000):
    """Fixed point of the posterior covariance recursion by forward iteration.

    Starts from Sigma0 and iterates until the max-abs change is at most
    ``tol``.

    Raises:
        ConvergenceError: if ``max_iter`` iterations do not reach ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    P = np.array(model.Sigma0)
    residual = np.inf
    for it in range(1, max_iter + 1):
        # divergence shows up as inf/nan and is reported below
        with np.errstate(over="ignore", invalid="ignore"):
            _, _, P_next = _riccati(model, P)
            residual = float(np.max(np.abs(P_next - P)))
        P = P_next
        if residual <= tol:
            log.debug("riccati converged: iter=%d residual=%.3e", it, residual)
            return P
        if not np.isfinite(residual):
            break
        log.debug("riccati iter=%d residual=%.3e", it, residual)
    raise ConvergenceError("Riccati iteration did not converge", last=P, residual=residual, iterations=it)


def propagated_covariance(model: LtiModel, P_start, q: int):
    """A^q P (A^q)ᵀ + Σ_{j<q} A^j R_w (A^j)ᵀ, written out term by term."""
    A = model.A
    Aq = np.linalg.matrix_power(A, q)
    out = Aq @ P_start @ Aq.T
    for j in range(q):
        Aj = np.linalg.matrix_power(A, j)
        out = out + Aj @ model.R_w @ Aj.T
    return 0.5 * (out + out.T)


def aoi_cov_table(model: LtiModel, P_bar, n_r: int) -> AoiCovTable:
    """Remote covariance for every AoI value 0..n_r, starting from ``P_bar``."""
    if n_r < 1:
        raise ValueError("n_r must be at least 1")
    P_bar = _as_matrix("P_bar", P_bar, (model.n, model.n))
    check_covariance("P_bar", P_bar)
    entries = [np.array(P_bar)] + [propagated_covariance(model, P_bar, q) for q in range(1, n_r + 1)]
    traces = np.array([np.trace(E) for E in entries])
    return AoiCovTable(entries, traces)


def remote_cov_recursion(model: LtiModel, P_prev, ack: int, P_sensor):
    """Remote error covariance after one slot: ``P_sensor`` on ACK, open-loop propagation otherwise."""
    if ack:
        return np.array(P_sensor, dtype=float)
    P = model.A @ np.asarray(P_prev, dtype=float) @ model.A.T + model.R_w
    return 0.5 * (P + P.T)
