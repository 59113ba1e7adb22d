"""Extended Kalman filter over the 8-state PK model with a theta-parametrized BIS output."""

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import CovarianceDegeneracyError, ParameterDomainError
from .pkpd import (
    E0_DEFAULT,
    N_STATES,
    DiscreteModel,
    PdParams,
    ThetaVector,
    bis_jacobian,
    bis_output,
)


def _is_symmetric(m: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(m - m.T)) <= tol * max(1.0, float(np.max(np.abs(m)))))


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


@dataclass(frozen=True, eq=False)
class EkfConfig:
    """Noise and initialization settings shared by every filter of a bank."""

    r1: np.ndarray
    r2: float
    x0: np.ndarray
    p0: np.ndarray

    def __post_init__(self):
        r1 = np.asarray(self.r1, dtype=float)
        p0 = np.asarray(self.p0, dtype=float)
        x0 = np.asarray(self.x0, dtype=float)
        if r1.shape != (N_STATES, N_STATES) or p0.shape != (N_STATES, N_STATES):
            raise ParameterDomainError("r1 and p0 must be 8x8")
        if x0.shape != (N_STATES,):
            raise ParameterDomainError("x0 must be an 8-vector")
        if not _is_symmetric(r1) or np.min(np.linalg.eigvalsh(r1)) < -1e-12:
            raise ParameterDomainError("r1 must be symmetric positive semi-definite")
        if not _is_symmetric(p0) or np.min(np.linalg.eigvalsh(p0)) <= 0:
            raise ParameterDomainError("p0 must be symmetric positive definite")
        if not self.r2 > 0:
            raise ParameterDomainError(f"r2={self.r2!r} must be > 0")
        object.__setattr__(self, 'r1', r1)
        object.__setattr__(self, 'p0', p0)
        object.__setattr__(self, 'x0', x0)

    @classmethod
    def diagonal(
        cls,
        q_propofol: float = 1e-4,
        q_remifentanil: float = 2e-3,
        r2: float = 1.0,
        p0: float = 1e-3,
    ) -> 'EkfConfig':
        r1 = np.diag([q_propofol] * 4 + [q_remifentanil] * 4)
        return cls(r1=r1, r2=r2, x0=np.zeros(N_STATES), p0=np.eye(N_STATES) * p0)


@dataclass(frozen=True, eq=False)
class EkfState:
    """Prior or posterior estimate of one filter, with the noise it was tuned with."""

    x_hat: np.ndarray
    p: np.ndarray
    theta: ThetaVector
    r1: np.ndarray
    r2: float
    e0: float = E0_DEFAULT

    @property
    def pd(self) -> PdParams:
        return PdParams(theta=self.theta, e0=self.e0)

    def predicted_bis(self) -> float:
        return bis_output(self.x_hat, self.pd)


def init_ekf_state(config: EkfConfig, theta: ThetaVector, e0: float = E0_DEFAULT) -> EkfState:
    return EkfState(
        x_hat=config.x0.copy(),
        p=config.p0.copy(),
        theta=theta,
        r1=config.r1,
        r2=float(config.r2),
        e0=e0,
    )


def ekf_correct(state: EkfState, y: float) -> Tuple[EkfState, float]:
    """Measurement update on the prior, then the non-negativity clamp.

    Returns the posterior and the innovation ``y - h(x_prior)``.
    """
    pd = state.pd
    x_prior = state.x_hat
    p_prior = state.p
    h = bis_jacobian(x_prior, pd)
    s = (h @ p_prior @ h.T).item() + state.r2
    if not np.isfinite(s) or s <= 0:
        raise CovarianceDegeneracyError(f"innovation covariance {s!r} is not positive")
    k = (p_prior @ h.T) / s
    innovation = float(y) - bis_output(x_prior, pd)
    x_post = x_prior + k[:, 0] * innovation
    p_post = _symmetrize(p_prior - k @ h @ p_prior)
    x_post = np.maximum(x_post, 0.0)
    return dataclasses.replace(state, x_hat=x_post, p=p_post), innovation


def ekf_predict_only(state: EkfState, u: Sequence[float], model: DiscreteModel) -> EkfState:
    """Time update ``x+ = A x + B u``, ``P+ = A P A' + R1``."""
    x_next = model.propagate(state.x_hat, u)
    p_next = _symmetrize(model.a @ state.p @ model.a.T + state.r1)
    return dataclasses.replace(state, x_hat=x_next, p=p_next)


def ekf_update(
    state: EkfState, y: float, u: Sequence[float], model: DiscreteModel
) -> Tuple[EkfState, float]:
    """Full recursion: correct with ``y``, clamp, then predict with ``u``."""
    posterior, innovation = ekf_correct(state, y)
    return ekf_predict_only(posterior, u, model), innovation


def ekf_step(
    state: EkfState, y: float, u_prev: Optional[Sequence[float]], model: DiscreteModel
) -> Tuple[EkfState, float]:
    """Closed-loop ordering: predict with the input held since the last sample, then correct.

    Returns the posterior at the current sample, which is what a controller
    plans from. ``u_prev`` is ``None`` on the first sample.
    """
    if u_prev is not None:
        state = ekf_predict_only(state, u_prev, model)
    return ekf_correct(state, y)
