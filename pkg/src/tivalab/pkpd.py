"""Propofol-remifentanil PK compartment model and BIS response surface.

Units: volumes in liters, clearances in liters/minute, rate constants in 1/minute.
Infusion rates enter in mg/s (propofol) and µg/s (remifentanil); concentrations
come out in µg/ml (propofol) and ng/ml (remifentanil). Sampling periods are in
seconds everywhere outside :func:`build_continuous_matrices`.
"""

import dataclasses
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import block_diag, expm

from .errors import InputDomainError, ParameterDomainError

SECONDS_PER_MINUTE = 60.0

# Upper infusion bounds
U_MAX_PROPOFOL = 6.67  # mg/s
U_MAX_REMIFENTANIL = 16.67  # µg/s

E0_DEFAULT = 97.4

# Positions of the effect-site concentrations in the stacked 8-state vector
IDX_PROPOFOL_EFFECT = 3
IDX_REMIFENTANIL_EFFECT = 7
N_STATES = 8


@dataclass(frozen=True)
class PkParams:
    """Four-compartment PK parameters for one drug."""

    v1: float
    v2: float
    v3: float
    cl1: float
    cl2: float
    cl3: float
    ke: float

    def __post_init__(self):
        for name in ('v1', 'v2', 'v3'):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise ParameterDomainError(f"PK volume {name}={val!r} must be > 0")
        for name in ('cl1', 'cl2', 'cl3', 'ke'):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise ParameterDomainError(f"PK rate {name}={val!r} must be >= 0")

    @property
    def k10(self) -> float:
        return self.cl1 / self.v1

    @property
    def k12(self) -> float:
        return self.cl2 / self.v1

    @property
    def k13(self) -> float:
        return self.cl3 / self.v1

    @property
    def k21(self) -> float:
        return self.cl2 / self.v2

    @property
    def k31(self) -> float:
        return self.cl3 / self.v3


@dataclass(frozen=True)
class ThetaVector:
    """PD parameters identified by the model bank: (C50p, C50r, gamma)."""

    c50p: float
    c50r: float
    gamma: float

    def __post_init__(self):
        for name in ('c50p', 'c50r', 'gamma'):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0:
                raise ParameterDomainError(f"theta.{name}={val!r} must be > 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.c50p, self.c50r, self.gamma])


@dataclass(frozen=True)
class PdParams:
    theta: ThetaVector
    e0: float = E0_DEFAULT

    def __post_init__(self):
        if not (0.0 < self.e0 <= 100.0):
            raise ParameterDomainError(f"E0={self.e0!r} must lie in (0, 100]")

    def with_theta(self, theta: ThetaVector) -> 'PdParams':
        return dataclasses.replace(self, theta=theta)


@dataclass(frozen=True)
class DrugState:
    """Blood, muscle, fat and effect-site concentrations of one drug."""

    x1: float
    x2: float
    x3: float
    x4: float

    @classmethod
    def from_vector(cls, x) -> 'DrugState':
        x = np.asarray(x, dtype=float)
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]))


def build_continuous_matrices(pk: PkParams) -> Tuple[np.ndarray, np.ndarray]:
    """Return ``(A, B)`` of the four-compartment model, A in 1/min, B in 1/L."""
    if not isinstance(pk, PkParams):
        raise ParameterDomainError("build_continuous_matrices expects PkParams")
    k10, k12, k13, k21, k31, ke = pk.k10, pk.k12, pk.k13, pk.k21, pk.k31, pk.ke
    a = np.array(
        [
            [-(k10 + k12 + k13), k12, k13, 0.0],
            [k21, -k21, 0.0, 0.0],
            [k31, 0.0, -k31, 0.0],
            [ke, 0.0, 0.0, -ke],
        ]
    )
    b = np.array([[1.0 / pk.v1], [0.0], [0.0], [0.0]])
    return a, b


def discretize(a: np.ndarray, b: np.ndarray, ts: float) -> Tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization.

    ``a`` is in 1/min and ``ts`` in seconds. The returned input matrix maps a
    per-second infusion rate held over ``ts`` onto the state increment.
    """
    if ts <= 0:
        raise ParameterDomainError(f"sampling period {ts!r} must be > 0")
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    n, m = a.shape[0], b.shape[1]
    if a.shape != (n, n) or b.shape[0] != n:
        raise ValueError(f"inconsistent shapes A{a.shape} B{b.shape}")
    t_min = ts / SECONDS_PER_MINUTE
    # expm([[A, B], [0, 0]] T) = [[Ad, int_0^T e^{As} ds B], [0, I]]
    block = np.zeros((n + m, n + m))
    block[:n, :n] = a
    block[:n, n:] = b
    phi = expm(block * t_min)
    a_disc = phi[:n, :n]
    b_disc = phi[:n, n:] * SECONDS_PER_MINUTE
    # roundoff below zero on a compartmental system
    a_disc = np.maximum(a_disc, 0.0)
    b_disc = np.maximum(b_disc, 0.0)
    return a_disc, b_disc


def stacked_matrices(
    pk_p: PkParams, pk_r: PkParams, ts: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Discretized decoupled 8-state system: 8x8 ``a_disc`` and 8x2 ``b_disc``."""
    ad_p, bd_p = discretize(*build_continuous_matrices(pk_p), ts)
    ad_r, bd_r = discretize(*build_continuous_matrices(pk_r), ts)
    return block_diag(ad_p, ad_r), block_diag(bd_p, bd_r)


def interaction_u(x_p4, x_r4, theta: ThetaVector):
    """Normalized interaction term U = x_p4/C50p + x_r4/C50r (array friendly)."""
    return np.asarray(x_p4) / theta.c50p + np.asarray(x_r4) / theta.c50r


def hill_from_u(u, gamma: float, e0: float):
    u = np.maximum(u, 0.0)
    return e0 / (1.0 + np.power(u, gamma))


def hill_slope_from_u(u, gamma: float, e0: float):
    """dBIS/dU, guarded to 0 at exactly U = 0."""
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    positive = u > 0
    safe = np.where(positive, u, 1.0)
    ug = np.power(safe, gamma)
    slope = -e0 * gamma * ug / safe / (1.0 + ug) ** 2
    return np.where(positive, slope, 0.0)


def bis_output(x, pd: PdParams) -> float:
    """BIS = E0 (1 - U^g / (1 + U^g)) at the stacked state ``x``."""
    x = np.asarray(x, dtype=float)
    u = interaction_u(x[IDX_PROPOFOL_EFFECT], x[IDX_REMIFENTANIL_EFFECT], pd.theta)
    return float(hill_from_u(u, pd.theta.gamma, pd.e0))


def bis_jacobian(x, pd: PdParams) -> np.ndarray:
    """Analytic 1x8 gradient of :func:`bis_output` with respect to the state."""
    x = np.asarray(x, dtype=float)
    theta = pd.theta
    u = interaction_u(x[IDX_PROPOFOL_EFFECT], x[IDX_REMIFENTANIL_EFFECT], theta)
    slope = float(hill_slope_from_u(u, theta.gamma, pd.e0))
    h = np.zeros((1, N_STATES))
    h[0, IDX_PROPOFOL_EFFECT] = slope / theta.c50p
    h[0, IDX_REMIFENTANIL_EFFECT] = slope / theta.c50r
    return h


def check_inputs(u_p: float, u_r: float) -> None:
    if not (0.0 <= u_p <= U_MAX_PROPOFOL):
        raise InputDomainError(f"propofol rate {u_p!r} mg/s outside [0, {U_MAX_PROPOFOL}]")
    if not (0.0 <= u_r <= U_MAX_REMIFENTANIL):
        raise InputDomainError(
            f"remifentanil rate {u_r!r} µg/s outside [0, {U_MAX_REMIFENTANIL}]"
        )


@dataclass(frozen=True, eq=False)
class PatientModel:
    """One virtual patient discretized at ``ts`` seconds."""

    pk_p: PkParams
    pk_r: PkParams
    pd: PdParams
    ts: float
    state: np.ndarray
    a_disc: np.ndarray
    b_disc: np.ndarray

    @classmethod
    def build(
        cls,
        pk_p: PkParams,
        pk_r: PkParams,
        pd: PdParams,
        ts: float,
        state: Optional[np.ndarray] = None,
    ) -> 'PatientModel':
        a_disc, b_disc = stacked_matrices(pk_p, pk_r, ts)
        x0 = np.zeros(N_STATES) if state is None else np.asarray(state, dtype=float).copy()
        return cls(pk_p=pk_p, pk_r=pk_r, pd=pd, ts=ts, state=x0, a_disc=a_disc, b_disc=b_disc)

    @property
    def propofol(self) -> DrugState:
        return DrugState.from_vector(self.state[:4])

    @property
    def remifentanil(self) -> DrugState:
        return DrugState.from_vector(self.state[4:])

    def bis(self) -> float:
        return bis_output(self.state, self.pd)

    def advance(self, u_p: float, u_r: float, w: float = 0.0) -> Tuple['PatientModel', float]:
        """Value-semantics wrapper around :func:`step`."""
        x_next, measured = step(self, u_p, u_r, w)
        return dataclasses.replace(self, state=x_next), measured


def step(model: PatientModel, u_p: float, u_r: float, w: float = 0.0) -> Tuple[np.ndarray, float]:
    """One sampling period: returns ``(x(k+1), h(x(k)) + w)``."""
    check_inputs(u_p, u_r)
    x = np.asarray(model.state, dtype=float)
    measured = bis_output(x, model.pd) + w
    x_next = model.a_disc @ x + model.b_disc @ np.array([u_p, u_r])
    return x_next, measured


def steady_state(pk: PkParams, u: float) -> np.ndarray:
    """Equilibrium concentrations under a constant per-second infusion ``u``."""
    a, b = build_continuous_matrices(pk)
    return -np.linalg.solve(a, b[:, 0] * u * SECONDS_PER_MINUTE)


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    """Discretized 8-state PK system shared by estimators and predictors."""

    a: np.ndarray
    b: np.ndarray
    ts: float

    @classmethod
    def from_pk(cls, pk_p: PkParams, pk_r: PkParams, ts: float) -> 'DiscreteModel':
        a, b = stacked_matrices(pk_p, pk_r, ts)
        return cls(a=a, b=b, ts=ts)

    def propagate(self, x: np.ndarray, u) -> np.ndarray:
        return self.a @ x + self.b @ np.asarray(u, dtype=float)
