"""Nonlinear MPC over the condensed effect-site prediction.

The PK part is linear, so the effect-site trajectories over the horizon are
``free + G u`` for each drug, with ``G`` move-blocked to ``n_u`` columns. Only
the Hill output is nonlinear. The cost

    sum_i |y_ref - BIS_i|^p + sum_j u_j' R u_j

is minimized over box-bounded, normalized inputs with L-BFGS-B using the
analytic gradient through ``G'``.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from ..errors import ParameterDomainError
from ..pkpd import (
    E0_DEFAULT,
    N_STATES,
    U_MAX_PROPOFOL,
    U_MAX_REMIFENTANIL,
    DiscreteModel,
    ThetaVector,
    hill_from_u,
    hill_slope_from_u,
)
from .base import ControlDecision

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MpcConfig:
    n: int = 30
    n_u: int = 30
    r: np.ndarray = field(default_factory=lambda: np.diag([6.0e5, 4.5e4]))
    ts: float = 2.0
    u_max: Tuple[float, float] = (U_MAX_PROPOFOL, U_MAX_REMIFENTANIL)
    exponent: float = 4.0
    max_iter: int = 100
    gtol: float = 1e-6
    time_budget: float = 0.5
    # cold-start guess as a fraction of u_max
    initial_fraction: float = 0.25

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterDomainError(f"n={self.n!r} must be an integer >= 1")
        if int(self.n_u) != self.n_u or not (1 <= self.n_u <= self.n):
            raise ParameterDomainError(f"n_u={self.n_u!r} must satisfy 1 <= n_u <= n={self.n}")
        r = np.asarray(self.r, dtype=float)
        if r.shape != (2, 2) or not np.allclose(r, r.T):
            raise ParameterDomainError("R must be a symmetric 2x2 matrix")
        if np.min(np.linalg.eigvalsh(r)) < -1e-12:
            raise ParameterDomainError("R must be positive semi-definite")
        object.__setattr__(self, 'r', r)
        if self.ts <= 0:
            raise ParameterDomainError(f"ts={self.ts!r} must be > 0")
        u_p, u_r = self.u_max
        if not (0 < u_p <= U_MAX_PROPOFOL and 0 < u_r <= U_MAX_REMIFENTANIL):
            raise ParameterDomainError(f"u_max={self.u_max!r} outside the infusion limits")
        object.__setattr__(self, 'u_max', (float(u_p), float(u_r)))
        if not self.exponent > 1:
            raise ParameterDomainError(f"exponent={self.exponent!r} must be > 1")
        if self.max_iter < 1 or self.gtol <= 0:
            raise ParameterDomainError("max_iter must be >= 1 and gtol > 0")
        if not (0.0 <= self.initial_fraction <= 1.0):
            raise ParameterDomainError("initial_fraction must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class PredictionMatrices:
    """Per drug: ``obs[d] @ x_d`` is the free effect-site response, ``g[d] @ u_d`` the forced one."""

    obs: np.ndarray  # (2, n, 4)
    g: np.ndarray  # (2, n, n_u)

    def effect_sites(self, x0: np.ndarray, u_p: np.ndarray, u_r: np.ndarray):
        ce_p = self.obs[0] @ x0[:4] + self.g[0] @ u_p
        ce_r = self.obs[1] @ x0[4:] + self.g[1] @ u_r
        return ce_p, ce_r


def build_prediction_matrices(model: DiscreteModel, n: int, n_u: int) -> PredictionMatrices:
    obs = np.zeros((2, n, 4))
    g = np.zeros((2, n, n_u))
    c = np.array([0.0, 0.0, 0.0, 1.0])
    for d in range(2):
        block = slice(4 * d, 4 * d + 4)
        a = model.a[block, block]
        b = model.b[block, d]
        row = c.copy()
        markov = np.empty(n)
        for i in range(n):
            markov[i] = row @ b
            row = row @ a
            obs[d, i] = row
        full = np.zeros((n, n))
        for i in range(n):
            full[i, : i + 1] = markov[i::-1]
        g[d] = full[:, :n_u]
        # inputs after the control horizon repeat the last move
        g[d, :, -1] += full[:, n_u:].sum(axis=1)
    return PredictionMatrices(obs=obs, g=g)


@dataclass(frozen=True)
class SolverStats:
    iterations: int
    evaluations: int
    projected_grad_norm: float
    cost: float
    wall_time: float
    converged: bool
    over_budget: bool
    message: str = ''


@dataclass(frozen=True, eq=False)
class MpcSolution:
    decision: ControlDecision
    plan: np.ndarray  # (n_u, 2)
    predicted_bis: np.ndarray  # (n,)
    stats: SolverStats


class _Problem:
    """Cost and gradient on the normalized decision vector ``z`` in [0, 1]^(2 n_u)."""

    def __init__(self, x0, theta, y_ref, e0, config, matrices):
        self.n_u = config.n_u
        self.u_max = np.array(config.u_max)
        self.r = config.r
        self.p = config.exponent
        self.theta = theta
        self.e0 = e0
        self.y_ref = y_ref
        self.free_p = matrices.obs[0] @ x0[:4]
        self.free_r = matrices.obs[1] @ x0[4:]
        self.g_p = matrices.g[0]
        self.g_r = matrices.g[1]
        self.scale = 1.0

    def inputs(self, z: np.ndarray) -> np.ndarray:
        return np.stack([z[: self.n_u], z[self.n_u :]], axis=1) * self.u_max

    def predict(self, uu: np.ndarray):
        ce_p = self.free_p + self.g_p @ uu[:, 0]
        ce_r = self.free_r + self.g_r @ uu[:, 1]
        u = np.maximum(ce_p / self.theta.c50p + ce_r / self.theta.c50r, 0.0)
        return u, hill_from_u(u, self.theta.gamma, self.e0)

    def raw(self, z: np.ndarray) -> Tuple[float, np.ndarray]:
        uu = self.inputs(z)
        u, bis = self.predict(uu)
        err = self.y_ref - bis
        abs_err = np.abs(err)
        track = float(np.sum(abs_err**self.p))
        # d|e|^p / dBIS = -p |e|^(p-1) sign(e)
        w = -self.p * abs_err ** (self.p - 1) * np.sign(err)
        w = w * hill_slope_from_u(u, self.theta.gamma, self.e0)
        pen = float(np.sum((uu @ self.r) * uu))
        grad_u = np.empty_like(uu)
        grad_u[:, 0] = self.g_p.T @ (w / self.theta.c50p)
        grad_u[:, 1] = self.g_r.T @ (w / self.theta.c50r)
        grad_u += 2.0 * uu @ self.r
        grad_z = grad_u * self.u_max
        return track + pen, np.concatenate([grad_z[:, 0], grad_z[:, 1]])

    def __call__(self, z: np.ndarray) -> Tuple[float, np.ndarray]:
        cost, grad = self.raw(z)
        return cost * self.scale, grad * self.scale


def _projected_grad_norm(z: np.ndarray, grad: np.ndarray) -> float:
    pg = grad.copy()
    pg[(z <= 0.0) & (grad > 0)] = 0.0
    pg[(z >= 1.0) & (grad < 0)] = 0.0
    return float(np.max(np.abs(pg))) if pg.size else 0.0


def sequence_cost(
    plan: np.ndarray,
    x0: np.ndarray,
    theta: ThetaVector,
    y_ref: float,
    config: MpcConfig,
    matrices: PredictionMatrices,
    e0: float = E0_DEFAULT,
) -> float:
    """Unscaled MPC cost of an ``(n_u, 2)`` plan in physical units."""
    problem = _Problem(np.asarray(x0, dtype=float), theta, float(y_ref), e0, config, matrices)
    u_max = np.array(config.u_max)
    plan = np.asarray(plan, dtype=float)
    return problem.raw(np.concatenate([plan[:, 0] / u_max[0], plan[:, 1] / u_max[1]]))[0]


def shift_plan(plan: np.ndarray) -> np.ndarray:
    """Drop the applied move and repeat the last one."""
    return np.vstack([plan[1:], plan[-1:]])


def mpc_solve(
    x0: np.ndarray,
    theta: ThetaVector,
    y_ref: float,
    config: MpcConfig,
    model: DiscreteModel,
    warm_start: Optional[np.ndarray] = None,
    e0: float = E0_DEFAULT,
    matrices: Optional[PredictionMatrices] = None,
) -> MpcSolution:
    """Solve one receding-horizon problem from the estimate ``x0``.

    ``warm_start`` is an ``(n_u, 2)`` plan in physical units (already shifted).
    The returned plan is never worse than the warm start or the zero plan.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (N_STATES,) or np.any(x0 < 0):
        raise ParameterDomainError("x0 must be a non-negative 8-vector")
    if not (0.0 < y_ref <= 100.0):
        raise ParameterDomainError(f"y_ref={y_ref!r} must lie in (0, 100]")
    if matrices is None:
        matrices = build_prediction_matrices(model, config.n, config.n_u)

    started = time.perf_counter()
    problem = _Problem(x0, theta, float(y_ref), e0, config, matrices)
    u_max = np.array(config.u_max)

    if warm_start is None:
        z_start = np.full(2 * config.n_u, config.initial_fraction)
    else:
        plan = np.clip(np.asarray(warm_start, dtype=float), 0.0, u_max)
        if plan.shape != (config.n_u, 2):
            raise ValueError(f"warm start must have shape ({config.n_u}, 2)")
        z_start = np.concatenate([plan[:, 0] / u_max[0], plan[:, 1] / u_max[1]])
    zero = np.zeros(2 * config.n_u)

    # the zero plan is stationary at a drug-free state; it is only compared after the descent
    start_cost = problem.raw(z_start)[0]
    zero_cost = problem.raw(zero)[0]
    problem.scale = 1.0 / max(min(start_cost, zero_cost), 1.0)

    result = minimize(
        problem,
        z_start,
        jac=True,
        method='L-BFGS-B',
        bounds=[(0.0, 1.0)] * (2 * config.n_u),
        options={'maxiter': config.max_iter, 'gtol': config.gtol, 'maxfun': 5 * config.max_iter},
    )
    z_best = np.clip(result.x, 0.0, 1.0)
    best_cost = problem.raw(z_best)[0]
    if not best_cost <= start_cost:
        z_best, best_cost = z_start, start_cost
    if zero_cost < best_cost:
        z_best, best_cost = zero, zero_cost
    grad = problem.raw(z_best)[1]
    wall = time.perf_counter() - started

    pg = _projected_grad_norm(z_best, grad * problem.scale)
    stats = SolverStats(
        iterations=int(result.nit),
        evaluations=int(result.nfev),
        projected_grad_norm=pg,
        cost=float(best_cost),
        wall_time=wall,
        converged=bool(result.success) or pg <= config.gtol,
        over_budget=wall > config.time_budget,
        message=str(result.message),
    )
    plan = problem.inputs(z_best)
    _, bis = problem.predict(plan)
    logger.debug(
        "mpc solve: cost=%.4g it=%d nfev=%d pg=%.2e converged=%s %.1f ms",
        stats.cost,
        stats.iterations,
        stats.evaluations,
        stats.projected_grad_norm,
        stats.converged,
        wall * 1000.0,
    )
    return MpcSolution(
        decision=ControlDecision.saturated(plan[0, 0], plan[0, 1]),
        plan=plan,
        predicted_bis=bis,
        stats=stats,
    )


class MpcController:
    """Holds the prediction matrices and the warm start between solves."""

    def __init__(self, config: MpcConfig, model: DiscreteModel, e0: float = E0_DEFAULT):
        if abs(model.ts - config.ts) > 1e-9:
            raise ParameterDomainError(
                f"prediction model ts={model.ts} does not match controller ts={config.ts}"
            )
        self.config = config
        self.model = model
        self.e0 = e0
        self.matrices = build_prediction_matrices(model, config.n, config.n_u)
        self._plan: Optional[np.ndarray] = None

    def reset(self) -> None:
        self._plan = None

    def solve(self, x0: np.ndarray, theta: ThetaVector, y_ref: float) -> MpcSolution:
        warm = None if self._plan is None else shift_plan(self._plan)
        solution = mpc_solve(
            x0, theta, y_ref, self.config, self.model, warm, self.e0, self.matrices
        )
        self._plan = solution.plan
        return solution
