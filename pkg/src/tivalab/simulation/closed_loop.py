"""Closed-loop induction simulation.

The true patient is integrated at the base rate. Controllers act on their own
tick (an integer multiple of the base step) and their decision is held over
the base steps in between.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Protocol, Tuple

import numpy as np
import pandas as pd

from ..control.base import ControlDecision
from ..control.mpc import MpcController
from ..control.pid import PidController
from ..errors import ParameterDomainError
from ..estimation import ekf_step, init_ekf_state
from ..model_bank import bank_step, build_grid, init_bank
from ..pkpd import N_STATES, DiscreteModel, ThetaVector, bis_output, stacked_matrices
from ..population import SampledPatient

if TYPE_CHECKING:
    from ..config import LabConfig

logger = logging.getLogger(__name__)

CONTROLLER_KINDS = ('pid', 'nmpc', 'mmpc')
NOISE_KINDS = ('none', 'gaussian')

TRACE_COLUMNS = (
    't_s',
    'bis_true',
    'bis_measured',
    'y_ref',
    'u_p_mg_s',
    'u_r_ug_s',
    'model_index',
    'solve_ms',
)


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = 'none'
    std: float = 3.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ParameterDomainError(f"noise kind {self.kind!r} not in {NOISE_KINDS}")
        if self.std < 0:
            raise ParameterDomainError(f"noise std={self.std!r} must be >= 0")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == 'gaussian':
            return rng.normal(0.0, self.std, n)
        return np.zeros(n)


@dataclass(frozen=True)
class ScenarioConfig:
    controller: str = 'mmpc'
    duration: float = 600.0
    control_ts: float = 2.0
    base_ts: float = 1.0
    bis_target: float = 50.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    band: Tuple[float, float] = (45.0, 55.0)

    def __post_init__(self):
        if self.controller not in CONTROLLER_KINDS:
            raise ParameterDomainError(
                f"controller {self.controller!r} not in {', '.join(CONTROLLER_KINDS)}"
            )
        if not self.duration > 0 or not self.base_ts > 0 or not self.control_ts > 0:
            raise ParameterDomainError("duration, base_ts and control_ts must be > 0")
        if not _divides(self.base_ts, self.control_ts):
            raise ParameterDomainError(
                f"control period {self.control_ts} s is not a multiple of the base step {self.base_ts} s"
            )
        if not _divides(self.control_ts, self.duration):
            raise ParameterDomainError(
                f"control period {self.control_ts} s does not divide duration {self.duration} s"
            )
        if not (0.0 < self.bis_target < 100.0):
            raise ParameterDomainError(f"bis_target={self.bis_target!r} must lie in (0, 100)")
        lo, hi = self.band
        if not lo < hi:
            raise ParameterDomainError(f"band {self.band!r} must be increasing")
        object.__setattr__(self, 'band', (float(lo), float(hi)))

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.base_ts))

    @property
    def hold(self) -> int:
        """Base steps per controller tick."""
        return int(round(self.control_ts / self.base_ts))


def _divides(step: float, total: float) -> bool:
    ratio = total / step
    return abs(ratio - round(ratio)) < 1e-9 and round(ratio) >= 1


def scenario_for(kind: str, config: 'LabConfig', **overrides) -> ScenarioConfig:
    """Base scenario with the controller kind and its sampling period filled in."""
    control_ts = config.pid.ts if kind == 'pid' else config.mpc.ts
    return dataclasses.replace(config.scenario, controller=kind, control_ts=control_ts, **overrides)


@dataclass(frozen=True)
class LoopOutput:
    decision: ControlDecision
    y_ref: float
    model_index: int = -1
    theta: Optional[ThetaVector] = None
    solve_time: float = 0.0
    converged: bool = True
    failed: bool = False


class LoopController(Protocol):
    def decide(self, measured_bis: float, t: float) -> LoopOutput: ...


class PidLoop:
    def __init__(self, config: 'LabConfig', bis_target: float):
        self.pid = PidController(config.pid)
        self.bis_target = bis_target

    def decide(self, measured_bis: float, t: float) -> LoopOutput:
        return LoopOutput(self.pid.step(measured_bis, self.bis_target), y_ref=self.bis_target)


class _MpcLoop:
    """Shared governor, warm start and failure fallback of the MPC pipelines."""

    def __init__(self, config: 'LabConfig', bis_target: float):
        pk_p, pk_r = config.uncertainty.nominal_pk()
        self.e0 = config.uncertainty.nominal_pd().e0
        self.model = DiscreteModel.from_pk(pk_p, pk_r, config.mpc.ts)
        self.mpc = MpcController(config.mpc, self.model, self.e0)
        self.governor = config.governor.start(bis_target)
        self.u_prev: Optional[np.ndarray] = None
        self.last = ControlDecision.zero()
        self.active: Tuple[ThetaVector, int] = (config.uncertainty.nominal_theta(), 0)

    def estimate(self, measured_bis: float) -> Tuple[np.ndarray, ThetaVector, int]:
        raise NotImplementedError

    def decide(self, measured_bis: float, t: float) -> LoopOutput:
        self.governor = self.governor.advance(measured_bis, t)
        try:
            x_hat, theta, index = self.estimate(measured_bis)
            self.active = (theta, index)
            solution = self.mpc.solve(x_hat, theta, self.governor.y_ref)
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            # estimator or solver failure; a failed estimator skips this sample
            logger.warning("controller failure at t=%.0f s, holding last input: %s", t, exc)
            self.u_prev = self.last.as_array()
            theta, index = self.active
            return LoopOutput(
                self.last, self.governor.y_ref, index, theta, converged=False, failed=True
            )
        self.last = solution.decision
        self.u_prev = solution.decision.as_array()
        return LoopOutput(
            decision=solution.decision,
            y_ref=self.governor.y_ref,
            model_index=index,
            theta=theta,
            solve_time=solution.stats.wall_time,
            converged=solution.stats.converged,
        )


class NmpcLoop(_MpcLoop):
    """Single EKF on the nominal patient feeding the MPC."""

    def __init__(self, config: 'LabConfig', bis_target: float):
        super().__init__(config, bis_target)
        self.theta = config.uncertainty.nominal_theta()
        self.ekf = init_ekf_state(config.ekf, self.theta, self.e0)

    def estimate(self, measured_bis: float):
        self.ekf, _ = ekf_step(self.ekf, measured_bis, self.u_prev, self.model)
        return self.ekf.x_hat, self.theta, 0


class MmpcLoop(_MpcLoop):
    """EKF bank with model-matching selection feeding the MPC."""

    def __init__(self, config: 'LabConfig', bis_target: float):
        super().__init__(config, bis_target)
        grid = build_grid(config.uncertainty.nominal_theta(), config.grid)
        self.bank = init_bank(grid, config.ekf, self.model, config.selector, self.e0)
        self.active = (self.bank.active_theta, self.bank.selected)

    def estimate(self, measured_bis: float):
        self.bank, theta, active = bank_step(self.bank, measured_bis, self.u_prev)
        return active.x_hat, theta, self.bank.selected


_LOOPS = {'pid': PidLoop, 'nmpc': NmpcLoop, 'mmpc': MmpcLoop}


def make_controller(kind: str, config: 'LabConfig', bis_target: float) -> LoopController:
    try:
        loop_cls = _LOOPS[kind]
    except KeyError:
        raise ParameterDomainError(f"unknown controller kind {kind!r}") from None
    return loop_cls(config, bis_target)


@dataclass(eq=False)
class RunTrace:
    controller: str
    patient_index: int
    seed: int
    t: np.ndarray
    states: np.ndarray
    bis_true: np.ndarray
    bis_measured: np.ndarray
    y_ref: np.ndarray
    u_p: np.ndarray
    u_r: np.ndarray
    model_index: np.ndarray
    solve_ms: np.ndarray
    theta: Optional[np.ndarray] = None
    solver_failures: int = 0
    non_converged: int = 0

    def __len__(self) -> int:
        return len(self.t)

    @property
    def base_ts(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 1.0

    @property
    def duration(self) -> float:
        return float(len(self.t) * self.base_ts)

    def drug_totals(self) -> Tuple[float, float]:
        """Total propofol (mg) and remifentanil (µg) infused."""
        return float(np.sum(self.u_p) * self.base_ts), float(np.sum(self.u_r) * self.base_ts)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                't_s': self.t,
                'bis_true': self.bis_true,
                'bis_measured': self.bis_measured,
                'y_ref': self.y_ref,
                'u_p_mg_s': self.u_p,
                'u_r_ug_s': self.u_r,
                'model_index': self.model_index,
                'solve_ms': self.solve_ms,
            },
            columns=list(TRACE_COLUMNS),
        )


def run_closed_loop(
    patient: SampledPatient,
    scenario: ScenarioConfig,
    seed: int,
    config: Optional['LabConfig'] = None,
    controller: Optional[LoopController] = None,
) -> RunTrace:
    """Simulate one induction; identical arguments give identical traces."""
    if config is None:
        from ..config import default_lab_config  # lazy import to avoid cycles

        config = default_lab_config()
    if controller is None:
        controller = make_controller(scenario.controller, config, scenario.bis_target)

    a_true, b_true = stacked_matrices(patient.pk_p, patient.pk_r, scenario.base_ts)
    n_steps, hold = scenario.n_steps, scenario.hold
    noise = scenario.noise.draw(np.random.default_rng(seed), n_steps)

    t = np.arange(n_steps) * scenario.base_ts
    states = np.zeros((n_steps, N_STATES))
    bis_true = np.zeros(n_steps)
    bis_measured = np.zeros(n_steps)
    y_ref = np.zeros(n_steps)
    u_p = np.zeros(n_steps)
    u_r = np.zeros(n_steps)
    model_index = np.full(n_steps, -1, dtype=int)
    solve_ms = np.zeros(n_steps)
    theta = np.full((n_steps, 3), np.nan)

    x = np.zeros(N_STATES)
    u = np.zeros(2)
    out: Optional[LoopOutput] = None
    failures = 0
    non_converged = 0
    for k in range(n_steps):
        states[k] = x
        bis_true[k] = bis_output(x, patient.pd)
        bis_measured[k] = bis_true[k] + noise[k]
        if k % hold == 0:
            out = controller.decide(bis_measured[k], t[k])
            u = out.decision.as_array()
            solve_ms[k] = out.solve_time * 1000.0
            failures += int(out.failed)
            non_converged += int(not out.converged)
        y_ref[k] = out.y_ref
        u_p[k], u_r[k] = u
        model_index[k] = out.model_index
        if out.theta is not None:
            theta[k] = out.theta.as_array()
        x = a_true @ x + b_true @ u

    if non_converged:
        logger.warning(
            "%s patient %d: %d of %d solves did not converge",
            scenario.controller,
            patient.index,
            non_converged,
            -(-n_steps // hold),
        )
    return RunTrace(
        controller=scenario.controller,
        patient_index=patient.index,
        seed=int(seed),
        t=t,
        states=states,
        bis_true=bis_true,
        bis_measured=bis_measured,
        y_ref=y_ref,
        u_p=u_p,
        u_r=u_r,
        model_index=model_index,
        solve_ms=solve_ms,
        theta=None if np.all(np.isnan(theta)) else theta,
        solver_failures=failures,
        non_converged=non_converged,
    )
