"""Discrete PID on propofol with remifentanil slaved at a fixed ratio.

Transfer function (backward Euler, filtered derivative):

    u = Kp (1 + Ts / (Ti (1 - z^-1)) + Td (1 - z^-1) / (Td/N (1 - z^-1) + Ts)) e

with ``e = BIS - setpoint`` so that a high BIS raises the infusion. The
derivative acts on the measurement. Conditional integration: while the error
pushes the output past the point where both channels saturate, the integral
only grows up to that point, so a persistent error pins the output at
(u_max_p, u_max_r).
"""

import dataclasses
from dataclasses import dataclass
from typing import Optional, Tuple

from ..errors import ParameterDomainError
from ..pkpd import U_MAX_PROPOFOL, U_MAX_REMIFENTANIL
from .base import ControlDecision


@dataclass(frozen=True)
class PidConfig:
    kp: float = 0.0354
    ti: float = 511.8
    td: float = 8.989
    n_filter: float = 5.0
    ratio: float = 2.0
    ts: float = 1.0

    def __post_init__(self):
        if self.kp < 0 or self.td < 0:
            raise ParameterDomainError("kp and td must be >= 0")
        if not self.ti > 0:
            raise ParameterDomainError(f"ti={self.ti!r} must be > 0")
        if not self.n_filter > 0 or not self.ts > 0:
            raise ParameterDomainError("n_filter and ts must be > 0")
        if not self.ratio > 0:
            raise ParameterDomainError(f"ratio={self.ratio!r} must be > 0")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    derivative: float = 0.0
    last_bis: Optional[float] = None


def pid_step(
    state: PidState, measured_bis: float, setpoint: float, config: PidConfig
) -> Tuple[ControlDecision, PidState]:
    error = measured_bis - setpoint
    last = measured_bis if state.last_bis is None else state.last_bis
    tf = config.td / config.n_filter
    derivative = (state.derivative * tf + config.td * (measured_bis - last)) / (config.ts + tf)
    integral = state.integral + config.ts / config.ti * error

    raw = config.kp * (error + integral + derivative)
    # propofol command at which the slaved remifentanil channel also saturates
    ceiling = max(U_MAX_PROPOFOL, U_MAX_REMIFENTANIL / config.ratio)
    if raw > ceiling and error > 0:
        integral = max(state.integral, ceiling / config.kp - error - derivative)
    elif raw < 0.0 and error < 0:
        integral = min(state.integral, -error - derivative)
    raw = config.kp * (error + integral + derivative)

    decision = ControlDecision.saturated(raw, config.ratio * raw)
    new_state = dataclasses.replace(
        state, integral=integral, derivative=derivative, last_bis=float(measured_bis)
    )
    return decision, new_state


class PidController:
    """Stateful wrapper used by the closed loop."""

    def __init__(self, config: PidConfig):
        self.config = config
        self.state = PidState()

    def reset(self) -> None:
        self.state = PidState()

    def step(self, measured_bis: float, setpoint: float) -> ControlDecision:
        decision, self.state = pid_step(self.state, measured_bis, setpoint, self.config)
        return decision
