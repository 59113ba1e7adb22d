"""Control decision type shared by every controller."""

from dataclasses import dataclass

import numpy as np

from ..errors import InputDomainError
from ..pkpd import U_MAX_PROPOFOL, U_MAX_REMIFENTANIL


@dataclass(frozen=True)
class ControlDecision:
    """Propofol rate in mg/s and remifentanil rate in µg/s."""

    u_p: float
    u_r: float

    def __post_init__(self):
        if not (0.0 <= self.u_p <= U_MAX_PROPOFOL):
            raise InputDomainError(f"u_p={self.u_p!r} outside [0, {U_MAX_PROPOFOL}]")
        if not (0.0 <= self.u_r <= U_MAX_REMIFENTANIL):
            raise InputDomainError(f"u_r={self.u_r!r} outside [0, {U_MAX_REMIFENTANIL}]")

    @classmethod
    def zero(cls) -> 'ControlDecision':
        return cls(0.0, 0.0)

    @classmethod
    def saturated(cls, u_p: float, u_r: float) -> 'ControlDecision':
        """Clip both channels into their bounds."""
        return cls(
            float(np.clip(u_p, 0.0, U_MAX_PROPOFOL)), float(np.clip(u_r, 0.0, U_MAX_REMIFENTANIL))
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.u_p, self.u_r])
