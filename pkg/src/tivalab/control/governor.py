"""Integral action on the MPC internal reference after induction."""

import dataclasses
from dataclasses import dataclass

from ..errors import ParameterDomainError


@dataclass(frozen=True)
class ReferenceGovernor:
    y_ref: float
    k_i: float
    bis_target: float
    activation_time: float = 120.0

    def __post_init__(self):
        if not (0.0 < self.y_ref <= 100.0):
            raise ParameterDomainError(f"y_ref={self.y_ref!r} must lie in (0, 100]")
        if self.k_i < 0:
            raise ParameterDomainError(f"k_i={self.k_i!r} must be >= 0")

    @classmethod
    def start(
        cls, bis_target: float, k_i: float, activation_time: float = 120.0
    ) -> 'ReferenceGovernor':
        return cls(y_ref=bis_target, k_i=k_i, bis_target=bis_target, activation_time=activation_time)

    def advance(self, measured_bis: float, t: float) -> 'ReferenceGovernor':
        y_ref = governor_step(self, measured_bis, t)
        # keep the (0, 100] invariant when the integrator pins the lower clamp
        return dataclasses.replace(self, y_ref=max(y_ref, 1e-6))


def governor_step(gov: ReferenceGovernor, measured_bis: float, t: float) -> float:
    """y_ref(k+1) = y_ref(k) + k_i (target - BIS(k)) once ``t`` reaches activation."""
    if t < gov.activation_time:
        return gov.bis_target
    y_ref = gov.y_ref + gov.k_i * (gov.bis_target - measured_bis)
    return min(max(y_ref, 0.0), 100.0)


@dataclass(frozen=True)
class GovernorConfig:
    k_i: float = 0.02
    activation_time: float = 120.0

    def __post_init__(self):
        if self.k_i < 0:
            raise ParameterDomainError(f"k_i={self.k_i!r} must be >= 0")
        if self.activation_time < 0:
            raise ParameterDomainError("activation_time must be >= 0")

    def start(self, bis_target: float) -> ReferenceGovernor:
        return ReferenceGovernor.start(bis_target, self.k_i, self.activation_time)
