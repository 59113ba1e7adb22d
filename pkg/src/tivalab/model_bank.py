"""Bank of EKFs over a grid of PD candidates with model-matching selection.

Every filter shares the nominal PK matrices; candidates differ only in theta.
Each control step the bank updates all filters with the same measurement,
replays the last ``n_c`` samples open-loop from each filter's stored estimate,
scores the replay errors and switches the active candidate with hysteresis.
"""

import dataclasses
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from .errors import ParameterDomainError
from .estimation import EkfConfig, EkfState, ekf_step, init_ekf_state
from .pkpd import (
    E0_DEFAULT,
    IDX_PROPOFOL_EFFECT,
    IDX_REMIFENTANIL_EFFECT,
    DiscreteModel,
    ThetaVector,
)
from .population import PD_TABLE

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    """Per-axis quantile levels of the log-normal PD spreads."""

    c50p_quantiles: Tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9)
    c50r_quantiles: Tuple[float, ...] = (0.2, 0.5, 0.8)
    gamma_quantiles: Tuple[float, ...] = (0.2, 0.5, 0.8)
    c50p_sigma: float = PD_TABLE['c50p'][1]
    c50r_sigma: float = PD_TABLE['c50r'][1]
    gamma_sigma: float = PD_TABLE['gamma'][1]

    def __post_init__(self):
        for name in ('c50p_quantiles', 'c50r_quantiles', 'gamma_quantiles'):
            levels = tuple(getattr(self, name))
            if not levels:
                raise ParameterDomainError(f"grid axis {name} has no levels")
            if any(not (0.0 < q < 1.0) for q in levels):
                raise ParameterDomainError(f"grid axis {name} quantiles must lie in (0, 1)")
            object.__setattr__(self, name, levels)
        for name in ('c50p_sigma', 'c50r_sigma', 'gamma_sigma'):
            if getattr(self, name) < 0:
                raise ParameterDomainError(f"{name} must be >= 0")

    @classmethod
    def single(cls) -> 'GridSpec':
        return cls(c50p_quantiles=(0.5,), c50r_quantiles=(0.5,), gamma_quantiles=(0.5,))

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (len(self.c50p_quantiles), len(self.c50r_quantiles), len(self.gamma_quantiles))


@dataclass(frozen=True)
class ModelGrid:
    thetas: Tuple[ThetaVector, ...]
    spec: GridSpec
    base: ThetaVector

    def __len__(self) -> int:
        return len(self.thetas)

    @property
    def nominal_index(self) -> int:
        """Index of the candidate closest to ``base`` in log space."""
        target = np.log(self.base.as_array())
        dists = [float(np.sum((np.log(t.as_array()) - target) ** 2)) for t in self.thetas]
        return int(np.argmin(dists))

    def index_of(self, theta: ThetaVector, rtol: float = 1e-9) -> Optional[int]:
        for i, cand in enumerate(self.thetas):
            if np.allclose(cand.as_array(), theta.as_array(), rtol=rtol, atol=0.0):
                return i
        return None


def _axis(nominal: float, sigma: float, quantiles: Sequence[float]) -> List[float]:
    return [float(nominal * np.exp(sigma * norm.ppf(q))) for q in quantiles]


def build_grid(base: ThetaVector, spec: Optional[GridSpec] = None) -> ModelGrid:
    """Cartesian grid over (C50p, C50r, gamma); gamma varies fastest."""
    spec = spec or GridSpec()
    c50p = _axis(base.c50p, spec.c50p_sigma, spec.c50p_quantiles)
    c50r = _axis(base.c50r, spec.c50r_sigma, spec.c50r_quantiles)
    gamma = _axis(base.gamma, spec.gamma_sigma, spec.gamma_quantiles)
    thetas = tuple(ThetaVector(p, r, g) for p, r, g in itertools.product(c50p, c50r, gamma))
    return ModelGrid(thetas=thetas, spec=spec, base=base)


@dataclass(frozen=True)
class SelectorConfig:
    n_c: int = 30
    alpha: float = 0.0
    beta: float = 1.0
    lam: float = 0.05
    delta: float = 30.0

    def __post_init__(self):
        if int(self.n_c) != self.n_c or self.n_c < 1:
            raise ParameterDomainError(f"n_c={self.n_c!r} must be an integer >= 1")
        if self.alpha < 0 or self.beta < 0:
            raise ParameterDomainError("alpha and beta must be >= 0")
        if not self.lam > 0:
            raise ParameterDomainError(f"lambda={self.lam!r} must be > 0")
        if self.delta < 0:
            raise ParameterDomainError(f"delta={self.delta!r} must be >= 0")


def weighted_criterion(errors, config: SelectorConfig) -> np.ndarray:
    """J = alpha e(k)^2 + beta sum_l exp(-lambda l) e(k-l)^2.

    ``errors`` is ordered oldest to newest along its last axis; leading axes
    (one per candidate) are kept.
    """
    errors = np.asarray(errors, dtype=float)
    length = errors.shape[-1]
    if length < 1:
        raise ValueError("criterion needs at least one sample")
    lags = np.arange(length - 1, -1, -1, dtype=float)
    weights = np.exp(-config.lam * lags)
    sq = errors**2
    return config.alpha * sq[..., -1] + config.beta * np.sum(weights * sq, axis=-1)


@dataclass(frozen=True, eq=False)
class HistoryEntry:
    """One bank sample: posterior of every filter, the measurement, and the
    input held over the interval that ended at this sample."""

    estimates: np.ndarray
    y: float
    u_in: Optional[np.ndarray]


def replay_errors(
    x_start: np.ndarray,
    inputs: Sequence[np.ndarray],
    measurements: Sequence[float],
    thetas: Sequence[ThetaVector],
    model: DiscreteModel,
    e0: float = E0_DEFAULT,
) -> np.ndarray:
    """Open-loop replay from ``x_start`` (one row per candidate).

    ``inputs[j]`` drives the transition into ``measurements[j + 1]``. Returns
    ``h(x(l), theta_i) - y(l)`` with shape ``(candidates, len(measurements))``.
    """
    x = np.atleast_2d(np.asarray(x_start, dtype=float))
    c50p = np.array([t.c50p for t in thetas])
    c50r = np.array([t.c50r for t in thetas])
    gamma = np.array([t.gamma for t in thetas])
    n_samples = len(measurements)
    errors = np.empty((x.shape[0], n_samples))
    for j in range(n_samples):
        u = np.maximum(x[:, IDX_PROPOFOL_EFFECT] / c50p + x[:, IDX_REMIFENTANIL_EFFECT] / c50r, 0.0)
        bis = e0 / (1.0 + np.power(u, gamma))
        errors[:, j] = bis - measurements[j]
        if j < n_samples - 1:
            x = x @ model.a.T + model.b @ np.asarray(inputs[j], dtype=float)
    return errors


def criterion(
    x_start: np.ndarray,
    inputs: Sequence[np.ndarray],
    measurements: Sequence[float],
    theta: ThetaVector,
    config: SelectorConfig,
    model: DiscreteModel,
    e0: float = E0_DEFAULT,
) -> float:
    """Model-matching criterion of one candidate over the stored window."""
    errors = replay_errors(x_start, inputs, measurements, [theta], model, e0)
    return float(weighted_criterion(errors, config)[0])


@dataclass(frozen=True, eq=False)
class BankState:
    grid: ModelGrid
    filters: Tuple[EkfState, ...]
    history: Deque[HistoryEntry]
    selected: int
    criteria: np.ndarray
    model: DiscreteModel
    selector: SelectorConfig
    n_steps: int = 0
    switches: int = field(default=0)

    @property
    def active_theta(self) -> ThetaVector:
        return self.grid.thetas[self.selected]

    @property
    def active_filter(self) -> EkfState:
        return self.filters[self.selected]


def init_bank(
    grid: ModelGrid,
    ekf_config: EkfConfig,
    model: DiscreteModel,
    selector: Optional[SelectorConfig] = None,
    e0: float = E0_DEFAULT,
    initial_index: Optional[int] = None,
) -> BankState:
    selector = selector or SelectorConfig()
    filters = tuple(init_ekf_state(ekf_config, theta, e0) for theta in grid.thetas)
    selected = grid.nominal_index if initial_index is None else int(initial_index)
    if not 0 <= selected < len(grid):
        raise ParameterDomainError(f"initial model index {selected} out of range")
    return BankState(
        grid=grid,
        filters=filters,
        history=deque(maxlen=selector.n_c + 1),
        selected=selected,
        criteria=np.zeros(len(grid)),
        model=model,
        selector=selector,
    )


def select_model(bank: BankState, config: SelectorConfig) -> int:
    """Hysteresis switching: move to the argmin only if it beats the incumbent by > delta."""
    best = int(np.argmin(bank.criteria))
    if bank.criteria[bank.selected] - bank.criteria[best] > config.delta:
        return best
    return bank.selected


def bank_criteria(bank: BankState, history: Sequence[HistoryEntry]) -> np.ndarray:
    start = history[0].estimates
    inputs = [entry.u_in for entry in list(history)[1:]]
    ys = [entry.y for entry in history]
    errors = replay_errors(start, inputs, ys, bank.grid.thetas, bank.model, bank.filters[0].e0)
    return weighted_criterion(errors, bank.selector)


def bank_step(
    bank: BankState, y: float, u_prev: Optional[Sequence[float]]
) -> Tuple[BankState, ThetaVector, EkfState]:
    """Advance every filter with the same ``(y, u_prev)``, rescore and select.

    ``u_prev`` is the input held since the previous call (``None`` on the first).
    Returns the new bank, the active theta and the active posterior.
    """
    u_arr = None if u_prev is None else np.asarray(u_prev, dtype=float)
    filters = tuple(ekf_step(f, y, u_arr, bank.model)[0] for f in bank.filters)

    history = deque(bank.history, maxlen=bank.selector.n_c + 1)
    history.append(
        HistoryEntry(estimates=np.stack([f.x_hat for f in filters]), y=float(y), u_in=u_arr)
    )
    stepped = dataclasses.replace(bank, filters=filters, history=history, n_steps=bank.n_steps + 1)
    stepped = dataclasses.replace(stepped, criteria=bank_criteria(stepped, history))

    selected = stepped.selected
    # no switching until a full window has been stored
    if stepped.n_steps > bank.selector.n_c:
        selected = select_model(stepped, bank.selector)
    if selected != stepped.selected:
        logger.info(
            "model switch %d -> %d (J %.3f -> %.3f)",
            stepped.selected,
            selected,
            stepped.criteria[stepped.selected],
            stepped.criteria[selected],
        )
        stepped = dataclasses.replace(stepped, selected=selected, switches=stepped.switches + 1)
    return stepped, stepped.active_theta, stepped.active_filter
