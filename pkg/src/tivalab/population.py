"""Virtual patient generation.

Variability enters only through log-normal perturbation of the nominal PK/PD
values: ``p = nominal * exp(sigma * z)``. Demographics are drawn uniformly and
carried as metadata.
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .errors import ParameterDomainError
from .pkpd import E0_DEFAULT, PdParams, PkParams, ThetaVector

PK_KEYS = ('v1', 'v2', 'v3', 'cl1', 'cl2', 'cl3', 'ke')
PD_KEYS = ('c50p', 'c50r', 'gamma', 'e0')

# (nominal, log std) for a 70 kg, 170 cm, 35 year old man
PROPOFOL_PK_TABLE: Dict[str, Tuple[float, float]] = {
    'v1': (4.27, 0.17),
    'v2': (25.94, 0.25),
    'v3': (238.0, 2.66),
    'cl1': (1.64, 0.16),
    'cl2': (1.72, 0.02),
    'cl3': (0.84, 0.10),
    'ke': (0.456, 0.19),
}

REMIFENTANIL_PK_TABLE: Dict[str, Tuple[float, float]] = {
    'v1': (5.22, 0.26),
    'v2': (10.26, 0.28),
    'v3': (5.42, 0.60),
    'cl1': (2.69, 0.14),
    'cl2': (2.20, 0.35),
    'cl3': (0.08, 0.39),
    'ke': (0.63, 0.62),
}

PD_TABLE: Dict[str, Tuple[float, float]] = {
    'c50p': (4.47, 0.18),
    'c50r': (19.3, 0.76),
    'gamma': (1.43, 0.30),
    'e0': (E0_DEFAULT, 0.0),
}

SEXES = ('male', 'female')


@dataclass(frozen=True)
class DemographicRanges:
    age: Tuple[float, float] = (18.0, 70.0)
    height: Tuple[float, float] = (150.0, 190.0)
    weight: Tuple[float, float] = (50.0, 100.0)

    def __post_init__(self):
        for name in ('age', 'height', 'weight'):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ParameterDomainError(f"demographic range {name}=({lo}, {hi}) is invalid")


@dataclass(frozen=True)
class Demographics:
    age: float
    height: float
    weight: float
    sex: str


def _check_table(name: str, table: Mapping[str, Tuple[float, float]], keys) -> None:
    missing = [k for k in keys if k not in table]
    if missing:
        raise ParameterDomainError(f"{name} table missing {', '.join(missing)}")
    for key in keys:
        nominal, sigma = table[key]
        if not nominal > 0:
            raise ParameterDomainError(f"{name}.{key} nominal {nominal!r} must be > 0")
        if not sigma >= 0:
            raise ParameterDomainError(f"{name}.{key} log std {sigma!r} must be >= 0")


@dataclass(frozen=True)
class UncertaintySpec:
    """Nominal values and log-standard-deviations of every sampled parameter.

    ``clamp_sigmas`` caps each draw at ``nominal * exp(+-clamp_sigmas * sigma)``;
    ``None`` samples the distribution unclamped.
    """

    propofol: Mapping[str, Tuple[float, float]] = field(
        default_factory=lambda: dict(PROPOFOL_PK_TABLE)
    )
    remifentanil: Mapping[str, Tuple[float, float]] = field(
        default_factory=lambda: dict(REMIFENTANIL_PK_TABLE)
    )
    pd: Mapping[str, Tuple[float, float]] = field(default_factory=lambda: dict(PD_TABLE))
    clamp_sigmas: Optional[float] = None
    demographics: DemographicRanges = field(default_factory=DemographicRanges)

    def __post_init__(self):
        _check_table('propofol', self.propofol, PK_KEYS)
        _check_table('remifentanil', self.remifentanil, PK_KEYS)
        _check_table('pd', self.pd, PD_KEYS)
        if self.pd['e0'][1] != 0:
            raise ParameterDomainError("E0 log std must be 0 (E0 is fixed)")
        if self.clamp_sigmas is not None and self.clamp_sigmas <= 0:
            raise ParameterDomainError("clamp_sigmas must be > 0 when set")

    @classmethod
    def published(cls) -> 'UncertaintySpec':
        return cls()

    @classmethod
    def clamped(cls, n_sigmas: float = 3.0) -> 'UncertaintySpec':
        return cls(clamp_sigmas=n_sigmas)

    def without_spread(self) -> 'UncertaintySpec':
        """Same nominals with every log std set to zero."""

        def zero(table):
            return {k: (v[0], 0.0) for k, v in table.items()}

        return dataclasses.replace(
            self,
            propofol=zero(self.propofol),
            remifentanil=zero(self.remifentanil),
            pd=zero(self.pd),
        )

    def nominal_theta(self) -> ThetaVector:
        return ThetaVector(self.pd['c50p'][0], self.pd['c50r'][0], self.pd['gamma'][0])

    def nominal_pk(self) -> Tuple[PkParams, PkParams]:
        pk_p = PkParams(**{k: self.propofol[k][0] for k in PK_KEYS})
        pk_r = PkParams(**{k: self.remifentanil[k][0] for k in PK_KEYS})
        return pk_p, pk_r

    def nominal_pd(self) -> PdParams:
        return PdParams(theta=self.nominal_theta(), e0=self.pd['e0'][0])


@dataclass(frozen=True)
class SampledPatient:
    index: int
    seed: int
    demographics: Demographics
    pk_p: PkParams
    pk_r: PkParams
    pd: PdParams

    @property
    def theta(self) -> ThetaVector:
        return self.pd.theta

    def with_theta(self, theta: ThetaVector) -> 'SampledPatient':
        return dataclasses.replace(self, pd=self.pd.with_theta(theta))


def patient_seed(master_seed: int, index: int) -> int:
    """Stable per-patient seed derived from ``(master_seed, index)``."""
    words = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2)
    return int(words[0]) << 32 | int(words[1])


def _draw(rng: np.random.Generator, table, keys, clamp: Optional[float]) -> Dict[str, float]:
    z = rng.standard_normal(len(keys))
    if clamp is not None:
        z = np.clip(z, -clamp, clamp)
    out = {}
    for key, zi in zip(keys, z):
        nominal, sigma = table[key]
        out[key] = float(nominal * np.exp(sigma * zi))
    return out


def _draw_demographics(rng: np.random.Generator, ranges: DemographicRanges) -> Demographics:
    age = float(rng.uniform(*ranges.age))
    height = float(rng.uniform(*ranges.height))
    weight = float(rng.uniform(*ranges.weight))
    sex = SEXES[int(rng.integers(0, 2))]
    return Demographics(age=age, height=height, weight=weight, sex=sex)


def sample_patient(spec: UncertaintySpec, seed: int, index: int = 0) -> SampledPatient:
    """Draw one patient; identical ``(spec, seed)`` gives identical parameters."""
    rng = np.random.default_rng(seed)
    demographics = _draw_demographics(rng, spec.demographics)
    prop = _draw(rng, spec.propofol, PK_KEYS, spec.clamp_sigmas)
    remi = _draw(rng, spec.remifentanil, PK_KEYS, spec.clamp_sigmas)
    pd = _draw(rng, spec.pd, PD_KEYS, spec.clamp_sigmas)
    theta = ThetaVector(pd['c50p'], pd['c50r'], pd['gamma'])
    return SampledPatient(
        index=index,
        seed=int(seed),
        demographics=demographics,
        pk_p=PkParams(**prop),
        pk_r=PkParams(**remi),
        pd=PdParams(theta=theta, e0=pd['e0']),
    )


def sample_cohort(n: int, spec: UncertaintySpec, master_seed: int) -> List[SampledPatient]:
    if n < 1:
        raise ParameterDomainError(f"cohort size {n!r} must be >= 1")
    return [sample_patient(spec, patient_seed(master_seed, i), index=i) for i in range(n)]


def nominal_patient(spec: Optional[UncertaintySpec] = None, seed: int = 0) -> SampledPatient:
    """The Table nominal patient (all spreads zero)."""
    spec = spec or UncertaintySpec.published()
    return sample_patient(spec.without_spread(), seed)
