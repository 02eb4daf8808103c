"""Physical constants, species, violation model and wave-packet/trap specs.

All quantities are SI. Value objects are frozen dataclasses.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

C_LIGHT = 299792458.0
HBAR = 1.054571817e-34
AMU = 1.66053906660e-27
G_EARTH = 9.81
SR88_MASS_U = 87.9056
SR88_OMEGA = 2.0 * math.pi * 429e12

DELTA_M_RATIO_WARN = 1e-6
BETA_LIMIT = 1e-2


class IntphaseError(Exception):
    """Base class for library errors."""


class ValidationError(IntphaseError, ValueError):
    """Invalid input parameters or configuration."""


class NumericalError(IntphaseError, RuntimeError):
    """Quadrature or integrator failure."""


class InvalidParametrization(ValidationError):
    """Raised when alpha is requested for a species without mass defect."""


class PerturbativeWarning(UserWarning):
    """Parameters outside the perturbative regime."""


def _finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValidationError(f"{name}: non-finite value {v!r}")


@dataclass(frozen=True)
class PhysicalConstants:
    c: float = C_LIGHT
    hbar: float = HBAR

    def __post_init__(self):
        _finite("constants", self.c, self.hbar)
        if self.c <= 0 or self.hbar <= 0:
            raise ValidationError("constants: c and hbar must be strictly positive")


CODATA = PhysicalConstants()


@dataclass(frozen=True)
class AtomSpecies:
    """Two-level atom with mean mass m and mass defect dm (m_b/a = m +- dm/2)."""

    mean_mass: float
    mass_defect: float
    label: str = ""
    constants: PhysicalConstants = CODATA

    def __post_init__(self):
        _finite("species", self.mean_mass, self.mass_defect)
        if self.mean_mass <= 0:
            raise ValidationError("species.mass: must be > 0")
        if self.mass_defect < 0:
            raise ValidationError("species.mass_defect: must be >= 0")
        if self.mass_defect / self.mean_mass >= DELTA_M_RATIO_WARN:
            warnings.warn(
                f"dm/m = {self.mass_defect / self.mean_mass:.3e} is not small; "
                "first-order treatment in dm may be inaccurate",
                PerturbativeWarning, stacklevel=3)

    @property
    def m(self) -> float:
        return self.mean_mass

    @property
    def dm(self) -> float:
        return self.mass_defect

    @property
    def clock_frequency(self) -> float:
        c = self.constants.c
        return self.mass_defect * c * c / self.constants.hbar

    @property
    def ratio(self) -> float:
        return self.mass_defect / self.mean_mass


def make_species(m: float, omega: float, label: str = "",
                 constants: PhysicalConstants = CODATA) -> AtomSpecies:
    """Species from mean mass (kg) and clock frequency (rad/s)."""
    _finite("make_species", m, omega)
    if m <= 0:
        raise ValidationError("species.mass: must be > 0")
    if omega < 0:
        raise ValidationError("species.omega: must be >= 0")
    dm = constants.hbar * omega / (constants.c * constants.c)
    return AtomSpecies(m, dm, label, constants)


def strontium88(constants: PhysicalConstants = CODATA) -> AtomSpecies:
    return make_species(SR88_MASS_U * AMU, SR88_OMEGA, "Sr-88", constants)


@dataclass(frozen=True)
class ViolationModel:
    """Dilaton couplings per internal state; state j falls with (1 + beta_j) g."""

    beta_a: float = 0.0
    beta_b: float = 0.0

    def __post_init__(self):
        _finite("violation", self.beta_a, self.beta_b)
        for name, b in (("beta_a", self.beta_a), ("beta_b", self.beta_b)):
            if abs(b) >= BETA_LIMIT:
                raise ValidationError(f"violation.{name}: |beta| must be < {BETA_LIMIT}")

    @property
    def delta_beta(self) -> float:
        return self.beta_b - self.beta_a

    def beta(self, lam: int) -> float:
        """beta of the state with lambda = +1 (b) or -1 (a)."""
        return self.beta_b if lam > 0 else self.beta_a

    @classmethod
    def from_alpha(cls, alpha: float, species: AtomSpecies, beta_a: float = 0.0) -> "ViolationModel":
        """Model with beta_b chosen so that m*dbeta/dm equals alpha."""
        return cls(beta_a, beta_a + alpha * species.ratio)


def violation_alpha(model: ViolationModel, species: AtomSpecies) -> float:
    """alpha = m * dbeta / dm."""
    if species.mass_defect == 0:
        raise InvalidParametrization("alpha is undefined for a species with dm = 0")
    return species.mean_mass * model.delta_beta / species.mass_defect


@dataclass(frozen=True)
class LabEnvironment:
    g: float = G_EARTH

    def __post_init__(self):
        _finite("environment.g", self.g)
        if self.g < 0:
            raise ValidationError("environment.g: must be >= 0")


@dataclass(frozen=True)
class WavePacketSpec:
    """Initial, branch-independent wave-packet variances."""

    var_z0: float
    var_p0: float
    cross_zp: float = 0.0
    hbar: float = HBAR

    def __post_init__(self):
        _finite("wavepacket", self.var_z0, self.var_p0, self.cross_zp)
        if self.var_z0 < 0 or self.var_p0 < 0:
            raise ValidationError("wavepacket: variances must be >= 0")
        if self.cross_zp != 0.0:
            raise ValidationError("wavepacket.cross_zp: only symmetric packets (cross term 0) supported")
        if self.var_z0 * self.var_p0 < 0.25 * self.hbar ** 2 * (1.0 - 1e-12):
            raise ValidationError("wavepacket: violates Heisenberg bound var_z0*var_p0 >= hbar^2/4")

    @classmethod
    def ground_state(cls, m: float, gamma: float, hbar: float = HBAR) -> "WavePacketSpec":
        """Harmonic oscillator ground state of frequency gamma."""
        return cls(hbar / (2 * m * gamma), hbar * m * gamma / 2, 0.0, hbar)


@dataclass(frozen=True)
class TrapSpec:
    """Harmonic trap with mean frequency gamma and splitting dgamma2 = G_b^2 - G_a^2."""

    gamma: float
    delta_gamma2: float = 0.0

    def __post_init__(self):
        _finite("trap", self.gamma, self.delta_gamma2)
        if self.gamma < 0:
            raise ValidationError("trap.gamma: must be >= 0")
        if self.gamma ** 2 - abs(self.delta_gamma2) / 2 < 0:
            raise ValidationError("trap.delta_gamma2: state frequencies would be imaginary")

    @property
    def delta_gamma(self) -> float:
        return math.sqrt(abs(self.delta_gamma2))

    def gamma_state(self, lam: int) -> float:
        return math.sqrt(self.gamma ** 2 + lam * self.delta_gamma2 / 2)

    def validity_ok(self, duration: float) -> bool:
        """True when dGamma < sqrt(Gamma/T)."""
        if self.delta_gamma2 == 0:
            return True
        if self.gamma == 0 or duration <= 0:
            return False
        return self.delta_gamma < math.sqrt(self.gamma / duration)
