"""Physical parameter types and the dimensionless normalization.

Every rate and frequency in the package is measured in units of 1/tau, where
tau is the round-trip time of the equivalent cavity.  Only the display layer
converts to Hz/MHz.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import BelowThresholdViolation, ValidationError

TWO_PI = 2.0 * math.pi


def _check_unit_interval(name, value):
    if not (0.0 <= value <= 1.0) or not math.isfinite(value):
        raise ValidationError(f"{name}={value!r} must lie in [0, 1]")


def mirror_to_decay(t):
    """Amplitude transmission -> per-round-trip amplitude decay rate, t**2 / 2."""
    t = float(t)
    _check_unit_interval("t", t)
    return 0.5 * t * t


def pump_threshold(gamma_p, gamma_s, gamma_i, g):
    """Oscillation threshold of the pump amplitude, gamma_p * sqrt(gamma_s * gamma_i) / g."""
    for name, v in (("gamma_p", gamma_p), ("gamma_s", gamma_s),
                    ("gamma_i", gamma_i), ("g", g)):
        if not (v > 0) or not math.isfinite(v):
            raise ValidationError(f"{name}={v!r} must be a positive finite number")
    return gamma_p * math.sqrt(gamma_s * gamma_i) / g


def units_to_physical(x, tau):
    """Dimensionless angular frequency (per 1/tau) -> Hz."""
    if not tau > 0:
        raise ValidationError(f"tau={tau!r} must be positive")
    return np.asarray(x) / (TWO_PI * tau) if np.ndim(x) else float(x) / (TWO_PI * tau)


def physical_to_units(hz, tau):
    """Hz -> dimensionless angular frequency (per 1/tau)."""
    if not tau > 0:
        raise ValidationError(f"tau={tau!r} must be positive")
    return np.asarray(hz) * (TWO_PI * tau) if np.ndim(hz) else float(hz) * (TWO_PI * tau)


def canonical_phase(theta):
    theta = math.fmod(float(theta), TWO_PI)
    if theta < 0:
        theta += TWO_PI
    # fmod can land exactly on 2*pi after the shift for tiny negative inputs
    return 0.0 if theta >= TWO_PI else theta


@dataclass(frozen=True)
class MirrorSet:
    """Amplitude reflection/transmission of M_front (1), M_mid (2), M_back (3)."""

    r1: float
    t1: float
    r2: float
    t2: float
    r3: float
    t3: float

    def __post_init__(self):
        for i in (1, 2, 3):
            r = getattr(self, f"r{i}")
            t = getattr(self, f"t{i}")
            _check_unit_interval(f"r{i}", r)
            _check_unit_interval(f"t{i}", t)
            if r * r + t * t > 1.0 + 1e-12:
                raise ValidationError(
                    f"mirror {i}: r^2 + t^2 = {r * r + t * t:.15g} exceeds 1")
        if not (self.t1 > 0 or self.t3 > 0):
            raise ValidationError("at least one of t1, t3 must be positive")

    @classmethod
    def lossless(cls, t1, t2, t3):
        """Mirrors with r_i = sqrt(1 - t_i**2)."""
        return cls(math.sqrt(1 - t1 * t1), t1, math.sqrt(1 - t2 * t2), t2,
                   math.sqrt(1 - t3 * t3), t3)


class CavityKind(str, enum.Enum):
    SINGLE = "single"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class CavityModel:
    """Compound cavity geometry and loss budget.

    ``gamma_out`` defaults to ``mirror_to_decay(t3)``.  ``gamma_c`` is the
    per-round-trip amplitude factor of the front sub-cavity and only enters
    the reflection coefficient; ``gamma_0`` is the intracavity loss rate of
    the signal mode.
    """

    kind: CavityKind
    mirrors: MirrorSet
    tau: float
    length: float
    gamma_c: float = 1.0
    gamma_0: float = 0.0
    gamma_out: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", CavityKind(self.kind))
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValidationError(f"tau={self.tau!r} must be positive")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValidationError(f"length={self.length!r} must be positive")
        _check_unit_interval("gamma_c", self.gamma_c)
        if not self.gamma_0 >= 0:
            raise ValidationError(f"gamma_0={self.gamma_0!r} must be >= 0")
        if self.gamma_out is None:
            object.__setattr__(self, "gamma_out", mirror_to_decay(self.mirrors.t3))
        elif not self.gamma_out >= 0:
            raise ValidationError(f"gamma_out={self.gamma_out!r} must be >= 0")

    @property
    def gamma_vac(self):
        """Total rate of the non-input ports (back mirror plus intracavity loss)."""
        return self.gamma_out + self.gamma_0

    @property
    def phase_slope(self):
        """d(phi)/d(delta) of the front-loop phase, 2 L / (c tau)."""
        return 2.0 * self.length / (SPEED_OF_LIGHT * self.tau)

    def loop_phase(self, delta):
        return self.phase_slope * np.asarray(delta, dtype=float)

    def with_length(self, length):
        return CavityModel(self.kind, self.mirrors, self.tau, length,
                           self.gamma_c, self.gamma_0, self.gamma_out)


@dataclass(frozen=True)
class PumpDrive:
    """Pump expressed as f = g*beta / gamma_s(0) and phase theta."""

    f: float
    theta: float = 0.0
    gamma_p: float | None = None
    g: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.f < 1.0):
            raise BelowThresholdViolation(
                f"pump fraction f={self.f!r} must satisfy 0 <= f < 1")
        object.__setattr__(self, "theta", canonical_phase(self.theta))
        for name in ("gamma_p", "g"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValidationError(f"{name}={v!r} must be positive")

    def coupling(self, gamma_s0):
        """g*beta for a cavity whose on-resonance total decay is ``gamma_s0``."""
        return self.f * gamma_s0

    def threshold_fraction(self, gamma_s0, gamma_i=None):
        """beta / beta_th using the three-mode threshold formula."""
        if self.gamma_p is None or self.g is None:
            raise ValidationError("gamma_p and g are required for beta/beta_th")
        gamma_i = gamma_s0 if gamma_i is None else gamma_i
        beta = self.coupling(gamma_s0) / self.g
        return beta / pump_threshold(self.gamma_p, gamma_s0, gamma_i, self.g)


@dataclass(frozen=True)
class SqueezedInput:
    """Broadband squeezed vacuum on the driven port; s = 0 is plain vacuum."""

    s: float = 0.0

    def __post_init__(self):
        if not (self.s >= 0 and math.isfinite(self.s)):
            raise ValidationError(f"squeeze index s={self.s!r} must be >= 0")

    @property
    def n_photons(self):
        return math.sinh(self.s) ** 2

    @property
    def m_correlation(self):
        return math.sinh(self.s) * math.cosh(self.s)

    @property
    def var_x_in(self):
        return math.exp(2 * self.s)

    @property
    def var_y_in(self):
        return math.exp(-2 * self.s)


@dataclass(frozen=True)
class GridSpec:
    delta_min: float
    delta_max: float
    n: int
    omega: float = 0.0

    def __post_init__(self):
        if not self.delta_min < self.delta_max:
            raise ValidationError("grid requires delta_min < delta_max")
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"grid point count n={self.n!r} must be an integer >= 2")
        object.__setattr__(self, "n", int(self.n))

    def detunings(self):
        return np.linspace(self.delta_min, self.delta_max, self.n)

    @property
    def step(self):
        return (self.delta_max - self.delta_min) / (self.n - 1)
