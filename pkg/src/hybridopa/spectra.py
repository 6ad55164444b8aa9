"""Closed-form quadrature noise spectra of the reflected field.

Variances are normalized to the shot-noise limit (SNL = 1).  All quantities
are dimensionless (rates and frequencies per 1/tau), so delta and omega below
stand for the products Delta_s*tau and omega*tau.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .compound_cavity import decay_profile, gamma_in_at
from .errors import BelowThresholdViolation, ValidationError
from .model_params import (CavityModel, GridSpec, PumpDrive, SqueezedInput,
                           canonical_phase, units_to_physical)

SINGULAR_FLOOR = 1e-300


class Quadrature(str, enum.Enum):
    X = "X"
    Y = "Y"

    @property
    def sign(self):
        return 1.0 if self is Quadrature.X else -1.0


@dataclass(frozen=True)
class SpectrumParams:
    """Parameter set of one spectrum evaluation.

    ``delta``, ``omega`` and ``gamma_in`` may be arrays (broadcast together),
    which is how a whole detuning sweep is evaluated at once.
    """

    delta: object
    omega: object
    gamma_in: object
    gamma_out: float
    gamma_0: float
    p: float
    theta: float = 0.0
    squeeze: SqueezedInput = field(default_factory=SqueezedInput)

    def __post_init__(self):
        object.__setattr__(self, "theta", canonical_phase(self.theta))
        if not self.p >= 0:
            raise ValidationError(f"pump coupling p={self.p!r} must be >= 0")
        for name in ("gamma_out", "gamma_0"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"{name} must be >= 0")
        if not np.all(np.asarray(self.gamma_in) >= 0):
            raise ValidationError("gamma_in must be >= 0")
        if not np.all(self.gamma_s > 0):
            raise ValidationError("total decay gamma_s must be positive")

    @property
    def gamma_s(self):
        return np.asarray(self.gamma_in) + self.gamma_0 + self.gamma_out

    @property
    def gamma_vac(self):
        # every non-input port (back mirror and intracavity loss) carries vacuum
        return self.gamma_out + self.gamma_0


def coefficients(k, params: SpectrumParams):
    """(P_k, Q_k, M_k, N_k) weighting the four input noise variances.

    P and Q weight the driven port (X_in, Y_in for k = X; swapped roles for
    k = Y), M and N the vacuum port.  Each squared bracket is formed first
    and then squared.
    """
    sg = Quadrature(k).sign
    gi = np.asarray(params.gamma_in, dtype=float)
    gs = params.gamma_s
    gv = params.gamma_vac
    d = np.asarray(params.delta, dtype=float)
    w = np.asarray(params.omega, dtype=float)
    pc = params.p * math.cos(params.theta)
    ps = params.p * math.sin(params.theta)

    bracket = gs * (2.0 * gi - gs) + w * w - d * d + params.p ** 2 + sg * 2.0 * pc * gi
    P = bracket ** 2 + 4.0 * (w * (gs - gi)) ** 2
    shifted = d + sg * ps
    Q = 4.0 * gi * gi * shifted ** 2
    M = 4.0 * gi * gv * ((gs + sg * pc) ** 2 + w * w)
    N = 4.0 * gi * gv * shifted ** 2
    return P, Q, M, N


def denominator(params: SpectrumParams):
    """Shared denominator [gs^2 + delta^2 - omega^2 - p^2]^2 + 4 (omega gs)^2."""
    gs = params.gamma_s
    d = np.asarray(params.delta, dtype=float)
    w = np.asarray(params.omega, dtype=float)
    core = gs * gs + d * d - w * w - params.p ** 2
    return core ** 2 + 4.0 * (w * gs) ** 2


def _input_variances(k, squeeze: SqueezedInput):
    vx, vy = squeeze.var_x_in, squeeze.var_y_in
    return (vx, vy) if Quadrature(k) is Quadrature.X else (vy, vx)


def quadrature_variance(k, params: SpectrumParams):
    """Reflected-field variance of quadrature ``k`` relative to the SNL."""
    den = denominator(params)
    bad = np.flatnonzero(np.ravel(den) < SINGULAR_FLOOR)
    if bad.size:
        d = np.broadcast_to(np.asarray(params.delta, dtype=float), np.shape(den))
        where = float(np.ravel(d)[bad[0]])
        raise BelowThresholdViolation(
            f"spectrum denominator vanishes (threshold on resonance) at delta={where!r}",
            delta=where)
    P, Q, M, N = coefficients(k, params)
    a, b = _input_variances(k, params.squeeze)
    out = (P * a + Q * b + M + N) / den
    return float(out) if np.ndim(out) == 0 else out


def is_stable(delta, gamma_s, p):
    """Below-threshold drift: p^2 < gamma_s^2 + delta^2."""
    return p * p < np.asarray(gamma_s) ** 2 + np.asarray(delta) ** 2


def to_decibel(var):
    arr = np.asarray(var, dtype=float)
    if not np.all(arr > 0):
        raise ValidationError("variance must be positive for a dB conversion")
    out = 10.0 * np.log10(arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SpectrumCurve:
    detunings: np.ndarray
    var_x: np.ndarray
    var_y: np.ndarray
    omega: float
    tau: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.detunings)
        if len(self.var_x) != n or len(self.var_y) != n:
            raise ValidationError("curve arrays must share one length")
        if not (np.all(self.var_x > 0) and np.all(self.var_y > 0)):
            raise ValidationError("curve variances must be positive")

    def var(self, k):
        return self.var_x if Quadrature(k) is Quadrature.X else self.var_y

    def db(self, k):
        return to_decibel(self.var(k))

    @property
    def delta_hz(self):
        if self.tau is None:
            return None
        return units_to_physical(self.detunings, self.tau)


def spectrum_params_at(cavity: CavityModel, pump: PumpDrive, squeeze: SqueezedInput,
                       delta, omega=0.0):
    """SpectrumParams for a cavity with the pump pinned to gamma_s(0)."""
    gamma_s0 = float(gamma_in_at(cavity, 0.0)) + cavity.gamma_0 + cavity.gamma_out
    gin = gamma_in_at(cavity, delta)
    return SpectrumParams(delta, omega, gin, cavity.gamma_out, cavity.gamma_0,
                          pump.coupling(gamma_s0), pump.theta, squeeze)


def spectrum_curve(cavity: CavityModel, pump: PumpDrive, squeeze: SqueezedInput,
                   grid: GridSpec) -> SpectrumCurve:
    """Evaluate both quadratures over the detuning grid.

    gamma_in follows the detuning sample by sample while p = f * gamma_s(0)
    stays fixed.  Samples where that pump exceeds the local oscillation
    threshold have no stationary spectrum and are rejected.
    """
    prof = decay_profile(cavity, grid)
    gamma_s0 = float(gamma_in_at(cavity, 0.0)) + cavity.gamma_0 + cavity.gamma_out
    p = pump.coupling(gamma_s0)
    params = SpectrumParams(prof.detunings, grid.omega, prof.gamma_in, cavity.gamma_out,
                            cavity.gamma_0, p, pump.theta, squeeze)
    unstable = np.flatnonzero(~is_stable(prof.detunings, params.gamma_s, p))
    if unstable.size:
        where = float(prof.detunings[unstable[0]])
        raise BelowThresholdViolation(
            f"pump p={p:.6g} exceeds the local threshold at delta={where!r}", delta=where)
    vx = np.atleast_1d(quadrature_variance(Quadrature.X, params))
    vy = np.atleast_1d(quadrature_variance(Quadrature.Y, params))
    meta = {
        "kind": cavity.kind.value,
        "f": pump.f,
        "theta": pump.theta,
        "s": squeeze.s,
        "p": p,
        "gamma_s0": gamma_s0,
        "gamma_0": cavity.gamma_0,
        "gamma_out": cavity.gamma_out,
        "grid": {"delta_min": grid.delta_min, "delta_max": grid.delta_max, "n": grid.n},
    }
    return SpectrumCurve(prof.detunings, vx, vy, float(grid.omega), cavity.tau, meta)
