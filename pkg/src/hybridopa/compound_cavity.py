"""Reflection of the front sub-cavity and the detuning-dependent input decay.

The front loop (M_front + M_mid) acts as one effective input coupler of the
OPA cavity.  Its complex reflection R(phi) is turned into an input decay rate
gamma_in = sqrt(1 - |R|^2), sampled along the signal detuning through the loop
phase phi = 2 * delta * L / (c * tau).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks

from .errors import (ModelInconsistencyError, NoSplitting, PoleError,
                     ValidationError)
from .model_params import (CavityKind, CavityModel, GridSpec, _check_unit_interval,
                           mirror_to_decay, units_to_physical)

PASSIVITY_SLACK = 1e-12


def reflection_coefficient(r1, r2, gamma_c, phi):
    """Complex reflection (-r2 + gamma_c r1 e^{i phi}) / (1 - gamma_c r1 r2 e^{i phi}).

    ``phi`` may be an array; the result has its shape.
    """
    for name, v in (("r1", r1), ("r2", r2), ("gamma_c", gamma_c)):
        _check_unit_interval(name, v)
    loop = gamma_c * r1 * np.exp(1j * np.asarray(phi, dtype=float))
    den = 1.0 - loop * r2
    if np.any(np.abs(den) < 1e-15):
        raise PoleError(
            "reflection pole: lossless perfectly reflecting loop on resonance "
            f"(gamma_c*r1*r2={gamma_c * r1 * r2!r})")
    out = (loop - r2) / den
    return complex(out) if out.ndim == 0 else out


def effective_input_decay(R):
    """gamma_in = sqrt(max(0, 1 - |R|^2)); rejects |R| beyond passivity."""
    mag2 = np.abs(R) ** 2
    if np.any(mag2 > (1.0 + PASSIVITY_SLACK) ** 2):
        raise ModelInconsistencyError(
            f"|R| = {float(np.sqrt(np.max(mag2))):.15g} exceeds 1")
    out = np.sqrt(np.clip(1.0 - mag2, 0.0, None))
    return float(out) if np.ndim(out) == 0 else out


def loop_input_decay(r1, r2, gamma_c, phi):
    """sqrt(1 - |R|^2) evaluated without cancellation.

    |den|^2 - |num|^2 = (1 - a^2)(1 - r2^2) with a = gamma_c r1, so
    1 - |R|^2 = (1 - a^2)(1 - r2^2) / |1 - a r2 e^{i phi}|^2.  This matches
    effective_input_decay(R) algebraically but keeps full relative precision
    where |R| is close to one.
    """
    a = gamma_c * r1
    den = np.abs(1.0 - a * r2 * np.exp(1j * np.asarray(phi, dtype=float))) ** 2
    if np.any(den < 1e-30):
        raise PoleError("reflection pole: lossless perfectly reflecting loop on resonance")
    out = np.sqrt((1.0 - a * a) * (1.0 - r2 * r2) / den)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ReflectionProfile:
    detunings: np.ndarray
    R: np.ndarray
    gamma_in: np.ndarray

    def __post_init__(self):
        if not (len(self.detunings) == len(self.R) == len(self.gamma_in)):
            raise ValidationError("profile arrays must share one length")


def _detuning_array(grid):
    if isinstance(grid, GridSpec):
        return grid.detunings()
    return np.atleast_1d(np.asarray(grid, dtype=float))


def gamma_in_at(cavity: CavityModel, delta):
    """Input decay rate at detuning(s) ``delta`` without building a profile."""
    delta = np.asarray(delta, dtype=float)
    if cavity.kind is CavityKind.SINGLE:
        return np.full(delta.shape, mirror_to_decay(cavity.mirrors.t1))
    m = cavity.mirrors
    return loop_input_decay(m.r1, m.r2, cavity.gamma_c, cavity.loop_phase(delta))


def decay_profile(cavity: CavityModel, grid) -> ReflectionProfile:
    """Sample R and gamma_in over the detuning grid.

    Without M_mid the front mirror alone is the input coupler, so R is the
    constant r1 and gamma_in the constant t1**2 / 2.
    """
    delta = _detuning_array(grid)
    m = cavity.mirrors
    if cavity.kind is CavityKind.SINGLE:
        R = np.full(delta.shape, complex(m.r1))
        gin = np.full(delta.shape, mirror_to_decay(m.t1))
    else:
        phi = cavity.loop_phase(delta)
        R = np.atleast_1d(reflection_coefficient(m.r1, m.r2, cavity.gamma_c, phi))
        effective_input_decay(R)  # passivity check on the complex reflection
        gin = np.atleast_1d(loop_input_decay(m.r1, m.r2, cavity.gamma_c, phi))
    gamma_s = gin + cavity.gamma_0 + cavity.gamma_out
    bad = np.flatnonzero(~(gamma_s > 0))
    if bad.size:
        raise ValidationError(
            f"total decay gamma_s is not positive at delta={delta[bad[0]]!r}")
    return ReflectionProfile(delta, R, gin)


def free_spectral_range(cavity: CavityModel):
    """Detuning period of the loop phase, 2*pi / phase_slope (dimensionless)."""
    return 2.0 * math.pi / cavity.phase_slope


def mode_splitting(cavity: CavityModel, window=None, n_coarse=4001):
    """|delta| of the off-center gamma_in maximum nearest zero.

    A coarse scan over [0, window] locates candidate maxima; the nearest one
    is refined by golden-section search.  The mirror-image maximum on the
    negative side must agree to within one coarse grid step.
    """
    if cavity.kind is not CavityKind.HYBRID:
        raise ValidationError("mode splitting requires a hybrid cavity")
    if window is None:
        window = 1.5 * free_spectral_range(cavity)
    step = window / (n_coarse - 1)
    pos = np.linspace(0.0, window, n_coarse)
    gin = gamma_in_at(cavity, pos)
    scale = max(float(np.max(gin)), 1e-300)
    peaks, _ = find_peaks(gin, prominence=1e-9 * scale)
    peaks = peaks[peaks > 0]
    if peaks.size == 0:
        raise NoSplitting("gamma_in has no off-center maximum in the search window")
    i = int(peaks[0])

    def neg_gin(d):
        return -float(gamma_in_at(cavity, d))

    res = minimize_scalar(neg_gin, bracket=(pos[i - 1], pos[i], pos[i + 1]),
                          method="golden", tol=1e-12)
    split = abs(float(res.x))

    neg = gamma_in_at(cavity, -pos)
    npk, _ = find_peaks(neg, prominence=1e-9 * scale)
    npk = npk[npk > 0]
    if npk.size == 0 or abs(pos[npk[0]] - pos[i]) > step:
        raise ModelInconsistencyError("gamma_in maxima are not symmetric about zero")
    return split


def splitting_hz(cavity: CavityModel, window=None):
    return units_to_physical(mode_splitting(cavity, window), cavity.tau)


def calibrate_equivalent_cavity(splitting_hz, phase_ratio=0.5):
    """Equivalent length and round-trip time that put the sidebands at ``splitting_hz``.

    The sidebands sit one loop free spectral range away, c / (2 L), which
    fixes L.  ``phase_ratio`` = L / (c tau); the default 0.5 makes tau the
    round-trip time 2 L / c.
    """
    if not splitting_hz > 0:
        raise ValidationError("splitting must be positive")
    length = SPEED_OF_LIGHT / (2.0 * splitting_hz)
    tau = length / (SPEED_OF_LIGHT * phase_ratio)
    return length, tau
