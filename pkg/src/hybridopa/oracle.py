"""Independent checks of the closed-form spectra built from the Langevin drift.

Two routes, neither touching the P/Q/M/N coefficients:

* a frequency-domain linear scattering solve of the quadrature equations,
* an Euler-Maruyama ensemble of the quadrature SDE with white-noise forcing,
  its output spectrum estimated by tapered, overlapping periodograms.

The steady-state intracavity covariance (Lyapunov equation) is a third,
integrated-noise cross check.

Noise normalization: every input port carries white noise whose spectral
density equals its variance in SNL units (vacuum = 1).  The intracavity
covariance returned by ``lyapunov_covariance`` uses the physical convention
X = (a + a^dag)/sqrt(2), i.e. half of that.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.linalg import solve_continuous_lyapunov

from .errors import BelowThresholdViolation, TrajectoryError, ValidationError
from .spectra import SpectrumParams


@dataclass(frozen=True)
class DriftMatrix:
    a: np.ndarray
    gamma_s: float
    delta: float
    p: float

    @property
    def trace(self):
        return float(np.trace(self.a))

    @property
    def eigenvalues(self):
        return np.linalg.eigvals(self.a)

    @property
    def stable(self):
        return bool(np.all(self.eigenvalues.real < 0))


def _scalar(params: SpectrumParams):
    vals = [np.asarray(v, dtype=float) for v in (params.delta, params.omega, params.gamma_in)]
    if any(v.ndim for v in vals):
        raise ValidationError("this oracle evaluates one parameter point at a time")
    return tuple(float(v) for v in vals)


def _drift_arrays(delta, gamma_s, p, theta):
    """Batched drift matrices, shape (..., 2, 2).

    With a = (X + iY)/sqrt(2) the Langevin equation
    da/dt = (-i delta - gamma_s) a + p e^{i theta} a^dag splits into
    dX/dt = (-gamma_s + p cos) X + (delta + p sin) Y,
    dY/dt = (-delta + p sin) X + (-gamma_s - p cos) Y.
    """
    delta = np.asarray(delta, dtype=float)
    gamma_s = np.asarray(gamma_s, dtype=float)
    shape = np.broadcast_shapes(delta.shape, gamma_s.shape)
    pc, ps = p * math.cos(theta), p * math.sin(theta)
    a = np.empty(shape + (2, 2))
    a[..., 0, 0] = -gamma_s + pc
    a[..., 0, 1] = delta + ps
    a[..., 1, 0] = -delta + ps
    a[..., 1, 1] = -gamma_s - pc
    return a


def drift_matrix(params: SpectrumParams) -> DriftMatrix:
    delta, _, gin = _scalar(params)
    gs = gin + params.gamma_0 + params.gamma_out
    a = _drift_arrays(delta, gs, params.p, params.theta)
    dm = DriftMatrix(a, gs, delta, params.p)
    if not math.isclose(dm.trace, -2.0 * gs, rel_tol=1e-12, abs_tol=1e-300):
        raise AssertionError("drift trace must equal -2 gamma_s")
    return dm


def scattering_transfer(params: SpectrumParams):
    """Output transfer matrices (T_in, T_vac) for every parameter sample.

    Fourier convention d/dt -> -i omega, so the cavity response is
    G = (-i omega I - A)^-1 and the reflected field is
    sqrt(2 gamma_in) X_cav - X_in.
    """
    d = np.asarray(params.delta, dtype=float)
    w = np.asarray(params.omega, dtype=float)
    gi = np.asarray(params.gamma_in, dtype=float)
    d, w, gi = np.broadcast_arrays(d, w, gi)
    gs = gi + params.gamma_0 + params.gamma_out
    a = _drift_arrays(d, gs, params.p, params.theta)
    eye = np.eye(2)
    m = -1j * w[..., None, None] * eye - a
    try:
        g = np.linalg.solve(m, np.broadcast_to(eye, m.shape).astype(complex))
    except np.linalg.LinAlgError as exc:
        raise BelowThresholdViolation("singular scattering system (threshold)") from exc
    root_in = np.sqrt(2.0 * gi)[..., None, None]
    t_in = root_in * g * root_in - eye
    t_vac = root_in * g * math.sqrt(2.0 * params.gamma_vac)
    return t_in, t_vac


def scattering_variance(params: SpectrumParams):
    """(var_X, var_Y) of the reflected field from the transfer matrices."""
    d = np.asarray(params.delta, dtype=float)
    gs = params.gamma_s
    if not np.all(params.p ** 2 < gs ** 2 + d ** 2):
        raise BelowThresholdViolation("drift is unstable; no stationary spectrum")
    t_in, t_vac = scattering_transfer(params)
    vin = np.array([params.squeeze.var_x_in, params.squeeze.var_y_in])
    p_in = np.abs(t_in) ** 2
    p_vac = np.abs(t_vac) ** 2
    var = p_in @ vin + p_vac.sum(axis=-1)
    vx, vy = var[..., 0], var[..., 1]
    if vx.ndim == 0:
        return float(vx), float(vy)
    return vx, vy


def diffusion_matrix(params: SpectrumParams):
    """Physical-convention diffusion D with vacuum weight 1/2 per port."""
    _, _, gin = _scalar(params)
    sq = params.squeeze
    return gin * np.diag([sq.var_x_in, sq.var_y_in]) + params.gamma_vac * np.eye(2)


def lyapunov_covariance(params: SpectrumParams):
    """Steady intracavity covariance V solving A V + V A^T + D = 0."""
    dm = drift_matrix(params)
    if not dm.stable:
        raise BelowThresholdViolation("drift is unstable; no steady state", delta=dm.delta)
    v = solve_continuous_lyapunov(dm.a, -diffusion_matrix(params))
    v = 0.5 * (v + v.T)
    if not np.all(np.linalg.eigvalsh(v) > 0):
        raise AssertionError("steady covariance must be positive definite")
    return v


def integrated_covariance(params: SpectrumParams, epsrel=1e-10):
    """(1/2pi) * integral of G D G^H over all frequencies, entry by entry."""
    dm = drift_matrix(params)
    diff = diffusion_matrix(params)
    eye = np.eye(2)

    def spec(w, i, j):
        g = np.linalg.inv(-1j * w * eye - dm.a)
        return float((g @ diff @ g.conj().T)[i, j].real)

    out = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            val, _ = quad(spec, -np.inf, np.inf, args=(i, j), epsrel=epsrel, limit=400)
            out[i, j] = val / (2.0 * math.pi)
    return out


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings.  Times are in units of tau.

    The run is split into ``n_segments`` Hann-tapered periodogram segments
    with 50% overlap after the burn-in fraction.  Trajectories are stepped in
    vectorized batches of ``batch``; each batch has its own generator spawned
    from ``seed``, so results depend on (seed, batch) only.
    """

    h: float
    t_total: float
    n_traj: int
    burn_in: float = 0.05
    seed: int = 0
    n_segments: int = 7
    batch: int = 256

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValidationError("step h must be positive")
        if not self.t_total > 0:
            raise ValidationError("trajectory length must be positive")
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ValidationError("n_traj must be a positive integer")
        if not 0.0 <= self.burn_in < 1.0:
            raise ValidationError("burn-in fraction must lie in [0, 1)")
        if int(self.n_segments) != self.n_segments or self.n_segments < 1:
            raise ValidationError("n_segments must be a positive integer")
        if self.batch < 1:
            raise ValidationError("batch must be positive")

    @classmethod
    def for_params(cls, params: SpectrumParams, n_traj=400, seed=0,
                   decay_times=40.0, n_segments=7, step_factor=0.01, **kw):
        """Size h and the run length from the slowest and fastest rates."""
        delta, omega, gin = _scalar(params)
        gs = gin + params.gamma_0 + params.gamma_out
        fastest = max(gs, abs(delta) + params.p, abs(omega))
        h = step_factor / fastest
        lam = np.linalg.eigvals(_drift_arrays(delta, gs, params.p, params.theta))
        slowest = float(np.min(-lam.real))
        if not slowest > 0:
            raise BelowThresholdViolation("drift is unstable", delta=delta)
        seg = decay_times / slowest
        t_total = seg * (n_segments + 1) / 2.0
        t_total /= 1.0 - kw.get("burn_in", 0.05)
        return cls(h=h, t_total=t_total, n_traj=n_traj, seed=seed,
                   n_segments=n_segments, **kw)


@dataclass(frozen=True)
class McResult:
    var_x: float
    var_y: float
    stderr_x: float
    stderr_y: float
    n_traj: int

    def rel_stderr(self):
        return max(self.stderr_x / self.var_x, self.stderr_y / self.var_y)


def _run_batch(a, gin, gvac, vin, cov0, omega, cfg, n_steps, n_burn, seg_len, hop,
               window, rng, nb, batch_index):
    h = cfg.h
    step = np.eye(2) + h * a
    x = rng.multivariate_normal(np.zeros(2), cov0, size=nb)
    acc = np.zeros((cfg.n_segments, nb, 2), dtype=complex)
    sd_in = np.sqrt(h * vin)
    sd_v = math.sqrt(h)
    root_in = math.sqrt(2.0 * gin)
    root_v = math.sqrt(2.0 * gvac)
    chunk = 2048
    k0 = 0
    while k0 < n_steps:
        c = min(chunk, n_steps - k0)
        xi_in = rng.standard_normal((c, nb, 2)) * sd_in
        xi_v = rng.standard_normal((c, nb, 2)) * sd_v
        drive = root_in * xi_in + root_v * xi_v
        xs = np.empty((c + 1, nb, 2))
        xs[0] = x
        for j in range(c):
            x = x @ step.T + drive[j]
            xs[j + 1] = x
        if not np.all(np.isfinite(x)):
            raise TrajectoryError("non-finite state in Monte Carlo trajectory",
                                  step=k0 + c, seed=(cfg.seed, batch_index))
        # output averaged over each step; the input term is the step-mean white noise
        y = root_in * 0.5 * (xs[:-1] + xs[1:]) - xi_in / h
        ks = np.arange(k0, k0 + c) - n_burn
        for s in range(cfg.n_segments):
            lo, hi = s * hop, s * hop + seg_len
            i0, i1 = max(lo, ks[0]), min(hi, ks[-1] + 1)
            if i0 >= i1:
                continue
            sl = slice(i0 - ks[0], i1 - ks[0])
            wk = window[i0 - lo:i1 - lo]
            if omega != 0.0:
                wk = wk * np.exp(1j * omega * h * (np.arange(i0, i1) + 0.5))
            acc[s] += np.einsum("t,tbq->bq", wk, y[sl])
        k0 += c
    per_seg = h * np.abs(acc) ** 2 / np.sum(window ** 2)
    return per_seg.mean(axis=0)


def mc_variance(params: SpectrumParams, cfg: McConfig) -> McResult:
    """Ensemble estimate of (var_X, var_Y) at the analysis frequency omega."""
    delta, omega, gin = _scalar(params)
    gs = gin + params.gamma_0 + params.gamma_out
    if cfg.h > 0.01 / gs * (1 + 1e-12):
        raise ValidationError(f"step h={cfg.h:.4g} exceeds 0.01/gamma_s={0.01 / gs:.4g}")
    dm = drift_matrix(params)
    if not dm.stable:
        raise BelowThresholdViolation("drift is unstable; no stationary spectrum", delta=delta)
    # unit (SNL) normalization is twice the physical covariance
    cov0 = 2.0 * lyapunov_covariance(params)
    vin = np.array([params.squeeze.var_x_in, params.squeeze.var_y_in])

    n_steps = int(math.ceil(cfg.t_total / cfg.h))
    n_burn = int(cfg.burn_in * n_steps)
    n_use = n_steps - n_burn
    seg_len = int(2 * n_use // (cfg.n_segments + 1))
    if seg_len < 8:
        raise ValidationError("trajectory too short for the requested segments")
    hop = seg_len // 2
    window = np.hanning(seg_len + 2)[1:-1]

    n_batches = -(-cfg.n_traj // cfg.batch)
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_batches)
    per_traj = []
    for b in range(n_batches):
        nb = min(cfg.batch, cfg.n_traj - b * cfg.batch)
        rng = np.random.default_rng(seeds[b])
        per_traj.append(_run_batch(dm.a, gin, params.gamma_vac, vin, cov0, omega, cfg,
                                   n_steps, n_burn, seg_len, hop, window, rng, nb, b))
    est = np.concatenate(per_traj, axis=0)
    mean = est.mean(axis=0)
    if cfg.n_traj > 1:
        err = est.std(axis=0, ddof=1) / math.sqrt(cfg.n_traj)
    else:
        err = np.full(2, np.inf)
    return McResult(float(mean[0]), float(mean[1]), float(err[0]), float(err[1]), cfg.n_traj)
