"""Channel (noise window) extraction and the pump saturation scan."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, peak_prominences, peak_widths

from .errors import InvariantViolation, ValidationError
from .model_params import CavityModel, GridSpec, PumpDrive, SqueezedInput, units_to_physical
from .spectra import Quadrature, SpectrumCurve, spectrum_curve

UNCERTAINTY_SLACK = 1e-9


def find_extrema(y):
    """Interior strict local extrema as (index, "peak" | "dip"), ordered by index.

    Flat runs collapse to their middle sample; endpoints are never reported.
    """
    y = np.asarray(y, dtype=float)
    if y.size < 3:
        raise ValidationError("need at least three samples")
    peaks, _ = find_peaks(y)
    dips, _ = find_peaks(-y)
    out = [(int(i), "peak") for i in peaks] + [(int(i), "dip") for i in dips]
    return sorted(out)


@dataclass(frozen=True)
class ChannelReport:
    center: float
    depth_db: float
    width: float
    prominence_db: float
    kind: str
    index: int
    center_hz: float | None = None
    width_hz: float | None = None

    def as_dict(self):
        return {
            "kind": self.kind,
            "index": self.index,
            "center": self.center,
            "center_hz": self.center_hz,
            "depth_db": self.depth_db,
            "prominence_db": self.prominence_db,
            "width": self.width,
            "width_hz": self.width_hz,
        }


def _measure(values_db, x, indices, sign):
    """Prominence and half-prominence width of extrema of ``sign * values_db``."""
    if len(indices) == 0:
        return np.empty(0), np.empty(0)
    s = sign * values_db
    idx = np.asarray(indices)
    prom = peak_prominences(s, idx)
    w = peak_widths(s, idx, rel_height=0.5, prominence_data=prom)
    pos = np.arange(len(x), dtype=float)
    left = np.interp(w[2], pos, x)
    right = np.interp(w[3], pos, x)
    return prom[0], right - left


def channel_report(curve: SpectrumCurve, quadrature, min_prominence_db=1e-3):
    """Dips and peaks of one quadrature in dB, sorted by |center|.

    A dip with negative depth_db is a suppression channel (below the SNL).
    """
    k = Quadrature(quadrature)
    db = curve.db(k)
    x = np.asarray(curve.detunings, dtype=float)
    ext = find_extrema(db)
    reports = []
    for kind, sign in (("peak", 1.0), ("dip", -1.0)):
        idx = [i for i, kd in ext if kd == kind]
        prom, width = _measure(db, x, idx, sign)
        for i, pr, wd in zip(idx, prom, width):
            if pr < min_prominence_db or not wd > 0:
                continue
            hz = whz = None
            if curve.tau is not None:
                hz = float(units_to_physical(x[i], curve.tau))
                whz = float(units_to_physical(wd, curve.tau))
            reports.append(ChannelReport(float(x[i]), float(db[i]), float(wd), float(pr),
                                         kind, int(i), hz, whz))
    reports.sort(key=lambda r: (abs(r.center), -r.prominence_db, r.center))
    return reports


def suppression_channels(reports):
    return [r for r in reports if r.kind == "dip" and r.depth_db < 0]


def value_at(curve: SpectrumCurve, quadrature, delta=0.0):
    """dB value of one quadrature interpolated at ``delta``."""
    return float(np.interp(delta, curve.detunings, curve.db(quadrature)))


def uncertainty_check(curve: SpectrumCurve):
    """Worst var_X * var_Y over the curve; raises below 1 - 1e-9."""
    prod = curve.var_x * curve.var_y
    i = int(np.argmin(prod))
    worst = float(prod[i])
    if worst < 1.0 - UNCERTAINTY_SLACK:
        raise InvariantViolation(
            f"var_X * var_Y = {worst!r} below the uncertainty bound",
            details={"delta": float(curve.detunings[i]), "product": worst,
                     **curve.metadata})
    return worst, float(curve.detunings[i])


@dataclass(frozen=True)
class SaturationResult:
    """Outcome of a saturation scan.  ``f_star`` is None when the feature never vanishes."""

    f_star: float | None
    table: list = field(default_factory=list)
    eps_db: float = 0.01
    quadrature: str = "X"

    @property
    def saturated(self):
        return self.f_star is not None


def central_feature_prominence(curve: SpectrumCurve, quadrature):
    """Prominence (dB) of the interior feature sitting at delta = 0.

    Inside a suppression channel (value below the SNL) the feature is a
    peak; inside an amplified one it is a dip.  Zero when delta = 0 is not
    an extremum of that kind.
    """
    db = curve.db(quadrature)
    c = int(np.argmin(np.abs(curve.detunings)))
    want = "peak" if db[c] < 0 else "dip"
    hits = [i for i, kd in find_extrema(db) if kd == want and abs(i - c) <= 1]
    if not hits:
        return 0.0
    sign = 1.0 if want == "peak" else -1.0
    return float(peak_prominences(sign * db, [hits[0]])[0][0])


def saturation_scan(cavity: CavityModel, squeeze: SqueezedInput, theta, f_grid,
                    quadrature="X", zoom=0.3, n=6001, eps_db=0.01, f_tol=1e-4):
    """Smallest pump fraction at which the central interior feature vanishes.

    Each f is evaluated on a symmetric zoom grid [-zoom, zoom] (odd n, so
    delta = 0 is a sample).  The vanishing point is bracketed on f_grid and
    refined by bisection.  A vanishing point needs a preceding grid value
    where the feature was present, so a grid with the pump off only is never
    saturated.
    """
    f_grid = [float(f) for f in f_grid]
    if any(b <= a for a, b in zip(f_grid, f_grid[1:])):
        raise ValidationError("f_grid must be strictly ascending")
    if n % 2 == 0:
        n += 1
    grid = GridSpec(-zoom, zoom, n)

    def prominence(f):
        curve = spectrum_curve(cavity, PumpDrive(f, theta), squeeze, grid)
        return central_feature_prominence(curve, quadrature)

    table = [(f, prominence(f)) for f in f_grid]
    for (fa, pa), (fb, pb) in zip(table, table[1:]):
        if pa >= eps_db and pb < eps_db:
            lo, hi = fa, fb
            while hi - lo > f_tol:
                mid = 0.5 * (lo + hi)
                if prominence(mid) < eps_db:
                    hi = mid
                else:
                    lo = mid
            return SaturationResult(0.5 * (lo + hi), table, eps_db, Quadrature(quadrature).value)
    return SaturationResult(None, table, eps_db, Quadrature(quadrature).value)


def is_monotone_decreasing(table, f_lo, f_hi):
    """True when prominence strictly decreases over table rows with f in [f_lo, f_hi]."""
    vals = [p for f, p in table if f_lo - 1e-12 <= f <= f_hi + 1e-12]
    return len(vals) >= 2 and all(b < a for a, b in zip(vals, vals[1:]))
