"""Per-source mode-intensity calibration curves.

A :class:`SourceCalibration` holds the four demultiplexed intensities
``I0..I3`` of one point source as smooth functions of its transverse
position (um), plus the per-mode noise variances.  Curves come either from
a calibration table on disk or from the displaced-vacuum model, where mode
``n`` carries the Poisson weight ``exp(-u) u**n / n!`` of the total
intensity with ``u = (x - offset)**2 / w**2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

from .errors import FitError, InputError
from .numerics import SplineFunction, fit_cubic_spline

N_MODES = 4
CSV_COLUMNS = ("x_um", "I0", "I1", "I2", "I3", "var0", "var1", "var2", "var3")


def _as_variances(variances) -> np.ndarray:
    v = np.array(variances, dtype=float).reshape(-1)
    if v.size != N_MODES:
        raise InputError(f"expected {N_MODES} variances, got {v.size}")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise InputError(f"variances must be strictly positive, got {v.tolist()}")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class SourceCalibration:
    """Calibrated HG00..HG30 intensities of one source versus position.

    ``curves`` is a single vector-valued spline whose four outputs share one
    domain; calling the calibration returns an array with a trailing axis of
    length 4.
    """

    source_id: str
    curves: SplineFunction
    variances: np.ndarray

    def __post_init__(self):
        if self.curves.n_outputs != N_MODES:
            raise InputError(f"calibration needs {N_MODES} mode curves")
        object.__setattr__(self, "variances", _as_variances(self.variances))

    @property
    def domain(self) -> tuple[float, float]:
        return self.curves.domain

    @property
    def modes(self) -> tuple[SplineFunction, ...]:
        return tuple(self.curves.component(j) for j in range(N_MODES))

    def __call__(self, x, nu: int = 0) -> np.ndarray:
        return np.asarray(self.curves(x, nu))

    def with_variances(self, variances) -> "SourceCalibration":
        return SourceCalibration(self.source_id, self.curves, variances)

    def min_intensity(self, n: int = 20001) -> float:
        """Smallest mode intensity on a dense uniform grid over the domain."""
        x = np.linspace(*self.domain, n)
        return float(self(x).min())


@dataclass(frozen=True)
class GaussianFit:
    """``amplitude * exp(-(x - center)**2 / width**2)``; lengths in um."""

    amplitude: float
    center: float
    width: float

    def __post_init__(self):
        if not (self.amplitude > 0 and self.width > 0):
            raise FitError(f"invalid Gaussian fit {self}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.exp(-((x - self.center) / self.width) ** 2)


def poisson_mode_profile(x, width: float, total_intensity: float = 1.0,
                         center_offset: float = 0.0) -> np.ndarray:
    """Displaced-vacuum mode intensities, shape ``x.shape + (4,)``."""
    u = ((np.asarray(x, dtype=float) - center_offset) / width) ** 2
    n = np.arange(N_MODES)
    fact = np.array([math.factorial(k) for k in n], dtype=float)
    return total_intensity * np.exp(-u)[..., None] * u[..., None] ** n / fact


def synth_calibration(width: float, total_intensity: float = 1.0,
                      center_offset: float = 0.0, variances=(1.0,) * N_MODES, *,
                      domain: tuple[float, float] = (-1000.0, 1000.0),
                      step: float = 2.0, mixing=None,
                      source_id: str = "src1") -> SourceCalibration:
    """Splined displaced-vacuum calibration of a source of Gaussian width ``width``.

    ``mixing`` is an optional 4x4 cross-talk matrix applied to the ideal
    mode vector (``I_observed = mixing @ I_ideal``).
    """
    if not width > 0:
        raise InputError(f"width must be positive, got {width}")
    if not total_intensity > 0:
        raise InputError(f"total intensity must be positive, got {total_intensity}")
    lo, hi = domain
    if not hi > lo or not step > 0:
        raise InputError("invalid synthetic calibration grid")
    n = int(round((hi - lo) / step)) + 1
    x = np.linspace(lo, hi, n)
    y = poisson_mode_profile(x, width, total_intensity, center_offset)
    if mixing is not None:
        m = np.asarray(mixing, dtype=float)
        if m.shape != (N_MODES, N_MODES):
            raise InputError("mixing matrix must be 4x4")
        y = y @ m.T
    return SourceCalibration(source_id, fit_cubic_spline(x, y), variances)


def load_calibration(path, source_id: str | None = None) -> SourceCalibration:
    """Read a calibration table (CSV, columns ``x_um, I0..I3, var0..var3``).

    Per-row variances are averaged into one variance per mode.
    """
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty calibration file") from None
        if tuple(header) != CSV_COLUMNS:
            raise InputError(f"{path}: header must be {', '.join(CSV_COLUMNS)}")
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(CSV_COLUMNS):
                raise InputError(f"{path}: row {lineno}: expected "
                                 f"{len(CSV_COLUMNS)} fields, got {len(raw)}")
            try:
                vals = [float(c) for c in raw]
            except ValueError:
                raise InputError(f"{path}: row {lineno}: non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}: row {lineno}: non-finite value")
            if any(v <= 0 for v in vals[5:]):
                raise InputError(f"{path}: row {lineno}: variances must be positive")
            if rows and vals[0] <= rows[-1][1][0]:
                raise InputError(f"{path}: row {lineno}: positions must be "
                                 "strictly increasing")
            rows.append((lineno, vals))
    if len(rows) < 4:
        raise InputError(f"{path}: need at least 4 rows, got {len(rows)}")
    table = np.array([v for _, v in rows])
    return SourceCalibration(
        source_id or path.stem,
        fit_cubic_spline(table[:, 0], table[:, 1:5]),
        table[:, 5:].mean(axis=0),
    )


def write_calibration(cal: SourceCalibration, path) -> None:
    """Write ``cal`` at its knots in the calibration CSV format."""
    x = cal.curves.knots
    y = cal.curves.values
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for xi, yi in zip(x, y):
            w.writerow([repr(float(xi))] + [repr(float(v)) for v in yi]
                       + [repr(float(v)) for v in cal.variances])


def fit_gaussian(mode0: SplineFunction, threshold: float = 0.01,
                 max_iter: int = 2000) -> GaussianFit:
    """Least-squares Gaussian fit to a mode-0 curve.

    Only points above ``threshold`` times the curve maximum enter the fit.
    Levenberg-Marquardt, seeded by the peak position and the second moment.
    """
    lo, hi = mode0.domain
    x = np.union1d(mode0.knots, np.linspace(lo, hi, 4001))
    y = np.asarray(mode0(x), dtype=float)
    if y.ndim != 1:
        raise InputError("fit_gaussian expects a scalar curve")
    peak = y.max()
    if not peak > 0:
        raise FitError("mode-0 curve is nowhere positive")
    sel = y > threshold * peak
    xs, ys = x[sel], y[sel]
    if xs.size < 3:
        raise FitError("too few points above the fit threshold")
    b0 = xs[np.argmax(ys)]
    w0 = math.sqrt(2.0 * np.sum(ys * (xs - b0) ** 2) / np.sum(ys))
    if not w0 > 0:
        w0 = (xs[-1] - xs[0]) / 2

    def resid(p):
        a, b, w = p
        return a * np.exp(-((xs - b) / w) ** 2) - ys

    res = optimize.least_squares(resid, [peak, b0, w0], method="lm",
                                 max_nfev=max_iter, x_scale="jac")
    if not res.success:
        raise FitError(f"Gaussian fit did not converge: {res.message}")
    a, b, w = res.x
    return GaussianFit(float(a), float(b), float(abs(w)))


def rayleigh_limit(w1: float, w2: float) -> float:
    """Sum of the half-widths of two Gaussian profiles, in um."""
    if not (w1 > 0 and w2 > 0):
        raise InputError(f"widths must be positive, got {w1}, {w2}")
    return (w1 + w2) / 2.0
