"""Special functions, splines, quadrature grids and log-domain sums.

Thin, contract-checked layers over :mod:`scipy.special` and
:mod:`scipy.interpolate`; every other module goes through these so that
domain and precondition checks live in one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, ndimage, optimize, special

from .errors import DomainError, InputError

__all__ = [
    "erf",
    "erf_inv",
    "SplineFunction",
    "fit_cubic_spline",
    "log_sum_exp",
    "Grid1D",
    "integrate",
    "log_integrate",
    "log_normal_interval",
    "adaptive_log_integrate",
]


def erf(x):
    """Error function, elementwise. Returns a float for scalar input."""
    out = special.erf(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def erf_inv(y):
    """Inverse error function on the open interval (-1, 1).

    Raises
    ------
    DomainError
        If any ``|y| >= 1`` or ``y`` is not finite.
    """
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) >= 1.0):
        raise DomainError("erf_inv is defined only for -1 < y < 1")
    out = special.erfinv(arr)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SplineFunction:
    """Interpolating cubic spline with a hard domain.

    ``values`` may be 1-D (scalar curve) or 2-D with one column per output,
    in which case evaluation returns arrays with a trailing output axis.
    Evaluation outside ``domain`` raises :class:`DomainError`; there is no
    extrapolation.
    """

    knots: np.ndarray
    values: np.ndarray
    _spline: interpolate.CubicSpline = field(repr=False, compare=False)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def coefficients(self) -> np.ndarray:
        """Per-interval polynomial coefficients, highest power first.

        Shape ``(4, len(knots) - 1[, n_outputs])``; on interval ``i`` the
        spline is ``sum(c[m, i] * (x - knots[i]) ** (3 - m))``.
        """
        return self._spline.c

    @property
    def n_outputs(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[1]

    def _check(self, x: np.ndarray) -> None:
        lo, hi = self.domain
        if np.any(~np.isfinite(x)) or np.any(x < lo) or np.any(x > hi):
            bad = x[~((x >= lo) & (x <= hi))]
            raise DomainError(
                f"spline evaluated at {bad.ravel()[0]!r} outside domain [{lo}, {hi}]"
            )

    def __call__(self, x, nu: int = 0):
        """Evaluate the spline (``nu = 0``) or its ``nu``-th derivative."""
        arr = np.asarray(x, dtype=float)
        self._check(arr)
        out = self._spline(arr, nu)
        if np.ndim(out) == 0:
            return float(out)
        return out

    def derivative(self, x, order: int = 1):
        return self(x, nu=order)

    def component(self, j: int) -> "SplineFunction":
        """Scalar spline of output ``j`` of a vector-valued spline."""
        if self.values.ndim == 1:
            if j != 0:
                raise IndexError(j)
            return self
        return fit_cubic_spline(self.knots, self.values[:, j])


def fit_cubic_spline(x, y) -> SplineFunction:
    """Interpolating cubic spline with not-a-knot end conditions.

    Parameters
    ----------
    x : array_like, shape (n,)
        Strictly increasing abscissae, ``n >= 4``.
    y : array_like, shape (n,) or (n, k)
        Ordinates; a 2-D array gives a vector-valued spline.
    """
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    if x.ndim != 1:
        raise InputError("spline abscissae must be one-dimensional")
    if x.size < 4:
        raise InputError(f"a cubic spline needs at least 4 points, got {x.size}")
    if y.shape[0] != x.size or y.ndim > 2:
        raise InputError("spline ordinates do not match abscissae")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("spline data must be finite")
    steps = np.diff(x)
    if np.any(steps <= 0):
        i = int(np.argmax(steps <= 0)) + 1
        raise InputError(f"spline abscissae must be strictly increasing (index {i})")
    spline = interpolate.CubicSpline(x, y, axis=0, bc_type="not-a-knot")
    x.setflags(write=False)
    y.setflags(write=False)
    return SplineFunction(knots=x, values=y, _spline=spline)


def log_sum_exp(terms, axis=None):
    """``log(sum(exp(terms)))`` without overflow.

    All ``-inf`` terms give ``-inf``. Raises :class:`InputError` on empty input.
    """
    arr = np.asarray(terms, dtype=float)
    if arr.size == 0:
        raise InputError("log_sum_exp of an empty sequence")
    with np.errstate(divide="ignore"):
        out = special.logsumexp(arr, axis=axis)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Grid1D:
    """Quadrature nodes and weights on a line."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if p.ndim != 1 or p.size == 0 or p.shape != w.shape:
            raise InputError("grid points and weights must be equal-length 1-D arrays")
        if p.size > 1 and np.any(np.diff(p) <= 0):
            raise InputError("grid points must be strictly increasing")
        if np.any(w < 0):
            raise InputError("quadrature weights must be nonnegative")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.points.size

    @classmethod
    def trapezoid(cls, lo: float, hi: float, n: int, *,
                  include_lo: bool = True, include_hi: bool = True) -> "Grid1D":
        """Uniform trapezoid rule with ``n`` nodes on ``[lo, hi]``.

        An excluded end is realised by laying the uniform grid out with one
        extra node and dropping that endpoint together with its half weight,
        so the returned grid always has ``n`` nodes.
        """
        if not hi > lo:
            raise InputError(f"empty interval [{lo}, {hi}]")
        if n < 1:
            raise InputError("a grid needs at least one node")
        total = n + (not include_lo) + (not include_hi)
        if total < 2:
            raise InputError("a closed trapezoid grid needs at least two nodes")
        pts = np.linspace(lo, hi, total)
        h = (hi - lo) / (total - 1)
        w = np.full(total, h)
        w[0] = w[-1] = h / 2
        keep = slice(0 if include_lo else 1, total if include_hi else total - 1)
        return cls(pts[keep], w[keep])

    @classmethod
    def point(cls, x: float) -> "Grid1D":
        """Degenerate grid: a single node of unit weight."""
        return cls(np.array([float(x)]), np.array([1.0]))


def integrate(values, grid: Grid1D) -> float:
    """Weighted sum of ``values`` (f sampled at the grid nodes)."""
    v = np.asarray(values, dtype=float)
    if v.shape[-1] != len(grid):
        raise InputError("values do not match the grid")
    out = v @ grid.weights
    return float(out) if np.ndim(out) == 0 else out


def log_integrate(log_values, grid: Grid1D) -> float:
    """``log(integrate(exp(log_values), grid))`` computed in the log domain."""
    lv = np.asarray(log_values, dtype=float)
    if lv.shape[-1] != len(grid):
        raise InputError("values do not match the grid")
    with np.errstate(divide="ignore"):
        logw = np.log(grid.weights)
    return log_sum_exp(lv + logw, axis=-1)


def log_normal_interval(a, b):
    """``log(Phi(b) - Phi(a))`` for the standard normal CDF, stable in both tails."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    lhi = special.log_ndtr(hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lhi + np.log1p(-np.exp(special.log_ndtr(lo) - lhi))
    out = np.where(hi > lo, out, -np.inf)
    return float(out) if np.ndim(out) == 0 else out


def _box_grid(box, support, n):
    grids = []
    for (lo, hi), (slo, shi, inc_lo, inc_hi) in zip(box, support):
        grids.append(Grid1D.trapezoid(lo, hi, n, include_lo=inc_lo or lo > slo,
                                      include_hi=inc_hi or hi < shi))
    return grids


def _eval_box(logf, box, support, n):
    grids = _box_grid(box, support, n)
    mesh = np.meshgrid(*[g.points for g in grids], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh])
    lf = np.asarray(logf(pts), dtype=float).reshape(mesh[0].shape)
    with np.errstate(divide="ignore"):
        lw = sum(np.meshgrid(*[np.log(g.weights) for g in grids], indexing="ij"))
    return grids, lf, log_sum_exp(lf + lw)


def _mask_boxes(lf, grids, box, support, threshold):
    """Bounding boxes (one cell of margin) of the near-maximal regions of ``lf``."""
    mask = lf >= lf.max() - threshold
    labels, _ = ndimage.label(mask, structure=np.ones((3,) * lf.ndim))
    out = []
    for sl in ndimage.find_objects(labels):
        nb = []
        for s, g, (lo, hi), (slo, shi, _, _) in zip(sl, grids, box, support):
            i0, i1 = s.start, s.stop - 1
            m = g.points.size - 1
            new_lo = g.points[max(i0 - 1, 0)]
            new_hi = g.points[min(i1 + 1, m)]
            # a region running into an artificial edge continues outside the box
            if i0 == 0 and lo > slo:
                new_lo = max(slo, lo - (hi - lo))
            if i1 == m and hi < shi:
                new_hi = min(shi, hi + (hi - lo))
            nb.append((float(new_lo), float(new_hi)))
        out.append(nb)
    merged = True
    while merged and len(out) > 1:
        merged = False
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                a, b = out[i], out[j]
                if all(x0 <= y1 and y0 <= x1 for (x0, x1), (y0, y1) in zip(a, b)):
                    out[i] = [(min(x0, y0), max(x1, y1)) for (x0, x1), (y0, y1) in zip(a, b)]
                    del out[j]
                    merged = True
                    break
            if merged:
                break
    return out


def _refine(logf, box, support, n, n_refine, threshold, tol, n_max, budget):
    """Zoom-and-refine trapezoid integration of one box; returns a list of log parts."""
    work = [(box, n)]
    parts = []
    while work:
        box, n = work.pop()
        prev = None
        while True:
            budget[0] -= 1
            grids, lf, total = _eval_box(logf, box, support, n)
            if not np.isfinite(lf.max()) or budget[0] <= 0:
                parts.append(total)
                break
            boxes = _mask_boxes(lf, grids, box, support, threshold)
            if len(boxes) > 1:
                work.extend((b, n_refine) for b in boxes)
                break
            nb = boxes[0]
            changed = any(
                (b1 - b0) < 0.5 * (h - l) or b0 < l or b1 > h
                for (b0, b1), (l, h) in zip(nb, box))
            if changed:
                box, n, prev = nb, n_refine, None
                continue
            if prev is not None and abs(total - prev) < tol:
                parts.append(total)
                break
            if 2 * n - 1 > n_max:
                parts.append(total)
                break
            prev, n = total, 2 * n - 1
    return parts


def _stencil(k):
    """Offsets of the central-difference stencil for gradient and Hessian."""
    pts = [np.zeros(k)]
    for i in range(k):
        for sgn in (1, -1):
            e = np.zeros(k)
            e[i] = sgn
            pts.append(e)
    for i in range(k):
        for j in range(i + 1, k):
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                e = np.zeros(k)
                e[i], e[j] = si, sj
                pts.append(e)
    return np.array(pts).T


def _derivatives(f, k):
    """Gradient and Hessian (in stencil units) from values on :func:`_stencil`."""
    g = np.empty(k)
    H = np.empty((k, k))
    f0 = f[0]
    for i in range(k):
        fp, fm = f[1 + 2 * i], f[2 + 2 * i]
        g[i] = (fp - fm) / 2
        H[i, i] = fp - 2 * f0 + fm
    c = 1 + 2 * k
    for i in range(k):
        for j in range(i + 1, k):
            fpp, fpm, fmp, fmm = f[c:c + 4]
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / 4
            c += 4
    return g, H


def _newton(f, t, h, lo, hi, spacing, offs, max_iter):
    """Damped, bound-constrained Newton ascent.

    Returns ``(t, hessian or None, converged)``.  Coordinates pinned at a
    bound with the gradient pointing outward are held fixed (active set).
    """
    k = t.size
    span = hi - lo
    floor = span * 1e-13
    H = None
    for _ in range(max_iter):
        # keep the stencil inside the support by moving its centre inward
        h = np.clip(h, floor, span / 4)
        t = np.clip(t, lo + h, hi - h)
        vals = f(t[:, None] + offs * h[:, None])
        if not np.all(np.isfinite(vals)):
            if np.all(h <= floor * 1.01):
                return t, H, False
            h = h / 4
            continue
        g, Hs = _derivatives(vals, k)
        g, H = g / h, Hs / np.outer(h, h)
        pinned = ((t <= lo + h * 1.0001) & (g < 0)) | ((t >= hi - h * 1.0001) & (g > 0))
        free = ~pinned
        step = np.zeros(k)
        sd = np.full(k, np.inf)
        if free.any():
            Hf = H[np.ix_(free, free)]
            top = float(np.linalg.eigvalsh(Hf).max())
            concave = top < 0
            # Levenberg shift where the surface is not locally concave
            A = -Hf if concave else (-Hf + (top + 1e-3 * np.max(np.abs(np.diag(Hf))) + 1e-300)
                                     * np.eye(int(free.sum())))
            step[free] = np.linalg.solve(A, g[free])
            decrement = float(g[free] @ step[free]) if concave else np.inf
            sd[free] = 1.0 / np.sqrt(np.diag(A))
        else:
            decrement = 0.0
        sd_all = 1.0 / np.sqrt(np.maximum(np.abs(np.diag(H)), 1e-300))
        sd = np.where(np.isfinite(sd), sd, sd_all)
        h_new = np.minimum(0.2 * sd, span / 4)
        # derivatives are trusted once the stencil is below the local width
        if decrement < 1e-4 and np.all(h <= 0.5 * sd):
            return t, H, True
        step = np.clip(step, -4 * spacing, 4 * spacing)
        cand = np.clip(t[:, None] + step[:, None] * 0.5 ** np.arange(12)[None, :],
                       lo[:, None], hi[:, None])
        cv = f(cand)
        best = int(np.argmax(cv))
        if cv[best] > vals[0]:
            t = cand[:, best]
            h = h_new
        else:
            # derivatives too coarse to give an ascent direction
            h = np.minimum(h, h_new) / 4
    return t, H, False


def _local_frame(logf, t0, support, spacing, max_iter: int = 80):
    """Local mode, Cholesky factor of the local covariance (Laplace frame) and validity.

    Damped Newton ascent on ``logf`` with central-difference derivatives,
    with a Nelder-Mead restart when Newton stalls far from a mode (narrow
    curved ridges); the stencil step tracks a fifth of the local standard
    deviation.
    """
    k = len(t0)
    lo = np.array([s[0] for s in support])
    hi = np.array([s[1] for s in support])
    span = hi - lo
    spacing = np.asarray(spacing, dtype=float)
    offs = _stencil(k)

    def f(pts):
        out = np.full(pts.shape[1], -np.inf)
        ok = np.all((pts >= lo[:, None]) & (pts <= hi[:, None]), axis=0)
        if ok.any():
            out[ok] = logf(pts[:, ok])
        return out

    t = np.asarray(t0, dtype=float)
    t, H, done = _newton(f, t, spacing / 4, lo, hi, spacing, offs, max_iter)
    if not done:
        t, H2, done = _newton(f, t, spacing * 1e-3, lo, hi, spacing, offs, max_iter)
        H = H2 if H2 is not None else H
    if not done:
        def neg(x):
            v = f(np.asarray(x, dtype=float)[:, None])[0]
            return -v if np.isfinite(v) else np.inf

        simplex = np.vstack([t] + [t + np.eye(k)[i] * spacing[i] * 0.5 for i in range(k)])
        with np.errstate(invalid="ignore"):
            res = optimize.minimize(neg, t, method="Nelder-Mead",
                                    options={"initial_simplex": simplex,
                                             "xatol": 1e-10 * float(np.max(span)),
                                             "fatol": 1e-4, "maxiter": 500 * k})
        if np.isfinite(res.fun) and res.fun <= neg(t):
            t = res.x
        t, H2, done = _newton(f, t, spacing * 1e-4, lo, hi, spacing, offs, max_iter)
        H = H2 if H2 is not None else H
    if H is None or not np.all(np.isfinite(H)):
        return t, np.diag(spacing), False
    try:
        chol = np.linalg.cholesky(np.linalg.inv(-H))
    except np.linalg.LinAlgError:
        d = -np.diag(H)
        sd = np.where(d > 0, 1.0 / np.sqrt(np.maximum(d, 1e-300)), span)
        chol = np.diag(np.minimum(sd, span))
    return t, chol, True


def _profile_starts(logf, grids, lf, support, threshold, max_modes, m=11, iters=60):
    """Starting points from the profile over axis 0 at every node of the other axes.

    For narrow valleys that no coarse node sits on, maximising along axis 0
    column by column traces the valley floor; local maxima of that profile
    are the candidate modes.
    """
    lo, hi = support[0][0], support[0][1]
    rest = np.stack([m_.ravel() for m_ in np.meshgrid(*[g.points for g in grids[1:]],
                                                      indexing="ij")])
    cols = rest.shape[1]
    flat = lf.reshape(lf.shape[0], cols)
    x = grids[0].points[np.argmax(flat, axis=0)]
    best = flat.max(axis=0)
    h = np.full(cols, (hi - lo) / max(grids[0].points.size - 1, 1))
    u = np.linspace(-1.0, 1.0, m)
    for _ in range(iters):
        cand = np.clip(x[None, :] + h[None, :] * u[:, None], lo, hi)
        pts = np.vstack([cand.ravel(), np.tile(rest, m)])
        vals = np.asarray(logf(pts), dtype=float).reshape(m, cols)
        j = np.argmax(vals, axis=0)
        x = cand[j, np.arange(cols)]
        best = vals[j, np.arange(cols)]
        interior = (j > 0) & (j < m - 1)
        h = np.where(interior, h * 2.0 / (m - 1), h)
        if np.all(h < 1e-13 * (hi - lo)):
            break
    prof = best.reshape(lf.shape[1:])
    if not np.isfinite(prof.max()):
        return []
    padded = np.pad(prof, 1, constant_values=-np.inf)
    is_max = prof >= ndimage.maximum_filter(padded, size=3)[(slice(1, -1),) * prof.ndim]
    is_max &= prof >= prof.max() - threshold
    idx = np.argwhere(is_max)
    order = np.argsort([-prof[tuple(i)] for i in idx])
    xs = x.reshape(lf.shape[1:])
    starts = []
    for i in idx[order][:max_modes]:
        i = tuple(i)
        starts.append(np.array([xs[i]] + [g.points[k] for g, k in zip(grids[1:], i)]))
    return starts


def _aligned_frame(mode, chol, support, width):
    """Whitening frame whose first axis is normal to the nearest support edge.

    With a lower-triangular factor the first parameter depends on the first
    whitened coordinate only, so an edge crossing the ``+-width`` box becomes
    a plane of that coordinate and the box can be clipped to it exactly.
    Returns the (row-permuted) factor, the box in whitened coordinates and
    the log Jacobian of the map.
    """
    k = mode.size
    zbox = [(-width, width)] * k
    logdet = float(np.sum(np.log(np.abs(np.diag(chol)))))
    cov = chol @ chol.T
    sd = np.sqrt(np.diag(cov))
    gaps = [min(mode[i] - lo, hi - mode[i]) / sd[i] for i, (lo, hi, _, _) in enumerate(support)]
    p = int(np.argmin(gaps))
    if gaps[p] >= width:
        return chol, zbox, logdet
    perm = [p] + [i for i in range(k) if i != p]
    try:
        low = np.linalg.cholesky(cov[np.ix_(perm, perm)])
    except np.linalg.LinAlgError:
        return chol, zbox, logdet
    out = np.empty_like(low)
    out[perm] = low
    lo, hi = support[p][:2]
    zbox[0] = (max(-width, (lo - mode[p]) / low[0, 0]), min(width, (hi - mode[p]) / low[0, 0]))
    return out, zbox, float(np.sum(np.log(np.diag(low))))


def adaptive_log_integrate(logf, support, *, n0: int = 101, n_refine: int = 33,
                           log_threshold: float = 40.0, tol: float = 1e-4,
                           n_max: int = 257, max_modes: int = 4, width: float = 12.0,
                           max_iter: int = 200) -> float:
    """``log`` of the integral of ``exp(logf)`` over a box, for sharply peaked integrands.

    Parameters
    ----------
    logf : callable
        ``logf(pts)`` maps an array of ``k`` x ``m`` points (one column per
        point) to ``m`` log-integrand values; ``-inf`` marks points outside
        the integration region.
    support : sequence of ``(lo, hi, include_lo, include_hi)``
        Integration limits per dimension.  The initial grid never samples an
        excluded end; zoomed boxes treat every end as closed (a single edge
        has measure zero), so ``logf`` must accept points on the edges.
    n0, n_refine : int
        Nodes per dimension on the initial grid and on zoomed grids.
    log_threshold : float
        Points more than this below the running maximum are treated as
        negligible when choosing where to zoom.
    tol : float
        Absolute tolerance on the log integral between successive
        resolutions of a final box.
    max_modes : int
        Number of separate near-maximal regions of the initial grid that
        are followed.
    width : float
        Half-width, in local standard deviations, of the box laid around
        each mode.

    Notes
    -----
    The trapezoid rule on the full support locates the mass.  Each
    near-maximal region of that grid, and in two or more dimensions each
    local maximum of the profile along the first axis, is polished to a
    local mode, a
    finite-difference Hessian there defines whitened coordinates, and a
    box of ``+-width`` local standard deviations, clipped to the nearest
    support edge, is integrated in those coordinates by zooming onto its near-maximal region and doubling the
    resolution until the log integral is stable.  Modes closer than
    ``width`` local standard deviations are merged.
    """
    support = [(float(lo), float(hi), bool(a), bool(b)) for lo, hi, a, b in support]
    k = len(support)
    if k == 0:
        return float(np.asarray(logf(np.empty((0, 1)))).reshape(-1)[0])
    for lo, hi, _, _ in support:
        if not hi > lo:
            raise InputError(f"empty integration interval [{lo}, {hi}]")
    box = [(lo, hi) for lo, hi, _, _ in support]
    grids, lf, coarse = _eval_box(logf, box, support, n0)
    if not np.isfinite(lf.max()):
        return coarse
    spacing = np.array([(hi - lo) / max(n0 - 1, 1) for lo, hi in box])
    mask = lf >= lf.max() - log_threshold
    labels, count = ndimage.label(mask, structure=np.ones((3,) * k))
    peaks = ndimage.maximum_position(np.where(mask, lf, -np.inf), labels, range(1, count + 1))
    peaks = sorted(peaks, key=lambda ix: -lf[ix])[:max_modes]
    starts = [np.array([g.points[i] for g, i in zip(grids, ix)]) for ix in peaks]
    if k > 1:
        starts = _profile_starts(logf, grids, lf, support, log_threshold, max_modes) + starts
    frames, valid = [], []
    for t0 in starts:
        if any(np.linalg.norm(np.linalg.solve(c, t0 - m)) < width for m, c in frames):
            continue
        t, chol, ok = _local_frame(logf, t0, support, spacing)
        if any(np.linalg.norm(np.linalg.solve(c, t - m)) < width for m, c in frames):
            continue
        frames.append((t, chol))
        valid.append(ok)
    budget = [max_iter]
    if not any(valid):
        # no usable curvature anywhere (e.g. the mass piles against a cut in
        # logf): zoom and refine in the original coordinates
        sub = _refine(logf, box, support, n0, n_refine, log_threshold, tol, n_max, budget)
        return log_sum_exp(sub)

    lo_b = np.array([lo for lo, _, _, _ in support])
    hi_b = np.array([hi for _, hi, _, _ in support])

    parts = []
    for mode, chol in frames:
        chol, zbox, logdet = _aligned_frame(mode, chol, support, width)
        slack = 1e-9 * np.sqrt(np.sum(chol * chol, axis=1))

        def zlogf(z, mode=mode, chol=chol, slack=slack):
            th = mode[:, None] + chol @ z
            # edges are closed here (an excluded endpoint has measure zero);
            # points a rounding error outside are pulled back onto the edge
            ok = np.all((th >= (lo_b - slack)[:, None]) & (th <= (hi_b + slack)[:, None]),
                        axis=0)
            out = np.full(th.shape[1], -np.inf)
            if ok.any():
                out[ok] = logf(np.clip(th[:, ok], lo_b[:, None], hi_b[:, None]))
            return out

        zsup = [(a, b, True, True) for a, b in zbox]
        sub = _refine(zlogf, zbox, zsup, n_refine, n_refine,
                      log_threshold, tol, n_max, budget)
        parts.append(log_sum_exp(sub) + logdet)
    return log_sum_exp(parts)
