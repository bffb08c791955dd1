"""Relative-belief inference over one-source / two-source hypotheses.

Each hypothesis carries a prior over the nuisance triple ``(q, x_c, d)``;
its marginal likelihood is the prior-weighted average of the dataset
likelihood over that support, accumulated in the log domain (``q`` in
closed form, ``(x_c, d)`` by adaptive trapezoid quadrature).  Posteriors,
relative-belief ratios ``RB_k = pr(k|D) / pr(k)`` and evidence strengths
follow from the marginals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .calibration import SourceCalibration
from .errors import ConfigurationError, DegenerateDataError, InputError, UndefinedRBError
from .numerics import Grid1D, adaptive_log_integrate, log_normal_interval, log_sum_exp
from .scene import Dataset

LABELS = ("src1", "src2", "combined")
DEFAULT_Q0 = 0.05


@dataclass(frozen=True)
class Prior1D:
    """Prior on one nuisance parameter.

    ``kind`` is ``"uniform"`` on ``[lo, hi]``, ``"gaussian"`` with ``mean`` and
    ``variance`` truncated to ``[lo, hi]``, or ``"delta"`` at ``lo == hi``.
    ``include_lo`` / ``include_hi`` mark whether the interval ends belong to
    the support.
    """

    kind: str
    lo: float
    hi: float
    mean: float | None = None
    variance: float | None = None
    include_lo: bool = True
    include_hi: bool = True

    def __post_init__(self):
        if self.kind == "delta":
            if self.lo != self.hi:
                raise InputError("a delta prior has lo == hi")
        elif self.kind in ("uniform", "gaussian"):
            if not self.lo < self.hi:
                raise InputError(f"prior support needs lo < hi, got [{self.lo}, {self.hi}]")
            if self.kind == "gaussian":
                if self.mean is None or self.variance is None or not self.variance > 0:
                    raise InputError("a gaussian prior needs a mean and a positive variance")
        else:
            raise InputError(f"unknown prior kind {self.kind!r}")

    @classmethod
    def uniform(cls, lo, hi, *, include_lo=True, include_hi=True) -> "Prior1D":
        return cls("uniform", float(lo), float(hi),
                   include_lo=include_lo, include_hi=include_hi)

    @classmethod
    def gaussian(cls, mean, variance, lo, hi) -> "Prior1D":
        return cls("gaussian", float(lo), float(hi), float(mean), float(variance))

    @classmethod
    def delta(cls, point) -> "Prior1D":
        return cls("delta", float(point), float(point))

    def log_density(self, x) -> np.ndarray:
        """Unnormalised log density at ``x`` (zero outside the support is ``-inf``)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "delta":
            return np.where(x == self.lo, 0.0, -np.inf)
        inside = (x >= self.lo) & (x <= self.hi)
        if not self.include_lo:
            inside &= x > self.lo
        if not self.include_hi:
            inside &= x < self.hi
        if self.kind == "uniform":
            val = np.zeros_like(x)
        else:
            val = -0.5 * (x - self.mean) ** 2 / self.variance
        return np.where(inside, val, -np.inf)

    def log_norm(self) -> float:
        """Log of the integral of ``exp(log_density)`` over the support (0 for a delta)."""
        if self.kind == "delta":
            return 0.0
        if self.kind == "uniform":
            return math.log(self.hi - self.lo)
        s = math.sqrt(self.variance)
        return (0.5 * math.log(2 * math.pi * self.variance)
                + log_normal_interval((self.lo - self.mean) / s, (self.hi - self.mean) / s))

    def log_mass(self, a, b) -> float:
        """Log of the prior probability of ``[a, b]``."""
        if self.kind == "delta":
            return 0.0 if a <= self.lo <= b else -math.inf
        lo, hi = max(a, self.lo), min(b, self.hi)
        if not hi > lo:
            return -math.inf
        if self.kind == "uniform":
            return math.log((hi - lo) / (self.hi - self.lo))
        s = math.sqrt(self.variance)
        full = log_normal_interval((self.lo - self.mean) / s, (self.hi - self.mean) / s)
        return log_normal_interval((lo - self.mean) / s, (hi - self.mean) / s) - full

    def support(self) -> tuple[float, float, bool, bool]:
        return (self.lo, self.hi, self.include_lo, self.include_hi)

    def discretize(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and normalised log prior masses for trapezoid quadrature."""
        if self.kind == "delta":
            return np.array([self.lo]), np.array([0.0])
        grid = Grid1D.trapezoid(self.lo, self.hi, n,
                                include_lo=self.include_lo, include_hi=self.include_hi)
        with np.errstate(divide="ignore"):
            logm = self.log_density(grid.points) + np.log(grid.weights)
        return grid.points, logm - log_sum_exp(logm)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "delta":
            out["point"] = self.lo
            return out
        out.update(lo=self.lo, hi=self.hi)
        if self.kind == "gaussian":
            out.update(mean=self.mean, variance=self.variance)
        if not self.include_lo:
            out["include_lo"] = False
        if not self.include_hi:
            out["include_hi"] = False
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "Prior1D":
        doc = dict(doc)
        kind = doc.pop("kind", None)
        allowed = {"delta": {"point"},
                   "uniform": {"lo", "hi", "include_lo", "include_hi"},
                   "gaussian": {"lo", "hi", "mean", "variance"}}
        if kind not in allowed:
            raise ConfigurationError(f"unknown prior kind {kind!r}")
        extra = set(doc) - allowed[kind]
        if extra:
            raise ConfigurationError(f"unknown prior fields {sorted(extra)}")
        try:
            if kind == "delta":
                return cls.delta(doc["point"])
            if kind == "uniform":
                return cls.uniform(doc["lo"], doc["hi"],
                                   include_lo=doc.get("include_lo", True),
                                   include_hi=doc.get("include_hi", True))
            return cls.gaussian(doc["mean"], doc["variance"], doc["lo"], doc["hi"])
        except KeyError as exc:
            raise ConfigurationError(f"prior missing field {exc}") from None
        except InputError as exc:
            raise ConfigurationError(str(exc)) from None


@dataclass(frozen=True)
class QuadratureConfig:
    """How nuisance integrals are evaluated.

    ``method="adaptive"`` (default) integrates ``q`` in closed form and
    zooms a trapezoid grid onto the likelihood peak in ``(x_c, d)``;
    ``n_x`` and ``n_d`` are the initial node counts and ``n_refine`` the
    node count of zoomed grids.  ``method="grid"`` is the plain tensor
    trapezoid rule with ``n_q * n_x * n_d`` nodes, accurate only when the
    grid spacing resolves the likelihood.
    """

    n_q: int = 101
    n_x: int = 101
    n_d: int = 101
    method: str = "adaptive"
    n_refine: int = 33
    tol: float = 1e-4

    def __post_init__(self):
        for name in ("n_q", "n_x", "n_d", "n_refine"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.method not in ("adaptive", "grid"):
            raise ConfigurationError(f"quadrature method must be 'adaptive' or 'grid', "
                                     f"got {self.method!r}")
        if not self.tol > 0:
            raise ConfigurationError("quadrature tolerance must be positive")


@dataclass(frozen=True)
class HypothesisSpec:
    """One hypothesis about the scene.

    ``q_prior``, ``x_c_prior`` and ``d_prior`` define its nuisance support;
    ``prior`` is the hypothesis probability pr(k).  A hypothesis with
    ``parts`` is a mixture whose marginal likelihood is the
    ``prior``-weighted average of the parts' marginals.
    """

    label: Any
    q_prior: Prior1D
    x_c_prior: Prior1D
    d_prior: Prior1D
    prior: float
    parts: tuple["HypothesisSpec", ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.prior <= 1.0:
            raise InputError(f"hypothesis prior must lie in [0, 1], got {self.prior}")
        if self.q_prior.lo < 0 or self.q_prior.hi > 1:
            raise InputError("q support must lie within [0, 1]")
        if self.d_prior.lo < 0:
            raise InputError("d support must be nonnegative")

    @classmethod
    def merged(cls, label, parts: Sequence["HypothesisSpec"], prior: float) -> "HypothesisSpec":
        """Mixture hypothesis, e.g. a single source of unknown type."""
        total = sum(p.prior for p in parts)
        if not parts or not total > 0:
            raise InputError("a merged hypothesis needs parts with positive weight")
        first = parts[0]
        return cls(label, first.q_prior, first.x_c_prior, first.d_prior, prior, tuple(parts))


def three_hypotheses(x_c_prior: Prior1D, d_prior: Prior1D, q0: float = DEFAULT_Q0,
                     priors=(0.25, 0.25, 0.5)) -> list[HypothesisSpec]:
    """The src1 / src2 / combined hypothesis set.

    ``q = 1`` leaves only source 1 in the mixture model and ``q = 0`` only
    source 2, so src1 takes ``q in [1 - q0, 1]``, src2 takes ``[0, q0]`` and
    combined the open interval in between.  Single-source hypotheses fix
    ``d = 0``; ``d_prior`` applies to the combined hypothesis and should
    exclude ``d = 0``.
    """
    if not 0 < q0 < 0.5:
        raise InputError(f"q0 must lie in (0, 0.5), got {q0}")
    if d_prior.kind != "delta" and d_prior.lo <= 0 and d_prior.include_lo:
        raise InputError("the combined hypothesis must give d = 0 zero prior")
    if d_prior.kind == "delta" and d_prior.lo <= 0:
        raise InputError("the combined hypothesis must give d = 0 zero prior")
    zero = Prior1D.delta(0.0)
    return [
        HypothesisSpec("src1", Prior1D.uniform(1 - q0, 1.0), x_c_prior, zero, priors[0]),
        HypothesisSpec("src2", Prior1D.uniform(0.0, q0), x_c_prior, zero, priors[1]),
        HypothesisSpec("combined",
                       Prior1D.uniform(q0, 1 - q0, include_lo=False, include_hi=False),
                       x_c_prior, d_prior, priors[2]),
    ]


def _stats(data: Dataset, variances):
    v = np.asarray(variances, dtype=float)
    if v.shape != (4,) or np.any(~(v > 0)):
        raise InputError("variances must be 4 strictly positive values")
    n = len(data)
    const = -0.5 * np.sum(data.scatter / v) - 0.5 * n * np.sum(np.log(2 * np.pi * v))
    return n, data.mean, v, const


def grid_log_likelihood(data: Dataset, variances, q, a, b) -> np.ndarray:
    """Dataset log-likelihood of ``q * a + (1 - q) * b`` for every q node.

    ``a`` and ``b`` are model intensities of the two sources with shape
    ``(..., 4)``; the result has shape ``(len(q), ...)``.
    """
    n, mean, v, const = _stats(data, variances)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    r0 = mean - b
    diff = a - b
    out = np.empty((q.size,) + a.shape[:-1])
    for i, qi in enumerate(q):
        r = r0 - qi * diff
        out[i] = np.sum(r * r / v, axis=-1)
    return -0.5 * n * out + const


def _domain_mask(cal: SourceCalibration, x: np.ndarray) -> np.ndarray:
    lo, hi = cal.domain
    return (x >= lo) & (x <= hi)


def q_marginal(q_prior: Prior1D, n: int, mean, variances, a, b) -> np.ndarray:
    """Log of ``int pr(q) exp(-chi2(q) / 2) dq`` for the mixture ``q a + (1 - q) b``.

    ``chi2(q) = n * sum_j (mean_j - b_j - q (a_j - b_j))**2 / v_j`` is
    quadratic in ``q``, so for uniform and Gaussian priors the integral is a
    truncated Gaussian integral.  ``a`` and ``b`` have shape ``(..., 4)``.
    Data-only terms (the scatter about the mean and the normalisation) are
    left out.
    """
    v = np.asarray(variances, dtype=float)
    r0 = np.asarray(mean, dtype=float) - b
    diff = a - b
    if q_prior.kind == "delta":
        r = r0 - q_prior.lo * diff
        return -0.5 * n * np.sum(r * r / v, axis=-1)
    # exponent is -(P q^2 - 2 S q + K) / 2
    P = n * np.sum(diff * diff / v, axis=-1)
    S = n * np.sum(r0 * diff / v, axis=-1)
    K = n * np.sum(r0 * r0 / v, axis=-1)
    if q_prior.kind == "gaussian":
        P = P + 1.0 / q_prior.variance
        S = S + q_prior.mean / q_prior.variance
        K = K + q_prior.mean ** 2 / q_prior.variance
    lo, hi = q_prior.lo, q_prior.hi
    flat = P * (hi - lo) ** 2 < 1e-10
    Ps = np.where(flat, 1.0, P)
    mu = S / Ps
    rt = np.sqrt(Ps)
    peaked = (-0.5 * (K - S * mu) + 0.5 * np.log(2 * np.pi / Ps)
              + log_normal_interval(rt * (lo - mu), rt * (hi - mu)))
    mid = 0.5 * (lo + hi)
    flat_val = -0.5 * (P * mid * mid - 2 * S * mid + K) + math.log(hi - lo)
    return np.where(flat, flat_val, peaked) - q_prior.log_norm()


def _in_domain(cal1, cal2, x, d):
    return _domain_mask(cal1, x - d / 2) & _domain_mask(cal2, x + d / 2)


def _centroid_window(cal1, cal2, d):
    """Centroids that keep both sources inside their calibration domains at separation ``d``."""
    (lo1, hi1), (lo2, hi2) = cal1.domain, cal2.domain
    return np.maximum(lo1 + d / 2, lo2 - d / 2), np.minimum(hi1 + d / 2, hi2 - d / 2)


def _log_domain_fraction(hyp: HypothesisSpec, cal1, cal2, n: int = 401) -> float:
    """Log prior mass of the (x_c, d) support that keeps both sources calibrated.

    Exact in ``x_c`` (the allowed centroids form an interval at each ``d``),
    trapezoid in ``d``.
    """
    corners_x = [hyp.x_c_prior.lo, hyp.x_c_prior.hi]
    corners_d = [hyp.d_prior.lo, hyp.d_prior.hi]
    if all(_in_domain(cal1, cal2, x, d) for x in corners_x for d in corners_d):
        return 0.0
    ds, ld = hyp.d_prior.discretize(n)
    a, b = _centroid_window(cal1, cal2, ds)
    lm = np.array([hyp.x_c_prior.log_mass(ai, bi) for ai, bi in zip(a, b)])
    if not np.any(np.isfinite(lm)):
        raise ConfigurationError(
            f"hypothesis {hyp.label!r}: nuisance support lies outside the calibration domain")
    return log_sum_exp(ld + lm)


def marginal_log_likelihood(hyp: HypothesisSpec, data: Dataset,
                            cal1: SourceCalibration, cal2: SourceCalibration,
                            variances, grids: QuadratureConfig | None = None) -> float:
    """Log of the prior-averaged dataset likelihood of ``hyp``.

    Nuisance points whose source positions fall outside either calibration
    domain carry no prior mass; the prior is renormalised over the rest.
    """
    grids = grids or QuadratureConfig()
    if hyp.parts:
        w = np.array([p.prior for p in hyp.parts], dtype=float)
        with np.errstate(divide="ignore"):
            logw = np.log(w / w.sum())
        terms = [lw + marginal_log_likelihood(p, data, cal1, cal2, variances, grids)
                 for lw, p in zip(logw, hyp.parts) if np.isfinite(lw)]
        return log_sum_exp(terms)
    if grids.method == "grid":
        return _grid_marginal(hyp, data, cal1, cal2, variances, grids)

    n, mean, v, const = _stats(data, variances)
    # an excluded end point has measure zero; closing the support keeps the
    # trapezoid rule second order when the mass sits against that end
    priors = [replace(p, include_lo=True, include_hi=True)
              for p in (hyp.x_c_prior, hyp.d_prior)]
    free = [i for i, p in enumerate(priors) if p.kind != "delta"]
    norm = sum(p.log_norm() for p in priors)
    support = {i: priors[i].support() for i in free}
    if free == [0]:
        # fixed d: the calibrated centroids are an interval, so clip to it
        # instead of cutting the integrand inside the support
        a, b = _centroid_window(cal1, cal2, priors[1].lo)
        lo, hi = max(priors[0].lo, float(a)), min(priors[0].hi, float(b))
        if not hi > lo:
            raise ConfigurationError(f"hypothesis {hyp.label!r}: nuisance support lies "
                                     "outside the calibration domain")
        support[0] = (lo, hi, True, True)

    def logf(pts):
        xd = [np.full(pts.shape[1], p.lo) for p in priors]
        for i, row in zip(free, pts):
            xd[i] = row
        x, d = xd
        ok = _in_domain(cal1, cal2, x, d)
        out = np.full(x.shape, -np.inf)
        if ok.any():
            xo, do = x[ok], d[ok]
            out[ok] = (q_marginal(hyp.q_prior, n, mean, v, cal1(xo - do / 2), cal2(xo + do / 2))
                       + priors[0].log_density(xo) + priors[1].log_density(do))
        return out

    sizes = {0: grids.n_x, 1: grids.n_d}
    n0 = max([sizes[i] for i in free], default=1)
    total = adaptive_log_integrate(logf, [support[i] for i in free],
                                   n0=n0, n_refine=grids.n_refine, tol=grids.tol)
    return total - norm - _log_domain_fraction(hyp, cal1, cal2) + const


def _grid_marginal(hyp, data, cal1, cal2, variances, grids) -> float:
    qs, lq = hyp.q_prior.discretize(grids.n_q)
    xs, lx = hyp.x_c_prior.discretize(grids.n_x)
    ds, ld = hyp.d_prior.discretize(grids.n_d)
    x1 = xs[:, None] - ds[None, :] / 2
    x2 = xs[:, None] + ds[None, :] / 2
    ok = _domain_mask(cal1, x1) & _domain_mask(cal2, x2)
    logp_xd = lx[:, None] + ld[None, :]
    logp_xd = np.where(ok, logp_xd, -np.inf)
    ok &= np.isfinite(logp_xd)
    if not np.any(ok):
        raise ConfigurationError(
            f"hypothesis {hyp.label!r}: nuisance support lies outside the calibration domain")
    logp_xd = logp_xd - log_sum_exp(logp_xd[ok])
    keep = np.isfinite(lq)
    qs, lq = qs[keep], lq[keep]

    a = cal1(x1[ok])
    b = cal2(x2[ok])
    ll = grid_log_likelihood(data, variances, qs, a, b)
    return log_sum_exp(ll + lq[:, None] + logp_xd[ok][None, :])


def posteriors(priors, log_marginals) -> np.ndarray:
    """Bayes' rule in the log domain; returns pr(k|D)."""
    pr = np.asarray(priors, dtype=float)
    lm = np.asarray(log_marginals, dtype=float)
    _check_priors(pr)
    if not np.any(np.isfinite(lm)) or np.any(lm == np.inf):
        raise DegenerateDataError("no hypothesis has a finite positive likelihood")
    # shift first so the largest marginal is exactly zero (no cancellation error)
    with np.errstate(divide="ignore"):
        joint = (lm - lm.max()) + np.log(pr)
    if not np.any(np.isfinite(joint)):
        raise DegenerateDataError("no hypothesis has a finite positive likelihood")
    return np.exp(joint - log_sum_exp(joint))


def _check_priors(pr: np.ndarray) -> None:
    if pr.ndim != 1 or pr.size == 0 or np.any(pr < 0):
        raise InputError("hypothesis priors must be a nonempty list of nonnegative values")
    if abs(pr.sum() - 1.0) > 1e-9:
        raise InputError(f"hypothesis priors must sum to 1, got {pr.sum()!r}")


def rb_ratios(posts, priors) -> np.ndarray:
    """Elementwise ``posterior / prior``."""
    po = np.asarray(posts, dtype=float)
    pr = np.asarray(priors, dtype=float)
    if np.any(pr <= 0):
        raise UndefinedRBError("RB is undefined for a hypothesis with zero prior")
    return po / pr


def log_rb(priors, log_marginals) -> np.ndarray:
    """``log RB_k = log L_k - log sum_k' pr(k') L_k'``, without forming posteriors."""
    pr = np.asarray(priors, dtype=float)
    lm = np.asarray(log_marginals, dtype=float)
    _check_priors(pr)
    if np.any(pr <= 0):
        raise UndefinedRBError("RB is undefined for a hypothesis with zero prior")
    if not np.any(np.isfinite(lm)) or np.any(lm == np.inf):
        raise DegenerateDataError("no hypothesis has a finite positive likelihood")
    rel = lm - lm.max()
    return rel - log_sum_exp(rel + np.log(pr))


def evidence_strength(posts, rb) -> np.ndarray:
    """``E_k = sum over k' != k of pr(k'|D) * [RB_k > RB_k']``.

    Ties contribute nothing (the step function is zero at zero).
    """
    po = np.asarray(posts, dtype=float)
    r = np.asarray(rb, dtype=float)
    if po.shape != r.shape:
        raise InputError("posteriors and RB values must be aligned")
    order = np.argsort(r, kind="stable")
    cum = np.concatenate(([0.0], np.cumsum(po[order])))
    below = np.searchsorted(r[order], r, side="left")
    return np.clip(cum[below], 0.0, 1.0)


@dataclass(frozen=True)
class RBResult:
    """Per-hypothesis marginals, posteriors, RB ratios and evidence strengths."""

    labels: tuple
    log_marginals: np.ndarray
    priors: np.ndarray
    posteriors: np.ndarray
    rb: np.ndarray
    evidence: np.ndarray
    selected: tuple = field(default=())

    @classmethod
    def from_marginals(cls, labels, priors, log_marginals) -> "RBResult":
        labels = tuple(labels)
        pr = np.asarray(priors, dtype=float)
        lm = np.asarray(log_marginals, dtype=float)
        if not (len(labels) == pr.size == lm.size):
            raise InputError("labels, priors and marginals must be aligned")
        post = posteriors(pr, lm)
        lrb = log_rb(pr, lm)
        rb = np.exp(lrb)
        ev = evidence_strength(post, lrb)
        top = np.flatnonzero(lrb == lrb.max())
        return cls(labels, lm, pr, post, rb, ev, tuple(labels[i] for i in top))

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, label) -> dict:
        i = self.labels.index(label)
        return {"log_marginal": float(self.log_marginals[i]), "prior": float(self.priors[i]),
                "posterior": float(self.posteriors[i]), "rb": float(self.rb[i]),
                "evidence": float(self.evidence[i])}

    @property
    def plausible(self) -> tuple:
        """Labels with RB > 1."""
        return tuple(lab for lab, r in zip(self.labels, self.rb) if r > 1.0)

    def to_dict(self) -> dict:
        return {
            "hypotheses": [dict(label=lab, **self[lab]) for lab in self.labels],
            "argmax": list(self.selected),
            "plausible": list(self.plausible),
        }


def discriminate(data: Dataset, hypotheses: Sequence[HypothesisSpec],
                 cal1: SourceCalibration, cal2: SourceCalibration, variances,
                 grids: QuadratureConfig | None = None) -> RBResult:
    """Relative-belief comparison of ``hypotheses`` given ``data``."""
    labels = [h.label for h in hypotheses]
    if len(set(labels)) != len(labels):
        raise ConfigurationError("hypothesis labels must be unique")
    lm = [marginal_log_likelihood(h, data, cal1, cal2, variances, grids) for h in hypotheses]
    return RBResult.from_marginals(labels, [h.prior for h in hypotheses], lm)


# -- configuration documents -------------------------------------------------

_GRID_KEYS = {"n_q", "n_x", "n_d", "method", "n_refine", "tol"}
_CONFIG_KEYS = {"q0", "priors", "x_c", "d", "grids", "ignorant_single"}


@dataclass(frozen=True)
class DiscriminationConfig:
    """Hypothesis set and quadrature for a discrimination run (JSON-serialisable)."""

    x_c_prior: Prior1D
    d_prior: Prior1D
    q0: float = DEFAULT_Q0
    priors: tuple = (0.25, 0.25, 0.5)
    grids: QuadratureConfig = QuadratureConfig()
    ignorant_single: bool = False

    def hypotheses(self) -> list[HypothesisSpec]:
        if self.ignorant_single:
            p_single, p_comb = self.priors
            src1, src2, comb = three_hypotheses(self.x_c_prior, self.d_prior, self.q0,
                                                (0.5, 0.5, p_comb))
            comb = HypothesisSpec(comb.label, comb.q_prior, comb.x_c_prior,
                                  comb.d_prior, p_comb)
            return [HypothesisSpec.merged("single", [src1, src2], p_single), comb]
        return three_hypotheses(self.x_c_prior, self.d_prior, self.q0, self.priors)

    @classmethod
    def default_for(cls, cal1: SourceCalibration, cal2: SourceCalibration,
                    d_max: float = 200.0) -> "DiscriminationConfig":
        """Centroid uniform over the central 80% of the shared domain, d in (0, d_max]."""
        lo = max(cal1.domain[0], cal2.domain[0])
        hi = min(cal1.domain[1], cal2.domain[1])
        mid, half = (lo + hi) / 2, 0.4 * (hi - lo)
        return cls(Prior1D.uniform(mid - half, mid + half),
                   Prior1D.uniform(0.0, d_max, include_lo=False))

    def to_dict(self) -> dict:
        return {
            "q0": self.q0,
            "priors": dict(zip(["single", "combined"] if self.ignorant_single else LABELS,
                               self.priors)),
            "x_c": self.x_c_prior.to_dict(),
            "d": self.d_prior.to_dict(),
            "grids": dict(self.grids.__dict__),
            "ignorant_single": self.ignorant_single,
        }

    @classmethod
    def from_dict(cls, doc: dict, base: "DiscriminationConfig | None" = None) -> "DiscriminationConfig":
        """Parse a config document; missing fields fall back to ``base``."""
        extra = set(doc) - _CONFIG_KEYS
        if extra:
            raise ConfigurationError(f"unknown configuration fields {sorted(extra)}")
        if base is None and ("x_c" not in doc or "d" not in doc):
            raise ConfigurationError("configuration needs 'x_c' and 'd' priors")
        ignorant = bool(doc.get("ignorant_single", base.ignorant_single if base else False))
        names = ["single", "combined"] if ignorant else list(LABELS)
        if "priors" in doc:
            pri = doc["priors"]
            if not isinstance(pri, dict) or set(pri) != set(names):
                raise ConfigurationError(f"'priors' must map exactly {names} to probabilities")
            priors = tuple(float(pri[k]) for k in names)
        elif base is not None and len(base.priors) == len(names):
            priors = base.priors
        else:
            priors = (0.5, 0.5) if ignorant else (0.25, 0.25, 0.5)
        if any(p < 0 for p in priors) or not math.isclose(sum(priors), 1.0, abs_tol=1e-9):
            raise ConfigurationError("hypothesis priors must be nonnegative and sum to 1")
        grids = base.grids if base else QuadratureConfig()
        if "grids" in doc:
            g = doc["grids"]
            if not isinstance(g, dict) or set(g) - _GRID_KEYS:
                raise ConfigurationError(f"'grids' accepts only {sorted(_GRID_KEYS)}")
            try:
                g = {k: (str(x) if k == "method" else float(x) if k == "tol" else int(x))
                     for k, x in g.items()}
            except (TypeError, ValueError):
                raise ConfigurationError("invalid value in 'grids'") from None
            grids = QuadratureConfig(**{**grids.__dict__, **g})
        q0 = float(doc.get("q0", base.q0 if base else DEFAULT_Q0))
        if not 0 < q0 < 0.5:
            raise ConfigurationError(f"q0 must lie in (0, 0.5), got {q0}")
        x_c = Prior1D.from_dict(doc["x_c"]) if "x_c" in doc else base.x_c_prior
        d = Prior1D.from_dict(doc["d"]) if "d" in doc else base.d_prior
        cfg = cls(x_c, d, q0, priors, grids, ignorant)
        try:
            cfg.hypotheses()
        except InputError as exc:
            raise ConfigurationError(str(exc)) from None
        return cfg

    @classmethod
    def load(cls, path, base=None) -> "DiscriminationConfig":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ConfigurationError(f"{path}: configuration must be a JSON object")
        return cls.from_dict(doc, base)
