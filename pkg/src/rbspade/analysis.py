"""Closed-form theory and Monte Carlo studies of RB source discrimination.

Covers the two-hypothesis decision between one source (``d = 0``) and two
sources at separation ``d``, its success probability, the small-separation
critical distance, separation sweeps, plausible maps over ``(d, x_c)`` and
the deliberately mis-modelled variants of those studies.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calibration import SourceCalibration
from .errors import DomainError, InputError
from .inference import (DEFAULT_Q0, HypothesisSpec, Prior1D, QuadratureConfig, RBResult,
                        marginal_log_likelihood)
from .numerics import erf, erf_inv, log_sum_exp
from .scene import (Dataset, SceneParams, dataset_log_likelihood, mixture_model,
                    trial_rng)


def _variances(variances) -> np.ndarray:
    v = np.asarray(variances, dtype=float)
    if v.shape[-1:] != (4,) or np.any(~(v > 0)):
        raise InputError("variances must be 4 strictly positive values")
    return v


def mahalanobis2(b, variances) -> np.ndarray | float:
    """``b^T Sigma^-1 b`` for diagonal ``Sigma``; broadcasts over leading axes."""
    v = _variances(variances)
    b = np.asarray(b, dtype=float)
    out = np.sum(b * b / v, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def rb_two_hypothesis(logL_d, logL_0, prior_2S: float = 0.5):
    """RB of the two-source hypothesis against a single one-source alternative.

    ``RB_d = L_d / (pr(1S) L_0 + pr(2S) L_d)``, evaluated as
    ``-log1p(pr(1S) * expm1(logL_0 - logL_d))`` so that the sign of
    ``RB_d - 1`` follows ``L_d - L_0`` even for nearly equal likelihoods.
    """
    if not 0.0 < prior_2S < 1.0:
        raise InputError(f"prior of the two-source hypothesis must lie in (0, 1), got {prior_2S}")
    ld = np.asarray(logL_d, dtype=float)
    l0 = np.asarray(logL_0, dtype=float)
    with np.errstate(over="ignore"):
        log_rb = -np.log1p((1.0 - prior_2S) * np.expm1(l0 - ld))
    out = np.exp(log_rb)
    return float(out) if np.ndim(out) == 0 else out


def success_probability_theory(b, variances):
    """Probability that ``L_d > L_0`` when the data come from the two-source model.

    ``b`` is the model difference ``I_d - I_0``; returns
    ``(1 + erf(sqrt(b' Sigma^-1 b) / (2 sqrt 2))) / 2``.
    """
    m2 = np.asarray(mahalanobis2(b, variances))
    out = 0.5 * (1.0 + erf(np.sqrt(m2) / (2.0 * math.sqrt(2.0))))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ExpansionCoefficients:
    """Taylor coefficients of ``b(d) ~ d c1 + d^2 c2`` about the centroid."""

    c1: np.ndarray
    c2: np.ndarray


def expansion_coefficients(cal1: SourceCalibration, cal2: SourceCalibration,
                           q: float, x_c: float) -> ExpansionCoefficients:
    for cal in (cal1, cal2):
        lo, hi = cal.domain
        if not lo < x_c < hi:
            raise DomainError(f"x_c = {x_c} is not interior to [{lo}, {hi}]")
    c1 = (-q * cal1(x_c, 1) + (1 - q) * cal2(x_c, 1)) / 2
    c2 = (q * cal1(x_c, 2) + (1 - q) * cal2(x_c, 2)) / 8
    return ExpansionCoefficients(np.asarray(c1), np.asarray(c2))


def critical_distance(epsilon: float, c2, variances) -> float:
    """Smallest separation with error probability at most ``epsilon`` (quartic order)."""
    if not 0.0 < epsilon < 0.5:
        raise InputError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    k = mahalanobis2(c2, variances)
    if not k > 0:
        raise InputError("c2 vanishes: the resolution is undefined at this order")
    return (8.0 * erf_inv(1.0 - 2.0 * epsilon) ** 2 / k) ** 0.25


def variances_for_critical_distance(c2, d_c: float, epsilon: float,
                                    profile=(1.0, 1.0, 1.0, 1.0)) -> np.ndarray:
    """Variances proportional to ``profile`` that put the critical distance at ``d_c``."""
    p = _variances(profile)
    c2 = np.asarray(c2, dtype=float)
    target = 8.0 * erf_inv(1.0 - 2.0 * epsilon) ** 2 / d_c ** 4
    scale = np.sum(c2 * c2 / p) / target
    if not scale > 0:
        raise InputError("c2 vanishes: no variance gives a finite critical distance")
    return scale * p


# -- separation sweeps -------------------------------------------------------

@dataclass(frozen=True)
class SeparationSweep:
    """Fraction of simulated experiments that selected the two-source hypothesis."""

    separations: np.ndarray
    success: np.ndarray
    trials: int
    mode: str
    theory: np.ndarray | None = None
    settings: dict = field(default_factory=dict, compare=False)

    def threshold(self, epsilon: float) -> float | None:
        """Separation beyond which every swept point has success >= 1 - epsilon.

        Linearly interpolated between the last failing and first passing
        points; ``None`` if the last point fails.
        """
        return success_threshold(self.separations, self.success, epsilon)

    def rows(self) -> list[dict]:
        out = []
        for i, d in enumerate(self.separations):
            row = {"d": float(d), "success_fraction": float(self.success[i]),
                   "trials": self.trials}
            row["theory"] = "" if self.theory is None else float(self.theory[i])
            out.append(row)
        return out


def success_threshold(separations, success, epsilon: float) -> float | None:
    d = np.asarray(separations, dtype=float)
    s = np.asarray(success, dtype=float)
    target = 1.0 - epsilon
    ok = s >= target - 1e-12
    if not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return float(d[0])
    i = bad[-1] + 1
    d0, d1, s0, s1 = d[i - 1], d[i], s[i - 1], s[i]
    if s1 == s0:
        return float(d1)
    return float(d0 + (target - s0) * (d1 - d0) / (s1 - s0))


def _fraction(margin) -> float:
    # exact ties count as a coin flip
    return float((np.sum(margin > 0) + 0.5 * np.sum(margin == 0)) / margin.size)


def _trial_samples(seed, d_index, trials, samples, model, sd) -> np.ndarray:
    """Noisy samples, shape ``(trials, samples, 4)``; one stream per (seed, d, trial)."""
    out = np.empty((trials, samples, 4))
    for t in range(trials):
        z = trial_rng(seed, d_index, t).standard_normal((samples, 4))
        out[t] = model + z * sd
    return out


def mc_success_sweep(separations: Sequence[float], trials: int, mode: str,
                     scene: SceneParams, cal1: SourceCalibration, cal2: SourceCalibration,
                     variances, seed: int, *, model_cals=None,
                     samples_per_trial: int = 1, q0: float = DEFAULT_Q0,
                     n_q: int = 41, n_x: int = 81, x_span: float = 3.0,
                     workers: int = 1) -> SeparationSweep:
    """Monte Carlo success rate of the two-source decision versus separation.

    Data come from ``(cal1, cal2)`` at imbalance ``scene.q`` and centroid
    ``scene.x_c``; the hypotheses are built from ``model_cals`` (default: the
    same calibrations).  ``"known"`` compares ``L_d`` with ``L_0`` at the true
    ``(q, x_c)``; ``"averaged"`` compares likelihoods averaged over uniform
    priors on ``q in (q0, 1 - q0)`` and ``x_c`` within ``+-x_span`` of the
    true centroid.  An exact tie (e.g. at ``d = 0``) counts as half a success,
    the expected outcome of choosing between the tied hypotheses at random.
    """
    if mode not in ("known", "averaged"):
        raise InputError(f"mode must be 'known' or 'averaged', got {mode!r}")
    if trials < 1 or samples_per_trial < 1:
        raise InputError("trials and samples per trial must be positive")
    seps = np.asarray(separations, dtype=float)
    if seps.ndim != 1 or seps.size == 0 or np.any(seps < 0):
        raise InputError("separations must be a nonempty list of nonnegative values")
    if seps.size > 1 and np.any(np.diff(seps) <= 0):
        raise InputError("separations must be increasing")
    v = _variances(variances)
    sd = np.sqrt(v)
    m1, m2 = model_cals if model_cals is not None else (cal1, cal2)
    q, xc, k = scene.q, scene.x_c, samples_per_trial

    if mode == "averaged":
        q_prior = Prior1D.uniform(q0, 1 - q0, include_lo=False, include_hi=False)
        x_prior = Prior1D.uniform(xc - x_span, xc + x_span)
        grids = QuadratureConfig(n_q=n_q, n_x=n_x)

        def hyp(d):
            return HypothesisSpec(d, q_prior, x_prior, Prior1D.delta(d), 0.5)

    def run(i: int) -> tuple[float, float | None]:
        d = seps[i]
        truth = mixture_model(cal1, cal2, q, xc, d)
        samples = _trial_samples(seed, i, trials, k, truth, sd)
        if mode == "known":
            means = samples.mean(axis=1)
            md = mixture_model(m1, m2, q, xc, d)
            m0 = mixture_model(m1, m2, q, xc, 0.0)
            gap = (np.sum((means - m0) ** 2 / v, axis=1)
                   - np.sum((means - md) ** 2 / v, axis=1))
            theory = success_probability_theory((md - m0) * math.sqrt(k), v)
            return _fraction(gap), theory
        two, one = hyp(d), hyp(0.0)
        gap = np.empty(trials)
        for t in range(trials):
            data = Dataset(samples[t])
            gap[t] = (marginal_log_likelihood(two, data, m1, m2, v, grids)
                      - marginal_log_likelihood(one, data, m1, m2, v, grids))
        return _fraction(gap), None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(run, range(seps.size)))
    else:
        out = [run(i) for i in range(seps.size)]
    success = np.array([o[0] for o in out])
    theory = np.array([o[1] for o in out]) if mode == "known" else None
    settings = {"q": q, "x_c": xc, "seed": int(seed), "samples_per_trial": k,
                "variances": [float(x) for x in v],
                "sources": [cal1.source_id, cal2.source_id],
                "model_sources": [m1.source_id, m2.source_id]}
    if mode == "averaged":
        settings.update(q0=q0, n_q=n_q, n_x=n_x, x_span=x_span)
    return SeparationSweep(seps, success, trials, mode, theory, settings)


def mismatch_study(separations: Sequence[float], trials: int,
                   true_model: tuple[SourceCalibration, SourceCalibration],
                   assumed_model: SourceCalibration | tuple[SourceCalibration, SourceCalibration],
                   variances, seed: int, scene: SceneParams, *,
                   mode: str = "known", **kwargs) -> SeparationSweep:
    """Separation sweep with data from ``true_model`` but hypotheses from ``assumed_model``.

    A single calibration as ``assumed_model`` stands for both sources.
    """
    if isinstance(assumed_model, SourceCalibration):
        assumed_model = (assumed_model, assumed_model)
    sweep = mc_success_sweep(separations, trials, mode, scene, *true_model, variances,
                             seed, model_cals=tuple(assumed_model), **kwargs)
    return sweep


# -- plausible maps ----------------------------------------------------------

@dataclass(frozen=True)
class PlausibleMap:
    """RB over a lattice of ``d`` and/or ``x_c`` hypotheses at fixed ``q``.

    Arrays ``prior``, ``posterior``, ``rb`` and ``log_likelihood`` have the
    lattice shape, one axis per entry of ``axes``.
    """

    axes: tuple[str, ...]
    values: tuple[np.ndarray, ...]
    prior: np.ndarray
    posterior: np.ndarray
    rb: np.ndarray
    log_likelihood: np.ndarray
    fixed: dict
    result: RBResult = field(repr=False)

    @property
    def plausible(self) -> np.ndarray:
        """Boolean mask of hypotheses with RB > 1."""
        return self.rb > 1.0

    @property
    def argmax_index(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(np.argmax(self.rb), self.rb.shape))

    @property
    def argmax(self) -> dict:
        return {a: float(v[i]) for a, v, i in zip(self.axes, self.values, self.argmax_index)}

    def bounding_box(self) -> dict | None:
        mask = self.plausible
        if not mask.any():
            return None
        idx = np.nonzero(mask)
        return {a: [float(v[ix.min()]), float(v[ix.max()])]
                for a, v, ix in zip(self.axes, self.values, idx)}

    def rows(self) -> list[dict]:
        grids = np.meshgrid(*self.values, indexing="ij")
        out = []
        for flat in range(self.rb.size):
            i = np.unravel_index(flat, self.rb.shape)
            row = {a: float(g[i]) for a, g in zip(self.axes, grids)}
            row.update(prior=float(self.prior[i]), posterior=float(self.posterior[i]),
                       rb=float(self.rb[i]), plausible=int(self.rb[i] > 1.0))
            out.append(row)
        return out

    def summary(self) -> dict:
        return {"axes": list(self.axes), "shape": list(self.rb.shape),
                "fixed": self.fixed, "argmax": self.argmax,
                "max_rb": float(self.rb.max()),
                "plausible_count": int(self.plausible.sum()),
                "plausible_bounding_box": self.bounding_box()}


def _axis(values, name):
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise InputError(f"{name} grid must be a nonempty 1-D list")
    if arr.size > 1 and np.any(np.diff(arr) <= 0):
        raise InputError(f"{name} grid must be strictly increasing")
    return arr


def plausible_map(data: Dataset, cal1: SourceCalibration, cal2: SourceCalibration,
                  variances, *, d, x_c, q: float = 0.5,
                  d_prior: Prior1D | None = None,
                  x_c_prior: Prior1D | None = None) -> PlausibleMap:
    """Relative belief of every ``(d, x_c)`` lattice point as a discrete hypothesis.

    ``d`` and ``x_c`` are each a scalar (held fixed) or a 1-D grid (scanned).
    Each scanned axis gets equal prior mass per point, or the given prior's
    density at the points; the joint prior is normalised over the lattice.
    """
    if not 0.0 <= q <= 1.0:
        raise InputError(f"q must lie in [0, 1], got {q}")
    axes, values, priors, fixed = [], [], [], {"q": float(q)}
    for name, val, pr in (("d", d, d_prior), ("x_c", x_c, x_c_prior)):
        if np.ndim(val) == 0:
            fixed[name] = float(val)
            continue
        arr = _axis(val, name)
        if name == "d" and np.any(arr < 0):
            raise InputError("separations must be nonnegative")
        axes.append(name)
        values.append(arr)
        priors.append(np.zeros(arr.size) if pr is None else pr.log_density(arr))
    if not axes:
        raise InputError("at least one of d, x_c must be a grid")
    grids = np.meshgrid(*values, indexing="ij")
    coords = dict(fixed)
    coords.update({a: g for a, g in zip(axes, grids)})
    dd = np.asarray(coords["d"], dtype=float)
    xx = np.asarray(coords["x_c"], dtype=float)
    try:
        model = mixture_model(cal1, cal2, q, xx, dd)
    except DomainError as exc:
        raise DomainError(f"plausible-map grid leaves the calibration domain: {exc}") from None
    ll = np.asarray(dataset_log_likelihood(data, model, variances))
    ll = np.broadcast_to(ll, grids[0].shape)

    logp = sum(np.meshgrid(*priors, indexing="ij"))
    logp = logp - log_sum_exp(logp)
    prior = np.exp(logp)
    keep = prior.ravel() > 0
    res = RBResult.from_marginals(tuple(np.flatnonzero(keep).tolist()),
                                  prior.ravel()[keep] / prior.ravel()[keep].sum(),
                                  ll.ravel()[keep])
    post = np.zeros(prior.size)
    rb = np.zeros(prior.size)
    post[keep] = res.posteriors
    rb[keep] = res.rb
    return PlausibleMap(tuple(axes), tuple(values), prior, post.reshape(prior.shape),
                        rb.reshape(prior.shape), np.array(ll), fixed, res)
