"""Forward model for one or two incoherent sources.

The mode intensities of a scene with brightness imbalance ``q``, centroid
``x_c`` and separation ``d`` are

    I(q, x_c, d) = q * I1(x_c - d/2) + (1 - q) * I2(x_c + d/2)

with ``I1``, ``I2`` the calibrated curves of the two sources.  Measured
4-vectors are modelled as independent Gaussians around ``I`` with the
per-mode variances.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import N_MODES, SourceCalibration
from .errors import InputError

DATASET_COLUMNS = ("I0", "I1", "I2", "I3")


@dataclass(frozen=True)
class SceneParams:
    """Nuisance triple of a scene: imbalance ``q``, centroid and separation (um)."""

    q: float
    x_c: float
    d: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise InputError(f"q must lie in [0, 1], got {self.q}")
        if not self.d >= 0.0:
            raise InputError(f"separation must be nonnegative, got {self.d}")
        if not math.isfinite(self.x_c):
            raise InputError("centroid must be finite")

    @property
    def positions(self) -> tuple[float, float]:
        return self.x_c - self.d / 2, self.x_c + self.d / 2


def mixture_model(cal1: SourceCalibration, cal2: SourceCalibration, q, x_c, d) -> np.ndarray:
    """Broadcasting form of :func:`model_intensity`; trailing axis is the mode."""
    q = np.asarray(q, dtype=float)[..., None]
    x_c = np.asarray(x_c, dtype=float)
    d = np.asarray(d, dtype=float)
    return q * cal1(x_c - d / 2) + (1.0 - q) * cal2(x_c + d / 2)


def model_intensity(cal1: SourceCalibration, cal2: SourceCalibration,
                    params: SceneParams) -> np.ndarray:
    return mixture_model(cal1, cal2, params.q, params.x_c, params.d)


def _inv_var(variances) -> np.ndarray:
    v = np.asarray(variances, dtype=float)
    if v.shape[-1] != N_MODES or np.any(~(v > 0)):
        raise InputError("variances must be 4 strictly positive values")
    return v


def log_likelihood(sample, model, variances) -> np.ndarray | float:
    """Gaussian log density of intensity vector(s) given model vector(s).

    Broadcasts over leading axes of ``sample`` and ``model``.
    """
    v = _inv_var(variances)
    r = np.asarray(sample, dtype=float) - np.asarray(model, dtype=float)
    out = -0.5 * np.sum(r * r / v, axis=-1) - 0.5 * np.sum(np.log(2 * np.pi * v))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Dataset:
    """Rows of measured 4-mode intensities plus acquisition metadata."""

    samples: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[None, :]
        if s.ndim != 2 or s.shape[1] != N_MODES:
            raise InputError(f"samples must have shape (n, {N_MODES})")
        if s.shape[0] == 0:
            raise InputError("a dataset needs at least one sample")
        if not np.all(np.isfinite(s)):
            raise InputError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    @property
    def scatter(self) -> np.ndarray:
        """Per-mode sum of squared deviations from the sample mean."""
        r = self.samples - self.mean
        return np.sum(r * r, axis=0)

    def subset(self, index) -> "Dataset":
        return Dataset(self.samples[index], dict(self.metadata))

    def chunks(self, size: int) -> list["Dataset"]:
        """Consecutive disjoint chunks of ``size`` samples (last one may be short)."""
        if size < 1:
            raise InputError("chunk size must be positive")
        return [self.subset(slice(i, i + size)) for i in range(0, len(self), size)]


def dataset_log_likelihood(data: Dataset, model, variances):
    """Sum of per-sample log-likelihoods, via the sample mean and scatter.

    ``model`` may carry leading axes (a grid of hypotheses); the result has
    those axes.
    """
    v = _inv_var(variances)
    n = len(data)
    r = data.mean - np.asarray(model, dtype=float)
    chi2 = n * np.sum(r * r / v, axis=-1) + np.sum(data.scatter / v)
    out = -0.5 * chi2 - 0.5 * n * np.sum(np.log(2 * np.pi * v))
    return float(out) if np.ndim(out) == 0 else out


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by ``(seed, *key)``."""
    if seed is None:
        raise InputError("an explicit seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def simulate_dataset(cal1: SourceCalibration, cal2: SourceCalibration,
                     params: SceneParams, variances, n: int, seed: int) -> Dataset:
    """Draw ``n`` samples ``I_j = model_j + N(0, var_j)``; reproducible in ``seed``."""
    if n < 1:
        raise InputError("n must be at least 1")
    v = _inv_var(variances)
    m = model_intensity(cal1, cal2, params)
    noise = trial_rng(seed).standard_normal((n, N_MODES))
    meta = {
        "n": int(n),
        "seed": int(seed),
        "params": {"q": params.q, "x_c": params.x_c, "d": params.d},
        "variances": [float(x) for x in v],
        "sources": [cal1.source_id, cal2.source_id],
    }
    return Dataset(m + noise * np.sqrt(v), meta)


def write_dataset(data: Dataset, path) -> Path:
    """Write samples as CSV and metadata to a sidecar ``.json``; returns the sidecar path."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_COLUMNS)
        for row in data.samples:
            w.writerow([repr(float(v)) for v in row])
    side = path.with_suffix(".json")
    side.write_text(json.dumps(data.metadata, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return side


def read_dataset(path) -> Dataset:
    """Read a dataset CSV (``I0, I1, I2, I3``) and its sidecar metadata if present."""
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty dataset file") from None
        if tuple(header) != DATASET_COLUMNS:
            raise InputError(f"{path}: header must be {', '.join(DATASET_COLUMNS)}")
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != N_MODES:
                raise InputError(f"{path}: row {lineno}: expected {N_MODES} fields")
            try:
                rows.append([float(c) for c in raw])
            except ValueError:
                raise InputError(f"{path}: row {lineno}: non-numeric field") from None
    if not rows:
        raise InputError(f"{path}: dataset has no samples")
    side = path.with_suffix(".json")
    meta = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    return Dataset(np.array(rows), meta)
