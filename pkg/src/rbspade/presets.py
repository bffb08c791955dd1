"""Synthetic stand-in for the experimental two-source setup.

Widths, centroid, imbalance and separation follow the reported experiment.
Raw calibration tables and mode variances were never published, so:

* both calibrations share a 150 um offset between the beam axis and the
  demultiplexer axis (an aligned displaced-vacuum model only constrains the
  second moment of the two positions, which leaves ``d`` and ``x_c``
  degenerate);
* total intensities scale with the squared width, so both sources have the
  same peak curvature and the linear term of the small-``d`` expansion
  stays small;
* per-mode variances are equal and chosen to put the critical distance at
  6 um for epsilon = 1e-3 (:func:`source_pair`).

:func:`identical_pair` gives the textbook case of two identical, aligned
sources at the mean width, where the quartic-order critical distance is
sharp.
"""

from __future__ import annotations

from .analysis import expansion_coefficients, variances_for_critical_distance
from .calibration import SourceCalibration, rayleigh_limit, synth_calibration

SRC1_WIDTH = 330.19
SRC2_WIDTH = 322.94
CENTROID = -1.06
IMBALANCE = 0.501
SEPARATION = 19.63
RAYLEIGH = 326.57
MISALIGNMENT = 150.0
TARGET_DC = 6.0
EPSILON = 1e-3
SRC2_INTENSITY = (SRC2_WIDTH / SRC1_WIDTH) ** 2


def source_pair(widths=(SRC1_WIDTH, SRC2_WIDTH), intensities=(1.0, SRC2_INTENSITY),
                variances=None, *, center_offset: float = MISALIGNMENT,
                target_dc: float = TARGET_DC, epsilon: float = EPSILON,
                q: float = IMBALANCE, x_c: float = CENTROID,
                **synth_kwargs) -> tuple[SourceCalibration, SourceCalibration]:
    """Two synthetic calibrations sharing one set of mode variances.

    Without explicit ``variances``, equal per-mode variances are chosen so
    the quartic-order critical distance at ``(q, x_c)`` equals ``target_dc``.
    """
    cals = [synth_calibration(w, t, center_offset, source_id=f"src{i + 1}", **synth_kwargs)
            for i, (w, t) in enumerate(zip(widths, intensities))]
    if variances is None:
        c2 = expansion_coefficients(cals[0], cals[1], q, x_c).c2
        variances = variances_for_critical_distance(c2, target_dc, epsilon)
    return cals[0].with_variances(variances), cals[1].with_variances(variances)


def identical_pair(width: float | None = None, **kwargs):
    """Aligned pair of identical sources; width defaults to the Rayleigh mean width."""
    w = rayleigh_limit(SRC1_WIDTH, SRC2_WIDTH) if width is None else width
    kwargs.setdefault("center_offset", 0.0)
    return source_pair((w, w), (1.0, 1.0), **kwargs)
