"""
Calibration curves and the Rayleigh baseline
============================================

Each source is described by how its intensity spreads over the four sorted
modes as a function of position.  Here the curves come from the
displaced-vacuum model, sampled on a 2 um grid and interpolated with not-a-knot
cubic splines, the same path a measured calibration table would take.
"""

# %%
# Build the two synthetic calibrations used throughout the demos.
import numpy as np

from rbspade import presets
from rbspade.calibration import fit_gaussian, poisson_mode_profile, rayleigh_limit

cal1, cal2 = presets.source_pair()
for cal in (cal1, cal2):
    print(cal.source_id, "domain", cal.domain, "um")

# %%
# The spline reproduces the model between knots.
x = np.linspace(-400, 400, 9) + 0.5
err = np.abs(cal1(x) - poisson_mode_profile(x, presets.SRC1_WIDTH,
                                            center_offset=presets.MISALIGNMENT))
print("max spline error off-knot:", err.max())

# %%
# A Gaussian fit to the fundamental-mode curve recovers each width, and the
# mean width is the Rayleigh limit that the separations below are compared
# against.
w1 = fit_gaussian(cal1.modes[0]).width
w2 = fit_gaussian(cal2.modes[0]).width
print(f"fitted widths: {w1:.3f} um, {w2:.3f} um")
print(f"Rayleigh limit: {rayleigh_limit(w1, w2):.3f} um")

# %%
# The same numbers come out of the command line::
#
#     rbspade calibrate --synthetic --out-dir out/
