"""How much chain variance does each gradient estimator add, step by step?

The exact kernel fixes the floor: its M-step variance converges to the
stationary Gamma variance. Replacing the full-data shape with a subsampled
estimate inflates every step; the closed-form oracles below quantify the
inflation for the plain subsampled kernel (scir) and both control-variate
parametrizations without running a single chain.

Configuration: 1000 data points, 150 in the tracked category, subsamples of
100, concentration 0.1, chains started at the stationary mean 7.67.

Run:  python3 demos/variance_curves.py
"""

import os

import numpy as np

from cirsimplex import (cv_chain_moments, exact_chain_moments,
                        law_from_fraction, scir_chain_moments)
from cirsimplex.svg import line_plot

OUT = os.path.join(os.path.dirname(__file__), "..", "runs", "demos")

law = law_from_fraction(1000, 0.15, 100, 0.1)
theta0, h = 7.67, 0.1

ms = np.arange(1, 101)
curves = {"exact": [], "cv-alt": [], "cv-main": [], "scir": []}
for m in ms:
    curves["exact"].append(exact_chain_moments(theta0, law.full_shape(), h, m)[1])
    curves["cv-alt"].append(cv_chain_moments(law, theta0, h, m,
                                             parametrization="alt").variance)
    curves["cv-main"].append(cv_chain_moments(law, theta0, h, m,
                                              parametrization="main").variance)
    curves["scir"].append(scir_chain_moments(law, theta0, h, m)[1])
curves = {k: np.array(v) for k, v in curves.items()}

print("    M      exact     cv-alt    cv-main       scir")
for m in (1, 5, 10, 20, 50, 100):
    row = [curves[k][m - 1] for k in ("exact", "cv-alt", "cv-main", "scir")]
    print(f"{m:5d}  {row[0]:9.3f}  {row[1]:9.3f}  {row[2]:9.3f}  {row[3]:9.3f}")

gap = curves["scir"][-1] - curves["cv-main"][-1]
print(f"\nat M=100 the control variate removes {gap:.1f} of the "
      f"{curves['scir'][-1] - curves['exact'][-1]:.1f} excess variance "
      f"({100 * gap / (curves['scir'][-1] - curves['exact'][-1]):.0f}%)")

# The ordering exact <= cv-alt <= cv-main <= scir holds from M = 7 onward;
# for M in {5, 6} the alt-form conditional variance sits a hair *below* the
# exact curve (about -0.017 and -0.0099) before the curves settle.
dips = [(m, curves["cv-alt"][m - 1] - curves["exact"][m - 1])
        for m in range(5, 11)]
print("\ncv-alt minus exact near the crossover:")
for m, d in dips:
    print(f"  M={m:3d}: {d:+.5f}")

os.makedirs(OUT, exist_ok=True)
path = os.path.abspath(os.path.join(OUT, "variance_curves.svg"))
line_plot(path, ms, curves, title="chain variance by kernel",
          xlabel="steps M", ylabel="variance of theta_M")
print(f"\nwrote {path}")
