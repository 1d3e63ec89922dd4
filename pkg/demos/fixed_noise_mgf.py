"""Checking the closed-form chain MGF against a million simulated chains.

Freeze one sequence of minibatch estimates (a_hat, b_hat) and both the
composed moment generating function of theta_M and the simulated chains see
exactly the same noise. The closed form is a backward composition of
noncentral-chi-squared MGFs; the simulation just runs the kernel. Agreement
is checked at probe points s = c / sd(theta_M), where |c| <= 2 keeps the
Monte Carlo average concentrated (near the MGF's domain edge the average is
dominated by draws one never sees).

Run:  python3 demos/fixed_noise_mgf.py
"""

import math

import numpy as np

from cirsimplex import (NoiseSequence, RngStream, chain_mgf,
                        conditional_chain_moments, simulate_fixed_noise)

stream = RngStream(11)
n_steps, n_chains = 6, 1_000_000

for parametrization in ("main", "alt"):
    g = stream.child(0 if parametrization == "main" else 1)
    a_hat = 80.0 + 160.0 * g.uniform(n_steps)
    if parametrization == "main":
        b_hat = 0.5 + 1.0 * g.uniform(n_steps)       # main form needs b > 0
    else:
        b_hat = -0.4 + 1.6 * g.uniform(n_steps)      # alt form allows b < 0
    noise = NoiseSequence(a_hat=a_hat, b_hat=b_hat, h=0.1, theta0=7.67)

    mu, var = conditional_chain_moments(noise, parametrization)
    sd = math.sqrt(var)
    theta = simulate_fixed_noise(g.child(99), noise, n_chains, parametrization)
    print(f"{parametrization}: slopes "
          + " ".join(f"{b:+.2f}" for b in b_hat)
          + f"; theta_{n_steps} mean {theta.mean():.3f} (formula {mu:.3f})")
    print("        s    closed-form    simulated     |diff|/se")
    for c in (-2.0, -1.0, 0.5, 1.0, 2.0):
        s = c / sd
        want = chain_mgf(noise, s, parametrization)
        vals = np.exp(s * theta)
        se = vals.std(ddof=1) / math.sqrt(n_chains)
        print(f"  {s:+.5f}  {want:13.6g}  {vals.mean():11.6g}  "
              f"{abs(vals.mean() - want) / se:10.2f}")
    print()
