"""Fit the benchmark Friedman surface and look at what the posterior gives you.

Run:  python3 demos/01_regression_basics.py
"""

import numpy as np

import bart

rng = np.random.default_rng(0)

print("Simulating the five-variable benchmark surface: n=200, p=10, noise sd = 1")
data, truth = bart.generate_friedman(rng, 200, 10, sigma=1.0)

print("Calibrating the prior from the data (defaults: nu=3, q=0.90, k=2, m=200)")
spec = bart.calibrate_prior(data, num_trees=50)  # 50 trees keeps this demo quick
print(f"  sigma overestimate (transformed scale): {spec.sigma_hat:.4f}")
print(f"  noise prior scale lambda:               {spec.lam:.6f}")
print(f"  leaf prior sd:                          {spec.sigma_mu:.4f}")

config = bart.ChainConfig(burn_in=100, keep=400, seed=1)
print(f"Running the backfitting sampler: {config.burn_in} burn-in + {config.keep} kept sweeps")
draws = bart.run_chain(data, spec, config)

sigma = draws.sigma_draws()
print(f"\nNoise-scale draws (original units): mean {sigma.mean():.3f}, "
      f"90% of draws in [{np.quantile(sigma, 0.05):.3f}, {np.quantile(sigma, 0.95):.3f}]")
print("The simulation used sigma = 1, so the chain should wander around 1.")

est, lo, hi = bart.predict(draws, data.x, interval_alpha=0.10)
corr = np.corrcoef(est, truth)[0, 1]
covered = np.mean((truth >= lo) & (truth <= hi))
print(f"\nIn-sample fit: corr(point estimate, true surface) = {corr:.3f}")
print(f"90% intervals cover the true surface at {covered:.1%} of the training points")

x_new = rng.uniform(size=(200, 10))
truth_new = bart.friedman_function(x_new)
est_n, lo_n, hi_n = bart.predict(draws, x_new, interval_alpha=0.10)
print(f"\nOut-of-sample: corr = {np.corrcoef(est_n, truth_new)[0, 1]:.3f}, "
      f"coverage = {np.mean((truth_new >= lo_n) & (truth_new <= hi_n)):.1%}")
print(f"Mean interval width grows from {np.mean(hi - lo):.2f} (in-sample) "
      f"to {np.mean(hi_n - lo_n):.2f} (new points): more uncertainty away from the data.")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].errorbar(truth, est, yerr=[est - lo, hi - est], fmt=".", alpha=0.5, ecolor="0.8")
    axes[0].plot([truth.min(), truth.max()], [truth.min(), truth.max()], "k--", lw=1)
    axes[0].set(xlabel="true f(x)", ylabel="posterior mean", title="in-sample")
    axes[1].plot(sigma, ".", ms=2)
    axes[1].axhline(1.0, color="k", ls="--", lw=1)
    axes[1].set(xlabel="kept sweep", ylabel="sigma draw", title="noise-scale trace")
    fig.tight_layout()
    fig.savefig("demos/output_regression_basics.png", dpi=120)
    print("\nSaved demos/output_regression_basics.png")
except ImportError:
    print("\n(matplotlib not installed; skipping the plot)")
