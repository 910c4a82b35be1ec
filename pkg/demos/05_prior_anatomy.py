"""What the regularization prior actually does, piece by piece.

Three components keep each tree a weak learner: a depth penalty on splitting,
shrinkage of leaf values toward zero that tightens as the ensemble grows, and
a noise prior anchored at a rough overestimate of sigma.

Run:  python3 demos/05_prior_anatomy.py
"""

import numpy as np

import bart

rng = np.random.default_rng(0)
x = rng.uniform(size=(300, 3))
data = bart.make_dataset(x, rng.normal(size=300))

print("1) Tree-structure prior: P(split at depth d) = alpha (1+d)^-beta")
for d in range(4):
    print(f"   depth {d}: {bart.split_prob(d, 0.95, 2.0):.4f}")

spec = bart.calibrate_prior(data, num_trees=1)
sizes = np.zeros(5)
n_draws = 50_000
for _ in range(n_draws):
    b = bart.sample_tree_from_prior(rng, data, spec).num_leaves
    sizes[min(b, 5) - 1] += 1
print("\n   implied leaf-count distribution (1, 2, 3, 4, >=5 leaves):")
print("   sampled: ", np.round(sizes / n_draws, 3))
print("   nominal:  [0.05  0.55  0.28  0.09  0.03]")

print("\n2) Leaf shrinkage: prior sd of a leaf value is 0.5/(k sqrt(m))")
for m in (1, 50, 200):
    print(f"   m = {m:>3d}: sd = {bart.leaf_prior_sd(2.0, m):.4f}")
print("   More trees -> tighter leaves -> each tree explains a smaller share.")

print("\n3) Noise prior: sigma^2 ~ nu*lambda/chi2_nu with P(sigma < sigma_hat) = q")
for nu, q, label in ((10, 0.75, "conservative"), (3, 0.90, "default"), (3, 0.99, "aggressive")):
    lam = bart.calibrate_lambda(nu, q, sigma_hat=2.0)
    draws = np.sqrt(nu * lam / rng.chisquare(nu, size=200_000))
    print(f"   ({nu:>2}, {q:.2f}) {label:<12s} lambda = {lam:.4f};  "
          f"simulated P(sigma < 2) = {np.mean(draws < 2.0):.3f}")

print("\nEverything above is recomputed by `bart.calibrate_prior` from the data.")
