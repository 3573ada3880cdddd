"""Why the reconstructed minimum variance cannot be taken at face value: the
maximum-likelihood estimator is biased toward more mixed states at finite
record counts.

Simulates measuring a known Gaussian state and reconstructing it at several
record counts; the reconstructed minimum variance starts well above the
generator's and walks toward it as the record count grows.  Reduced scale
(cutoff 16); expect a few minutes.  Run:  python demos/05_estimator_bias_study.py
"""

from quadratomo.cli import run_bias_study

GENERATOR_MIN_RATIO = 0.111   # the linear-method squeezed variance
GENERATOR_MAX_RATIO = 10.0   # ratios must multiply to >= 1 for a physical state

print(f"generator: min/max variance ratios {GENERATOR_MIN_RATIO} / {GENERATOR_MAX_RATIO}")
print(f"{'records':>9s} {'reconstructed min ratio':>26s}")
for n in (2_000, 10_000, 50_000):
    study = run_bias_study(n=n, eta=0.36,
                           v_min=GENERATOR_MIN_RATIO * 0.5,
                           v_max=GENERATOR_MAX_RATIO * 0.5,
                           n_seeds=4, seed=42, cutoff=16, n_phases=50, n_bins=121)
    print(f"{n:9d} {study['mean_min_variance_ratio']:18.3f} "
          f"+/- {study['std_min_variance_ratio']:.3f}")
print("\nat the full protocol scale (cutoff 30, ratios 0.111/20.17, 10,000")
print("records) the reconstructed minimum sits near 40% of vacuum, which is")
print("why the squeezed variance is quoted from the model-free linear")
print("inversion rather than from the reconstruction itself")
