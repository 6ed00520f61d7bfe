# Long-memory errors: ARFIMA(0, d, 0) with d = (1 - alpha) / 2.
#
# Partial sums of such noise have variance growing like N^(2 - alpha)
# instead of N.  This is what slows the intercept estimator down.
#
# Run: python3 demos/02_long_memory_noise.py

import numpy as np

from lmwave import LongMemorySpec, arfima_autocovariance, exact_partial_sum_variance, generate_noise
from lmwave.longmem import partial_sum_variances

for alpha in (1.0, 0.8, 0.4, 0.2):
    spec = LongMemorySpec(alpha)
    acf = [arfima_autocovariance(spec, h) / arfima_autocovariance(spec, 0) for h in (1, 10, 100)]
    print(f"alpha={alpha}: d={spec.d:.2f}, autocorrelation at lags 1/10/100 =",
          " ".join(f"{r:.3f}" for r in acf))

# One path, drawn by circulant embedding.
x = generate_noise(LongMemorySpec(0.2), 4096, seed=1)
print("\none path at alpha=0.2: mean %.3f, var %.3f" % (x.mean(), x.var()))
print("block means of 512:", np.round(x.reshape(8, -1).mean(axis=1), 2))

# Monte Carlo partial-sum variance against the exact Toeplitz sum.
sizes = [2**k for k in range(8, 13)]
spec = LongMemorySpec(0.4)
var, se = partial_sum_variances(spec, sizes, 300, seed=2)
print("\nN      MC var        exact")
for n, v in zip(sizes, var):
    print(f"{n:<6d} {v:12.1f} {exact_partial_sum_variance(spec, n):12.1f}")
slope = np.polyfit(np.log(sizes), np.log(var), 1)[0]
print(f"log-log slope {slope:.3f}, theory {2 - spec.alpha:.1f}")
