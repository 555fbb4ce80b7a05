"""
A Gaussian process on one dimension, and where Expected Improvement points
==========================================================================

"""

import numpy as np

from autotune import gp
from autotune.acquisition import expected_improvement_many

# five noisy-free observations of a bumpy function on [0, 1]
f = lambda x: np.sin(6 * x) + 0.5 * x
X = np.array([[0.05], [0.3], [0.5], [0.7], [0.95]])
y = f(X[:, 0])

# hyperparameters come from the log marginal likelihood
model = gp.fit_auto(X, y)
print("length scale", model.kernel.length_scales, "signal variance", model.kernel.signal_variance)

grid = np.linspace(0, 1, 11)[:, None]
mean, var = gp.posterior_many(model, grid)
ei = expected_improvement_many(mean, var, float(y.max()))

# the posterior interpolates the data; EI is zero there and peaks in gaps near the best point
for x, m, v, e in zip(grid[:, 0], mean, var, ei):
    print(f"x={x:.1f}  mean={m:+.3f}  sd={np.sqrt(v):.3f}  EI={e:.4f}")
print("next point to try:", grid[int(np.argmax(ei)), 0])
