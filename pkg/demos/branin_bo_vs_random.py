"""
Bayesian optimization against random search on Branin
======================================================

Both searches get 50 evaluations; BO spends the first 20 on uniform draws.
"""

import numpy as np

from autotune import search_space as ss
from autotune.evaluators import SyntheticEvaluator
from autotune.evaluators.synthetic import BRANIN_MAX
from autotune.optimizer import Budget, run_search

space = ss.load_space("branin.json")
objective = SyntheticEvaluator("branin")

bo, rs = [], []
for seed in range(5):
    bo.append(run_search(space, objective, "bayes_opt", seed, Budget(20, 50)))
    rs.append(run_search(space, objective, "random_search", seed, Budget(1, 50)))

print(f"best possible value {BRANIN_MAX:.4f}")
for seed, (b, r) in enumerate(zip(bo, rs)):
    print(f"seed {seed}: BO {b.incumbent.value:8.4f}   RS {r.incumbent.value:8.4f}")

# the incumbent trace shows where the surrogate takes over
trace = bo[0].incumbent_trace()
print("BO seed 0 after 10/20/30/50 evaluations:", [round(trace[i - 1], 3) for i in (10, 20, 30, 50)])
print("median BO", np.median([b.incumbent.value for b in bo]),
      "median RS", np.median([r.incumbent.value for r in rs]))
