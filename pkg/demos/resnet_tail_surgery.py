"""
Replacing the tail of a pre-trained network
===========================================

Depth 1 swaps only the fully connected head; larger depths also regenerate
the last convolution or pooling layers and may need shape adapters.
"""

import numpy as np

from autotune import architecture as A
from autotune import search_space as ss

base = A.resnet50_like()
print(base.name, "layers:", len(base.layers), "params:", f"{A.count_params(base).total:,}")

# a one-hidden-layer head with 256 neurons and dropout 0.4
config = {"depth": 1, "fc_layers": 2, "neurons_1": 256, "dropout_1": 0.4}
arch, plan = A.apply_configuration(base, config)
print("new head:", [l.describe() for l in plan.generated_layers])
params = A.count_params(arch)
print(f"params {params.total:,}, trainable {params.trainable:,}, frozen {params.frozen:,}")
for layer, name, value in A.config_rows(config):
    print(f"  {layer:>6}  {name:<15} {value}")

# deeper surgery draws from the tail search space; adapters appear where channels disagree
space = A.build_space_for_tail(base, 4)
print("tail space cardinality:", ss.cardinality(space))
rng = np.random.default_rng(7)
for _ in range(3):
    c = ss.sample_uniform(space, rng)
    arch, plan = A.apply_configuration(base, c)
    print(f"depth {c['depth']}: replaced {list(plan.replaced)}, adapters {list(plan.adapters)},"
          f" FLOPs {A.count_flops(arch).total:,}")
