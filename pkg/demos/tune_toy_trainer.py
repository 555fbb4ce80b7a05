"""
Tuning a small classifier head end to end, with a log you can resume
=====================================================================

Each evaluation trains an MLP on a two-spiral dataset and reports validation
accuracy. Epochs are cut to 10 here so the demo finishes in about a minute.
"""

import tempfile
from pathlib import Path

from autotune import search_space as ss
from autotune.cli import main
from autotune.evaluators import ToyTrainerEvaluator
from autotune.optimizer import Budget, init_run, persist, resume, run_to_completion, step

space = ss.fc_stack_space()
print("configurations:", ss.cardinality(space))

log = Path(tempfile.mkdtemp()) / "toy.jsonl"
objective = ToyTrainerEvaluator(seed=0)

# run twelve evaluations, then stop as if the process had been killed
run = init_run(space, Budget(8, 20), seed=0, epochs=10)
persist(run, log)
for _ in range(12):
    obs = step(run, objective)
    print(f"{obs.index:2d} {obs.phase:6s} {obs.value:.3f}  {obs.config}")
run.sink.close()

# pick up from the log; the remaining proposals are the ones an unbroken run would make
run = resume(log)
run_to_completion(run, objective)
run.sink.close()
print("best:", run.incumbent.value, run.incumbent.config)

# the same log through the command-line report
main(["report", str(log)])
