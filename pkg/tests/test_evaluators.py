import json
import math
import sys
import time

import numpy as np
import pytest

from autotune import search_space as ss
from autotune.evaluators import (EvalRequest, EvalResponse, ExternalEvaluator, SyntheticEvaluator,
                                 ToyTrainerEvaluator, eval_external, eval_synthetic,
                                 eval_toy_trainer)
from autotune.evaluators import synthetic, trainer

# -- synthetic ---------------------------------------------------------------------


def branin_grid_max(n=2000):
    # independent vectorized Branin-Hoo, negated
    x1 = np.linspace(-5, 10, n)[:, None]
    x2 = np.linspace(0, 15, n)[None, :]
    b, c, t = 5.1 / (4 * np.pi**2), 5 / np.pi, 1 / (8 * np.pi)
    f = (x2 - b * x1**2 + c * x1 - 6) ** 2 + 10 * (1 - t) * np.cos(x1) + 10
    return -f.min()


def test_branin_optimum_matches_grid_oracle():
    value = eval_synthetic("branin", {"x1": math.pi, "x2": 2.275}).value
    assert value == pytest.approx(-0.397887, abs=1e-6)
    grid = branin_grid_max()
    assert value >= grid - 1e-12
    assert grid == pytest.approx(value, abs=1e-4)
    assert synthetic.BRANIN_MAX == pytest.approx(value, abs=1e-12)


def test_branin_symmetric_optima():
    a = eval_synthetic("branin", {"x1": -math.pi, "x2": 12.275}).value
    b = eval_synthetic("branin", {"x1": math.pi, "x2": 2.275}).value
    assert a == pytest.approx(b, abs=1e-6)


def test_hartmann3_known_optimum():
    value = eval_synthetic("hartmann3", {"x1": 0.114614, "x2": 0.555649, "x3": 0.852547}).value
    assert value == pytest.approx(synthetic.HARTMANN3_MAX, abs=1e-5)
    rng = np.random.default_rng(0)
    for x in rng.uniform(size=(2000, 3)):
        assert synthetic.hartmann3(x) <= synthetic.HARTMANN3_MAX + 1e-9


def test_mixed_quadratic_enumerated_argmax_matches_construction():
    space = synthetic.mixed_quadratic_space()
    assert ss.cardinality(space) == 500
    configs = list(ss.iter_configurations(space))
    values = [eval_synthetic("mixed_quadratic", c).value for c in configs]
    best = configs[int(np.argmax(values))]
    assert best == synthetic.mixed_quadratic_argmax()
    assert sorted(values)[-1] > sorted(values)[-2]  # unique optimum


def test_dimension_mismatch_is_failed_response():
    resp = eval_synthetic("branin", {"x1": 0.0})
    assert not resp.ok and resp.reason == "dimension"
    resp = SyntheticEvaluator("hartmann3")(EvalRequest("r", 1, {"x1": 0.1, "x2": 0.2}))
    assert resp.reason == "dimension"


def test_synthetic_deterministic():
    c = {"x1": 0.3, "x2": 4.0}
    assert eval_synthetic("branin", c) == eval_synthetic("branin", c)


# -- wire protocol -----------------------------------------------------------------


def test_response_round_trip_and_validation():
    r = EvalResponse(0.5, "ok", {"epochs_run": 50})
    assert EvalResponse.from_json(r.to_json()) == r
    for bad in ('{"value": "x", "status": "ok"}', '[1, 2]', '{"status": "ok"}', 'garbage',
                '{"value": 1, "status": "maybe"}'):
        with pytest.raises(ValueError):
            EvalResponse.from_json(bad)
    with pytest.raises(ValueError):
        EvalResponse(float("nan"), "ok")


def test_request_wire_form():
    req = EvalRequest("run-1", 3, {"a": 1}, 50)
    assert json.loads(req.to_json()) == {"run_id": "run-1", "index": 3, "config": {"a": 1},
                                         "epochs": 50}


def child(code: str) -> list[str]:
    return [sys.executable, "-c", code]


REQ = EvalRequest("run", 1, {"x": 1}, 5)


def test_external_echo_stub():
    code = ("import sys, json; req = json.loads(sys.stdin.readline());"
            "print(json.dumps({'value': 0.5, 'status': 'ok', 'meta': {'seen': req['index']}}))")
    resp = eval_external(child(code), REQ, timeout=30)
    assert resp.ok and resp.value == 0.5 and resp.meta["seen"] == 1


def test_external_child_reads_exactly_one_request_line():
    code = ("import sys, json; data = sys.stdin.read();"
            "print(json.dumps({'value': float(data.count(chr(10))), 'status': 'ok'}))")
    assert eval_external(child(code), REQ, timeout=30).value == 1.0


def test_external_garbage_is_protocol_failure():
    code = "import sys; sys.stdin.readline(); print('hello there'); sys.stderr.write('oops')"
    resp = eval_external(child(code), REQ, timeout=30)
    assert resp.reason == "protocol"
    assert "hello there" in resp.meta["output"]
    assert "oops" in resp.meta["stderr"]


def test_external_nonzero_exit():
    code = "import sys; sys.stderr.write('crashed badly'); sys.exit(3)"
    resp = eval_external(child(code), REQ, timeout=30)
    assert resp.reason == "exit" and resp.meta["returncode"] == 3
    assert "crashed badly" in resp.meta["stderr"]


def test_external_timeout_fires_promptly():
    t0 = time.monotonic()
    resp = eval_external(child("import time; time.sleep(30)"), REQ, timeout=1.0)
    assert resp.reason == "timeout"
    assert time.monotonic() - t0 < 2.0


def test_external_spawn_failure():
    resp = eval_external(["/nonexistent/objective"], REQ, timeout=5)
    assert resp.reason == "spawn"


def test_external_chatty_child_does_not_deadlock():
    code = ("import sys, json; sys.stderr.write('x' * 1_000_000); sys.stdout.write('y' * 10);"
            "print(); print(json.dumps({'value': 1, 'status': 'ok'}))")
    resp = ExternalEvaluator(child(code), timeout=20)(REQ)
    # the first line is the 'yyy...' line, which is not a response
    assert resp.reason == "protocol"
    assert len(resp.meta["stderr"]) <= 2000


def test_external_failed_status_passes_through():
    code = "print('{\"value\": null, \"status\": \"failed\", \"meta\": {\"reason\": \"oom\"}}')"
    resp = eval_external(child(code), REQ, timeout=30)
    assert not resp.ok and resp.reason == "oom"


# -- toy trainer ---------------------------------------------------------------------


def test_dataset_shape_and_balance():
    Xtr, ytr, Xva, yva = trainer.load_dataset()
    assert Xtr.shape == (800, 2) and Xva.shape == (200, 2)
    assert set(np.unique(ytr)) == {0, 1}
    assert abs(ytr.mean() - 0.5) < 0.05 and abs(yva.mean() - 0.5) < 0.1


def numeric_grad(f, arr, idx, eps=1e-5):
    old = arr[idx]
    arr[idx] = old + eps
    up = f()
    arr[idx] = old - eps
    down = f()
    arr[idx] = old
    return (up - down) / (2 * eps)


@pytest.mark.parametrize("hidden", [[16], [12, 9], [10, 8, 6]])
def test_gradients_match_central_differences(hidden):
    rng = np.random.default_rng(len(hidden))
    net = trainer.init_mlp(2, hidden, 2, [0.3] * len(hidden), rng, dtype=np.float64)
    for b in net.biases:
        b[:] = rng.normal(0, 0.1, b.shape)
    X, y = trainer.load_dataset()[0][:32], trainer.load_dataset()[1][:32]
    masks = [(rng.random((32, h)) >= 0.3).astype(float) for h in hidden]
    _, gW, gb = trainer.loss_and_grads(net, X, y, masks)

    def loss():
        return trainer.loss_and_grads(net, X, y, masks)[0]

    for params, grads in ((net.weights, gW), (net.biases, gb)):
        for p, g in zip(params, grads):
            flat = list(np.ndindex(p.shape))
            for k in rng.choice(len(flat), size=min(25, len(flat)), replace=False):
                idx = flat[k]
                num = numeric_grad(loss, p, idx)
                ana = g[idx]
                scale = max(abs(num), abs(ana))
                if scale < 1e-7:
                    assert abs(num - ana) < 1e-9
                else:
                    assert abs(num - ana) / scale < 1e-4, (idx, num, ana)


def test_small_net_beats_majority_baseline_over_five_seeds():
    config = {"fc_layers": 2, "neurons_1": 64, "dropout_1": 0.0}
    for seed in range(5):
        resp = eval_toy_trainer(config, seed=seed)
        assert resp.ok and resp.value > 0.5
        assert 0.0 <= resp.value <= 1.0


@pytest.mark.parametrize("config", [
    {"fc_layers": 2, "neurons_1": 64, "dropout_1": 1.0},
    {"fc_layers": 3, "neurons_1": 64, "dropout_1": 0.2, "neurons_2": 128, "dropout_2": 1.0},
])
def test_full_dropout_gives_constant_prediction(config):
    # the validation split is balanced, so any constant prediction scores 0.5
    _, _, _, yva = trainer.load_dataset()
    assert yva.mean() == 0.5
    for seed in range(3):
        assert eval_toy_trainer(config, seed=seed).value == 0.5


def test_output_only_network_is_linear_classifier():
    resp = eval_toy_trainer({"fc_layers": 1}, seed=0, epochs=5)
    assert resp.ok and 0.3 <= resp.value <= 0.8


def test_trainer_deterministic_and_reports_meta():
    config = {"fc_layers": 2, "neurons_1": 64, "dropout_1": 0.2}
    a = eval_toy_trainer(config, seed=3, epochs=5)
    b = eval_toy_trainer(config, seed=3, epochs=5)
    assert a == b
    assert a.meta["epochs_run"] == 5 and 0.0 <= a.meta["train_accuracy"] <= 1.0


def test_trainer_ignores_non_fc_keys_and_rejects_missing():
    resp = eval_toy_trainer({"fc_layers": 1, "conv_n_filters": 64}, seed=0, epochs=2)
    assert resp.ok and resp.meta["ignored"] == ["conv_n_filters"]
    resp = eval_toy_trainer({"fc_layers": 2}, seed=0, epochs=2)
    assert resp.reason == "config"


def test_divergence_reported(monkeypatch):
    monkeypatch.setattr(trainer, "LEARNING_RATE", float("inf"))
    resp = eval_toy_trainer({"fc_layers": 2, "neurons_1": 64, "dropout_1": 0.0}, seed=0, epochs=2)
    assert resp.reason == "diverged"


def test_evaluator_caches_per_configuration():
    ev = ToyTrainerEvaluator(seed=1)
    req = EvalRequest("r", 1, {"fc_layers": 1}, 3)
    first = ev(req)
    assert ev(EvalRequest("r", 7, {"fc_layers": 1}, 3)) is first
