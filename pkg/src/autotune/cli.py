"""Command-line entry point: ``autotune {tune,random-search,bench,report,shapes}``.

Exit codes: 0 success, 1 usage error, 2 evaluator abort or corrupt log,
3 architecture shape mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, TextIO

import numpy as np

from . import architecture as arch_mod
from . import search_space as ss
from .acquisition import DEFAULT_POOL_SIZE
from .evaluators import EvalRequest, ExternalEvaluator, SyntheticEvaluator, ToyTrainerEvaluator
from .evaluators.external import DEFAULT_TIMEOUT
from .optimizer import (Budget, EvaluatorError, ResumeError, TuningRun, init_run, persist,
                        read_log, resume, run_to_completion)

EXIT_OK, EXIT_USAGE, EXIT_EVALUATOR, EXIT_MISMATCH = 0, 1, 2, 3
BUILTIN_EVALUATORS = ("toy", "branin", "hartmann3", "mixed_quadratic")
LOG_DIR_ENV = "AUTOTUNE_LOG_DIR"
ASYMMETRIC_RS_TOTAL = 100


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(out: TextIO, doc: dict) -> None:
    out.write(json.dumps(doc, separators=(", ", ": ")) + "\n")


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


# ---------------------------------------------------------------------------
# shared setup


@dataclass
class Setup:
    space: ss.SearchSpace
    evaluator: Callable[[EvalRequest], object]
    label: str


def _log_dir(args) -> Path:
    return Path(getattr(args, "log_dir", None) or os.environ.get(LOG_DIR_ENV) or "runs")


def _make_evaluator(args):
    if args.external and args.evaluator:
        raise UsageError("give either --evaluator or --external, not both")
    if args.external:
        return ExternalEvaluator(args.external, args.timeout), "external"
    if not args.evaluator:
        raise UsageError("an evaluator is required (--evaluator NAME or --external CMD)")
    if args.evaluator == "toy":
        return ToyTrainerEvaluator(seed=args.trainer_seed), "toy"
    if args.evaluator in BUILTIN_EVALUATORS:
        return SyntheticEvaluator(args.evaluator), args.evaluator
    raise UsageError(f"unknown evaluator {args.evaluator!r}; builtin: {', '.join(BUILTIN_EVALUATORS)}")


def _with_architecture(evaluator, arch: arch_mod.ArchitectureSpec):
    """Attach the surgically modified architecture to every request."""

    def call(request: EvalRequest):
        new_arch, _ = arch_mod.apply_configuration(arch, request.config)
        req = EvalRequest(request.run_id, request.index, request.config, request.epochs,
                          arch_mod.arch_to_dict(new_arch))
        return evaluator(req)

    return call


def _setup(args) -> Setup:
    evaluator, label = _make_evaluator(args)
    arch = None
    if args.arch:
        try:
            arch = arch_mod.load_architecture(args.arch)
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot read architecture {args.arch}: {exc}") from None
    if args.space:
        try:
            space = ss.load_space(args.space)
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot read space {args.space}: {exc}") from None
    elif arch is not None and args.k_max:
        try:
            space = arch_mod.build_space_for_tail(arch, args.k_max)
        except arch_mod.ArchitectureError as exc:
            raise UsageError(str(exc)) from None
    else:
        raise UsageError("--space is required (or --arch with --k-max)")
    defects = ss.validate(space)
    if defects:
        raise UsageError("invalid space: " + "; ".join(f"{d.param}: {d.message}" for d in defects))
    if arch is not None:
        evaluator = _with_architecture(evaluator, arch)
    return Setup(space, evaluator, label)


def _budget(args, strategy: str) -> Budget:
    default = Budget.default(strategy)
    m0 = args.m0 if args.m0 is not None else default.m0
    n = args.n_total if args.n_total is not None else default.n_total
    try:
        return Budget(m0, n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _print_incumbent(run: TuningRun, log_path: Path, fmt: str, out: TextIO) -> None:
    inc = run.incumbent
    index = next(o.index for o in run.observations if o.value == inc.value) if inc else None
    if fmt == "jsonl":
        _emit(out, {"event": "incumbent", "strategy": run.strategy, "seed": run.seed,
                    "n_evaluations": len(run.observations), "status": run.status,
                    "index": index, "value": inc.value if inc else None,
                    "config": inc.config if inc else None, "log": str(log_path)})
        return
    out.write(f"{run.strategy} seed {run.seed}: {len(run.observations)} evaluations, "
              f"status {run.status}\n")
    if inc is not None:
        out.write(f"incumbent value {_fmt(inc.value)} at index {index}\n")
        for layer, param, value in arch_mod.config_rows(inc.config):
            out.write(f"  {layer:<12} {param:<16} {value}\n")
    out.write(f"log: {log_path}\n")


# ---------------------------------------------------------------------------
# commands


def cmd_tune(args, strategy: str = "bayes_opt", out: TextIO = sys.stdout) -> int:
    if args.resume:
        log_path = Path(args.resume)
        if args.space or args.k_max:
            setup = _setup(args)
            space, evaluator = setup.space, setup.evaluator
        else:
            # the log header carries the space
            space, (evaluator, _) = None, _make_evaluator(args)
            if args.arch:
                evaluator = _with_architecture(evaluator, arch_mod.load_architecture(args.arch))
        try:
            run = resume(log_path, space, strategy, args.seed, _budget(args, strategy),
                         args.pool_size, args.epochs)
        except ResumeError as exc:
            print(f"error: cannot resume {log_path}: {exc}", file=sys.stderr)
            return EXIT_EVALUATOR
    else:
        setup = _setup(args)
        run = init_run(setup.space, _budget(args, strategy), strategy, args.seed,
                       args.pool_size, args.epochs)
        log_path = Path(args.log) if args.log else \
            _log_dir(args) / f"{strategy}-{setup.space.name or 'space'}-seed{args.seed}.jsonl"
        persist(run, log_path)
        evaluator = setup.evaluator
    try:
        run_to_completion(run, evaluator)
    except EvaluatorError as exc:
        print(f"error: {exc}; partial log in {log_path}", file=sys.stderr)
        return EXIT_EVALUATOR
    finally:
        run.sink.close()
    _print_incumbent(run, log_path, args.format, out)
    return EXIT_OK


def _final_values(log_paths: Sequence[Path]) -> list[float]:
    finals = []
    for p in log_paths:
        _, records = read_log(p)
        finals.append(max(r["value"] for r in records))
    return finals


def summarize(values: Sequence[float]) -> dict:
    a = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(a, [25, 50, 75])
    return {"n": int(a.size), "median": float(med), "best": float(a.max()),
            "worst": float(a.min()), "q1": float(q1), "q3": float(q3)}


def cmd_bench(args, out: TextIO = sys.stdout) -> int:
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    setup = _setup(args)
    bo_budget = _budget(args, "bayes_opt")
    n = bo_budget.n_total
    variants = {"bo": ("bayes_opt", bo_budget),
                "rs_asymmetric": ("random_search", Budget(1, args.rs_total)),
                "rs_matched": ("random_search", Budget(1, n))}
    log_dir = _log_dir(args)
    logs: dict[str, list[Path]] = {k: [] for k in variants}
    seeds = [args.seed + r for r in range(args.repeats)]
    for seed in seeds:
        for key, (strategy, budget) in variants.items():
            path = log_dir / f"bench-{setup.space.name or 'space'}-{strategy}-n{budget.n_total}-seed{seed}.jsonl"
            run = init_run(setup.space, budget, strategy, seed, args.pool_size, args.epochs)
            persist(run, path)
            try:
                run_to_completion(run, setup.evaluator)
            except EvaluatorError as exc:
                print(f"error: {exc}; partial log in {path}", file=sys.stderr)
                return EXIT_EVALUATOR
            finally:
                run.sink.close()
            logs[key].append(path)

    finals = {k: _final_values(v) for k, v in logs.items()}
    protocols = {"asymmetric": ("bo", "rs_asymmetric"), "budget_matched": ("bo", "rs_matched")}
    rows = []
    for proto, keys in protocols.items():
        for key in keys:
            strategy, budget = variants[key]
            rows.append({"protocol": proto, "strategy": strategy, "n_total": budget.n_total,
                         "m0": budget.m0 if strategy == "bayes_opt" else 0,
                         "seeds": seeds, "finals": finals[key], **summarize(finals[key]),
                         "logs": [str(p) for p in logs[key]]})
    if args.format == "jsonl":
        for row in rows:
            _emit(out, row)
        return EXIT_OK
    out.write(f"bench on {setup.space.name or 'space'} ({setup.label}), seeds {seeds[0]}..{seeds[-1]}\n")
    out.write(f"{'protocol':<16}{'strategy':<15}{'N':>5}{'median':>12}{'best':>12}"
              f"{'q1':>12}{'q3':>12}\n")
    for r in rows:
        out.write(f"{r['protocol']:<16}{r['strategy']:<15}{r['n_total']:>5}"
                  f"{r['median']:>12.6g}{r['best']:>12.6g}{r['q1']:>12.6g}{r['q3']:>12.6g}\n")
    out.write(f"logs in {log_dir}\n")
    return EXIT_OK


def cmd_report(args, out: TextIO = sys.stdout) -> int:
    try:
        header, records = read_log(args.log_path)
    except FileNotFoundError:
        raise UsageError(f"no such log {args.log_path}") from None
    except ResumeError as exc:
        print(f"error: corrupt log {args.log_path}: {exc}", file=sys.stderr)
        return EXIT_EVALUATOR
    if header is None:
        print(f"error: empty log {args.log_path} (last valid index 0)", file=sys.stderr)
        return EXIT_EVALUATOR

    trace, best, phases = [], None, {}
    for r in records:
        if best is None or r["value"] > best["value"]:
            best = r
        trace.append((r["index"], r["phase"], r["value"], best["value"]))
        phases[r["phase"]] = phases.get(r["phase"], 0) + 1

    if args.format == "jsonl":
        _emit(out, {"strategy": header["strategy"], "seed": header["seed"], "m0": header["m0"],
                    "N": header["N"], "space_hash": header["space_hash"]})
        for index, phase, value, inc in trace:
            _emit(out, {"index": index, "phase": phase, "value": value, "incumbent": inc})
        _emit(out, {"phases": phases})
        if best is not None:
            _emit(out, {"best": {"index": best["index"], "value": best["value"],
                                 "config": best["config"]}})
        return EXIT_OK

    out.write(f"{header['strategy']} seed {header['seed']}, m0 {header['m0']}, N {header['N']}, "
              f"{len(records)} records\n")
    out.write(f"{'index':>6} {'phase':<8}{'value':>12}{'incumbent':>12}\n")
    for index, phase, value, inc in trace:
        out.write(f"{index:>6} {phase:<8}{value:>12.6g}{inc:>12.6g}\n")
    out.write("phases: " + ", ".join(f"{k} {v}" for k, v in phases.items()) + "\n")
    if best is not None:
        out.write(f"best value {_fmt(best['value'])} at index {best['index']}\n")
        out.write(f"{'layer':<12} {'parameter':<16} value\n")
        for layer, param, value in arch_mod.config_rows(best["config"]):
            out.write(f"{layer:<12} {param:<16} {value}\n")
    return EXIT_OK


def cmd_shapes(args, out: TextIO = sys.stdout) -> int:
    try:
        arch = arch_mod.load_architecture(args.arch_path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read architecture {args.arch_path}: {exc}") from None
    trace = arch_mod.check_shapes(arch)
    jsonl = args.format == "jsonl"
    if not trace.ok:
        m = trace.mismatch
        if jsonl:
            for i, (si, so) in enumerate(zip(trace.inputs, trace.outputs)):
                _emit(out, {"index": i, "kind": arch.layers[i].kind, "input": list(si),
                            "output": list(so)})
            _emit(out, {"mismatch": {"position": m.position, "kind": m.kind,
                                     "message": m.message,
                                     "main": list(m.main) if m.main else None,
                                     "other": list(m.other) if m.other else None}})
        else:
            for i, (si, so) in enumerate(zip(trace.inputs, trace.outputs)):
                out.write(f"{i:>4} {arch.layers[i].describe():<28} {si} -> {so}\n")
        print(f"shape mismatch at layer {m.position}: {m.message}", file=sys.stderr)
        return EXIT_MISMATCH

    params = arch_mod.count_params(arch)
    flops = arch_mod.count_flops(arch)
    if jsonl:
        for i, layer in enumerate(arch.layers):
            _emit(out, {"index": i, "kind": layer.kind, "input": list(trace.inputs[i]),
                        "output": list(trace.outputs[i]), "params": params.per_layer[i].count,
                        "flops": flops.per_layer[i].count, "frozen": layer.frozen})
        _emit(out, {"name": arch.name, "params_total": params.total,
                    "params_trainable": params.trainable, "params_frozen": params.frozen,
                    "flops_total": flops.total, "flops_learned": flops.learned})
        return EXIT_OK
    out.write(f"{arch.name}: input {arch.input_shape}, {arch.class_count} classes\n")
    out.write(f"{'#':>4} {'layer':<28} {'output':<18}{'params':>14}{'flops':>16}\n")
    for i, layer in enumerate(arch.layers):
        tag = " (frozen)" if layer.frozen else ""
        out.write(f"{i:>4} {layer.describe() + tag:<28} {str(trace.outputs[i]):<18}"
                  f"{params.per_layer[i].count:>14,}{flops.per_layer[i].count:>16,}\n")
    out.write(f"params: total {params.total:,}, trainable {params.trainable:,}, "
              f"frozen {params.frozen:,}\n")
    out.write(f"flops: total {flops.total:,}, learned layers {flops.learned:,}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_run_options(p: argparse.ArgumentParser, strategy: str) -> None:
    p.add_argument("--space", help="search space file (bundled names such as table1.json work)")
    p.add_argument("--arch", help="architecture file; requests then carry the modified network")
    p.add_argument("--k-max", type=int, help="build the space from --arch tail depth up to K")
    p.add_argument("--evaluator", help=f"builtin objective: {', '.join(BUILTIN_EVALUATORS)}")
    p.add_argument("--external", metavar="CMD", help="objective command (line protocol)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trainer-seed", type=int, default=0, help="toy trainer weight seed")
    if strategy == "bayes_opt":
        p.add_argument("--m0", type=int, help="seed-phase evaluations (default 20)")
    else:
        p.set_defaults(m0=None)
    p.add_argument("--n-total", type=int, help="total evaluations")
    p.add_argument("--pool-size", type=int, default=DEFAULT_POOL_SIZE)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT,
                   help="seconds per external evaluation")
    p.add_argument("--log", help="run log path")
    p.add_argument("--log-dir", help=f"log directory (default ${LOG_DIR_ENV} or ./runs)")
    p.add_argument("--format", choices=("text", "jsonl"), default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="autotune", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("tune", help="Bayesian optimization run")
    _add_run_options(p, "bayes_opt")
    p.add_argument("--resume", metavar="LOG", help="continue the run recorded in LOG")

    p = sub.add_parser("random-search", help="random-search baseline run")
    _add_run_options(p, "random_search")
    p.add_argument("--resume", metavar="LOG")

    p = sub.add_parser("bench", help="BO vs random search over several seeds")
    _add_run_options(p, "bayes_opt")
    p.add_argument("--repeats", type=int, default=10, help="number of seeds")
    p.add_argument("--rs-total", type=int, default=ASYMMETRIC_RS_TOTAL,
                   help="random-search budget of the asymmetric protocol")

    p = sub.add_parser("report", help="summarize a run log")
    p.add_argument("log_path")
    p.add_argument("--format", choices=("text", "jsonl"), default="text")

    p = sub.add_parser("shapes", help="shape trace and accounting of an architecture")
    p.add_argument("arch_path")
    p.add_argument("--format", choices=("text", "jsonl"), default="text")
    return parser


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "tune":
            return cmd_tune(args, "bayes_opt", out)
        if args.command == "random-search":
            return cmd_tune(args, "random_search", out)
        if args.command == "bench":
            return cmd_bench(args, out)
        if args.command == "report":
            return cmd_report(args, out)
        return cmd_shapes(args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"autotune: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
