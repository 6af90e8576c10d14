"""Command line front end.

Four commands share one process model: parse, run, emit JSON, exit.

  solve    run one program's query, print the solution set
  train    solve a corpus with tracing, fit guidance, save the bundle
  measure  rerun an eval corpus under uniform and learned guidance
  check    run the built-in consistency suites

Exit codes: 0 found, 1 usage or parse error, 2 exhausted with proof of
unsatisfiability, 3 exhausted by budget. Reports carry no timing fields,
so equal seeds give byte-equal output.
"""

import argparse
import dataclasses
import json
import os
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fifth import selftest
from fifth.errors import FifthError
from fifth.hierarchy import (
    AugmentationTree,
    LearnedOracle,
    TraceLog,
    load_bundle,
    save_bundle,
)
from fifth.language import parse
from fifth.search import Query, UniformOracle, optimize, solve

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNSAT = 2
EXIT_BUDGET = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so main() owns the exit code."""

    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    inputs: tuple = ()
    seed: int = 0
    depth: Optional[int] = None
    steps: Optional[int] = None
    nodes: Optional[int] = None
    precision: Optional[float] = None
    oracle: str = "uniform"
    model: Optional[str] = None
    trace: bool = False
    out: Optional[str] = None
    gc: bool = False


def _build_parser():
    parser = _Parser(prog="fifth")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--depth", type=int, default=None)
        sp.add_argument("--steps", type=int, default=None)
        sp.add_argument("--nodes", type=int, default=None)
        sp.add_argument("--precision", type=float, default=None)
        sp.add_argument("--oracle", choices=("uniform", "learned"),
                        default="uniform")
        sp.add_argument("--model", default=None)
        sp.add_argument("--trace", action="store_true")
        sp.add_argument("--out", default=None)
        sp.add_argument("--gc", action="store_true")
        return sp

    sp = common(sub.add_parser("solve", help="run one program"))
    sp.add_argument("program")
    sp = common(sub.add_parser("train", help="fit guidance from a corpus"))
    sp.add_argument("corpus")
    sp = common(sub.add_parser("measure", help="compare guided vs unguided"))
    sp.add_argument("train_dir")
    sp.add_argument("eval_dir")
    common(sub.add_parser("check", help="run self-test suites"))
    return parser


def _config(ns):
    positional = [getattr(ns, k) for k in ("program", "corpus", "train_dir",
                                           "eval_dir") if hasattr(ns, k)]
    return RunConfig(
        command=ns.command,
        inputs=tuple(positional),
        seed=ns.seed,
        depth=ns.depth,
        steps=ns.steps,
        nodes=ns.nodes,
        precision=ns.precision,
        oracle=ns.oracle,
        model=ns.model,
        trace=ns.trace,
        out=ns.out,
        gc=ns.gc,
    )


def _resolve(path_str):
    """The path as given, else relative to the corpus root (FIFTH_CORPUS)."""
    p = Path(path_str)
    if p.exists():
        return p
    if not p.is_absolute():
        q = Path(os.environ.get("FIFTH_CORPUS", "corpus")) / p
        if q.exists():
            return q
    return p  # caller reports the miss


def _load_program(path_str):
    source = _resolve(path_str)
    if not source.is_file():
        raise UsageError(f"no such file: {path_str}")
    program = parse(source.read_text())
    if program.query is None:
        raise UsageError(f"{path_str} has no query")
    return program


def _query(program, cfg):
    query = Query.from_spec(program.query)
    changes = {}
    if cfg.depth is not None:
        changes["depth_budget"] = cfg.depth
    if cfg.steps is not None:
        changes["step_budget"] = cfg.steps
    if cfg.nodes is not None:
        changes["node_budget"] = cfg.nodes
    if cfg.precision is not None:
        changes["precision"] = cfg.precision
    return dataclasses.replace(query, **changes) if changes else query


def _emit(payload, out):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _run(program, query, oracle, trace=None, gc=False, write_sink=None):
    if query.objective is not None:
        return optimize(program, query, oracle=oracle, trace=trace,
                        gc=gc, write_sink=write_sink)
    return solve(program, query, oracle=oracle, trace=trace,
                 gc=gc, write_sink=write_sink)


def _found(result):
    if hasattr(result, "objective"):
        return result.objective is not None
    return bool(result.solutions)


def _trace_summary(log):
    outcomes = {"success": 0, "deadend": 0}
    for _, _, label in log.outcomes:
        outcomes[label] += 1
    return {
        "nodes": log.n_nodes,
        "states": len(log.states),
        "edges": len(log.edges),
        "outcomes": outcomes,
    }


def cmd_solve(cfg):
    program = _load_program(cfg.inputs[0])
    query = _query(program, cfg)
    if cfg.oracle == "learned":
        if cfg.model is None:
            raise UsageError("--oracle learned needs --model")
        oracle = LearnedOracle(load_bundle(_resolve(cfg.model)))
    else:
        oracle = UniformOracle()
    log = TraceLog() if cfg.trace else None
    sink = None
    if cfg.trace:
        sink = lambda rec: sys.stderr.write(
            json.dumps(rec, sort_keys=True) + "\n")
    result = _run(program, query, oracle, trace=log, gc=cfg.gc,
                  write_sink=sink)
    payload = result.as_json()
    payload["command"] = "solve"
    if log is not None:
        payload["trace"] = _trace_summary(log)
    _emit(payload, cfg.out)
    if _found(result):
        return EXIT_OK
    return EXIT_UNSAT if result.stats["complete"] else EXIT_BUDGET


def _corpus_files(dir_str):
    d = _resolve(dir_str)
    if not d.is_dir():
        raise UsageError(f"no such directory: {dir_str}")
    return sorted(d.glob("*.5th"))


def _fit_bundle(cfg, corpus_dir, model_out):
    """Solve every corpus instance with tracing, fit, save. Returns the
    instance names and the training report."""
    files = _corpus_files(corpus_dir)
    if not files:
        raise UsageError(f"no instances in {corpus_dir}")
    names = []
    traces = []
    for f in files:
        program = parse(f.read_text())
        if program.query is None:
            raise UsageError(f"{f} has no query")
        log = TraceLog()
        _run(program, _query(program, cfg), UniformOracle(), trace=log)
        names.append(f.name)
        traces.append(log)
    tree = AugmentationTree(n_code=8)
    report = tree.train_from_traces(traces, seed=cfg.seed)
    save_bundle(tree, str(model_out))
    return names, report


def cmd_train(cfg):
    if cfg.model is None:
        raise UsageError("train needs --model")
    names, report = _fit_bundle(cfg, cfg.inputs[0], cfg.model)
    payload = {
        "command": "train",
        "instances": names,
        "model": cfg.model,
        "seed": cfg.seed,
        "report": report,
    }
    _emit(payload, cfg.out)
    return EXIT_OK


def _canon_solutions(solutions):
    out = set()
    for s in solutions:
        out.add(tuple(
            (k, tuple(v) if isinstance(v, list) else v)
            for k, v in sorted(s["cells"].items())
        ))
    return out


def _answers_equal(query, a, b):
    if query.objective is not None:
        return a.objective == b.objective
    return _canon_solutions(a.solutions) == _canon_solutions(b.solutions)


def cmd_measure(cfg):
    if cfg.model is None:
        raise UsageError("measure needs --model")
    train_dir, eval_dir = cfg.inputs
    model_dir = Path(cfg.model)
    trained = False
    if not (model_dir / "manifest.json").is_file():
        _fit_bundle(cfg, train_dir, model_dir)
        trained = True
    tree = load_bundle(str(model_dir))
    files = _corpus_files(eval_dir)
    if not files:
        raise UsageError(f"no instances in {eval_dir}")
    rows = []
    for f in files:
        program = parse(f.read_text())
        if program.query is None:
            raise UsageError(f"{f} has no query")
        query = _query(program, cfg)
        uniform = _run(program, query, UniformOracle())
        learned = _run(program, query, LearnedOracle(tree))
        rows.append({
            "name": f.name,
            "nodes_uniform": uniform.stats["nodes"],
            "nodes_learned": learned.stats["nodes"],
            "solutions_equal": _answers_equal(query, uniform, learned),
        })
    payload = {
        "command": "measure",
        "model": cfg.model,
        "seed": cfg.seed,
        "trained": trained,
        "instances": rows,
        "aggregate": {
            "n_eval": len(rows),
            "median_nodes_uniform": statistics.median(
                [r["nodes_uniform"] for r in rows]),
            "median_nodes_learned": statistics.median(
                [r["nodes_learned"] for r in rows]),
            "all_solutions_equal": all(r["solutions_equal"] for r in rows),
        },
    }
    _emit(payload, cfg.out)
    return EXIT_OK


def cmd_check(cfg):
    # reduced sample sizes; the full-size runs live in the test suite
    if os.environ.get("FIFTH_FAULT_INJECT"):
        selftest.install_merge_fault()
    try:
        suites = [
            selftest.lattice_law_sample(n_triples=2_000, seed=cfg.seed + 2024),
            selftest.confluence_sample(n_networks=30, n_orders=8,
                                       seed=cfg.seed + 77),
            selftest.gradient_sample(n_configs=8, seed=cfg.seed + 11),
        ]
    finally:
        selftest.clear_merge_fault()
    for s in suites:
        print(f"{s['suite']}: {'pass' if s['ok'] else 'FAIL'}")
    return EXIT_OK if all(s["ok"] for s in suites) else EXIT_USAGE


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        cfg = _config(ns)
        handler = {
            "solve": cmd_solve,
            "train": cmd_train,
            "measure": cmd_measure,
            "check": cmd_check,
        }[cfg.command]
        return handler(cfg)
    except (UsageError, OSError, FifthError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
