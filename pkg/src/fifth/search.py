"""Branching search over choice cells, branch-and-bound, snapshots, and
summarization of decided frames.

Branching never guesses structure: the only splittable things are `choose`
cells, and a branch is just a clone of the instance plus one exact write.
Variable order is smallest-domain-first; a guidance oracle may reorder the
values tried, never the variables, so learned guidance can change the cost
of search but not its answers.
"""

from dataclasses import dataclass, field
from typing import Optional

from .errors import StructuralError
from .language import (
    EXPANDED,
    Instance,
    Program,
    QuerySpec,
    SUMMARIZED,
    UNEXPANDED,
    demand_loop,
    instantiate,
    targets_met,
)
from .lattice import bounds_of, exact, truth_value


@dataclass(frozen=True)
class Query:
    entry: str
    bindings: tuple = ()
    targets: tuple = ()          # boundary names to report
    precision: float = 0.0
    depth_budget: int = 10_000
    step_budget: int = 1_000_000
    node_budget: int = 100_000
    objective: Optional[str] = None  # boundary name to minimize

    def __post_init__(self):
        if min(self.depth_budget, self.step_budget, self.node_budget) < 0:
            raise ValueError("budgets must be >= 0")

    @classmethod
    def from_spec(cls, spec: QuerySpec, node_budget: int = 100_000):
        return cls(
            entry=spec.entry,
            bindings=tuple(spec.bindings),
            targets=tuple(spec.show),
            precision=spec.precision,
            depth_budget=spec.depth,
            step_budget=spec.steps,
            node_budget=node_budget,
            objective=spec.minimize,
        )


class UniformOracle:
    """Scores every candidate the same; value order falls back to ascending."""

    def scores(self, instance, descriptors):
        return [0.0] * len(descriptors)


@dataclass
class SolutionSet:
    solutions: list
    stats: dict

    def as_json(self):
        return {"solutions": self.solutions, "stats": self.stats}

    def assignments(self):
        return [s["cells"] for s in self.solutions]


@dataclass
class OptimizeResult:
    solution: Optional[dict]
    objective: Optional[object]
    proven: bool
    bound_trace: list
    stats: dict

    def as_json(self):
        return {
            "solutions": [] if self.solution is None else [self.solution],
            "objective": self.objective,
            "proven": self.proven,
            "bound_trace": self.bound_trace,
            "stats": self.stats,
        }


@dataclass
class _SearchState:
    stack: list = field(default_factory=list)
    nodes: int = 0
    steps: int = 0
    expansions: int = 0
    summarized: int = 0
    complete: bool = True
    solutions: list = field(default_factory=list)
    incumbent: Optional[object] = None
    seed: int = 0


def _active_choices(inst):
    """Choice points whose frame is expanded and whose guard chain holds.

    The chain is the choice point's own, not just its frame's: a choose
    inside a refuted if branch is dead even though its frame is live.
    """
    out = []
    for cp in inst.choices:
        if inst.frames[cp.frame].state != EXPANDED:
            continue
        if inst.guard_state(cp.guards) is True:
            out.append(cp)
    return out


def _undecided_guard_choices(inst):
    for cp in inst.choices:
        if inst.frames[cp.frame].state != EXPANDED:
            continue
        if inst.guard_state(cp.guards) is None:
            return True
    return False


def _branch_candidates(inst, cp):
    content = inst.network.content(cp.cell)
    k = content.kind
    if k == "finite_domain":
        return content.elements
    if k == "int_interval":
        return tuple(range(content.lo, content.hi + 1))
    return ()


def _pick_choice(inst):
    """Smallest remaining domain, ties by lowest cell id. Returns (cp, values)."""
    best = None
    best_vals = None
    for cp in _active_choices(inst):
        vals = _branch_candidates(inst, cp)
        if len(vals) < 2:
            continue
        if (
            best is None
            or len(vals) < len(best_vals)
            or (len(vals) == len(best_vals) and cp.cell < best.cell)
        ):
            best, best_vals = cp, vals
    return best, best_vals


def _order_values(inst, cp, values, oracle):
    descriptors = [(cp.cell, exact(v), cp.frame) for v in values]
    scores = oracle.scores(inst, descriptors)
    ranked = sorted(zip(values, scores), key=lambda t: (-t[1], t[0]))
    return [v for v, _ in ranked]


def _resolve_targets(inst, names):
    return tuple(inst.cell_of(0, n) for n in names)


def _fully_chosen(inst):
    net = inst.network
    for cp in _active_choices(inst):
        if net.content(cp.cell).kind != "exact":
            return False
    return not _undecided_guard_choices(inst)


def _target_values(inst, names):
    cells = {}
    for n in names:
        content = inst.network.content(inst.cell_of(0, n))
        if content.kind == "exact":
            cells[n] = content.value
        else:
            lo, hi = bounds_of(content)
            cells[n] = [lo, hi]
    return cells


def _run_node(inst, query, state):
    """Quiesce one branch. Returns the demand report."""
    report = demand_loop(
        inst,
        _resolve_targets(inst, query.targets),
        max(query.depth_budget - inst.expansions, 0),
        query.step_budget,
        query.precision,
    )
    state.nodes += 1
    state.steps += report.steps_used
    state.expansions += report.expansions
    if report.depth_exhausted or report.steps_exhausted:
        state.complete = False
    return report


def solve(program: Program, query: Query, oracle=None, trace=None,
          gc: bool = False, write_sink=None) -> SolutionSet:
    """Depth-first enumeration of every solution reachable within budgets.

    `trace`, when given, must offer node/solution/deadend callbacks; the
    solver reports every quiesced node to it so guidance can be trained
    from what the search actually saw.

    `gc` summarizes decided frames after each node quiesces, so clones stay
    small on deep recursions. Summarization only folds frames whose boundary
    is exact, which on well-formed programs implies their interior choices
    are decided too; answers must not depend on the flag.

    `write_sink` taps every cell write made during the search (clones
    inherit it); instantiation writes happen before it is installed.
    """
    oracle = oracle or UniformOracle()
    state = _SearchState()
    root = instantiate(program, query.entry, dict(query.bindings))
    if write_sink is not None:
        root.network.trace_sink = write_sink
    state.stack.append(root)
    while state.stack:
        if state.nodes >= query.node_budget:
            state.complete = False
            break
        inst = state.stack.pop()
        report = _run_node(inst, query, state)
        if trace is not None:
            trace.node(inst)
        if report.contradiction is not None:
            if trace is not None:
                trace.deadend(inst)
            continue
        if report.steps_exhausted:
            # pending propagators could still contradict; the branch is
            # abandoned as incomplete rather than judged on a half-run
            continue
        if gc:
            folded = collect_garbage(
                inst, _resolve_targets(inst, query.targets))
            state.summarized += len(folded.summarized)
        solved = report.targets_met and _fully_chosen(inst)
        if solved:
            if trace is not None:
                trace.solution(inst)
            state.solutions.append({"cells": _target_values(inst, query.targets)})
            continue
        cp, values = _pick_choice(inst)
        if cp is None:
            # nothing to branch on and not a solution: a dead or
            # under-determined branch
            continue
        ordered = _order_values(inst, cp, values, oracle)
        for v in reversed(ordered):
            child = inst.clone()
            child.network.write(cp.cell, exact(v), f"branch:{cp.cell}={v}")
            state.stack.append(child)
    return SolutionSet(
        solutions=state.solutions,
        stats={
            "nodes": state.nodes,
            "steps": state.steps,
            "expansions": state.expansions,
            "summarized": state.summarized,
            "complete": state.complete,
        },
    )


def _objective_lower_bound(inst, obj_cell):
    content = inst.network.content(obj_cell)
    if content.kind == "exact":
        return content.value
    r = bounds_of(content)
    return None if r is None else r[0]


def _probe_bound(inst, obj_cell, bound, step_budget):
    """Check that objective = bound is consistent with this branch."""
    probe = inst.network.clone()
    probe.write(obj_cell, exact(bound), "probe:objective")
    probe.run_to_quiescence(step_budget)
    return probe.contradiction is None


def optimize(program: Program, query: Query, oracle=None,
             trace=None, gc: bool = False, write_sink=None) -> OptimizeResult:
    """Branch-and-bound minimization of the objective cell.

    `trace`, `gc`, and `write_sink` behave exactly as in solve().
    """
    if query.objective is None:
        raise StructuralError("optimize needs an objective")
    oracle = oracle or UniformOracle()
    state = _SearchState()
    best_solution = None
    bound_trace = []
    root = instantiate(program, query.entry, dict(query.bindings))
    if write_sink is not None:
        root.network.trace_sink = write_sink
    obj_name = query.objective
    state.stack.append(root)
    while state.stack:
        if state.nodes >= query.node_budget:
            state.complete = False
            break
        inst = state.stack.pop()
        report = _run_node(inst, query, state)
        if trace is not None:
            trace.node(inst)
        if report.contradiction is not None:
            if trace is not None:
                trace.deadend(inst)
            continue
        if report.steps_exhausted:
            continue  # same rule as solve: no judgement on a half-run
        if gc:
            folded = collect_garbage(
                inst, _resolve_targets(inst, query.targets))
            state.summarized += len(folded.summarized)
        obj_cell = inst.cell_of(0, obj_name)
        lb = _objective_lower_bound(inst, obj_cell)
        if lb is not None and state.incumbent is not None and lb >= state.incumbent:
            continue  # cannot beat the incumbent anywhere below this node
        if report.targets_met and _fully_chosen(inst):
            if lb is None:
                continue
            content = inst.network.content(obj_cell)
            if content.kind != "exact" and not _probe_bound(
                inst, obj_cell, lb, query.step_budget
            ):
                # bound not attainable in this branch; the leaf is decided,
                # so there is nothing further to branch on
                continue
            if state.incumbent is None or lb < state.incumbent:
                state.incumbent = lb
                pinned = inst.clone()
                pinned.network.write(obj_cell, exact(lb), "probe:objective")
                pinned.network.run_to_quiescence(query.step_budget)
                best_solution = {"cells": _target_values(pinned, query.targets)}
                bound_trace.append({"nodes": state.nodes, "bound": lb})
                if trace is not None:
                    trace.solution(pinned)
            continue
        cp, values = _pick_choice(inst)
        if cp is None:
            continue
        ordered = _order_values(inst, cp, values, oracle)
        for v in reversed(ordered):
            child = inst.clone()
            child.network.write(cp.cell, exact(v), f"branch:{cp.cell}={v}")
            state.stack.append(child)
    return OptimizeResult(
        solution=best_solution,
        objective=state.incumbent,
        proven=state.complete and state.incumbent is not None,
        bound_trace=bound_trace,
        stats={
            "nodes": state.nodes,
            "steps": state.steps,
            "expansions": state.expansions,
            "summarized": state.summarized,
            "complete": state.complete,
        },
    )


class SnapshotStore:
    """Copying snapshot/restore for branch exploration.

    Snapshots are full clones; restore hands back a fresh clone so one
    snapshot can be restored any number of times.
    """

    def __init__(self):
        self._snaps = {}
        self._next = 0

    def snapshot(self, obj) -> int:
        sid = self._next
        self._next += 1
        self._snaps[sid] = obj.clone()
        return sid

    def restore(self, sid):
        try:
            return self._snaps[sid].clone()
        except KeyError:
            raise StructuralError(f"unknown snapshot {sid}")

    def drop(self, sid):
        self._snaps.pop(sid, None)

    def __len__(self):
        return len(self._snaps)


@dataclass
class SummarizationReport:
    summarized: tuple
    dropped_cells: int
    detached_propagators: int


def collect_garbage(inst: Instance, target_cells) -> SummarizationReport:
    """Summarize frames whose work is finished.

    A frame folds up when its boundary is fully decided, no descendant still
    awaits expansion (refuted descendants are dead, not pending), and no
    query target lives in its interior. Interior cells are dropped and their
    propagators detached; boundary contents are untouched, so every already
    derived answer survives by construction.
    """
    net = inst.network
    targets = set(target_cells)
    children = {}
    for f in inst.frames:
        if f.parent is not None:
            children.setdefault(f.parent, []).append(f)

    # Guard chains outlive the frames that declared their cells: a child's
    # gate may test a parent's local. Dropping such a cell is only safe once
    # its truth is decided, and the decision has to be remembered.
    guard_refs = set()
    for f in inst.frames:
        guard_refs.update(cid for cid, _ in f.guards)
    for cp in inst.choices:
        guard_refs.update(cid for cid, _ in cp.guards)

    def has_pending_descendant(frame):
        for ch in children.get(frame.id, ()):
            if ch.state == UNEXPANDED:
                if inst.gate_state(ch) is not False:
                    return True
            elif ch.state == EXPANDED:
                if has_pending_descendant(ch):
                    return True
        return False

    summarized = []
    dropped = 0
    detached = 0
    for f in inst.frames:
        if f.id == 0 or f.state != EXPANDED:
            continue
        boundary = set(f.boundary_cells(inst.program))
        interior = [c for c in f.cellmap.values() if c not in boundary]
        if any(net.content(c).kind != "exact" for c in boundary):
            continue
        if has_pending_descendant(f):
            continue
        if targets & set(interior):
            continue
        if any(
            cid in guard_refs and truth_value(net.content(cid)) is None
            for cid in interior
        ):
            continue
        for cid in interior:
            if cid in guard_refs:
                inst.guard_cache[cid] = truth_value(net.content(cid))
            for pid in list(net.cells[cid].watchers):
                if pid not in net.detached:
                    net.detach(pid)
                    detached += 1
            net.drop_cell(cid)
            dropped += 1
        f.cellmap = {
            name: cid for name, cid in f.cellmap.items() if cid in boundary
        }
        f.state = SUMMARIZED
        summarized.append(f.id)
    return SummarizationReport(tuple(summarized), dropped, detached)
