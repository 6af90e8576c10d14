"""Search, optimization, snapshots, and frame summarization."""

import pytest

from fifth import (
    Query,
    SnapshotStore,
    UniformOracle,
    collect_garbage,
    demand_loop,
    exact,
    instantiate,
    optimize,
    parse,
    solve,
)
from fifth.errors import StructuralError
from fifth.language import EXPANDED, SUMMARIZED, UNEXPANDED


def queens_text(n):
    """N-queens over columns q1..qn; diagonals via shifted copies."""
    names = [f"q{i}" for i in range(1, n + 1)]
    lines = [f"(def (queens {' '.join(names)})"]
    vals = " ".join(str(v) for v in range(1, n + 1))
    for q in names:
        lines.append(f"  (choose {q} {vals})")
    lines.append(f"  (alldiff {' '.join(names)})")
    for d in range(1, n):
        lines.append(f"  (const d{d} {d})")
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            d = j - i
            # qi + d != qj and qi - d != qj
            lines.append(f"  (cell u{i}x{j})")
            lines.append(f"  (sum q{i} d{d} u{i}x{j})")
            lines.append(f"  (alldiff u{i}x{j} q{j})")
            lines.append(f"  (cell v{i}x{j})")
            lines.append(f"  (sum v{i}x{j} d{d} q{i})")
            lines.append(f"  (alldiff v{i}x{j} q{j})")
    lines.append(")")
    return "\n".join(lines)


CRYPT = """
(def (crypt s e n d m o r y send more money)
  (choose s 1 2 3 4 5 6 7 8 9)
  (choose e 0 1 2 3 4 5 6 7 8 9)
  (choose n 0 1 2 3 4 5 6 7 8 9)
  (choose d 0 1 2 3 4 5 6 7 8 9)
  (choose m 1 2 3 4 5 6 7 8 9)
  (choose o 0 1 2 3 4 5 6 7 8 9)
  (choose r 0 1 2 3 4 5 6 7 8 9)
  (choose y 0 1 2 3 4 5 6 7 8 9)
  (alldiff s e n d m o r y)
  (const ten 10)
  (const hund 100)
  (const thou 1000)
  (const tthou 10000)
  (int c1 0 1)
  (int c2 0 1)
  (int c3 0 1)

  (cell t1)
  (sum d e t1)
  (cell k1)
  (product c1 ten k1)
  (sum y k1 t1)

  (cell a2)
  (sum n r a2)
  (cell t2)
  (sum a2 c1 t2)
  (cell k2)
  (product c2 ten k2)
  (sum e k2 t2)

  (cell a3)
  (sum e o a3)
  (cell t3)
  (sum a3 c2 t3)
  (cell k3)
  (product c3 ten k3)
  (sum n k3 t3)

  (cell a4)
  (sum s m a4)
  (cell t4)
  (sum a4 c3 t4)
  (cell k4)
  (product m ten k4)
  (sum o k4 t4)

  (cell ws)
  (product s thou ws)
  (cell we)
  (product e hund we)
  (cell wn)
  (product n ten wn)
  (cell p1)
  (sum ws we p1)
  (cell p2)
  (sum p1 wn p2)
  (sum p2 d send)

  (cell wm)
  (product m thou wm)
  (cell wo)
  (product o hund wo)
  (cell wr)
  (product r ten wr)
  (cell p3)
  (sum wm wo p3)
  (cell p4)
  (sum p3 wr p4)
  (sum p4 e more)

  (cell xm)
  (product m tthou xm)
  (cell xo)
  (product o thou xo)
  (cell xn)
  (product n hund xn)
  (cell xe)
  (product e ten xe)
  (cell p5)
  (sum xm xo p5)
  (cell p6)
  (sum p5 xn p6)
  (cell p7)
  (sum p6 xe p7)
  (sum p7 y money)

  (sum send more money))

(query (crypt) (show send more money))
"""

FACT = """
(def (fact n r)
  (cell nm1)
  (cell rest)
  (const one 1)
  (sum nm1 one n)
  (if n
    ((call fact nm1 rest)
     (product n rest r))
    ((const r 1))))
"""


def queens_query(n, **kw):
    return Query(entry="queens",
                 targets=tuple(f"q{i}" for i in range(1, n + 1)), **kw)


def boards(result):
    out = set()
    for cells in result.assignments():
        out.add(tuple(cells[k] for k in sorted(cells, key=lambda s: int(s[1:]))))
    return out


# -- solve -----------------------------------------------------------------


def test_queens4_exact_solution_set():
    prog = parse(queens_text(4))
    res = solve(prog, queens_query(4))
    assert boards(res) == {(2, 4, 1, 3), (3, 1, 4, 2)}
    assert res.stats["complete"]


def test_queens5_count():
    prog = parse(queens_text(5))
    res = solve(prog, queens_query(5))
    assert len(res.solutions) == 10


def test_queens6_count():
    prog = parse(queens_text(6))
    res = solve(prog, queens_query(6))
    assert len(res.solutions) == 4
    assert res.stats["complete"]


def test_queens_solutions_satisfy_rules():
    prog = parse(queens_text(5))
    res = solve(prog, queens_query(5))
    for b in boards(res):
        assert len(set(b)) == 5
        for i in range(5):
            for j in range(i + 1, 5):
                assert abs(b[i] - b[j]) != j - i


def test_replay_solution_is_consistent():
    # writing a found solution into a fresh instance must not contradict
    prog = parse(queens_text(4))
    inst = instantiate(prog, "queens")
    for name, v in zip(["q1", "q2", "q3", "q4"], (2, 4, 1, 3)):
        inst.network.write(inst.cell_of(0, name), exact(v), f"replay:{name}")
    inst.network.run_to_quiescence(100_000)
    assert inst.network.contradiction is None


def test_replay_non_solution_contradicts():
    prog = parse(queens_text(4))
    inst = instantiate(prog, "queens")
    for name, v in zip(["q1", "q2", "q3", "q4"], (1, 2, 3, 4)):
        inst.network.write(inst.cell_of(0, name), exact(v), f"replay:{name}")
    inst.network.run_to_quiescence(100_000)
    assert inst.network.contradiction is not None


def test_crypt_unique_solution():
    prog = parse(CRYPT)
    query = Query.from_spec(prog.query)
    res = solve(prog, query)
    assert res.assignments() == [
        {"send": 9567, "more": 1085, "money": 10652}
    ]
    assert res.stats["complete"]


def test_solve_reports_partial_targets_as_bounds():
    text = """
    (def (capped x y)
      (int y 0 100)
      (lesseq y x))
    """
    prog = parse(text)
    q = Query(entry="capped", bindings=(("x", 7),), targets=("y",),
              precision=10.0)
    res = solve(prog, q)
    assert len(res.solutions) == 1
    lo, hi = res.solutions[0]["cells"]["y"]
    assert (lo, hi) == (0, 7)


def test_node_budget_marks_incomplete():
    prog = parse(queens_text(6))
    res = solve(prog, queens_query(6, node_budget=3))
    assert not res.stats["complete"]
    assert res.stats["nodes"] == 3


def test_depth_budget_marks_incomplete():
    prog = parse(FACT)
    q = Query(entry="fact", bindings=(("n", 10),), targets=("r",),
              depth_budget=3)
    res = solve(prog, q)
    assert res.solutions == []
    assert not res.stats["complete"]


def test_unsat_is_complete_and_empty():
    text = """
    (def (clash a b)
      (choose a 1 2)
      (choose b 1 2)
      (alldiff a b)
      (equal a b))
    """
    prog = parse(text)
    res = solve(prog, Query(entry="clash", targets=("a", "b")))
    assert res.solutions == []
    assert res.stats["complete"]


def test_negative_budget_rejected():
    with pytest.raises(ValueError):
        Query(entry="x", node_budget=-1)


def test_recursion_inside_search():
    # branch on k, each branch demands fact(k) lazily; an open-ended depth
    # budget would let the undecided chain run away before branching
    text = FACT + """
    (def (pick k r)
      (choose k 3 4 5)
      (call fact k r))
    """
    prog = parse(text)
    res = solve(prog, Query(entry="pick", targets=("k", "r"), depth_budget=10))
    got = {(s["cells"]["k"], s["cells"]["r"]) for s in res.solutions}
    assert got == {(3, 6), (4, 24), (5, 120)}


# -- oracles ---------------------------------------------------------------


class _HighFirst:
    """Prefers larger candidate values; order changes, answers must not."""

    def scores(self, instance, descriptors):
        return [float(info.value) for _, info, _ in descriptors]


def test_solution_set_is_oracle_independent():
    prog = parse(queens_text(5))
    a = solve(prog, queens_query(5), oracle=UniformOracle())
    b = solve(prog, queens_query(5), oracle=_HighFirst())
    assert boards(a) == boards(b)
    assert a.stats["complete"] and b.stats["complete"]


def test_oracle_steers_first_solution():
    text = """
    (def (free a)
      (choose a 1 2 3))
    """
    prog = parse(text)
    q = Query(entry="free", targets=("a",), node_budget=2)
    low = solve(prog, q, oracle=UniformOracle())
    high = solve(prog, q, oracle=_HighFirst())
    assert low.solutions[0]["cells"]["a"] == 1
    assert high.solutions[0]["cells"]["a"] == 3


# -- optimize ----------------------------------------------------------------


OPT_TOY = """
(def (toy a b c)
  (choose a 2 5)
  (choose b 1 4)
  (sum a b c))

(query (toy) (show a b c) (minimize c))
"""


def test_optimize_toy_minimum():
    prog = parse(OPT_TOY)
    res = optimize(prog, Query.from_spec(prog.query))
    assert res.objective == 3
    assert res.solution["cells"] == {"a": 2, "b": 1, "c": 3}
    assert res.proven


def test_optimize_bound_trace_decreases():
    prog = parse(OPT_TOY)
    res = optimize(prog, Query.from_spec(prog.query))
    bounds = [t["bound"] for t in res.bound_trace]
    assert bounds == sorted(bounds, reverse=True)
    assert bounds[-1] == 3


def test_optimize_without_objective_rejected():
    prog = parse(OPT_TOY)
    q = Query(entry="toy", targets=("c",))
    with pytest.raises(StructuralError):
        optimize(prog, q)


def test_optimize_fixed_program_single_node():
    text = """
    (def (fixed c)
      (const c 7))
    """
    prog = parse(text)
    res = optimize(prog, Query(entry="fixed", targets=("c",), objective="c"))
    assert res.objective == 7
    assert res.proven
    assert res.stats["nodes"] == 1


def test_optimize_node_budget_unproven():
    prog = parse(OPT_TOY)
    q = Query(entry="toy", targets=("a", "b", "c"), objective="c",
              node_budget=2)
    res = optimize(prog, q)
    assert not res.proven


# -- snapshots ---------------------------------------------------------------


def test_snapshot_restore_returns_original_state():
    prog = parse(queens_text(4))
    inst = instantiate(prog, "queens")
    inst.network.run_to_quiescence(100_000)
    store = SnapshotStore()
    sid = store.snapshot(inst)
    before = inst.network.content(inst.cell_of(0, "q1"))
    inst.network.write(inst.cell_of(0, "q1"), exact(2), "user:probe")
    back = store.restore(sid)
    assert back.network.content(back.cell_of(0, "q1")) == before
    # and the mutated instance kept its write
    assert inst.network.content(inst.cell_of(0, "q1")) == exact(2)


def test_snapshot_restore_is_repeatable():
    prog = parse(queens_text(4))
    inst = instantiate(prog, "queens")
    store = SnapshotStore()
    sid = store.snapshot(inst)
    one = store.restore(sid)
    one.network.write(one.cell_of(0, "q1"), exact(1), "user:probe")
    two = store.restore(sid)
    assert two.network.content(two.cell_of(0, "q1")) != exact(1)


def test_snapshot_of_quiescent_state_restores_quiescent():
    prog = parse(queens_text(4))
    inst = instantiate(prog, "queens")
    inst.network.run_to_quiescence(100_000)
    store = SnapshotStore()
    sid = store.snapshot(inst)
    back = store.restore(sid)
    rep = back.network.run_to_quiescence(100_000)
    assert rep.steps_used == 0


def test_interleaved_snapshots():
    prog = parse(queens_text(4))
    inst = instantiate(prog, "queens")
    store = SnapshotStore()
    s0 = store.snapshot(inst)
    inst.network.write(inst.cell_of(0, "q1"), exact(2), "user:a")
    s1 = store.snapshot(inst)
    inst.network.write(inst.cell_of(0, "q2"), exact(4), "user:b")
    r0 = store.restore(s0)
    r1 = store.restore(s1)
    assert r0.network.content(r0.cell_of(0, "q1")).kind == "finite_domain"
    assert r1.network.content(r1.cell_of(0, "q1")) == exact(2)
    assert r1.network.content(r1.cell_of(0, "q2")).kind == "finite_domain"


def test_snapshot_drop_forgets():
    prog = parse(queens_text(4))
    inst = instantiate(prog, "queens")
    store = SnapshotStore()
    sid = store.snapshot(inst)
    assert len(store) == 1
    store.drop(sid)
    assert len(store) == 0
    with pytest.raises(StructuralError):
        store.restore(sid)


# -- summarization -----------------------------------------------------------


def run_fact(n, depth=10_000):
    prog = parse(FACT)
    inst = instantiate(prog, "fact", {"n": n})
    r = inst.cell_of(0, "r")
    demand_loop(inst, (r,), depth, 1_000_000)
    return inst, r


def test_collect_garbage_counts_decided_frames():
    inst, r = run_fact(10)
    assert inst.network.content(r) == exact(3628800)
    report = collect_garbage(inst, (r,))
    assert len(report.summarized) == 10
    assert report.dropped_cells > 0


def test_collect_garbage_preserves_answers():
    inst, r = run_fact(10)
    collect_garbage(inst, (r,))
    assert inst.network.content(r) == exact(3628800)
    assert inst.network.content(inst.cell_of(0, "n")) == exact(10)
    assert inst.network.contradiction is None


def test_collect_garbage_skips_undecided_frames():
    inst, r = run_fact(10, depth=3)  # bottom of the chain still unexpanded
    report = collect_garbage(inst, (r,))
    assert report.summarized == ()


def test_collect_garbage_keeps_root():
    inst, r = run_fact(6)
    collect_garbage(inst, (r,))
    assert inst.root.state == EXPANDED


def test_collect_garbage_marks_frames_and_prunes_cellmaps():
    inst, r = run_fact(6)
    report = collect_garbage(inst, (r,))
    for fid in report.summarized:
        f = inst.frame(fid)
        assert f.state == SUMMARIZED
        assert set(f.cellmap) == {"n", "r"}


def test_collect_garbage_leaves_refuted_leaves_alone():
    inst, r = run_fact(6)
    collect_garbage(inst, (r,))
    leaves = [f for f in inst.frames if f.state == UNEXPANDED]
    assert leaves  # the gate-refuted call under fact(0)
    assert all(inst.gate_state(f) is False for f in leaves)


def test_collect_garbage_respects_interior_targets():
    inst, r = run_fact(6)
    # ask to keep an interior cell of the deepest expanded frame
    deep = max((f for f in inst.frames if f.state == EXPANDED),
               key=lambda f: f.depth)
    keep = deep.cellmap["nm1"]
    report = collect_garbage(inst, (r, keep))
    assert deep.id not in report.summarized
    assert len(report.summarized) == 5


def test_collect_garbage_then_clone_still_works():
    inst, r = run_fact(6)
    collect_garbage(inst, (r,))
    fresh = inst.clone()
    assert fresh.network.content(r) == exact(720)
    rep = fresh.network.run_to_quiescence(10_000)
    assert fresh.network.contradiction is None
    assert rep.steps_used == 0
