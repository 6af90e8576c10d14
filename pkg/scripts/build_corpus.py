#!/usr/bin/env python3
"""Regenerate corpus/ and the oracle-derived expectations beside each program.

Every expected value is computed by brute force (tests/oracles.py), never by
the engine, so the corpus stays an independent check. Output is deterministic:
rerunning the script reproduces the same bytes.
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

import oracles

from fifth.planning import (
    HorizonProblem,
    JobShopInstance,
    emit_horizon_program,
    emit_jobshop_program,
    generate_random_csp,
)

CORPUS = ROOT / "corpus"


def queens_text(n):
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
            lines.append(f"  (cell u{i}x{j})")
            lines.append(f"  (sum q{i} d{d} u{i}x{j})")
            lines.append(f"  (alldiff u{i}x{j} q{j})")
            lines.append(f"  (cell v{i}x{j})")
            lines.append(f"  (sum v{i}x{j} d{d} q{i})")
            lines.append(f"  (alldiff v{i}x{j} q{j})")
    lines.append(")")
    lines.append(f"(query (queens) (show {' '.join(names)}))")
    return "\n".join(lines)


CRYPT = """\
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

FACT10 = """\
(def (fact n r)
  (cell nm1)
  (cell rest)
  (const one 1)
  (sum nm1 one n)
  (if n
    ((call fact nm1 rest)
     (product n rest r))
    ((const r 1))))

(query (fact (n 10)) (show r) (depth 40))
"""

JS_3X3_A = JobShopInstance(
    jobs=(
        ((0, 3), (1, 2), (2, 2)),
        ((1, 2), (0, 1), (2, 4)),
        ((2, 3), (1, 3), (0, 1)),
    ),
    machines=3,
)

LINE_H4 = HorizonProblem(horizon=4, start=0, goal=4)

CSP_SHAPE = {"n_vars": 6, "domain": 4, "density": 0.4}
TRAIN_SEEDS = [1000 + i for i in range(30)]
EVAL_SEEDS = [2000 + i for i in range(20)]


def emit(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text if text.endswith("\n") else text + "\n")


def emit_json(path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def build_queens():
    for n in (4, 5, 6, 8):
        sols = oracles.queens_solutions(n)
        emit(CORPUS / "queens" / f"q{n}.5th", queens_text(n))
        emit_json(CORPUS / "queens" / f"q{n}.expected.json", {
            "count": len(sols),
            "boards": [list(s) for s in sols],
        })
        print(f"queens/q{n}: {len(sols)} solutions")


def build_crypt():
    sols = oracles.send_more_money_solutions()
    assert len(sols) == 1, sols
    emit(CORPUS / "crypt" / "sendmore.5th", CRYPT)
    emit_json(CORPUS / "crypt" / "sendmore.expected.json", {
        "solutions": [list(s) for s in sols],
    })
    print(f"crypt/sendmore: send={sols[0][0]}")


def build_fact():
    emit(CORPUS / "fact" / "fact10.5th", FACT10)
    emit_json(CORPUS / "fact" / "fact10.expected.json", {
        "r": 3628800,
        "expansions": 10,
    })
    print("fact/fact10: r=3628800")


def build_horizon():
    best = oracles.lineworld_best_total(
        LINE_H4.start, LINE_H4.goal, LINE_H4.horizon,
        LINE_H4.move_cost, LINE_H4.goal_reward, LINE_H4.actions)
    emit(CORPUS / "horizon" / "line-h4.5th", emit_horizon_program(LINE_H4))
    emit_json(CORPUS / "horizon" / "line-h4.expected.json", {
        "best_total": best,
        "objective": -best,
    })
    print(f"horizon/line-h4: best total {best}")


def build_jobshop():
    opt = oracles.jobshop_optimum(
        [list(j) for j in JS_3X3_A.jobs], JS_3X3_A.machines)
    emit(CORPUS / "jobshop" / "js-3x3-a.5th", emit_jobshop_program(JS_3X3_A))
    emit_json(CORPUS / "jobshop" / "js-3x3-a.expected.json", {
        "makespan": opt,
        "jobs": [list(map(list, j)) for j in JS_3X3_A.jobs],
        "machines": JS_3X3_A.machines,
    })
    print(f"jobshop/js-3x3-a: makespan {opt}")


def build_csps():
    for split, seeds in (("train", TRAIN_SEEDS), ("eval", EVAL_SEEDS)):
        n_sat = 0
        for i, seed in enumerate(seeds):
            text, meta = generate_random_csp(
                CSP_SHAPE["n_vars"], CSP_SHAPE["domain"],
                CSP_SHAPE["density"], seed)
            sols = oracles.csp_solutions(meta)
            n_sat += bool(sols)
            stem = f"{split}-{i:02d}"
            emit(CORPUS / "csp" / split / f"{stem}.5th", text)
            emit_json(CORPUS / "csp" / split / f"{stem}.expected.json", {
                "seed": seed,
                "meta": meta,
                "count": len(sols),
            })
        print(f"csp/{split}: {len(seeds)} instances, {n_sat} satisfiable")


def main():
    build_queens()
    build_crypt()
    build_fact()
    build_horizon()
    build_jobshop()
    build_csps()


if __name__ == "__main__":
    main()
