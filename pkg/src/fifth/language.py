"""Surface language: s-expression programs over cells and constraints.

A program is a set of definitions. Instantiating one builds a propagator
network; recursive calls become child frames that stay unexpanded until
demanded, so recursion is unbounded but only paid for where information
actually flows.
"""

from dataclasses import dataclass, field
from typing import Optional

from .errors import ParseError, StructuralError
from .lattice import (
    PartialInfo,
    exact,
    finite_domain,
    info_bits,
    int_interval,
    truth_value,
    width_of,
)
from .network import Network

REF_WIDTH = 1024  # reference width for "how pinned down is this cell" scoring


# -- AST -------------------------------------------------------------------


_POS = dict(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CellDecl:
    name: str
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class IntDecl:
    name: str
    lo: int
    hi: int
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class ConstDecl:
    name: str
    value: object
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class PropStmt:
    kind: str  # sum | product | equal | less_equal
    args: tuple
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class AlldiffStmt:
    names: tuple
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class ChooseStmt:
    name: str
    values: tuple
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class IfStmt:
    cond: str
    then_body: tuple
    else_body: tuple
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class CallStmt:
    target: str
    args: tuple
    pos: tuple = field(**_POS)


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple
    body: tuple

    @property
    def boundary(self):
        return self.params


@dataclass(frozen=True)
class QuerySpec:
    entry: str
    bindings: tuple  # ((name, number), ...)
    show: tuple
    depth: int = 10_000
    steps: int = 1_000_000
    precision: float = 0.0
    minimize: Optional[str] = None


@dataclass(frozen=True)
class Program:
    definitions: dict
    query: Optional[QuerySpec] = None

    @property
    def main(self):
        return self.query.entry if self.query else None


# -- tokenizer / reader ------------------------------------------------------


def _tokenize(text):
    toks = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            col += 1
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            toks.append((ch, line, col))
            col += 1
            i += 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();":
                j += 1
            toks.append((text[i:j], line, col))
            col += j - i
            i = j
    return toks


class _Reader:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def at_end(self):
        return self.pos >= len(self.toks)

    def read(self):
        tok, line, col = self.toks[self.pos]
        self.pos += 1
        if tok == "(":
            items = []
            while True:
                if self.at_end():
                    raise ParseError("unterminated list", line, col)
                if self.toks[self.pos][0] == ")":
                    self.pos += 1
                    return (items, line, col)
                items.append(self.read())
        if tok == ")":
            raise ParseError("unexpected )", line, col)
        return (tok, line, col)


def _is_list(node):
    return isinstance(node[0], list)


def _atom(node, what="name"):
    if _is_list(node):
        raise ParseError(f"expected {what}, got a list", node[1], node[2])
    return node[0]


def _int_atom(node):
    tok = _atom(node, "integer")
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected integer, got {tok!r}", node[1], node[2])


def _number_atom(node):
    tok = _atom(node, "number")
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected number, got {tok!r}", node[1], node[2])


# -- parsing ------------------------------------------------------------------


def parse(text: str) -> Program:
    """Parse program text, checking names, arities and the query form."""
    reader = _Reader(_tokenize(text))
    defs = {}
    query = None
    while not reader.at_end():
        node = reader.read()
        if not _is_list(node) or not node[0]:
            raise ParseError("expected (def ...) or (query ...)", node[1], node[2])
        head = _atom(node[0][0], "form name")
        if head == "def":
            if query is not None:
                raise ParseError("definitions must precede the query",
                                 node[1], node[2])
            d = _parse_def(node)
            if d.name in defs:
                raise ParseError(f"duplicate definition {d.name!r}",
                                 node[1], node[2])
            defs[d.name] = d
        elif head == "query":
            if query is not None:
                raise ParseError("only one query form allowed", node[1], node[2])
            query = _parse_query(node)
        else:
            raise ParseError(f"unknown form {head!r}", node[0][0][1], node[0][0][2])
    program = Program(defs, query)
    _check_program(program)
    return program


def _parse_def(node):
    items, line, col = node
    if len(items) < 2 or not _is_list(items[1]) or not items[1][0]:
        raise ParseError("def needs a (name params...) header", line, col)
    header = items[1][0]
    name = _atom(header[0])
    params = tuple(_atom(p) for p in header[1:])
    if len(set(params)) != len(params):
        raise ParseError(f"duplicate parameter in {name!r}",
                         items[1][1], items[1][2])
    body = tuple(_parse_stmt(s) for s in items[2:])
    return Definition(name, params, body)


def _parse_stmt(node):
    if not _is_list(node) or not node[0]:
        raise ParseError("expected a statement", node[1], node[2])
    items, line, col = node
    head = _atom(items[0], "statement name")
    args = items[1:]

    def need(n):
        if len(args) != n:
            raise ParseError(f"{head} takes {n} arguments, got {len(args)}",
                             line, col)

    pos = (line, col)
    if head == "cell":
        need(1)
        return CellDecl(_atom(args[0]), pos=pos)
    if head == "int":
        need(3)
        return IntDecl(_atom(args[0]), _int_atom(args[1]), _int_atom(args[2]),
                       pos=pos)
    if head == "const":
        need(2)
        return ConstDecl(_atom(args[0]), _number_atom(args[1]), pos=pos)
    if head in ("sum", "product"):
        need(3)
        return PropStmt(head, tuple(_atom(a) for a in args), pos=pos)
    if head == "equal":
        need(2)
        return PropStmt("equal", tuple(_atom(a) for a in args), pos=pos)
    if head == "lesseq":
        need(2)
        return PropStmt("less_equal", tuple(_atom(a) for a in args), pos=pos)
    if head == "alldiff":
        if len(args) < 2:
            raise ParseError("alldiff needs at least two cells", line, col)
        return AlldiffStmt(tuple(_atom(a) for a in args), pos=pos)
    if head == "choose":
        if len(args) < 2:
            raise ParseError("choose needs a cell and at least one value",
                             line, col)
        return ChooseStmt(_atom(args[0]), tuple(_int_atom(a) for a in args[1:]),
                          pos=pos)
    if head == "if":
        need(3)
        cond = _atom(args[0])
        for branch in (args[1], args[2]):
            if not _is_list(branch):
                raise ParseError("if branches must be statement lists",
                                 branch[1], branch[2])
        then_body = tuple(_parse_stmt(s) for s in args[1][0])
        else_body = tuple(_parse_stmt(s) for s in args[2][0])
        return IfStmt(cond, then_body, else_body, pos=pos)
    if head == "call":
        if not args:
            raise ParseError("call needs a target", line, col)
        return CallStmt(_atom(args[0]), tuple(_atom(a) for a in args[1:]),
                        pos=pos)
    raise ParseError(f"unknown statement {head!r}", line, col)


def _parse_query(node):
    items, line, col = node
    if len(items) < 3 or not _is_list(items[1]) or not items[1][0]:
        raise ParseError("query needs (entry bindings...) and (show ...)",
                         line, col)
    header = items[1][0]
    entry = _atom(header[0])
    bindings = []
    for b in header[1:]:
        if not _is_list(b) or len(b[0]) != 2:
            raise ParseError("binding must be (name number)", b[1], b[2])
        bindings.append((_atom(b[0][0]), _number_atom(b[0][1])))
    show_node = items[2]
    if (
        not _is_list(show_node)
        or not show_node[0]
        or _atom(show_node[0][0]) != "show"
    ):
        raise ParseError("query needs a (show ...) clause",
                         show_node[1], show_node[2])
    show = tuple(_atom(s) for s in show_node[0][1:])
    opts = {}
    for opt in items[3:]:
        if not _is_list(opt) or len(opt[0]) != 2:
            raise ParseError("option must be (name value)", opt[1], opt[2])
        key = _atom(opt[0][0])
        if key in ("depth", "steps"):
            opts[key] = _int_atom(opt[0][1])
        elif key == "precision":
            opts[key] = float(_number_atom(opt[0][1]))
        elif key == "minimize":
            opts[key] = _atom(opt[0][1])
        else:
            raise ParseError(f"unknown query option {key!r}", opt[1], opt[2])
    return QuerySpec(entry, tuple(bindings), show, **opts)


def _check_program(program):
    for d in program.definitions.values():
        _check_body(program, d, d.body, set(d.params))
    q = program.query
    if q is None:
        return
    if q.entry not in program.definitions:
        raise ParseError(f"query names undefined {q.entry!r}")
    params = set(program.definitions[q.entry].params)
    for name, _ in q.bindings:
        if name not in params:
            raise ParseError(f"binding {name!r} is not a parameter of {q.entry!r}")
    for name in q.show:
        if name not in params:
            raise ParseError(f"show target {name!r} is not a parameter of {q.entry!r}")
    if q.minimize is not None and q.minimize not in params:
        raise ParseError(f"minimize target {q.minimize!r} is not a parameter of {q.entry!r}")


def _check_body(program, d, body, known):
    # declare-before-use, single pass; `if` branches see the same scope and
    # may declare independently (their declarations stay visible afterwards,
    # guards keep the writes apart)
    for stmt in body:
        line, col = stmt.pos or (None, None)
        if isinstance(stmt, CellDecl):
            if stmt.name in known:
                raise ParseError(f"duplicate cell {stmt.name!r} in {d.name!r}",
                                 line, col)
            known.add(stmt.name)
        elif isinstance(stmt, (IntDecl, ConstDecl)):
            known.add(stmt.name)
        elif isinstance(stmt, PropStmt):
            for a in stmt.args:
                _require(known, a, d, stmt)
        elif isinstance(stmt, AlldiffStmt):
            for a in stmt.names:
                _require(known, a, d, stmt)
        elif isinstance(stmt, ChooseStmt):
            _require(known, stmt.name, d, stmt)
        elif isinstance(stmt, IfStmt):
            _require(known, stmt.cond, d, stmt)
            _check_body(program, d, stmt.then_body, known)
            _check_body(program, d, stmt.else_body, known)
        elif isinstance(stmt, CallStmt):
            target = program.definitions.get(stmt.target)
            if target is None:
                raise ParseError(
                    f"call to undefined {stmt.target!r} in {d.name!r}",
                    line, col,
                )
            if len(stmt.args) != len(target.params):
                raise ParseError(
                    f"call to {stmt.target!r} with {len(stmt.args)} args,"
                    f" expected {len(target.params)}",
                    line, col,
                )
            for a in stmt.args:
                _require(known, a, d, stmt)


def _require(known, name, d, stmt):
    if name not in known:
        line, col = stmt.pos or (None, None)
        raise ParseError(f"unbound name {name!r} in {d.name!r}", line, col)


# -- frames and instances ------------------------------------------------------

UNEXPANDED = "unexpanded"
EXPANDED = "expanded"
SUMMARIZED = "summarized"


class Frame:
    """One activation of a definition; a unit of laziness and summarization."""

    __slots__ = ("id", "defname", "parent", "depth", "callsite_index",
                 "cellmap", "state", "guards")

    def __init__(self, fid, defname, parent, depth, callsite_index,
                 cellmap, state, guards):
        self.id = fid
        self.defname = defname
        self.parent = parent
        self.depth = depth
        self.callsite_index = callsite_index
        self.cellmap = cellmap
        self.state = state
        self.guards = guards

    def copy(self):
        return Frame(self.id, self.defname, self.parent, self.depth,
                     self.callsite_index, dict(self.cellmap), self.state,
                     self.guards)

    def boundary_cells(self, program):
        params = program.definitions[self.defname].params
        return tuple(self.cellmap[p] for p in params)

    def __repr__(self):
        return f"Frame({self.id}, {self.defname}, depth={self.depth}, {self.state})"


class ChoicePoint:
    """A cell the search module may branch on, with the gate context that
    decides whether the choice is actually part of the problem."""

    __slots__ = ("cell", "values", "frame", "guards")

    def __init__(self, cell, values, frame, guards):
        self.cell = cell
        self.values = values
        self.frame = frame
        self.guards = guards


@dataclass
class DemandReport:
    steps_used: int
    expansions: int
    quiescent: bool
    contradiction: Optional[int]
    targets_met: bool
    depth_exhausted: bool = False
    steps_exhausted: bool = False


class Instance:
    """A program wired into a live network plus its frame tree."""

    def __init__(self, program, network, frames, choices, expansions=0,
                 on_expand=None, guard_cache=None):
        self.program = program
        self.network = network
        self.frames = frames
        self.choices = choices
        self.expansions = expansions
        self.on_expand = on_expand
        # truths of guard cells that storage management has since dropped
        self.guard_cache = {} if guard_cache is None else guard_cache

    @property
    def root(self):
        return self.frames[0]

    def frame(self, fid) -> Frame:
        return self.frames[fid]

    def cell_of(self, fid, name):
        try:
            return self.frames[fid].cellmap[name]
        except KeyError:
            raise StructuralError(f"frame {fid} has no cell {name!r}")

    def gate_state(self, frame):
        """True = all guards hold, False = some guard refuted, None = undecided."""
        return self.guard_state(frame.guards)

    def guard_state(self, guards):
        """Same three-valued reading for any guard chain, e.g. a choice
        point's, which may be deeper than its frame's (choices inside if
        branches carry the branch condition too). A guard cell dropped by
        summarization answers from the truth recorded when it was dropped.
        """
        decided_true = True
        for cid, polarity in guards:
            try:
                tv = truth_value(self.network.content(cid))
            except StructuralError:
                if cid not in self.guard_cache:
                    raise
                tv = self.guard_cache[cid]
            if tv is None:
                decided_true = False
            elif tv != polarity:
                return False
        return True if decided_true else None

    def clone(self):
        return Instance(
            self.program,
            self.network.clone(),
            [f.copy() for f in self.frames],
            list(self.choices),
            self.expansions,
            self.on_expand,
            dict(self.guard_cache),
        )


def instantiate(program: Program, name: str, bindings=None) -> Instance:
    """Build the root frame of `name`, attach its constraints, apply writes."""
    d = program.definitions.get(name)
    if d is None:
        raise StructuralError(f"unknown definition {name!r}")
    net = Network()
    cellmap = {}
    root = Frame(0, name, None, 0, 0, cellmap, EXPANDED, ())
    inst = Instance(program, net, [root], [])
    for p in d.params:
        cellmap[p] = net.add_cell((0, p))
    _elaborate_body(inst, root, d.body, ())
    for pname, value in (bindings or {}).items():
        if pname not in cellmap:
            raise StructuralError(
                f"{name!r} has no parameter {pname!r} to bind"
            )
        info = value if isinstance(value, PartialInfo) else exact(value)
        net.write(cellmap[pname], info, f"bind:{pname}")
    return inst


def _elaborate_body(inst, frame, body, local_guards):
    net = inst.network
    d_guards = frame.guards + local_guards
    for stmt in body:
        if isinstance(stmt, CellDecl):
            frame.cellmap[stmt.name] = net.add_cell((frame.id, stmt.name))
        elif isinstance(stmt, IntDecl):
            cid = frame.cellmap.get(stmt.name)
            if cid is None:
                cid = net.add_cell((frame.id, stmt.name))
                frame.cellmap[stmt.name] = cid
            _declare_write(net, cid, int_interval(stmt.lo, stmt.hi),
                           frame, stmt.name, d_guards)
        elif isinstance(stmt, ConstDecl):
            cid = frame.cellmap.get(stmt.name)
            if cid is None:
                cid = net.add_cell((frame.id, stmt.name))
                frame.cellmap[stmt.name] = cid
            _declare_write(net, cid, exact(stmt.value), frame, stmt.name, d_guards)
        elif isinstance(stmt, PropStmt):
            cells = tuple(frame.cellmap[a] for a in stmt.args)
            net.attach(stmt.kind, cells, d_guards)
        elif isinstance(stmt, AlldiffStmt):
            cells = tuple(frame.cellmap[a] for a in stmt.names)
            net.attach("alldifferent", cells, d_guards)
        elif isinstance(stmt, ChooseStmt):
            cid = frame.cellmap[stmt.name]
            _declare_write(net, cid, finite_domain(stmt.values),
                           frame, stmt.name, d_guards)
            inst.choices.append(
                ChoicePoint(cid, stmt.values, frame.id, d_guards)
            )
        elif isinstance(stmt, IfStmt):
            cond = frame.cellmap[stmt.cond]
            _elaborate_body(inst, frame, stmt.then_body,
                            local_guards + ((cond, True),))
            _elaborate_body(inst, frame, stmt.else_body,
                            local_guards + ((cond, False),))
        elif isinstance(stmt, CallStmt):
            _elaborate_call(inst, frame, stmt, d_guards)
        else:
            raise AssertionError(stmt)


def _declare_write(net, cid, info, frame, name, guards):
    # ungated declarations are plain writes; gated ones must wait for the
    # gate, so they ride a constant propagator
    if guards:
        net.attach("constant", (cid,), guards, payload=info)
    else:
        net.write(cid, info, f"decl:{frame.id}:{name}")


def _elaborate_call(inst, frame, stmt, guards):
    net = inst.network
    target = inst.program.definitions[stmt.target]
    child_id = len(inst.frames)
    boundary = {}
    for p in target.params:
        boundary[p] = net.add_cell((child_id, p))
    child = Frame(
        child_id,
        stmt.target,
        frame.id,
        frame.depth + 1,
        sum(1 for f in inst.frames if f.parent == frame.id),
        boundary,
        UNEXPANDED,
        guards,
    )
    inst.frames.append(child)
    # fresh boundary cells keep the callee identifiable; gated equality links
    # them to the caller's argument cells
    for arg, p in zip(stmt.args, target.params):
        net.attach("equal", (frame.cellmap[arg], boundary[p]), guards)


def expand(inst: Instance, frame_id: int) -> Frame:
    """Attach the body of an unexpanded frame; refuted gates make it a no-op."""
    frame = inst.frames[frame_id]
    if frame.state == SUMMARIZED:
        raise StructuralError(f"frame {frame_id} is summarized; not expandable")
    if frame.state == EXPANDED:
        raise StructuralError(f"frame {frame_id} is already expanded")
    if inst.gate_state(frame) is False:
        return frame
    d = inst.program.definitions[frame.defname]
    _elaborate_body(inst, frame, d.body, ())
    frame.state = EXPANDED
    inst.expansions += 1
    if inst.on_expand is not None:
        inst.on_expand(inst, frame)
    return frame


def _frontier(inst):
    """Next frame worth expanding: gate-true frames first (lowest id), then
    the undecided-gate frame with the most boundary information."""
    best_undecided = None
    best_bits = -1.0
    for f in inst.frames:
        if f.state != UNEXPANDED:
            continue
        gs = inst.gate_state(f)
        if gs is False:
            continue
        if gs is True:
            return f
        bits = sum(
            info_bits(inst.network.content(c), REF_WIDTH)
            for c in f.boundary_cells(inst.program)
        )
        if bits > best_bits:
            best_bits = bits
            best_undecided = f
    return best_undecided


def targets_met(inst, targets, precision=0.0) -> bool:
    for cid in targets:
        content = inst.network.content(cid)
        if content.kind == "exact":
            continue
        w = width_of(content)
        if w is None or w > precision:
            return False
    return True


def demand_loop(inst: Instance, targets, depth_budget: int, step_budget: int,
                precision: float = 0.0) -> DemandReport:
    """Alternate quiescence with frontier expansion until the targets are
    pinned down, the budgets run out, or the instance contradicts."""
    if depth_budget < 0 or step_budget < 0:
        raise ValueError("budgets must be >= 0")
    net = inst.network
    steps = 0
    expansions = 0
    rep = net.run_to_quiescence(step_budget)
    steps += rep.steps_used
    depth_exhausted = False
    while True:
        if net.contradiction is not None:
            break
        if targets_met(inst, targets, precision):
            break
        if steps >= step_budget and not net.quiescent:
            break
        if expansions >= depth_budget:
            depth_exhausted = not targets_met(inst, targets, precision)
            break
        f = _frontier(inst)
        if f is None:
            break
        expand(inst, f.id)
        expansions += 1
        rep = net.run_to_quiescence(step_budget - steps)
        steps += rep.steps_used
    return DemandReport(
        steps_used=steps,
        expansions=expansions,
        quiescent=net.quiescent,
        contradiction=net.contradiction,
        targets_met=targets_met(inst, targets, precision),
        depth_exhausted=depth_exhausted,
        steps_exhausted=steps >= step_budget and not net.quiescent,
    )
