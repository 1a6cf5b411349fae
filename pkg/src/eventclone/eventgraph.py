"""Event dependency graphs: build, rank, schedule, serialize.

A fragment's AST is lowered to a DAG with one node per (entity, operator,
entity) event. Within a statement the nodes form the post-order tree of the
statement's expression, the root being the statement-final node. Across
statements, a variable read whose latest prior write happened in an earlier
statement is replaced by a reference to that statement's final node, which is
what makes the graph capture data dependence. Node ids are assigned in
construction order, so every dependency edge points forward.

Graphs are immutable after construction and safe to share across threads;
builders and rankers return fresh graphs.
"""

import base64
import logging
from dataclasses import dataclass, field, replace

logger = logging.getLogger(__name__)


class GraphError(Exception):
    pass


class CycleError(Exception):
    pass


class FormatError(Exception):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


@dataclass(frozen=True)
class Operator:
    id: int
    name: str


_OPERATOR_NAMES = (
    "assign", "return", "param", "parammix", "invoke", "sizeof",
    "member", "arrow", "index", "addr-of", "deref",
    "neg", "not", "bitnot",
    "add", "sub", "mul", "div", "mod",
    "lt", "gt", "le", "ge", "eq", "ne",
    "and", "or",
    "bitand", "bitor", "bitxor", "shl", "shr",
    "cond-guard", "loop-body", "branch-then", "branch-else",
    "decl-init", "comma",
)

OPERATORS = tuple(Operator(i, name) for i, name in enumerate(_OPERATOR_NAMES))
OPERATOR_BY_NAME = {op.name: op for op in OPERATORS}
OPERATOR_COUNT = len(OPERATORS)
assert OPERATOR_COUNT == 38


def op(name):
    return OPERATOR_BY_NAME[name]


ENTITY_KINDS = (
    "variable", "function", "constant-int", "constant-float",
    "constant-str", "constant-char", "node-ref",
)


@dataclass(frozen=True)
class Entity:
    kind: str
    value: str = ""
    ref: int | None = None
    rank: int | None = None

    def __post_init__(self):
        if self.kind not in ENTITY_KINDS:
            raise GraphError(f"unknown entity kind {self.kind!r}")
        if (self.kind == "node-ref") != (self.ref is not None):
            raise GraphError("ref must be set exactly for node-ref entities")

    @property
    def is_ref(self):
        return self.kind == "node-ref"

    def key(self):
        return (self.kind, self.value)


def variable(name):
    return Entity("variable", name)


def function(name):
    return Entity("function", name)


@dataclass(frozen=True)
class EventNode:
    id: int
    entity1: Entity
    operator: Operator
    entity2: Entity
    statement_index: int
    is_statement_final: bool


@dataclass(frozen=True)
class EventDependencyGraph:
    nodes: tuple
    edges: frozenset
    statement_count: int
    rank_table: dict = field(default_factory=dict)

    def __post_init__(self):
        _validate(self)

    @property
    def node_count(self):
        return len(self.nodes)

    def final_node_ids(self):
        """Node id of each statement's final event, in statement order."""
        finals = [None] * self.statement_count
        for node in self.nodes:
            if node.is_statement_final:
                finals[node.statement_index] = node.id
        return finals


def _derived_edges(nodes):
    edges = set()
    for node in nodes:
        for ent in (node.entity1, node.entity2):
            if ent.is_ref:
                edges.add((ent.ref, node.id))
    return edges


def _validate(graph):
    nodes = graph.nodes
    for pos, node in enumerate(nodes):
        if node.id != pos:
            raise GraphError(f"node ids must be consecutive, got {node.id} at {pos}")
        for ent in (node.entity1, node.entity2):
            if ent.is_ref and not 0 <= ent.ref < node.id:
                raise GraphError(
                    f"node {node.id}: ref {ent.ref} does not point backward")
        if not 0 <= node.statement_index < graph.statement_count:
            raise GraphError(f"node {node.id}: statement index out of range")
    if _derived_edges(nodes) != set(graph.edges):
        raise GraphError("edge set does not match node references")
    for a, b in graph.edges:
        if not a < b:
            raise GraphError(f"edge ({a}, {b}) does not point forward")
    stmt_nodes = {}
    finals = {}
    for node in nodes:
        stmt_nodes.setdefault(node.statement_index, []).append(node.id)
        if node.is_statement_final:
            if node.statement_index in finals:
                raise GraphError(
                    f"statement {node.statement_index} has two final nodes")
            finals[node.statement_index] = node.id
    if graph.statement_count != len(stmt_nodes):
        raise GraphError("statement count does not match statement indices")
    for s in range(graph.statement_count):
        if s not in stmt_nodes:
            raise GraphError(f"statement index {s} missing")
        if s not in finals:
            raise GraphError(f"statement {s} has no final node")
    for s, ids in stmt_nodes.items():
        if not _weakly_connected(ids, graph.edges):
            raise GraphError(f"statement {s} nodes are not connected")


def _weakly_connected(ids, edges):
    if len(ids) <= 1:
        return True
    members = set(ids)
    adj = {i: [] for i in ids}
    for a, b in edges:
        if a in members and b in members:
            adj[a].append(b)
            adj[b].append(a)
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        cur = stack.pop()
        for nxt in adj[cur]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(members)


# ---------------------------------------------------------------------------
# AST lowering


_BINOP_NAMES = {
    "+": "add", "-": "sub", "*": "mul", "/": "div", "%": "mod",
    "<": "lt", ">": "gt", "<=": "le", ">=": "ge", "==": "eq", "!=": "ne",
    "&&": "and", "||": "or",
    "&": "bitand", "|": "bitor", "^": "bitxor", "<<": "shl", ">>": "shr",
    ",": "comma",
}

_UNARY_NAMES = {"-": "neg", "!": "not", "~": "bitnot", "*": "deref",
                "&": "addr-of"}

_LITERAL_KINDS = {"int": "constant-int", "float": "constant-float",
                  "str": "constant-str", "char": "constant-char"}


class _Builder:
    def __init__(self):
        self.raw_nodes = []          # (entity1, op, entity2)
        self.node_stmt = []          # filled at statement commit
        self.node_final = []
        self.stmt_count = 0
        self.last_write = {}         # var name -> final node id of the write
        self.last_final = None
        self.fn_name = None

    # -- node and statement plumbing -----------------------------------

    def emit(self, ctx, e1, op_name, e2):
        nid = len(self.raw_nodes)
        self.raw_nodes.append((e1, OPERATOR_BY_NAME[op_name], e2))
        self.node_stmt.append(None)
        self.node_final.append(False)
        ctx.append(nid)
        return nid

    def ref(self, nid):
        return Entity("node-ref", ref=nid)

    def commit(self, ctx, writes):
        """Close a statement: its last emitted node becomes the final event
        and its writes become visible to later statements."""
        if not ctx:
            return None
        stmt = self.stmt_count
        self.stmt_count += 1
        for nid in ctx:
            self.node_stmt[nid] = stmt
        final = ctx[-1]
        self.node_final[final] = True
        self.last_final = final
        for name in writes:
            self.last_write[name] = final
        return final

    def drop(self, what, node):
        logger.warning("statement with no events dropped (%s at line %d)",
                       what, node.line)

    # -- expressions -----------------------------------------------------

    def read_var(self, name):
        if name in self.last_write:
            return self.ref(self.last_write[name])
        return Entity("variable", name)

    def lower_expr(self, node, ctx, writes):
        kind = node.kind
        if kind == "identifier":
            return self.read_var(node.value)
        if kind == "literal":
            return Entity(_LITERAL_KINDS[node.detail], node.value)
        if kind == "binary-op":
            lhs = self.lower_expr(node.children[0], ctx, writes)
            rhs = self.lower_expr(node.children[1], ctx, writes)
            return self.ref(self.emit(ctx, lhs, _BINOP_NAMES[node.value], rhs))
        if kind == "unary-op":
            side = self.lower_expr(node.children[0], ctx, writes)
            return self.ref(self.emit(ctx, side, _UNARY_NAMES[node.value], side))
        if kind == "cast":
            # Casts carry no dependency structure; the operand passes through.
            return self.lower_expr(node.children[0], ctx, writes)
        if kind == "sizeof":
            if node.children:
                side = self.lower_expr(node.children[0], ctx, writes)
            else:
                side = Entity("variable", node.value)
            return self.ref(self.emit(ctx, side, "sizeof", side))
        if kind == "member-access":
            base = self.lower_expr(node.children[0], ctx, writes)
            fieldname = Entity("variable", node.value)
            opname = "member" if node.detail == "." else "arrow"
            return self.ref(self.emit(ctx, base, opname, fieldname))
        if kind == "index":
            base = self.lower_expr(node.children[0], ctx, writes)
            idx = self.lower_expr(node.children[1], ctx, writes)
            return self.ref(self.emit(ctx, base, "index", idx))
        if kind == "call":
            return self.lower_call(node, ctx, writes)
        if kind == "assignment":
            return self.lower_assignment(node, ctx, writes)
        raise GraphError(f"cannot lower {kind} as expression")

    def lower_call(self, node, ctx, writes):
        callee = node.children[0]
        if callee.kind == "identifier":
            fentity = Entity("function", callee.value)
            receiver = fentity
        else:  # member-access: obj.f(...) keeps the receiver on the call event
            fentity = Entity("function", callee.value)
            receiver = self.lower_expr(callee.children[0], ctx, writes)
        args = [self.lower_expr(a, ctx, writes) for a in node.children[1:]]
        if args:
            acc = args[-1]
            for side in reversed(args[:-1]):
                acc = self.ref(self.emit(ctx, side, "parammix", acc))
            inner = self.ref(self.emit(ctx, acc, "param", fentity))
        else:
            inner = fentity
        return self.ref(self.emit(ctx, inner, "invoke", receiver))

    def lower_assignment(self, node, ctx, writes):
        target, rhs = node.children
        if target.kind == "identifier":
            rhs_side = self.lower_expr(rhs, ctx, writes)
            nid = self.emit(ctx, Entity("variable", target.value), "assign",
                            rhs_side)
            writes.add(target.value)
            return self.ref(nid)
        if target.kind == "index":
            base = self.lower_expr(target.children[0], ctx, writes)
            idx = self.lower_expr(target.children[1], ctx, writes)
            place = self.emit(ctx, base, "index", idx)
        elif target.kind == "member-access":
            base = self.lower_expr(target.children[0], ctx, writes)
            fieldname = Entity("variable", target.value)
            opname = "member" if target.detail == "." else "arrow"
            place = self.emit(ctx, base, opname, fieldname)
        elif target.kind == "unary-op" and target.value == "*":
            side = self.lower_expr(target.children[0], ctx, writes)
            place = self.emit(ctx, side, "deref", side)
        else:
            raise GraphError(f"unsupported assignment target {target.kind}")
        rhs_side = self.lower_expr(rhs, ctx, writes)
        nid = self.emit(ctx, self.ref(place), "assign", rhs_side)
        root = _root_variable(target)
        if root is not None:
            writes.add(root)
        return self.ref(nid)

    # -- statements ------------------------------------------------------

    def lower_statement(self, node):
        kind = node.kind
        if kind == "block":
            for child in node.children:
                self.lower_statement(child)
            return
        if kind in ("empty", "break", "continue"):
            self.drop(kind, node)
            return
        if kind == "declaration":
            self.lower_declaration(node)
            return
        if kind == "return":
            if not node.children:
                self.drop("bare return", node)
                return
            ctx, writes = [], set()
            side = self.lower_expr(node.children[0], ctx, writes)
            fname = self.fn_name or "?"
            self.emit(ctx, Entity("function", fname), "return", side)
            self.commit(ctx, writes)
            return
        if kind == "if":
            self.lower_if(node)
            return
        if kind == "while":
            self.lower_loop(node.children[0], node.children[1], cond_first=True)
            return
        if kind == "do-while":
            self.lower_loop(node.children[1], node.children[0], cond_first=False)
            return
        if kind == "for":
            self.lower_for(node)
            return
        # Expression statement.
        ctx, writes = [], set()
        self.lower_expr(node, ctx, writes)
        if not ctx:
            self.drop("expression with no events", node)
            return
        self.commit(ctx, writes)

    def lower_declaration(self, node):
        if node.detail == "prototype":
            self.drop("prototype", node)
            return
        ctx, writes = [], set()
        roots = []
        for decl in node.children:
            if not decl.children:
                continue
            side = self.lower_init(decl.children[0], ctx, writes)
            if side is None:
                continue
            nid = self.emit(ctx, Entity("variable", decl.value), "decl-init",
                            side)
            writes.add(decl.value)
            roots.append(nid)
        if not ctx:
            self.drop("declaration without initializer", node)
            return
        if len(roots) > 1:
            acc = roots[0]
            for nxt in roots[1:]:
                acc = self.emit(ctx, self.ref(acc), "comma", self.ref(nxt))
        self.commit(ctx, writes)

    def lower_init(self, node, ctx, writes):
        if node.kind != "init-list":
            return self.lower_expr(node, ctx, writes)
        sides = [self.lower_init(c, ctx, writes) for c in node.children]
        sides = [s for s in sides if s is not None]
        if not sides:
            return None
        acc = sides[-1]
        for side in reversed(sides[:-1]):
            acc = self.ref(self.emit(ctx, side, "comma", acc))
        return acc

    def lower_if(self, node):
        cond = node.children[0]
        ctx, writes = [], set()
        cond_side = self.lower_expr(cond, ctx, writes)
        has_else = len(node.children) > 2
        then_final = self._lower_body(node.children[1])
        if not has_else:
            if then_final is not None:
                self.emit(ctx, cond_side, "cond-guard", self.ref(then_final))
        else:
            else_final = self._lower_body(node.children[2])
            then_side = self.ref(then_final) if then_final is not None else cond_side
            else_side = self.ref(else_final) if else_final is not None else cond_side
            tn = self.emit(ctx, cond_side, "branch-then", then_side)
            self.emit(ctx, self.ref(tn), "branch-else", else_side)
        if ctx:
            self.commit(ctx, writes)
        elif then_final is None and (not has_else):
            self.drop("if with no events", node)

    def lower_loop(self, cond, body, cond_first):
        if cond_first:
            ctx, writes = [], set()
            cond_side = self.lower_expr(cond, ctx, writes)
            body_final = self._lower_body(body)
        else:
            body_final = self._lower_body(body)
            ctx, writes = [], set()
            cond_side = self.lower_expr(cond, ctx, writes)
        if body_final is not None:
            self.emit(ctx, cond_side, "loop-body", self.ref(body_final))
        if ctx:
            self.commit(ctx, writes)

    def lower_for(self, node):
        init, cond, step, body = node.children
        if init.kind != "empty":
            self.lower_statement(init)
        ctx, writes = [], set()
        cond_side = None
        if cond.kind != "empty":
            cond_side = self.lower_expr(cond, ctx, writes)
        body_final = self._lower_body(body)
        step_final = None
        if step.kind != "empty":
            before = self.stmt_count
            self.lower_statement(step)
            if self.stmt_count > before:
                step_final = self.last_final
        target = body_final if body_final is not None else step_final
        if cond_side is not None and target is not None:
            self.emit(ctx, cond_side, "loop-body", self.ref(target))
        if ctx:
            self.commit(ctx, writes)

    def _lower_body(self, node):
        """Lower a nested statement or block; return the final node id of the
        last statement it produced, if any."""
        before = self.stmt_count
        self.lower_statement(node)
        return self.last_final if self.stmt_count > before else None

    # -- top level ---------------------------------------------------------

    def build(self, ast):
        for item in ast.root.children:
            if item.kind == "function-def":
                self.fn_name = item.value
                self.lower_statement(item.children[-1])
                self.fn_name = None
            elif item.kind == "declaration":
                self.lower_statement(item)
        nodes = tuple(
            EventNode(i, e1, operator, e2, self.node_stmt[i],
                      self.node_final[i])
            for i, (e1, operator, e2) in enumerate(self.raw_nodes))
        return EventDependencyGraph(
            nodes=nodes,
            edges=frozenset(_derived_edges(nodes)),
            statement_count=self.stmt_count,
            rank_table={},
        )


def _root_variable(node):
    while node.kind in ("index", "member-access"):
        node = node.children[0]
    return node.value if node.kind == "identifier" else None


def build_event_graph(ast):
    """Lower an AST into an event dependency graph (unranked)."""
    return _Builder().build(ast)


def rank_entities(graph):
    """Frequency-rank all non-reference entities and return a new graph with
    the rank table filled and every entity's rank set.

    Ties break by descending occurrence count, then entity kind name, then
    value, so the result is deterministic.
    """
    counts = {}
    for node in graph.nodes:
        for ent in (node.entity1, node.entity2):
            if not ent.is_ref:
                counts[ent.key()] = counts.get(ent.key(), 0) + 1
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0][0], kv[0][1]))
    table = {key: i + 1 for i, (key, _) in enumerate(ordered)}

    def ranked(ent):
        if ent.is_ref:
            return ent
        return replace(ent, rank=table[ent.key()])

    nodes = tuple(
        replace(node, entity1=ranked(node.entity1), entity2=ranked(node.entity2))
        for node in graph.nodes)
    return EventDependencyGraph(nodes=nodes, edges=graph.edges,
                                statement_count=graph.statement_count,
                                rank_table=table)


def topo_schedule(graph):
    """Topological order of node ids with ascending-id tie-breaking.

    Because construction makes every edge point forward, the result is always
    0..n-1; a cycle (which only a buggy builder could produce) raises
    CycleError.
    """
    import heapq

    n = len(graph.nodes)
    indeg = [0] * n
    out = [[] for _ in range(n)]
    for a, b in graph.edges:
        indeg[b] += 1
        out[a].append(b)
    ready = [i for i in range(n) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        cur = heapq.heappop(ready)
        order.append(cur)
        for nxt in out[cur]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(order) != n:
        raise CycleError("dependency cycle detected")
    return order


# ---------------------------------------------------------------------------
# Text format

_KIND_TO_TAG = {
    "variable": "v", "function": "f", "constant-int": "ci",
    "constant-float": "cf", "constant-str": "cs", "constant-char": "cc",
}
_TAG_TO_KIND = {v: k for k, v in _KIND_TO_TAG.items()}


def _pct_encode(text):
    out = []
    for b in text.encode("utf-8"):
        if 0x21 <= b <= 0x7E and b != 0x25:
            out.append(chr(b))
        else:
            out.append(f"%{b:02X}")
    return "".join(out)


def _pct_decode(text, line):
    out = bytearray()
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "%":
            if i + 3 > len(text):
                raise FormatError(line, f"bad percent escape in {text!r}")
            try:
                out.append(int(text[i + 1:i + 3], 16))
            except ValueError:
                raise FormatError(line, f"bad percent escape in {text!r}")
            i += 3
        else:
            out.append(ord(ch))
            i += 1
    try:
        return out.decode("utf-8")
    except UnicodeDecodeError:
        raise FormatError(line, f"bad utf-8 in {text!r}")


def _encode_entity(ent):
    if ent.is_ref:
        return f"ref:{ent.ref}"
    tag = _KIND_TO_TAG[ent.kind]
    if tag == "cs":
        return "cs:" + base64.b64encode(ent.value.encode("utf-8")).decode("ascii")
    return f"{tag}:{_pct_encode(ent.value)}"


def _decode_entity(text, line, max_ref=None):
    tag, sep, payload = text.partition(":")
    if not sep:
        raise FormatError(line, f"malformed entity {text!r}")
    if tag == "ref":
        try:
            ref = int(payload)
        except ValueError:
            raise FormatError(line, f"malformed node ref {text!r}")
        if max_ref is None or not 0 <= ref < max_ref:
            raise FormatError(line, f"dangling node ref {ref}")
        return Entity("node-ref", ref=ref)
    kind = _TAG_TO_KIND.get(tag)
    if kind is None:
        raise FormatError(line, f"unknown entity tag {tag!r}")
    if tag == "cs":
        try:
            value = base64.b64decode(payload.encode("ascii"),
                                     validate=True).decode("utf-8")
        except Exception:
            raise FormatError(line, f"bad base64 payload in {text!r}")
    else:
        value = _pct_decode(payload, line)
    return Entity(kind, value)


def serialize_graph(graph):
    """Line-oriented text form; loses nothing, round-trips structurally."""
    lines = [f"EDG v1 nodes={len(graph.nodes)} stmts={graph.statement_count}"]
    for node in graph.nodes:
        lines.append(
            "N {} {} {} {} {} {}".format(
                node.id, node.statement_index,
                1 if node.is_statement_final else 0,
                node.operator.name,
                _encode_entity(node.entity1), _encode_entity(node.entity2)))
    for key, rank in sorted(graph.rank_table.items(), key=lambda kv: kv[1]):
        lines.append(f"R {rank} {_encode_entity(Entity(key[0], key[1]))}")
    return "\n".join(lines) + "\n"


def deserialize_graph(text):
    lines = text.splitlines()
    if not lines:
        raise FormatError(1, "empty document")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "EDG" or head[1] != "v1" or \
            not head[2].startswith("nodes=") or not head[3].startswith("stmts="):
        raise FormatError(1, f"bad header {lines[0]!r}")
    try:
        n_nodes = int(head[2][6:])
        n_stmts = int(head[3][6:])
    except ValueError:
        raise FormatError(1, f"bad header {lines[0]!r}")
    nodes = []
    rank_table = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split()
        if parts[0] == "N":
            if len(parts) != 7:
                raise FormatError(lineno, f"malformed node line {raw!r}")
            try:
                nid = int(parts[1])
                stmt = int(parts[2])
                final = int(parts[3])
            except ValueError:
                raise FormatError(lineno, f"malformed node line {raw!r}")
            if nid != len(nodes):
                raise FormatError(lineno, f"node id {nid} out of order")
            opname = parts[4]
            if opname not in OPERATOR_BY_NAME:
                raise FormatError(lineno, f"unknown operator {opname!r}")
            if final not in (0, 1):
                raise FormatError(lineno, f"bad final flag {final}")
            e1 = _decode_entity(parts[5], lineno, max_ref=nid)
            e2 = _decode_entity(parts[6], lineno, max_ref=nid)
            nodes.append(EventNode(nid, e1, OPERATOR_BY_NAME[opname], e2,
                                   stmt, bool(final)))
        elif parts[0] == "R":
            if len(parts) != 3:
                raise FormatError(lineno, f"malformed rank line {raw!r}")
            try:
                rank = int(parts[1])
            except ValueError:
                raise FormatError(lineno, f"malformed rank {parts[1]!r}")
            ent = _decode_entity(parts[2], lineno)
            rank_table[ent.key()] = rank
        else:
            raise FormatError(lineno, f"unknown record {parts[0]!r}")
    if len(nodes) != n_nodes:
        raise FormatError(1, f"header claims {n_nodes} nodes, found {len(nodes)}")
    if rank_table:
        nodes = [
            replace(node,
                    entity1=_apply_rank(node.entity1, rank_table),
                    entity2=_apply_rank(node.entity2, rank_table))
            for node in nodes]
    try:
        return EventDependencyGraph(
            nodes=tuple(nodes),
            edges=frozenset(_derived_edges(nodes)),
            statement_count=n_stmts,
            rank_table=rank_table,
        )
    except GraphError as exc:
        raise FormatError(1, str(exc))


def _apply_rank(ent, table):
    if ent.is_ref:
        return ent
    rank = table.get(ent.key())
    return replace(ent, rank=rank) if rank is not None else ent


def graph_from_source(source):
    """Tokenize, parse, build and rank in one step."""
    from . import cparse

    ast = cparse.parse_source(source)
    return rank_entities(build_event_graph(ast))
