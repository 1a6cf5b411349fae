"""Execution engine: turn an event dependency graph into a program vector.

Per node, two entity vectors pass through a pair of per-operator bilinear
tensor maps and a dense layer (the event cell); reset/update gates wrap the
cell so long dependency chains keep early information. Statement-final rows
are gathered in statement order and a bank of 1-D kernels with mean pooling
reduces them to a fixed-length program vector.

Parameters are immutable during inference; embedding is pure and can run
concurrently per fragment. Training code mutates parameters and must not
overlap with inference on the same object.
"""

import struct
import sys
from array import array
from dataclasses import dataclass

from . import numkernel as nk
from .eventgraph import OPERATORS, OPERATOR_BY_NAME, Operator, topo_schedule
from .numkernel import DenseTensor, ShapeError


class RefError(Exception):
    """An entity-table lookup was attempted on a node reference."""


class CheckpointError(Exception):
    pass


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 64          # entity/event vector length
    slices: int = 2        # leading dimension of each operator tensor
    kernels: int = 128     # number of 1-D convolution kernels
    kernel_len: int = 3
    pad_len: int = 256     # statement capacity after padding
    top_vocab: int = 512   # learned frequency-rank vectors

    def __post_init__(self):
        for name in ("dim", "slices", "kernels", "kernel_len", "pad_len",
                     "top_vocab"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.kernel_len > self.pad_len:
            raise ValueError("kernel_len must not exceed pad_len")


class ModelParams:
    """All learned tensors.

    Per-operator tensors live in two packed buffers so the fused kernels can
    walk them without copying; ``named_tensors`` exposes every parameter as a
    DenseTensor view over the live storage (the order is fixed and is also the
    checkpoint order).
    """

    def __init__(self, config):
        self.config = config
        d, k = config.dim, config.slices
        dd = d * d
        self._t1 = array("d", bytes(8 * len(OPERATORS) * k * dd))
        self._t2 = array("d", bytes(8 * len(OPERATORS) * k * dd))
        self._t1_mv = memoryview(self._t1)
        self._t2_mv = memoryview(self._t2)
        self.w_reset = DenseTensor.zeros((d, 2 * d))
        self.w_update = DenseTensor.zeros((d, 2 * d))
        self.dense_w = DenseTensor.zeros((d, 2 * k * d))
        self.dense_b = DenseTensor.zeros((d,))
        self.entity_table = DenseTensor.zeros((config.top_vocab, d))
        self.conv_w = DenseTensor.zeros((config.kernels, config.kernel_len))

    def t_slice(self, which, op_id, k):
        """Zero-copy (dim x dim) slice of an operator tensor."""
        dd = self.config.dim * self.config.dim
        base = (op_id * self.config.slices + k) * dd
        mv = self._t1_mv if which == 1 else self._t2_mv
        return mv[base:base + dd]

    def op_tensor(self, which, op_id):
        d, k = self.config.dim, self.config.slices
        dd = d * d
        mv = self._t1_mv if which == 1 else self._t2_mv
        return DenseTensor._raw((k, d, d),
                                mv[op_id * k * dd:(op_id + 1) * k * dd])

    def named_tensors(self):
        """Yield (name, tensor) for every parameter, in a fixed order."""
        for operator in OPERATORS:
            yield f"op/{operator.name}/t1", self.op_tensor(1, operator.id)
            yield f"op/{operator.name}/t2", self.op_tensor(2, operator.id)
        yield "w_reset", self.w_reset
        yield "w_update", self.w_update
        yield "dense_w", self.dense_w
        yield "dense_b", self.dense_b
        yield "entity_table", self.entity_table
        yield "conv_w", self.conv_w

    @classmethod
    def init(cls, config, rng):
        """Seeded initialization; the same seed yields identical parameters."""
        import math

        params = cls(config)
        d, k = config.dim, config.slices
        op_bound = math.sqrt(6.0 / (d + d))
        nk.fill_uniform(params._t1, -op_bound, op_bound, rng)
        nk.fill_uniform(params._t2, -op_bound, op_bound, rng)
        gate_bound = math.sqrt(6.0 / (d + 2 * d))
        nk.fill_uniform(params.w_reset.data, -gate_bound, gate_bound, rng)
        nk.fill_uniform(params.w_update.data, -gate_bound, gate_bound, rng)
        dense_bound = math.sqrt(6.0 / (d + 2 * k * d))
        nk.fill_uniform(params.dense_w.data, -dense_bound, dense_bound, rng)
        nk.fill_uniform(params.entity_table.data, -0.5, 0.5, rng)
        conv_bound = math.sqrt(6.0 / (config.kernels + config.kernel_len))
        nk.fill_uniform(params.conv_w.data, -conv_bound, conv_bound, rng)
        return params


def _resolve_operator(operator):
    if isinstance(operator, Operator):
        return operator
    if isinstance(operator, str):
        return OPERATOR_BY_NAME[operator]
    return OPERATORS[operator]


def _entity_row(entity, rank_table, top_vocab):
    rank = entity.rank
    if rank is None:
        rank = rank_table.get(entity.key()) if rank_table else None
    if rank is None:
        raise ValueError(f"entity {entity.key()} has no rank; run rank_entities")
    return min(rank, top_vocab) - 1


def lookup_entity(entity, rank_table, params):
    """Vector for a ranked entity: row min(rank, top_vocab) of the entity
    table, counting rows 1-based (all out-of-vocabulary ranks share the last
    row)."""
    if entity.is_ref:
        raise RefError("node references have no table vector")
    d = params.config.dim
    row = _entity_row(entity, rank_table, params.config.top_vocab)
    base = row * d
    return DenseTensor._raw((d,), array("d", params.entity_table.data[base:base + d]))


def event_cell(a_vec, operator, o_vec, params):
    """Bilinear per-operator maps plus a tanh dense layer (the ungated cell)."""
    cfg = params.config
    d, k = cfg.dim, cfg.slices
    if a_vec.shape != (d,) or o_vec.shape != (d,):
        raise ShapeError(f"event_cell: {a_vec.shape}, {o_vec.shape}, need ({d},)")
    operator = _resolve_operator(operator)
    impl = nk.active()
    act = array("d", bytes(8 * 2 * k * d))
    act_mv = memoryview(act)
    for j in range(k):
        impl.vecmat(d, d, a_vec.data, params.t_slice(1, operator.id, j),
                    act_mv[j * 2 * d:j * 2 * d + d])
        impl.vecmat(d, d, o_vec.data, params.t_slice(2, operator.id, j),
                    act_mv[j * 2 * d + d:(j + 1) * 2 * d])
    out = DenseTensor.zeros((d,))
    impl.matvec(d, 2 * k * d, params.dense_w.data, act, out.data)
    impl.axpy(d, 1.0, params.dense_b.data, out.data)
    impl.tanh_vec(d, out.data, out.data)
    return out


def event_transformer_step(a_prev, operator, o_vec, params):
    """Gated cell: reset/update gates interpolate between the previous chain
    state and the fresh cell output."""
    cfg = params.config
    d = cfg.dim
    if a_prev.shape != (d,) or o_vec.shape != (d,):
        raise ShapeError(
            f"event_transformer_step: {a_prev.shape}, {o_vec.shape}, need ({d},)")
    operator = _resolve_operator(operator)
    impl = nk.active()
    cat = array("d", a_prev.data) + array("d", o_vec.data)
    r = array("d", bytes(8 * d))
    z = array("d", bytes(8 * d))
    impl.matvec(d, 2 * d, params.w_reset.data, cat, r)
    impl.sigmoid_vec(d, r, r)
    impl.matvec(d, 2 * d, params.w_update.data, cat, z)
    impl.sigmoid_vec(d, z, z)
    gated = DenseTensor.zeros((d,))
    impl.hadamard_vec(d, r, a_prev.data, gated.data)
    cand = event_cell(gated, operator, o_vec, params)
    out = DenseTensor.zeros((d,))
    impl.gate_mix(d, z, a_prev.data, cand.data, out.data)
    return out


def _node_sides(node):
    """Map a node's entities to (chain-state side, other side).

    The recurrent state always flows through a node-reference side when one
    exists; entity 1 wins when both or neither are references.
    """
    e1, e2 = node.entity1, node.entity2
    if e1.is_ref:
        return ("row", e1.ref), (("row", e2.ref) if e2.is_ref else ("ent", e2))
    if e2.is_ref:
        return ("row", e2.ref), ("ent", e1)
    return ("ent", e1), ("ent", e2)


def embed_graph(graph, params, order=None):
    """One vector per node, id-indexed, processed in dependency order.

    ``order`` overrides the schedule; any valid topological order produces
    the same rows because a node reads only rows computed before it.
    """
    rows = [None] * len(graph.nodes)
    for nid in (topo_schedule(graph) if order is None else order):
        node = graph.nodes[nid]
        a_src, o_src = _node_sides(node)
        a_vec = rows[a_src[1]] if a_src[0] == "row" else \
            lookup_entity(a_src[1], graph.rank_table, params)
        o_vec = rows[o_src[1]] if o_src[0] == "row" else \
            lookup_entity(o_src[1], graph.rank_table, params)
        rows[nid] = event_transformer_step(a_vec, node.operator, o_vec, params)
    return rows


def restore(rows, graph):
    """Keep exactly the statement-final rows, in statement order."""
    if len(rows) != len(graph.nodes):
        raise ShapeError(
            f"restore: {len(rows)} rows for {len(graph.nodes)} nodes")
    return [rows[fid] for fid in graph.final_node_ids()]


def convolve(prog_rows, params, config=None):
    """Slide each 1-D kernel along the zero-padded statement axis of its
    embedding channel (kernel k reads channel k mod dim) and mean pool the
    valid positions; output length equals the kernel count."""
    cfg = config or params.config
    s_count = len(prog_rows)
    if s_count == 0:
        raise ShapeError("convolve: empty program matrix")
    if s_count > cfg.pad_len:
        raise ShapeError(
            f"convolve: {s_count} statements exceed pad capacity {cfg.pad_len}")
    d = cfg.dim
    xhat = array("d", bytes(8 * cfg.pad_len * d))
    for s, row in enumerate(prog_rows):
        if row.shape != (d,):
            raise ShapeError(f"convolve: row shape {row.shape}, need ({d},)")
        xhat[s * d:(s + 1) * d] = array("d", row.data)
    out = DenseTensor.zeros((cfg.kernels,))
    nk.active().conv_forward(cfg.pad_len, d, cfg.kernels, cfg.kernel_len,
                             xhat, params.conv_w.data, out.data)
    return out


def embed_program(graph, params, config=None):
    """Full pipeline: node embeddings, statement restore, convolution."""
    return convolve(restore(embed_graph(graph, params), graph), params, config)


# ---------------------------------------------------------------------------
# Flattened fast path


class FlatGraph:
    """Kernel-ready integer view of a ranked graph."""

    __slots__ = ("n", "op_ids", "a_kind", "a_idx", "o_kind", "o_idx",
                 "final_ids", "statement_count")

    def __init__(self, n, op_ids, a_kind, a_idx, o_kind, o_idx, final_ids,
                 statement_count):
        self.n = n
        self.op_ids = op_ids
        self.a_kind = a_kind
        self.a_idx = a_idx
        self.o_kind = o_kind
        self.o_idx = o_idx
        self.final_ids = final_ids
        self.statement_count = statement_count


def flatten_graph(graph, config):
    n = len(graph.nodes)
    op_ids = array("i", bytes(4 * n))
    a_kind = array("i", bytes(4 * n))
    a_idx = array("i", bytes(4 * n))
    o_kind = array("i", bytes(4 * n))
    o_idx = array("i", bytes(4 * n))
    for node in graph.nodes:
        op_ids[node.id] = node.operator.id
        (ak, av), (ok_, ov) = _node_sides(node)
        if ak == "row":
            a_kind[node.id], a_idx[node.id] = 1, av
        else:
            a_kind[node.id] = 0
            a_idx[node.id] = _entity_row(av, graph.rank_table, config.top_vocab)
        if ok_ == "row":
            o_kind[node.id], o_idx[node.id] = 1, ov
        else:
            o_kind[node.id] = 0
            o_idx[node.id] = _entity_row(ov, graph.rank_table, config.top_vocab)
    return FlatGraph(n, op_ids, a_kind, a_idx, o_kind, o_idx,
                     graph.final_node_ids(), graph.statement_count)


def program_vector(flat, params):
    """Program vector via the fused kernels; equal to ``embed_program`` on
    the corresponding graph."""
    cfg = params.config
    d = cfg.dim
    if flat.statement_count == 0:
        raise ShapeError("program_vector: empty program matrix")
    if flat.statement_count > cfg.pad_len:
        raise ShapeError(
            f"program_vector: {flat.statement_count} statements exceed "
            f"pad capacity {cfg.pad_len}")
    impl = nk.active()
    rows = array("d", bytes(8 * max(flat.n, 1) * d))
    if flat.n:
        scratch = array("d", bytes(8 * (6 * d + 2 * cfg.slices * d)))
        impl.graph_forward(flat.n, d, cfg.slices, flat.op_ids, flat.a_kind,
                           flat.a_idx, flat.o_kind, flat.o_idx, params._t1,
                           params._t2, params.w_reset.data,
                           params.w_update.data, params.dense_w.data,
                           params.dense_b.data, params.entity_table.data,
                           rows, scratch)
    xhat = array("d", bytes(8 * cfg.pad_len * d))
    for s, fid in enumerate(flat.final_ids):
        xhat[s * d:(s + 1) * d] = rows[fid * d:(fid + 1) * d]
    out = DenseTensor.zeros((cfg.kernels,))
    impl.conv_forward(cfg.pad_len, d, cfg.kernels, cfg.kernel_len, xhat,
                      params.conv_w.data, out.data)
    return out


def embed_program_fast(graph, params):
    return program_vector(flatten_graph(graph, params.config), params)


# ---------------------------------------------------------------------------
# Cached forward + backward building blocks (used by the trainer)


class _NodeTape:
    __slots__ = ("a_kind", "a_idx", "o_kind", "o_idx", "a_vec", "o_vec",
                 "r", "z", "acell", "act", "atilde")


class ForwardTape:
    """Every intermediate needed to run the reverse pass."""

    __slots__ = ("flat", "nodes", "rows", "xhat", "q")


def forward_tape(flat, params):
    cfg = params.config
    d, k = cfg.dim, cfg.slices
    if flat.statement_count == 0 or flat.statement_count > cfg.pad_len:
        raise ShapeError("forward_tape: bad statement count")
    impl = nk.active()
    tape = ForwardTape()
    tape.flat = flat
    tape.nodes = []
    rows = array("d", bytes(8 * max(flat.n, 1) * d))
    rows_mv = memoryview(rows)
    table_mv = memoryview(params.entity_table.data)
    for nid in range(flat.n):
        nt = _NodeTape()
        nt.a_kind, nt.a_idx = flat.a_kind[nid], flat.a_idx[nid]
        nt.o_kind, nt.o_idx = flat.o_kind[nid], flat.o_idx[nid]
        src_a = rows_mv if nt.a_kind else table_mv
        src_o = rows_mv if nt.o_kind else table_mv
        nt.a_vec = array("d", src_a[nt.a_idx * d:(nt.a_idx + 1) * d])
        nt.o_vec = array("d", src_o[nt.o_idx * d:(nt.o_idx + 1) * d])
        cat = nt.a_vec + nt.o_vec
        nt.r = array("d", bytes(8 * d))
        nt.z = array("d", bytes(8 * d))
        impl.matvec(d, 2 * d, params.w_reset.data, cat, nt.r)
        impl.sigmoid_vec(d, nt.r, nt.r)
        impl.matvec(d, 2 * d, params.w_update.data, cat, nt.z)
        impl.sigmoid_vec(d, nt.z, nt.z)
        nt.acell = array("d", bytes(8 * d))
        impl.hadamard_vec(d, nt.r, nt.a_vec, nt.acell)
        nt.act = array("d", bytes(8 * 2 * k * d))
        act_mv = memoryview(nt.act)
        op_id = flat.op_ids[nid]
        for j in range(k):
            impl.vecmat(d, d, nt.acell, params.t_slice(1, op_id, j),
                        act_mv[j * 2 * d:j * 2 * d + d])
            impl.vecmat(d, d, nt.o_vec, params.t_slice(2, op_id, j),
                        act_mv[j * 2 * d + d:(j + 1) * 2 * d])
        nt.atilde = array("d", bytes(8 * d))
        impl.matvec(d, 2 * k * d, params.dense_w.data, nt.act, nt.atilde)
        impl.axpy(d, 1.0, params.dense_b.data, nt.atilde)
        impl.tanh_vec(d, nt.atilde, nt.atilde)
        impl.gate_mix(d, nt.z, nt.a_vec, nt.atilde,
                      rows_mv[nid * d:(nid + 1) * d])
        tape.nodes.append(nt)
    tape.rows = rows
    tape.xhat = array("d", bytes(8 * cfg.pad_len * d))
    for s, fid in enumerate(flat.final_ids):
        tape.xhat[s * d:(s + 1) * d] = rows[fid * d:(fid + 1) * d]
    q = DenseTensor.zeros((cfg.kernels,))
    impl.conv_forward(cfg.pad_len, d, cfg.kernels, cfg.kernel_len, tape.xhat,
                      params.conv_w.data, q.data)
    tape.q = q
    return tape


class GradStore:
    """Lazy name -> DenseTensor accumulator matching ``named_tensors``."""

    def __init__(self, params):
        self.params = params
        self.tensors = {}
        self._shapes = {name: t.shape for name, t in params.named_tensors()}

    def get(self, name):
        g = self.tensors.get(name)
        if g is None:
            g = DenseTensor.zeros(self._shapes[name])
            self.tensors[name] = g
        return g

    def items(self):
        return self.tensors.items()


def backward_tape(tape, dq, params, grads):
    """Reverse pass for one fragment: routes the program-vector gradient
    back through the convolution, the statement gather and every node, and
    accumulates parameter gradients into ``grads``."""
    cfg = params.config
    d, k = cfg.dim, cfg.slices
    impl = nk.active()
    flat = tape.flat

    impl.conv_backward_w(cfg.pad_len, d, cfg.kernels, cfg.kernel_len,
                         tape.xhat, dq, grads.get("conv_w").data)
    dxhat = array("d", bytes(8 * cfg.pad_len * d))
    impl.conv_backward_x(cfg.pad_len, d, cfg.kernels, cfg.kernel_len,
                         params.conv_w.data, dq, dxhat)
    d_rows = [None] * flat.n
    for s, fid in enumerate(flat.final_ids):
        if d_rows[fid] is None:
            d_rows[fid] = array("d", bytes(8 * d))
        impl.axpy(d, 1.0, dxhat[s * d:(s + 1) * d], d_rows[fid])

    g_table = None
    tmp = array("d", bytes(8 * d))
    for nid in range(flat.n - 1, -1, -1):
        dout = d_rows[nid]
        if dout is None:
            continue
        nt = tape.nodes[nid]
        op_name = OPERATORS[flat.op_ids[nid]].name
        # out = (1 - z) * a + z * atilde
        dz = array("d", bytes(8 * d))
        impl.ew_sub(d, nt.atilde, nt.a_vec, dz)
        impl.hadamard_vec(d, dz, dout, dz)
        da = array("d", bytes(8 * d))
        impl.hadamard_vec(d, dout, nt.z, tmp)
        impl.ew_sub(d, dout, tmp, da)
        datilde = array("d", bytes(8 * d))
        impl.hadamard_vec(d, dout, nt.z, datilde)
        # atilde = tanh(dense * act + bias)
        dy = array("d", bytes(8 * d))
        impl.dtanh_from_y(d, nt.atilde, datilde, dy)
        impl.axpy(d, 1.0, dy, grads.get("dense_b").data)
        impl.outer_acc(d, 2 * k * d, dy, nt.act, grads.get("dense_w").data)
        dact = array("d", bytes(8 * 2 * k * d))
        impl.vecmat(d, 2 * k * d, dy, params.dense_w.data, dact)
        dact_mv = memoryview(dact)
        dacell = array("d", bytes(8 * d))
        do = array("d", bytes(8 * d))
        dd = d * d
        g1 = memoryview(grads.get(f"op/{op_name}/t1").data)
        g2 = memoryview(grads.get(f"op/{op_name}/t2").data)
        for j in range(k):
            du = dact_mv[j * 2 * d:j * 2 * d + d]
            dv = dact_mv[j * 2 * d + d:(j + 1) * 2 * d]
            impl.outer_acc(d, d, nt.acell, du, g1[j * dd:(j + 1) * dd])
            impl.matvec(d, d, params.t_slice(1, flat.op_ids[nid], j), du, tmp)
            impl.axpy(d, 1.0, tmp, dacell)
            impl.outer_acc(d, d, nt.o_vec, dv, g2[j * dd:(j + 1) * dd])
            impl.matvec(d, d, params.t_slice(2, flat.op_ids[nid], j), dv, tmp)
            impl.axpy(d, 1.0, tmp, do)
        # acell = r * a
        dr = array("d", bytes(8 * d))
        impl.hadamard_vec(d, dacell, nt.a_vec, dr)
        impl.hadamard_acc(d, dacell, nt.r, da)
        # gates
        drs = array("d", bytes(8 * d))
        impl.dsigmoid_from_y(d, nt.r, dr, drs)
        dzs = array("d", bytes(8 * d))
        impl.dsigmoid_from_y(d, nt.z, dz, dzs)
        cat = nt.a_vec + nt.o_vec
        impl.outer_acc(d, 2 * d, drs, cat, grads.get("w_reset").data)
        impl.outer_acc(d, 2 * d, dzs, cat, grads.get("w_update").data)
        dcat = array("d", bytes(8 * 2 * d))
        impl.vecmat(d, 2 * d, drs, params.w_reset.data, dcat)
        dcat2 = array("d", bytes(8 * 2 * d))
        impl.vecmat(d, 2 * d, dzs, params.w_update.data, dcat2)
        impl.axpy(2 * d, 1.0, dcat2, dcat)
        dcat_mv = memoryview(dcat)
        impl.axpy(d, 1.0, dcat_mv[:d], da)
        impl.axpy(d, 1.0, dcat_mv[d:], do)
        # route to predecessors / entity table
        for kind, idx, grad_vec in ((nt.a_kind, nt.a_idx, da),
                                    (nt.o_kind, nt.o_idx, do)):
            if kind:
                if d_rows[idx] is None:
                    d_rows[idx] = array("d", bytes(8 * d))
                impl.axpy(d, 1.0, grad_vec, d_rows[idx])
            else:
                if g_table is None:
                    g_table = memoryview(grads.get("entity_table").data)
                impl.axpy(d, 1.0, grad_vec,
                          g_table[idx * d:(idx + 1) * d])


# ---------------------------------------------------------------------------
# Checkpoints

_MAGIC = b"EDAM1"


def save_checkpoint(params, path):
    """Binary container: magic, config record, then named raw-float tensors
    (little-endian)."""
    cfg = params.config
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<6I", cfg.dim, cfg.slices, cfg.kernels,
                             cfg.kernel_len, cfg.pad_len, cfg.top_vocab))
        tensors = list(params.named_tensors())
        fh.write(struct.pack("<I", len(tensors)))
        for name, tensor in tensors:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", len(tensor.shape)))
            fh.write(struct.pack(f"<{len(tensor.shape)}I", *tensor.shape))
            data = array("d", tensor.data)
            if sys.byteorder == "big":
                data.byteswap()
            fh.write(data.tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:5] != _MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    off = 5
    try:
        dim, slices, kernels, kernel_len, pad_len, top_vocab = \
            struct.unpack_from("<6I", blob, off)
        off += 24
        config = ModelConfig(dim=dim, slices=slices, kernels=kernels,
                             kernel_len=kernel_len, pad_len=pad_len,
                             top_vocab=top_vocab)
        params = ModelParams(config)
        expected = {name: t for name, t in params.named_tensors()}
        (count,) = struct.unpack_from("<I", blob, off)
        off += 4
        seen = set()
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<B", blob, off)
            off += 1
            shape = struct.unpack_from(f"<{rank}I", blob, off)
            off += 4 * rank
            if name not in expected:
                raise CheckpointError(f"{path}: unexpected tensor {name!r}")
            target = expected[name]
            if tuple(shape) != target.shape:
                raise CheckpointError(
                    f"{path}: tensor {name!r} has shape {tuple(shape)}, "
                    f"config requires {target.shape}")
            n = target.size
            if off + 8 * n > len(blob):
                raise CheckpointError(f"{path}: truncated tensor {name!r}")
            data = array("d")
            data.frombytes(blob[off:off + 8 * n])
            if sys.byteorder == "big":
                data.byteswap()
            off += 8 * n
            target.data[:] = data
            seen.add(name)
        missing = set(expected) - seen
        if missing:
            raise CheckpointError(f"{path}: missing tensors {sorted(missing)}")
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated checkpoint ({exc})")
    return params
