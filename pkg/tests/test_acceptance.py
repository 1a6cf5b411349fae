"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s``. The end-to-end criteria
train real models on a generated clone corpus; the whole module needs the
compiled kernel backend to stay inside its time budgets.
"""

import itertools
import math
import re
import time

import pytest

from eventclone import clonecli as cc
from eventclone import eventgraph as eg
from eventclone import model as mdl
from eventclone import numkernel as nk
from eventclone import train as trn
from eventclone.eventgraph import (Entity, EventDependencyGraph, EventNode,
                                   graph_from_source, op)
from eventclone.model import ModelConfig, ModelParams
from eventclone.numkernel import DenseTensor, Rng

import corpusgen
from oracles import as_np, np_params, oracle_cell, oracle_conv, oracle_step

import numpy as np


def verdict(number, passed, detail):
    state = "PASS" if passed else "FAIL"
    print(f"CRITERION {number:2d} {state}: {detail}")
    assert passed, f"criterion {number}: {detail}"


# ---------------------------------------------------------------------------
# Shared end-to-end artifacts (criteria 7 and 8)


@pytest.fixture(scope="module")
def toy_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("clone_corpus")
    corpusgen.toy_corpus(root, problems=10, fragments_per_problem=20, seed=11)
    return root


@pytest.fixture(scope="module")
def toy_dataset(toy_root):
    return cc.load_dataset(str(toy_root), split_ratio=0.7, seed=5)


@pytest.fixture(scope="module")
def trained_model(toy_dataset):
    config = ModelConfig()  # the default configuration, unchanged
    tcfg = trn.TrainConfig(learning_rate=0.001, epochs=40, batch_size=8,
                           seed=3, optimizer="sgd")
    params, history = trn.train(toy_dataset, config, tcfg)
    return params, history, config


@pytest.fixture(scope="module")
def second_model(toy_dataset):
    config = ModelConfig()
    tcfg = trn.TrainConfig(learning_rate=0.001, epochs=6, batch_size=8,
                           seed=91, optimizer="adaptive")
    params, _ = trn.train(toy_dataset, config, tcfg)
    return params


@pytest.fixture(scope="module")
def toy_eval(toy_dataset, trained_model):
    params, _, _ = trained_model
    pairs = cc.make_pairs(toy_dataset, "test")
    vectors = cc.embed_fragments(toy_dataset, params, "test")
    sims = cc.pair_similarities(pairs, vectors)
    return pairs, sims


# ---------------------------------------------------------------------------
# Criterion 1: gradient checks


def _random_small_fragment(rng, n_stmt):
    lines = ["int main() {"]
    declared = []
    for i in range(n_stmt):
        if not declared or rng.uniform01() < 0.45:
            name = f"w{len(declared)}"
            if declared and rng.uniform01() < 0.5:
                other = declared[rng.randint(len(declared))]
                lines.append(f"int {name} = {other} + {rng.randint(9)};")
            else:
                lines.append(f"int {name} = {rng.randint(9)};")
            declared.append(name)
        else:
            tgt = declared[rng.randint(len(declared))]
            src = declared[rng.randint(len(declared))]
            op_sym = ["+", "-", "*"][rng.randint(3)]
            lines.append(f"{tgt} = {src} {op_sym} {rng.randint(9)};")
    lines.append("}")
    return "\n".join(lines)


def _small_graph(rng, max_nodes=8):
    while True:
        source = _random_small_fragment(rng, 2 + rng.randint(4))
        graph = graph_from_source(source)
        if 1 <= len(graph.nodes) <= max_nodes:
            return graph


def test_criterion_01_gradient_check_suite():
    # Central differences carry an irreducible roundoff of a few dozen ulps
    # of the loss divided by 2*epsilon (~1e-9 here); gradients below that
    # noise floor cannot be certified any tighter, so the floor is
    # subtracted before the relative comparison. Everything above it faces
    # the full 1e-4 test.
    epsilon = 1e-5
    started = time.monotonic()
    rng = Rng(2024)
    instances = 0
    active = 0
    worst = 0.0
    worst_raw_diff = 0.0
    while instances < 50:
        dim = 2 + rng.randint(7)           # 2..8
        slices = 1 + rng.randint(2)        # K in {1, 2}
        config = ModelConfig(dim=dim, slices=slices,
                             kernels=2 + rng.randint(4), kernel_len=2,
                             pad_len=8, top_vocab=8)
        params = ModelParams.init(config, Rng(rng.randint(10 ** 9)))
        flats = [mdl.flatten_graph(_small_graph(rng), config)
                 for _ in range(3)]
        loss, grads = trn.backward(flats[0], flats[1], flats[2], params,
                                   config)
        if loss > 0:
            active += 1
        f_scale = max(loss, 1.0)

        def f():
            nonlocal f_scale
            value = trn.triplet_loss(flats[0], flats[1], flats[2], params,
                                     config)
            f_scale = max(f_scale, abs(value))
            return value

        for name, tensor in params.named_tensors():
            fd = nk.finite_diff_grad(f, [tensor], epsilon=epsilon)[0]
            noise = 32.0 * math.ulp(f_scale) / (2.0 * epsilon)
            got = grads.tensors.get(name)
            for i in range(tensor.size):
                analytic = got.data[i] if got else 0.0
                diff = abs(fd.data[i] - analytic)
                worst_raw_diff = max(worst_raw_diff, diff)
                rel = max(0.0, diff - noise) / max(abs(analytic), 1e-8)
                worst = max(worst, rel)
        instances += 1
    elapsed = time.monotonic() - started
    verdict(1, worst < 1e-4 and active >= 20 and elapsed < 120,
            f"{instances} instances ({active} with active hinge), worst "
            f"noise-adjusted relative gradient error {worst:.3g} (tolerance "
            f"1e-4, raw FD deviation <= {worst_raw_diff:.2g}), "
            f"{elapsed:.1f}s (< 120s)")


# ---------------------------------------------------------------------------
# Criterion 2: forward operations match independent re-implementations


def test_criterion_02_forward_oracle_equivalence():
    rng = Rng(7)
    worst_cell = worst_step = worst_conv = 0.0
    for trial in range(100):
        config = ModelConfig(dim=2 + rng.randint(7), slices=1 + rng.randint(2),
                             kernels=1 + rng.randint(6),
                             kernel_len=1 + rng.randint(3), pad_len=12,
                             top_vocab=6)
        params = ModelParams.init(config, Rng(5000 + trial))
        P = np_params(params)
        op_id = rng.randint(len(eg.OPERATORS))
        A = DenseTensor((config.dim,),
                        [rng.uniform(-1, 1) for _ in range(config.dim)])
        O = DenseTensor((config.dim,),
                        [rng.uniform(-1, 1) for _ in range(config.dim)])
        got = as_np(mdl.event_cell(A, eg.OPERATORS[op_id], O, params))
        worst_cell = max(worst_cell, float(np.max(np.abs(
            got - oracle_cell(as_np(A), as_np(O), op_id, P)))))
        got = as_np(mdl.event_transformer_step(A, eg.OPERATORS[op_id], O,
                                               params))
        worst_step = max(worst_step, float(np.max(np.abs(
            got - oracle_step(as_np(A), as_np(O), op_id, P)))))
        s_count = 1 + rng.randint(config.pad_len)
        rows = [DenseTensor((config.dim,),
                            [rng.uniform(-1, 1) for _ in range(config.dim)])
                for _ in range(s_count)]
        got = as_np(mdl.convolve(rows, params, config))
        ref = oracle_conv(np.stack([as_np(r) for r in rows]), P, config)
        worst_conv = max(worst_conv, float(np.max(np.abs(got - ref))))
    ok = worst_cell < 1e-12 and worst_step < 1e-12 and worst_conv < 1e-12
    verdict(2, ok,
            f"100 instances each; max deviation vs oracles: cell "
            f"{worst_cell:.2g}, gated step {worst_step:.2g}, conv "
            f"{worst_conv:.2g} (tolerance 1e-12)")


# ---------------------------------------------------------------------------
# Criterion 3: restore layer vs brute-force filter, exhaustive small graphs


def _exhaustive_restore_graphs():
    graphs = []
    for s_count in range(1, 6):
        for sizes in itertools.product((1, 2), repeat=s_count):
            for chained in (False, True):
                nodes = []
                finals = []
                for s in range(s_count):
                    if sizes[s] == 2:
                        nid = len(nodes)
                        nodes.append(EventNode(
                            nid, Entity("variable", f"x{s}"), op("add"),
                            Entity("constant-int", "1"), s, False))
                        e2 = Entity("node-ref", ref=nid)
                        nodes.append(EventNode(
                            nid + 1, Entity("variable", f"y{s}"), op("assign"),
                            e2, s, True))
                    else:
                        prev = finals[-1] if (chained and finals) else None
                        e2 = Entity("node-ref", ref=prev) if prev is not None \
                            else Entity("constant-int", "2")
                        nodes.append(EventNode(
                            len(nodes), Entity("variable", f"y{s}"),
                            op("assign"), e2, s, True))
                    finals.append(len(nodes) - 1)
                edges = set()
                for node in nodes:
                    for ent in (node.entity1, node.entity2):
                        if ent.is_ref:
                            edges.add((ent.ref, node.id))
                graphs.append(EventDependencyGraph(
                    tuple(nodes), frozenset(edges), s_count, {}))
    return graphs


def test_criterion_03_restore_layer_exhaustive():
    graphs = _exhaustive_restore_graphs()
    config = ModelConfig(dim=4, slices=1, kernels=2, kernel_len=2, pad_len=8,
                         top_vocab=4)
    params = ModelParams.init(config, Rng(12))
    checked = 0
    for graph in graphs:
        ranked = eg.rank_entities(graph)
        rows = mdl.embed_graph(ranked, params)
        got = mdl.restore(rows, ranked)
        # brute force: walk ids in order, keep statement-final rows
        expected = [rows[node.id] for node in ranked.nodes
                    if node.is_statement_final]
        by_stmt = sorted(
            (n for n in ranked.nodes if n.is_statement_final),
            key=lambda n: n.statement_index)
        expected_stmt_order = [rows[n.id] for n in by_stmt]
        assert got == expected == expected_stmt_order
        assert len(got) == ranked.statement_count
        checked += 1
    verdict(3, checked == len(graphs) and checked >= 120,
            f"restore equals the brute-force statement-final filter on "
            f"{checked} exhaustively generated graphs (<= 5 statements)")


# ---------------------------------------------------------------------------
# Criterion 4: topological-order invariance, brute force


def _all_topological_orders(n, edges):
    succ = {i: [] for i in range(n)}
    indeg = [0] * n
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    orders = []
    order = []

    def rec(remaining_indeg):
        ready = [i for i in range(n)
                 if remaining_indeg[i] == 0 and i not in taken]
        if not ready:
            if len(order) == n:
                orders.append(list(order))
            return
        for node in ready:
            taken.add(node)
            order.append(node)
            for nxt in succ[node]:
                remaining_indeg[nxt] -= 1
            rec(remaining_indeg)
            for nxt in succ[node]:
                remaining_indeg[nxt] += 1
            order.pop()
            taken.remove(node)

    taken = set()
    rec(list(indeg))
    return orders


def test_criterion_04_topological_invariance():
    sources = [
        "int main(){ a = 1; }",
        "int main(){ a = 1; b = a; }",
        "int main(){ a = 1; b = a; c = b; }",
        "int main(){ x = 1; y = 2; z = 3; }",
        "int main(){ a = 1; b = a + a; c = b - a; }",
        "int main(){ p = 1; q = 2; r = p + q; }",
        "int main(){ s = 0; s = s + 1; s = s + 2; }",
        "int main(){ m = 2 * 3; n = m; }",
        "int main(){ u = 1; v = 2; w = 3; t = 4; }",
        "int main(){ u = 1; v = 2; w = 3; t = 4; s = 5; }",
        'int main(){ this.printf("hi", p); }',
    ]
    config = ModelConfig(dim=5, slices=2, kernels=3, kernel_len=2, pad_len=8,
                         top_vocab=8)
    params = ModelParams.init(config, Rng(9))
    graphs_checked = 0
    orders_checked = 0
    for source in sources:
        graph = graph_from_source(source)
        assert len(graph.nodes) <= 6
        base = mdl.embed_graph(graph, params)
        for order in _all_topological_orders(len(graph.nodes), graph.edges):
            rows = mdl.embed_graph(graph, params, order=order)
            assert rows == base, f"order {order} diverged for {source!r}"
            orders_checked += 1
        graphs_checked += 1
    verdict(4, graphs_checked == len(sources) and orders_checked >= 100,
            f"embedding identical across all {orders_checked} valid "
            f"topological orders of {graphs_checked} graphs (<= 6 nodes)")


# ---------------------------------------------------------------------------
# Criterion 5: surface-edit invariance


HAND_FRAGMENTS = [
    ("int main(){ int alpha = 1; int beta = alpha + 2; return beta; }",
     ["alpha", "beta"]),
    ("int main(){ int total = 0; total = total + 5; printf(\"%d\", total); }",
     ["total"]),
    ("int main(){ int left = 3; int right = 4; int area = left * right; "
     "return area; }", ["left", "right", "area"]),
    ("int main(){ int count = 0; while (count < 9) count = count + 2; "
     "return count; }", ["count"]),
    ("int main(){ int seed = 7; if (seed > 3) seed = seed - 3; return seed; }",
     ["seed"]),
    ("int main(){ int first = 1; int second = first; int third = second; "
     "return third; }", ["first", "second", "third"]),
    ("int main(){ int value = 6; value = value / 2; value = value % 2; "
     "return value; }", ["value"]),
    ("int main(){ int flag = 1; if (flag) flag = 0; else flag = 2; "
     "return flag; }", ["flag"]),
    ("int main(){ int accum = 0; for (int it = 0; it < 5; it++) "
     "accum = accum + it; return accum; }", ["accum", "it"]),
    ("int main(){ int base = 2; int expo = 5; int out = base * expo; "
     "printf(\"%d\", out); }", ["base", "expo", "out"]),
    ("int main(){ int mask = 12; mask = mask & 10; mask = mask | 1; "
     "return mask; }", ["mask"]),
    ("int main(){ int shift = 1; shift = shift << 3; shift = shift >> 1; "
     "return shift; }", ["shift"]),
    ("int main(){ int neg = 5; neg = -neg; return neg; }", ["neg"]),
    ("int main(){ int probe = 4; int hit = probe == 4; return hit; }",
     ["probe", "hit"]),
    ("int main(){ int box = 1; int lid = !box; return lid; }",
     ["box", "lid"]),
    ("int main(){ int fuel = 9; do fuel = fuel - 3; while (fuel > 0); "
     "return fuel; }", ["fuel"]),
    ("int main(){ int score = 0; score += 4; score *= 2; return score; }",
     ["score"]),
    ("int main(){ int size = sizeof(int); return size; }", ["size"]),
    ("int main(){ int stock = 3, sold = 1; int rest = stock - sold; "
     "return rest; }", ["stock", "sold", "rest"]),
    ("int main(){ int period = 60; int rate = 100 / period; "
     "printf(\"%d %d\", period, rate); }", ["period", "rate"]),
]


def test_criterion_05_structural_invariance():
    config = ModelConfig()
    params = ModelParams.init(config, Rng(123))
    layout_ok = 0
    rename_ok = 0
    for idx, (source, names) in enumerate(HAND_FRAGMENTS):
        base_vec = mdl.embed_program_fast(graph_from_source(source), params)

        noisy = corpusgen.add_comments_and_whitespace(source, seed=idx)
        assert noisy != source
        noisy_vec = mdl.embed_program_fast(graph_from_source(noisy), params)
        if noisy_vec == base_vec:
            layout_ok += 1

        renamed = corpusgen.alpha_rename(source, names)
        assert renamed != source
        renamed_vec = mdl.embed_program_fast(graph_from_source(renamed), params)
        if renamed_vec == base_vec:
            rename_ok += 1
    verdict(5, layout_ok == 20 and rename_ok == 20,
            f"bitwise-identical program vectors for {layout_ok}/20 "
            f"layout-edited and {rename_ok}/20 alpha-renamed pairs")


# ---------------------------------------------------------------------------
# Criterion 6: def-use edges vs brute-force oracle


def test_criterion_06_def_use_oracle():
    rng = Rng(606)
    checked = 0
    for _ in range(100):
        source = corpusgen.straight_line_fragment(rng, 2 + rng.randint(19))
        graph = graph_from_source(source)
        n_stmts, expected = corpusgen.defuse_oracle(source)
        assert graph.statement_count == n_stmts
        finals = set(graph.final_node_ids())
        stmt_of = {n.id: n.statement_index for n in graph.nodes}
        got = set()
        for a, b in graph.edges:
            if stmt_of[a] != stmt_of[b]:
                assert a in finals
                got.add((stmt_of[a], stmt_of[b]))
        assert got == expected, f"def-use mismatch for:\n{source}"
        checked += 1
    verdict(6, checked == 100,
            f"inter-statement edges match the brute-force def-use oracle on "
            f"{checked} straight-line fragments (<= 20 statements)")


# ---------------------------------------------------------------------------
# Criterion 7: toy end-to-end training


def _token_jaccard_baseline(toy_root, pairs):
    token_re = re.compile(r"[A-Za-z_0-9%]+")
    cache = {}

    def tokens(fid):
        if fid not in cache:
            text = (toy_root / fid).read_text(encoding="utf-8")
            cache[fid] = frozenset(token_re.findall(text))
        return cache[fid]

    sims = []
    for a, b, _ in pairs:
        ta, tb = tokens(a), tokens(b)
        sims.append(len(ta & tb) / len(ta | tb))
    grid = [i / 100 for i in range(0, 101)]
    return cc.best_report(cc.sweep(grid, None, pairs, sims))


def test_criterion_07_toy_end_to_end(toy_root, toy_dataset, trained_model,
                                     toy_eval):
    params, history, config = trained_model
    assert len(history) <= 100
    pairs, sims = toy_eval
    grid = [i / 50 for i in range(-50, 51)]
    reports = cc.sweep(grid, None, pairs, sims)
    best = cc.best_report(reports)
    baseline = _token_jaccard_baseline(toy_root, pairs)
    ok = best.f1 >= 0.85 and best.f1 > baseline.f1
    verdict(7, ok,
            f"trained {len(history)} epochs at the default config; test F1 "
            f"{best.f1:.4f} at sweep-selected theta {best.theta:.2f} "
            f"(required >= 0.85) vs token-Jaccard baseline F1 "
            f"{baseline.f1:.4f}")


# ---------------------------------------------------------------------------
# Criterion 8: fusion sanity


def test_criterion_08_fusion_sanity(toy_dataset, trained_model, second_model,
                                    toy_eval):
    params1, _, _ = trained_model
    pairs, sims1 = toy_eval
    vectors2 = cc.embed_fragments(toy_dataset, second_model, "test")
    sims2 = cc.pair_similarities(pairs, vectors2)

    grid = [i / 20 for i in range(-10, 21)]
    solo = cc.sweep(grid, None, pairs, sims1)
    fused_beta_one = cc.sweep(grid, [1.0], pairs, sims1, sims2)
    exact = all(
        (a.tp, a.fp, a.fn, a.tn, a.precision, a.recall, a.f1) ==
        (b.tp, b.fp, b.fn, b.tn, b.precision, b.recall, b.f1)
        for a, b in zip(solo, fused_beta_one))

    betas = (0.2, 0.5, 0.8)
    affine = True
    for s1, s2 in zip(sims1, sims2):
        f1_, f2_, f3_ = (cc.fuse_scores(s1, s2, b) for b in betas)
        # equally spaced betas: the middle value is the midpoint
        if abs((f1_ + f3_) / 2.0 - f2_) > 1e-12:
            affine = False
            break
    verdict(8, exact and affine,
            f"beta=1 fusion reproduces model 1 exactly over {len(grid)} "
            f"thresholds; fused score affine in beta at 3 grid points over "
            f"{len(pairs)} pairs")


# ---------------------------------------------------------------------------
# Criterion 9: metric identities


def test_criterion_09_metric_identities():
    rng = Rng(909)
    checked = 0
    for _ in range(1000):
        n = 1 + rng.randint(60)
        verdicts = [
            cc.PairVerdict(("a", "b"), rng.uniform(-1, 1),
                           rng.randint(2) == 0, rng.randint(2) == 0)
            for _ in range(n)]
        report = cc.evaluate(verdicts)
        assert report.tp + report.fp + report.fn + report.tn == n
        if report.tp + report.fp > 0:
            assert abs(report.precision - report.tp / (report.tp + report.fp)) \
                < 1e-12
        if report.tp + report.fn > 0:
            assert abs(report.recall - report.tp / (report.tp + report.fn)) \
                < 1e-12
        if report.f1_defined:
            harmonic = 2 * report.precision * report.recall / \
                (report.precision + report.recall)
            assert abs(report.f1 - harmonic) < 1e-12
        else:
            assert report.f1 == 0.0
        checked += 1
    verdict(9, checked == 1000,
            f"precision/recall/F1 identities and count conservation hold on "
            f"{checked} random verdict sets (tolerance 1e-12)")


# ---------------------------------------------------------------------------
# Criterion 10: training determinism


def test_criterion_10_training_determinism(tmp_path_factory):
    root = tmp_path_factory.mktemp("determinism_corpus")
    corpusgen.toy_corpus(root, problems=4, fragments_per_problem=6, seed=77)
    out_dir = tmp_path_factory.mktemp("determinism_out")
    results = []
    for run in ("one", "two"):
        ckpt = out_dir / f"{run}.ckpt"
        rc = cc.main([
            "train", "--data", str(root), "--out", str(ckpt),
            "--epochs", "3", "--lr", "0.01", "--seed", "17",
            "--optimizer", "adaptive", "--dim", "8", "--slices", "2",
            "--kernels", "6", "--kernel-len", "2", "--pad-len", "32",
            "--top-vocab", "16",
        ])
        assert rc == 0
        history = (out_dir / f"{run}.ckpt.loss.txt").read_bytes()
        results.append((ckpt.read_bytes(), history))
    same_ckpt = results[0][0] == results[1][0]
    same_history = results[0][1] == results[1][1]
    verdict(10, same_ckpt and same_history,
            f"two identically seeded training runs: checkpoints bitwise "
            f"equal = {same_ckpt}, loss histories bitwise equal = "
            f"{same_history}")
