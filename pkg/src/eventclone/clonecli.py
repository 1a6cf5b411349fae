"""Dataset handling, clone classification, evaluation and the command line.

Fragments live one per file under ``<root>/<problem-id>/<fragment>.c``; every
same-problem pair counts as a clone pair and cross-problem pairs as
non-clones. Classification thresholds cosine similarity; two independently
trained models can be fused with a convex score combination.

Embedding a corpus and scoring pairs are read-only over the model parameters
and safe to parallelize per fragment; report assembly stays serial.
"""

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass

from . import cparse
from . import eventgraph
from . import model as mdl
from . import train as trn
from .cparse import LexError, ParseError, UnsupportedConstruct
from .eventgraph import FormatError, GraphError
from .model import CheckpointError, ModelConfig
from .numkernel import Rng, ShapeError
from .train import (DatasetError, DegenerateVector, NonFiniteLoss,
                    cosine_similarity)

logger = logging.getLogger(__name__)

DEFAULT_THETA = 0.70        # single model
DEFAULT_FUSED_THETA = 0.50  # two-model fusion
DEFAULT_BETA = 0.60


class EmptyEval(Exception):
    pass


def classify_pair(u, v, theta):
    """True iff cosine similarity is strictly greater than theta."""
    return cosine_similarity(u, v) > theta


def fuse_scores(s1, s2, beta):
    """Convex combination beta*s1 + (1-beta)*s2 of two models' scores."""
    return beta * s1 + (1.0 - beta) * s2


@dataclass(frozen=True)
class PairVerdict:
    pair: tuple
    similarity: float
    predicted: bool
    label: bool


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    theta: float
    beta: float | None = None
    precision_defined: bool = True
    recall_defined: bool = True
    f1_defined: bool = True

    def line(self):
        beta = f"{self.beta:.4f}" if self.beta is not None else "-"
        return (f"{self.theta:.4f} {beta} {self.tp} {self.fp} {self.fn} "
                f"{self.tn} {self.precision:.6f} {self.recall:.6f} "
                f"{self.f1:.6f}")


def evaluate(verdicts, theta=0.0, beta=None):
    """Counts plus precision/recall/F1; zero-denominator metrics report 0
    with their defined-flag cleared."""
    if not verdicts:
        raise EmptyEval("no verdicts to evaluate")
    tp = fp = fn = tn = 0
    for v in verdicts:
        if v.predicted and v.label:
            tp += 1
        elif v.predicted and not v.label:
            fp += 1
        elif not v.predicted and v.label:
            fn += 1
        else:
            tn += 1
    p_def = tp + fp > 0
    r_def = tp + fn > 0
    precision = tp / (tp + fp) if p_def else 0.0
    recall = tp / (tp + fn) if r_def else 0.0
    f_def = p_def and r_def and (precision + recall) > 0
    f1 = 2 * precision * recall / (precision + recall) if f_def else 0.0
    return EvalReport(tp, fp, fn, tn, precision, recall, f1, theta, beta,
                      p_def, r_def, f_def)


# ---------------------------------------------------------------------------
# Dataset


@dataclass(frozen=True)
class Fragment:
    id: str
    label: str
    path: str
    graph: object


class CloneDataset:
    def __init__(self, fragments, split, skipped, pair_mode, seed, ratio):
        self.fragments = fragments
        self.split = split              # fragment id -> "train" | "test"
        self.skipped = skipped          # list of (path, reason)
        self.pair_mode = pair_mode
        self.seed = seed
        self.ratio = ratio
        self._by_id = {f.id: f for f in fragments}

    def items(self, split=None):
        return [(f.id, f.label, f.graph) for f in self.fragments
                if split is None or self.split[f.id] == split]

    def train_items(self):
        return self.items("train")

    def test_items(self):
        return self.items("test")

    def labels(self):
        seen = []
        for f in self.fragments:
            if f.label not in seen:
                seen.append(f.label)
        return seen

    def fragment(self, fid):
        return self._by_id[fid]


def load_dataset(root, split_ratio=0.7, seed=0, pair_mode="unordered"):
    """Parse every fragment under ``root/<problem>/<file>.c`` and split each
    problem at the given ratio with a seeded shuffle. Unparseable fragments
    are skipped and counted, never silently included."""
    if pair_mode not in ("unordered", "ordered-with-self"):
        raise ValueError(f"unknown pair mode {pair_mode!r}")
    if not os.path.isdir(root):
        raise DatasetError(f"dataset root {root!r} is not a directory")
    problems = sorted(
        d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d)))
    if not problems:
        raise DatasetError(f"dataset root {root!r} has no problem directories")
    fragments = []
    skipped = []
    split = {}
    rng = Rng(seed)
    for problem in problems:
        pdir = os.path.join(root, problem)
        files = sorted(f for f in os.listdir(pdir) if f.endswith(".c"))
        parsed = []
        for fname in files:
            path = os.path.join(pdir, fname)
            with open(path, "r", encoding="utf-8") as fh:
                source = fh.read()
            try:
                graph = eventgraph.graph_from_source(source)
                if graph.statement_count == 0:
                    raise GraphError("fragment produced no events")
            except (LexError, ParseError, UnsupportedConstruct, GraphError) as exc:
                skipped.append((path, str(exc)))
                continue
            parsed.append(Fragment(f"{problem}/{fname}", problem, path, graph))
        if len(parsed) < 2:
            raise DatasetError(
                f"problem {problem!r} has {len(parsed)} usable fragments; "
                f"need at least 2")
        order = list(range(len(parsed)))
        rng.shuffle(order)
        n_train = int(round(len(parsed) * split_ratio))
        n_train = max(1, min(len(parsed) - 1, n_train))
        train_set = set(order[:n_train])
        for idx, frag in enumerate(parsed):
            fragments.append(frag)
            split[frag.id] = "train" if idx in train_set else "test"
    if skipped:
        logger.warning("skipped %d unparseable fragment(s)", len(skipped))
    return CloneDataset(fragments, split, skipped, pair_mode, seed, split_ratio)


def make_pairs(dataset, split="test", negative_count=None, seed=0):
    """Labeled pairs for evaluation: positives are same-problem pairs
    (unordered, or ordered-with-self per the dataset's pair mode), negatives
    are cross-problem pairs, optionally down-sampled to ``negative_count``."""
    items = dataset.items(split)
    ids = [fid for fid, _, _ in items]
    label_of = {fid: label for fid, label, _ in items}
    positives = []
    negatives = []
    if dataset.pair_mode == "ordered-with-self":
        for a in ids:
            for b in ids:
                if label_of[a] == label_of[b]:
                    positives.append((a, b))
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                if label_of[a] != label_of[b]:
                    negatives.append((a, b))
    else:
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                if label_of[a] == label_of[b]:
                    positives.append((a, b))
                else:
                    negatives.append((a, b))
    if negative_count is not None and negative_count < len(negatives):
        rng = Rng(seed)
        rng.shuffle(negatives)
        negatives = sorted(negatives[:negative_count])
    return [(a, b, True) for a, b in positives] + \
           [(a, b, False) for a, b in negatives]


def embed_fragments(dataset, params, split=None):
    """Program vector per fragment id; each fragment embedded exactly once."""
    vectors = {}
    for fid, _, graph in dataset.items(split):
        vectors[fid] = mdl.embed_program_fast(graph, params)
    return vectors


def pair_similarities(pairs, vectors):
    return [cosine_similarity(vectors[a], vectors[b]) for a, b, _ in pairs]


def verdicts_at(pairs, sims, theta):
    return [PairVerdict((a, b), s, s > theta, label)
            for (a, b, label), s in zip(pairs, sims)]


def sweep(theta_grid, beta_grid, pairs, sims1, sims2=None):
    """One report per grid point; similarity lists are computed once by the
    caller and reused across the whole grid."""
    if not theta_grid:
        raise ValueError("empty theta grid")
    reports = []
    if sims2 is None:
        for theta in theta_grid:
            reports.append(
                evaluate(verdicts_at(pairs, sims1, theta), theta=theta))
        return reports
    if not beta_grid:
        raise ValueError("empty beta grid")
    for beta in beta_grid:
        fused = [fuse_scores(s1, s2, beta) for s1, s2 in zip(sims1, sims2)]
        for theta in theta_grid:
            reports.append(
                evaluate(verdicts_at(pairs, fused, theta), theta=theta,
                         beta=beta))
    return reports


def best_report(reports):
    best = reports[0]
    for report in reports[1:]:
        if report.f1 > best.f1:
            best = report
    return best


def detect(target_vector, corpus_vectors, theta):
    """Corpus fragments at least theta-similar to the target, most similar
    first, ties broken by fragment id."""
    hits = []
    for fid, vec in corpus_vectors:
        sim = cosine_similarity(target_vector, vec)
        if sim >= theta:
            hits.append((fid, sim))
    hits.sort(key=lambda item: (-item[1], item[0]))
    return hits


# ---------------------------------------------------------------------------
# Command line


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _parse_grid(spec):
    parts = spec.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise ValueError(f"grid must be 'start:stop:step', got {spec!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        raise ValueError("grid step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(max(count, 1))]


def _model_config_from_args(args):
    return ModelConfig(dim=args.dim, slices=args.slices, kernels=args.kernels,
                       kernel_len=args.kernel_len, pad_len=args.pad_len,
                       top_vocab=args.top_vocab)


def _add_model_config_args(parser):
    parser.add_argument("--dim", type=int, default=ModelConfig.dim)
    parser.add_argument("--slices", type=int, default=ModelConfig.slices)
    parser.add_argument("--kernels", type=int, default=ModelConfig.kernels)
    parser.add_argument("--kernel-len", type=int, default=ModelConfig.kernel_len)
    parser.add_argument("--pad-len", type=int, default=ModelConfig.pad_len)
    parser.add_argument("--top-vocab", type=int, default=ModelConfig.top_vocab)


def _add_dataset_args(parser):
    parser.add_argument("--data", required=True, help="dataset root directory")
    parser.add_argument("--split-ratio", type=float, default=0.7)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--pair-mode", choices=("unordered", "ordered-with-self"),
                        default="unordered")


def build_parser():
    parser = _ArgumentParser(prog="eventclone",
                             description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse-graph", help="fragment -> event dependency graph")
    p.add_argument("file")
    p.add_argument("--emit-ast", action="store_true",
                   help="print the AST instead of the graph")
    p.add_argument("-o", "--out", help="write the graph to this file")

    p = sub.add_parser("train", help="fit a model on a clone dataset")
    _add_dataset_args(p)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--optimizer", choices=("sgd", "adaptive"), default="sgd")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--negatives", type=int, default=1)
    p.add_argument("--loss-out", help="loss history path "
                                      "(default: <out>.loss.txt)")
    _add_model_config_args(p)

    p = sub.add_parser("embed", help="embed one fragment")
    p.add_argument("file")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="write the vector here instead of stdout")

    p = sub.add_parser("detect", help="rank corpus fragments against a target")
    p.add_argument("target")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--theta", type=float, default=DEFAULT_THETA)

    p = sub.add_parser("eval", help="precision/recall/F1 on the test split")
    _add_dataset_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--model2", help="second model for score fusion")
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--theta", type=float)
    p.add_argument("--negative-count", type=int)
    p.add_argument("--record", help="machine-readable report file")
    p.add_argument("--export-vectors", help="write test-fragment vectors here")

    p = sub.add_parser("sweep", help="evaluate over a threshold grid")
    _add_dataset_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--model2")
    p.add_argument("--theta-grid", required=True, help="start:stop:step")
    p.add_argument("--beta-grid", help="start:stop:step (with --model2)")
    p.add_argument("--negative-count", type=int)
    p.add_argument("--record", help="machine-readable report file")
    return parser


def _read_source(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _cmd_parse_graph(args):
    source = _read_source(args.file)
    ast = cparse.parse_source(source)
    if args.emit_ast:
        print(cparse.ast_dump(ast))
    graph = eventgraph.rank_entities(eventgraph.build_event_graph(ast))
    text = eventgraph.serialize_graph(graph)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    elif not args.emit_ast:
        sys.stdout.write(text)
    return 0


def _cmd_train(args):
    dataset = load_dataset(args.data, args.split_ratio, args.seed,
                           args.pair_mode)
    if dataset.skipped:
        print(f"skipped {len(dataset.skipped)} unparseable fragment(s)",
              file=sys.stderr)
    model_config = _model_config_from_args(args)
    train_config = trn.TrainConfig(
        learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
        seed=args.seed, optimizer=args.optimizer,
        negatives_per_anchor=args.negatives)
    def progress(epoch, loss):
        print(f"epoch {epoch}: mean loss {loss:.6f}", file=sys.stderr)
    _, history = trn.train(dataset, model_config, train_config,
                           checkpoint_path=args.out, progress=progress)
    loss_path = args.loss_out or args.out + ".loss.txt"
    with open(loss_path, "w", encoding="utf-8") as fh:
        for epoch, loss in enumerate(history):
            fh.write(f"{epoch} {loss:.12g}\n")
    print(f"checkpoint: {args.out}")
    print(f"loss history: {loss_path}")
    return 0


def _cmd_embed(args):
    params = mdl.load_checkpoint(args.model)
    graph = eventgraph.graph_from_source(_read_source(args.file))
    vec = mdl.embed_program_fast(graph, params)
    lines = "".join(f"{x:.17g}\n" for x in vec.data)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(lines)
    else:
        sys.stdout.write(lines)
    return 0


def _collect_corpus(root):
    paths = []
    for dirpath, _dirnames, filenames in os.walk(root):
        for fname in sorted(filenames):
            if fname.endswith(".c"):
                paths.append(os.path.join(dirpath, fname))
    return sorted(paths)


def _cmd_detect(args):
    params = mdl.load_checkpoint(args.model)
    target_graph = eventgraph.graph_from_source(_read_source(args.target))
    target_vec = mdl.embed_program_fast(target_graph, params)
    corpus_vectors = []
    skipped = 0
    for path in _collect_corpus(args.corpus):
        try:
            graph = eventgraph.graph_from_source(_read_source(path))
            corpus_vectors.append(
                (os.path.relpath(path, args.corpus),
                 mdl.embed_program_fast(graph, params)))
        except (LexError, ParseError, UnsupportedConstruct, GraphError):
            skipped += 1
    if skipped:
        print(f"skipped {skipped} unparseable fragment(s)", file=sys.stderr)
    for fid, sim in detect(target_vec, corpus_vectors, args.theta):
        print(f"{fid}\t{sim:.6f}")
    return 0


def _load_eval_inputs(args):
    dataset = load_dataset(args.data, args.split_ratio, args.seed,
                           args.pair_mode)
    if dataset.skipped:
        print(f"skipped {len(dataset.skipped)} unparseable fragment(s)",
              file=sys.stderr)
    params = mdl.load_checkpoint(args.model)
    pairs = make_pairs(dataset, "test", args.negative_count, args.seed)
    vectors = embed_fragments(dataset, params, "test")
    sims1 = pair_similarities(pairs, vectors)
    sims2 = None
    if args.model2:
        params2 = mdl.load_checkpoint(args.model2)
        vectors2 = embed_fragments(dataset, params2, "test")
        sims2 = pair_similarities(pairs, vectors2)
    return dataset, pairs, vectors, sims1, sims2


def _write_record(path, reports):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# theta beta tp fp fn tn precision recall f1\n")
        for report in reports:
            fh.write(report.line() + "\n")


def _print_report(report):
    beta = f", beta={report.beta:.3f}" if report.beta is not None else ""
    print(f"theta={report.theta:.3f}{beta}")
    print(f"  TP={report.tp} FP={report.fp} FN={report.fn} TN={report.tn}")
    flags = "" if report.precision_defined and report.recall_defined else \
        "  (undefined metrics reported as 0)"
    print(f"  precision={report.precision:.4f} recall={report.recall:.4f} "
          f"f1={report.f1:.4f}{flags}")


def _cmd_eval(args):
    _, pairs, vectors, sims1, sims2 = _load_eval_inputs(args)
    if sims2 is None:
        theta = args.theta if args.theta is not None else DEFAULT_THETA
        scores = sims1
        beta = None
    else:
        theta = args.theta if args.theta is not None else DEFAULT_FUSED_THETA
        beta = args.beta
        scores = [fuse_scores(s1, s2, beta) for s1, s2 in zip(sims1, sims2)]
    report = evaluate(verdicts_at(pairs, scores, theta), theta=theta, beta=beta)
    _print_report(report)
    if args.record:
        _write_record(args.record, [report])
    if args.export_vectors:
        with open(args.export_vectors, "w", encoding="utf-8") as fh:
            for fid in sorted(vectors):
                values = " ".join(f"{x:.17g}" for x in vectors[fid].data)
                fh.write(f"{fid}\t{values}\n")
    return 0


def _cmd_sweep(args):
    _, pairs, _vectors, sims1, sims2 = _load_eval_inputs(args)
    theta_grid = _parse_grid(args.theta_grid)
    beta_grid = _parse_grid(args.beta_grid) if args.beta_grid else \
        ([DEFAULT_BETA] if sims2 is not None else None)
    reports = sweep(theta_grid, beta_grid, pairs, sims1, sims2)
    best = best_report(reports)
    print("# theta beta tp fp fn tn precision recall f1")
    for report in reports:
        marker = "  <- best F1" if report is best else ""
        print(report.line() + marker)
    if args.record:
        _write_record(args.record, reports)
    return 0


_DATA_ERRORS = (LexError, ParseError, UnsupportedConstruct, FormatError,
                GraphError, DatasetError, CheckpointError, EmptyEval,
                FileNotFoundError, IsADirectoryError, NotADirectoryError,
                PermissionError, UnicodeDecodeError)
_NUMERIC_ERRORS = (ShapeError, DegenerateVector, NonFiniteLoss)


def main(argv=None):
    logging.basicConfig(level=logging.WARNING)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    handlers = {
        "parse-graph": _cmd_parse_graph,
        "train": _cmd_train,
        "embed": _cmd_embed,
        "detect": _cmd_detect,
        "eval": _cmd_eval,
        "sweep": _cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except _NUMERIC_ERRORS as exc:
        print(f"eventclone: numeric failure: {exc}", file=sys.stderr)
        return 3
    except _DATA_ERRORS as exc:
        print(f"eventclone: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"eventclone: {exc}", file=sys.stderr)
        return 1


def cli_entry():
    sys.exit(main())


if __name__ == "__main__":
    cli_entry()
