"""Parameter learning: triplet hinge loss, negative sampling, analytic
gradients composed in reverse dependency order, and the optimizer loop.

Gradients are hand-written per-layer backward functions chained along the
reverse of the embedding schedule (see ``model.backward_tape``): a per-operator
tensor accumulates one contribution from every node where that operator
occurs, across all three fragments of a triplet. Everything is seeded, so a
fixed seed reproduces checkpoints and loss history bit for bit.
"""

import math
from array import array
from dataclasses import dataclass

from . import model as mdl
from . import numkernel as nk
from .model import FlatGraph, GradStore, ModelParams


class DegenerateVector(Exception):
    """A similarity was requested for a vector with (near-)zero norm."""


class DatasetError(Exception):
    pass


class NonFiniteLoss(Exception):
    pass


_NORM_FLOOR = 1e-12


def cosine_similarity(u, v):
    """u.v / (|u||v|), clamped into [-1, 1] against rounding."""
    if u.shape != v.shape:
        raise nk.ShapeError(f"cosine: {u.shape} vs {v.shape}")
    impl = nk.active()
    uu = impl.dot(u.size, u.data, u.data)
    vv = impl.dot(v.size, v.data, v.data)
    if uu < _NORM_FLOOR ** 2 or vv < _NORM_FLOOR ** 2:
        raise DegenerateVector(
            f"norms {math.sqrt(uu):g}, {math.sqrt(vv):g}")
    s = impl.dot(u.size, u.data, v.data) / math.sqrt(uu * vv)
    return max(-1.0, min(1.0, s))


def hinge_loss(va, vp, vn):
    """max(0, 1 - sim(anchor, positive) + sim(anchor, negative))."""
    return max(0.0, 1.0 - cosine_similarity(va, vp) + cosine_similarity(va, vn))


def sample_negatives(dataset, anchor, rng, count=1):
    """Uniform draws among training fragments whose label differs from the
    anchor's; deterministic for a fixed rng state."""
    items = dataset.train_items()
    anchor_label = None
    for fid, label, _ in items:
        if fid == anchor:
            anchor_label = label
            break
    if anchor_label is None:
        raise DatasetError(f"unknown anchor fragment {anchor!r}")
    pool = [fid for fid, label, _ in items if label != anchor_label]
    if not pool:
        raise DatasetError("dataset has a single problem label")
    return [pool[rng.randint(len(pool))] for _ in range(count)]


def _cos_parts(u, v):
    impl = nk.active()
    nu = math.sqrt(impl.dot(u.size, u.data, u.data))
    nv = math.sqrt(impl.dot(v.size, v.data, v.data))
    if nu < _NORM_FLOOR or nv < _NORM_FLOOR:
        raise DegenerateVector(f"norms {nu:g}, {nv:g}")
    s = impl.dot(u.size, u.data, v.data) / (nu * nv)
    return s, nu, nv


def _dcos_into(u, v, s, nu, nv, coeff, acc):
    # d s / d u = v/(nu*nv) - s*u/nu^2, scaled by coeff, accumulated.
    impl = nk.active()
    tmp = array("d", bytes(8 * u.size))
    impl.scale_add_vec(u.size, 1.0 / (nu * nv), v.data, -s / (nu * nu),
                       u.data, tmp)
    impl.axpy(u.size, coeff, tmp, acc)


def _as_flat(graph_or_flat, config):
    if isinstance(graph_or_flat, FlatGraph):
        return graph_or_flat
    return mdl.flatten_graph(graph_or_flat, config)


def backward(anchor, positive, negative, params, config=None, grads=None):
    """Loss and analytic gradients for one triplet.

    Accepts graphs or pre-flattened graphs. When the hinge is satisfied the
    contribution is exactly zero: nothing touches ``grads``.
    """
    config = config or params.config
    if grads is None:
        grads = GradStore(params)
    ta = mdl.forward_tape(_as_flat(anchor, config), params)
    tp = mdl.forward_tape(_as_flat(positive, config), params)
    tn = mdl.forward_tape(_as_flat(negative, config), params)
    qa, qp, qn = ta.q, tp.q, tn.q
    s_ap, na, np_ = _cos_parts(qa, qp)
    s_an, _, nn_ = _cos_parts(qa, qn)
    loss = 1.0 - s_ap + s_an
    if loss <= 0.0:
        return 0.0, grads
    n = qa.size
    dqa = array("d", bytes(8 * n))
    dqp = array("d", bytes(8 * n))
    dqn = array("d", bytes(8 * n))
    _dcos_into(qa, qp, s_ap, na, np_, -1.0, dqa)
    _dcos_into(qa, qn, s_an, na, nn_, +1.0, dqa)
    _dcos_into(qp, qa, s_ap, np_, na, -1.0, dqp)
    _dcos_into(qn, qa, s_an, nn_, na, +1.0, dqn)
    mdl.backward_tape(ta, dqa, params, grads)
    mdl.backward_tape(tp, dqp, params, grads)
    mdl.backward_tape(tn, dqn, params, grads)
    return loss, grads


def triplet_loss(anchor, positive, negative, params, config=None):
    """Forward-only counterpart of :func:`backward` (same computation path)."""
    config = config or params.config
    qa = mdl.program_vector(_as_flat(anchor, config), params)
    qp = mdl.program_vector(_as_flat(positive, config), params)
    qn = mdl.program_vector(_as_flat(negative, config), params)
    return hinge_loss(qa, qp, qn)


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 30
    batch_size: int = 8
    seed: int = 0
    optimizer: str = "sgd"      # "sgd" | "adaptive"
    margin: float = 1.0         # fixed by the loss definition
    negatives_per_anchor: int = 1

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning rate must be >= 0")
        if self.margin != 1.0:
            raise ValueError("margin is fixed at 1.0")
        if self.optimizer not in ("sgd", "adaptive"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.epochs < 0 or self.batch_size <= 0 or \
                self.negatives_per_anchor <= 0:
            raise ValueError("bad training configuration")


class SgdOptimizer:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        if self.lr == 0.0:
            return
        impl = nk.active()
        by_name = dict(params.named_tensors())
        for name, grad in grads.items():
            tensor = by_name[name]
            impl.axpy(tensor.size, -self.lr, grad.data, tensor.data)


class AdaptiveOptimizer:
    """Adam-style per-parameter step sizes; moments advance only for tensors
    that received gradient in the batch, which keeps untouched operators
    bitwise unchanged."""

    B1 = 0.9
    B2 = 0.999
    EPS = 1e-8

    def __init__(self, lr):
        self.lr = lr
        self.m = {}
        self.v = {}
        self.t = {}

    def step(self, params, grads):
        if self.lr == 0.0:
            return
        by_name = dict(params.named_tensors())
        for name, grad in grads.items():
            tensor = by_name[name]
            n = tensor.size
            if name not in self.m:
                self.m[name] = array("d", bytes(8 * n))
                self.v[name] = array("d", bytes(8 * n))
                self.t[name] = 0
            self.t[name] += 1
            t = self.t[name]
            m, v = self.m[name], self.v[name]
            c1 = 1.0 - self.B1 ** t
            c2 = 1.0 - self.B2 ** t
            gd = grad.data
            td = tensor.data
            for i in range(n):
                g = gd[i]
                m[i] = self.B1 * m[i] + (1.0 - self.B1) * g
                v[i] = self.B2 * v[i] + (1.0 - self.B2) * g * g
                td[i] -= self.lr * (m[i] / c1) / (math.sqrt(v[i] / c2) + self.EPS)


def make_optimizer(train_config):
    if train_config.optimizer == "sgd":
        return SgdOptimizer(train_config.learning_rate)
    return AdaptiveOptimizer(train_config.learning_rate)


def train(dataset, model_config, train_config, checkpoint_path=None,
          progress=None):
    """Fit parameters on the dataset's training split.

    Returns (params, loss_history) where loss_history holds one mean
    per-triplet loss per epoch. The checkpoint file, when requested, is
    rewritten after every epoch.
    """
    rng = nk.Rng(train_config.seed)
    params = ModelParams.init(model_config, rng)
    items = dataset.train_items()
    if not items:
        raise DatasetError("empty training split")
    flats = {fid: mdl.flatten_graph(graph, model_config)
             for fid, _, graph in items}
    by_label = {}
    for fid, label, _ in items:
        by_label.setdefault(label, []).append(fid)
    if len(by_label) < 2:
        raise DatasetError("training requires at least two problem labels")
    optimizer = make_optimizer(train_config)
    history = []
    anchors = [fid for fid, _, _ in items]
    for epoch in range(train_config.epochs):
        order = list(anchors)
        rng.shuffle(order)
        total = 0.0
        count = 0
        label_of = {fid: label for fid, label, _ in items}
        for start in range(0, len(order), train_config.batch_size):
            batch = order[start:start + train_config.batch_size]
            grads = GradStore(params)
            for anchor in batch:
                mates = [fid for fid in by_label[label_of[anchor]]
                         if fid != anchor]
                positive = mates[rng.randint(len(mates))]
                negatives = sample_negatives(
                    dataset, anchor, rng, train_config.negatives_per_anchor)
                for negative in negatives:
                    loss, _ = backward(flats[anchor], flats[positive],
                                       flats[negative], params, model_config,
                                       grads)
                    total += loss
                    count += 1
            optimizer.step(params, grads)
        mean_loss = total / count if count else 0.0
        if not math.isfinite(mean_loss):
            raise NonFiniteLoss(f"epoch {epoch}: loss {mean_loss}")
        history.append(mean_loss)
        if checkpoint_path is not None:
            mdl.save_checkpoint(params, checkpoint_path)
        if progress is not None:
            progress(epoch, mean_loss)
    return params, history
