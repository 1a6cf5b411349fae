"""Minimal dense numeric layer: tensors, deterministic RNG, gradient checker.

Two interchangeable kernel backends live below this module: a Cython
extension (``_ckernel``) and a pure-Python fallback (``pykernel``). The
compiled one is picked at import when available; ``EVENTCLONE_PURE_PYTHON=1``
or :func:`use_backend` forces the fallback. Both produce bitwise-identical
results.

Tensors are immutable by convention: every public operation returns a fresh
tensor and never mutates its inputs, so values can be shared freely across
threads. The one sanctioned exception is :func:`finite_diff_grad`, which
perturbs tensor storage in place and restores it before returning.
"""

import math
import os
from array import array

from . import pykernel as _pykernel

try:
    from . import _ckernel as _ckernel
except ImportError:
    _ckernel = None

_impl = _pykernel if (_ckernel is None or os.environ.get("EVENTCLONE_PURE_PYTHON")) else _ckernel

_MASK64 = (1 << 64) - 1

# Debug mode re-validates finiteness after every public op.
_debug_finite = bool(os.environ.get("EVENTCLONE_DEBUG_FINITE"))


class ShapeError(ValueError):
    """Operand shapes do not agree."""


def active():
    """Return the kernel module currently in use."""
    return _impl


def backend_name():
    return _impl.BACKEND_NAME


def use_backend(name):
    """Select 'c' or 'python' kernels; returns the previous backend name.

    Intended for benchmarks and backend-equivalence tests.
    """
    global _impl
    prev = _impl.BACKEND_NAME
    if name == "python":
        _impl = _pykernel
    elif name == "c":
        if _ckernel is None:
            raise RuntimeError("compiled kernel not available")
        _impl = _ckernel
    else:
        raise ValueError(f"unknown backend {name!r}")
    return prev


def set_debug_finite(flag):
    global _debug_finite
    _debug_finite = bool(flag)


def _size_of(shape):
    n = 1
    for s in shape:
        n *= s
    return n


class DenseTensor:
    """Row-major float64 tensor of rank 1 to 3.

    ``data`` is a flat buffer (array('d') or a writable float64 memoryview
    over one, which lets model parameters expose packed storage without
    copying).
    """

    __slots__ = ("shape", "data")

    def __init__(self, shape, data):
        shape = tuple(int(s) for s in shape)
        if not 1 <= len(shape) <= 3:
            raise ShapeError(f"rank must be 1..3, got shape {shape}")
        if any(s <= 0 for s in shape):
            raise ShapeError(f"dimensions must be positive, got {shape}")
        if not isinstance(data, (array, memoryview)):
            data = array("d", data)
        if len(data) != _size_of(shape):
            raise ShapeError(
                f"data length {len(data)} does not match shape {shape}")
        for x in data:
            if not math.isfinite(x):
                raise ValueError("non-finite value in tensor data")
        self.shape = shape
        self.data = data

    @classmethod
    def _raw(cls, shape, data):
        # Internal fast path: trusted shape/data, validation skipped.
        t = object.__new__(cls)
        t.shape = tuple(shape)
        t.data = data
        return t

    @classmethod
    def zeros(cls, shape):
        return cls._raw(tuple(int(s) for s in shape),
                        array("d", bytes(8 * _size_of(shape))))

    @property
    def size(self):
        return len(self.data)

    def copy(self):
        return DenseTensor._raw(self.shape, array("d", self.data))

    def tolist(self):
        return list(self.data)

    def __eq__(self, other):
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.shape == other.shape and list(self.data) == list(other.data)

    def __repr__(self):
        return f"DenseTensor(shape={self.shape})"


def _check_finite(t):
    if _debug_finite:
        for x in t.data:
            if not math.isfinite(x):
                raise ValueError("non-finite value produced by op")
    return t


class Rng:
    """Deterministic counter-style PRNG (splitmix64).

    The draw sequence depends only on the seed, on every platform, so any
    stochastic step threaded through an Rng is exactly reproducible.
    """

    algorithm = "splitmix64"

    __slots__ = ("seed", "_state", "_spare")

    def __init__(self, seed):
        self.seed = int(seed)
        self._state = int(seed) & _MASK64
        self._spare = None

    def next_u64(self):
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform01(self):
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniform(self, lo, hi):
        return lo + (hi - lo) * self.uniform01()

    def normal(self, mu=0.0, sigma=1.0):
        if self._spare is not None:
            g, self._spare = self._spare, None
            return mu + sigma * g
        while True:
            u = self.uniform01()
            if u > 0.0:
                break
        v = self.uniform01()
        radius = math.sqrt(-2.0 * math.log(u))
        theta = 2.0 * math.pi * v
        self._spare = radius * math.sin(theta)
        return mu + sigma * radius * math.cos(theta)

    def randint(self, n):
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return min(int(self.uniform01() * n), n - 1)

    def shuffle(self, seq):
        for i in range(len(seq) - 1, 0, -1):
            j = self.randint(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def choice(self, seq):
        return seq[self.randint(len(seq))]


def matvec(mat, vec):
    """Matrix (m, n) times vector (n) -> vector (m)."""
    if len(mat.shape) != 2 or len(vec.shape) != 1 or mat.shape[1] != vec.shape[0]:
        raise ShapeError(f"matvec: {mat.shape} x {vec.shape}")
    m, n = mat.shape
    out = DenseTensor.zeros((m,))
    _impl.matvec(m, n, mat.data, vec.data, out.data)
    return _check_finite(out)


def matmul(a, b):
    """Matrix (m, n) times matrix (n, p) -> matrix (m, p)."""
    if len(a.shape) != 2 or len(b.shape) != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} x {b.shape}")
    m, n = a.shape
    p = b.shape[1]
    out = DenseTensor.zeros((m, p))
    _impl.matmul(m, n, p, a.data, b.data, out.data)
    return _check_finite(out)


def _binary_elementwise(u, v):
    if u.shape != v.shape:
        raise ShapeError(f"elementwise: {u.shape} vs {v.shape}")


def sigmoid(v):
    out = DenseTensor.zeros(v.shape)
    _impl.sigmoid_vec(v.size, v.data, out.data)
    return _check_finite(out)


def tanh(v):
    out = DenseTensor.zeros(v.shape)
    _impl.tanh_vec(v.size, v.data, out.data)
    return _check_finite(out)


def hadamard(u, v):
    _binary_elementwise(u, v)
    out = DenseTensor.zeros(u.shape)
    _impl.hadamard_vec(u.size, u.data, v.data, out.data)
    return _check_finite(out)


def scale_add(alpha, u, beta, v):
    """alpha*u + beta*v, elementwise."""
    _binary_elementwise(u, v)
    out = DenseTensor.zeros(u.shape)
    _impl.scale_add_vec(u.size, float(alpha), u.data, float(beta), v.data,
                        out.data)
    return _check_finite(out)


def concat(u, v):
    if len(u.shape) != 1 or len(v.shape) != 1:
        raise ShapeError(f"concat needs vectors: {u.shape}, {v.shape}")
    return DenseTensor._raw((u.size + v.size,),
                            array("d", u.data) + array("d", v.data))


def dot(u, v):
    _binary_elementwise(u, v)
    return _impl.dot(u.size, u.data, v.data)


def init_params(shape, rng, scheme="uniform"):
    """Draw a fresh tensor: 'uniform' is +-sqrt(6/(fan_in+fan_out)),
    'normal' is N(0, 0.02)."""
    shape = tuple(int(s) for s in shape)
    n = _size_of(shape)
    data = array("d", bytes(8 * n))
    if scheme == "uniform":
        fan_in = shape[-1]
        fan_out = shape[-2] if len(shape) >= 2 else shape[-1]
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        for i in range(n):
            data[i] = rng.uniform(-bound, bound)
    elif scheme == "normal":
        for i in range(n):
            data[i] = rng.normal(0.0, 0.02)
    else:
        raise ValueError(f"unknown init scheme {scheme!r}")
    return DenseTensor._raw(shape, data)


def fill_uniform(buf, lo, hi, rng):
    """Seed an existing flat buffer with uniform draws (parameter packing)."""
    for i in range(len(buf)):
        buf[i] = rng.uniform(lo, hi)


def finite_diff_grad(f, tensors, epsilon=1e-5):
    """Central-difference gradient of scalar ``f()`` w.r.t. every entry of
    every tensor in ``tensors``.

    ``f`` must read the live tensor storage; entries are perturbed in place
    and restored bit-exactly afterwards.
    """
    grads = []
    for t in tensors:
        g = DenseTensor.zeros(t.shape)
        buf = t.data
        for i in range(len(buf)):
            old = buf[i]
            buf[i] = old + epsilon
            f_plus = f()
            buf[i] = old - epsilon
            f_minus = f()
            buf[i] = old
            g.data[i] = (f_plus - f_minus) / (2.0 * epsilon)
        grads.append(g)
    return grads
