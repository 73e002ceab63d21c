"""Dense float64 tensors with tape-based reverse-mode differentiation.

The tape is distributed: every tensor produced by an operation keeps
references to its parents plus a backward closure, and carries a global
creation sequence number, so reverse creation order over the reachable
subgraph is a valid (and deterministic) topological order for the
backward sweep. Gradients accumulate additively into ``.grad``; callers
zero them between iterations.

Broadcasting is deliberately restricted to scalar-with-tensor. Anything
else needs an explicit reshape or one of the structured row ops below.
Tensor ``.data`` buffers are never mutated in place anywhere in the
package; updates rebind ``.data``.
"""

import itertools

import numpy as np

from . import kernels
from .errors import ShapeError

_SEQ = itertools.count()


def _wrap(data):
    if isinstance(data, np.ndarray):
        if data.dtype != np.float64:
            data = data.astype(np.float64)
        return data
    return np.array(data, dtype=np.float64)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_seq")

    def __init__(self, data, requires_grad=False):
        self.data = _wrap(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self._seq = next(_SEQ)

    @staticmethod
    def _op(data, parents):
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        out._parents = parents if out.requires_grad else ()
        out._backward = None
        out._seq = next(_SEQ)
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    # ---- backward sweep ----------------------------------------------

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable requires_grad leaf.

        self must be a single-element tensor. Intermediate (non-leaf)
        grads are transient per sweep; leaf grads accumulate across
        sweeps until zeroed.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.data.shape}")
        nodes = []
        visited = {id(self)}
        stack = [self]
        while stack:
            t = stack.pop()
            if t._backward is not None:
                nodes.append(t)
            for p in t._parents:
                if id(p) not in visited:
                    visited.add(id(p))
                    stack.append(p)
        for t in nodes:
            t.grad = None
        _accum(self, np.ones_like(self.data))
        nodes.sort(key=lambda t: t._seq, reverse=True)
        for t in nodes:
            if t.grad is not None:
                t._backward()

    # ---- arithmetic ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, float)):
            out = Tensor._op(self.data + other, (self,))
            if out.requires_grad:
                def _bw():
                    _accum(self, out.grad)
                out._backward = _bw
            return out
        _check_binary(self, other, "add")
        out = Tensor._op(self.data + other.data, (self, other))
        if out.requires_grad:
            def _bw():
                _accum(self, _fit(out.grad, self.data.shape))
                _accum(other, _fit(out.grad, other.data.shape))
            out._backward = _bw
        return out

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        out = Tensor._op(-self.data, (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, -out.grad)
            out._backward = _bw
        return out

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self.__add__(-other)
        _check_binary(self, other, "sub")
        out = Tensor._op(self.data - other.data, (self, other))
        if out.requires_grad:
            def _bw():
                _accum(self, _fit(out.grad, self.data.shape))
                _accum(other, _fit(-out.grad, other.data.shape))
            out._backward = _bw
        return out

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            out = Tensor._op(self.data * other, (self,))
            if out.requires_grad:
                def _bw():
                    _accum(self, out.grad * other)
                out._backward = _bw
            return out
        _check_binary(self, other, "mul")
        out = Tensor._op(self.data * other.data, (self, other))
        if out.requires_grad:
            def _bw():
                _accum(self, _fit(out.grad * other.data, self.data.shape))
                _accum(other, _fit(out.grad * self.data, other.data.shape))
            out._backward = _bw
        return out

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return self.__mul__(1.0 / other)
        _check_binary(self, other, "div")
        out = Tensor._op(self.data / other.data, (self, other))
        if out.requires_grad:
            def _bw():
                _accum(self, _fit(out.grad / other.data, self.data.shape))
                _accum(other, _fit(-out.grad * self.data / (other.data * other.data),
                                   other.data.shape))
            out._backward = _bw
        return out

    def __rtruediv__(self, other):
        return (self ** -1.0).__mul__(other)

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise ShapeError("only scalar exponents are supported")
        out = Tensor._op(self.data ** p, (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, out.grad * p * self.data ** (p - 1))
            out._backward = _bw
        return out

    def __matmul__(self, other):
        return matmul(self, other)

    # ---- elementwise unary --------------------------------------------

    def exp(self):
        out = Tensor._op(np.exp(self.data), (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, out.grad * out.data)
            out._backward = _bw
        return out

    def log(self):
        out = Tensor._op(np.log(self.data), (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, out.grad / self.data)
            out._backward = _bw
        return out

    def sqrt(self):
        out = Tensor._op(np.sqrt(self.data), (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, out.grad * 0.5 / out.data)
            out._backward = _bw
        return out

    def tanh(self):
        out = Tensor._op(np.tanh(self.data), (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, out.grad * (1.0 - out.data * out.data))
            out._backward = _bw
        return out

    def leaky_relu(self, slope=0.01):
        if slope < 0:
            raise ShapeError(f"leaky_relu slope must be >= 0, got {slope}")
        mask = self.data > 0
        out = Tensor._op(np.where(mask, self.data, slope * self.data), (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, out.grad * np.where(mask, 1.0, slope))
            out._backward = _bw
        return out

    def maximum(self, floor):
        """Elementwise max(x, floor) for a scalar floor (the usual eps guard)."""
        mask = self.data > floor
        out = Tensor._op(np.where(mask, self.data, floor), (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, out.grad * mask)
            out._backward = _bw
        return out

    def smooth_l1(self, beta):
        """Elementwise smooth-L1: 0.5*x^2/beta if |x| < beta else |x| - 0.5*beta."""
        if beta <= 0:
            raise ShapeError(f"smooth_l1 beta must be > 0, got {beta}")
        a = np.abs(self.data)
        inner = a < beta
        out = Tensor._op(np.where(inner, 0.5 * self.data * self.data / beta, a - 0.5 * beta),
                         (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, out.grad * np.where(inner, self.data / beta, np.sign(self.data)))
            out._backward = _bw
        return out

    # ---- reductions ----------------------------------------------------

    def sum(self, axis=None):
        out = Tensor._op(np.asarray(self.data.sum(axis=axis)), (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, _unreduce(out.grad, self.data.shape, axis))
            out._backward = _bw
        return out

    def mean(self, axis=None):
        n = self.data.size if axis is None else _axis_size(self.data.shape, axis)
        out = Tensor._op(np.asarray(self.data.mean(axis=axis)), (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, _unreduce(out.grad / n, self.data.shape, axis))
            out._backward = _bw
        return out

    # ---- shape ----------------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        src = self.data.shape
        out = Tensor._op(self.data.reshape(shape), (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, out.grad.reshape(src))
            out._backward = _bw
        return out

    def flatten(self):
        return self.reshape(self.data.size)

    def permute(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = np.argsort(axes)
        out = Tensor._op(np.transpose(self.data, axes), (self,))
        if out.requires_grad:
            def _bw():
                _accum(self, np.transpose(out.grad, inv))
            out._backward = _bw
        return out

    def transpose(self):
        if self.data.ndim != 2:
            raise ShapeError(f"transpose() expects a matrix, got shape {self.data.shape}")
        return self.permute(1, 0)

    @property
    def T(self):
        return self.transpose()


# ---- gradient plumbing ---------------------------------------------------


def _accum(t, g):
    if t.requires_grad:
        t.grad = g if t.grad is None else t.grad + g


def _fit(g, shape):
    """Reduce a gradient to a scalar operand's shape (scalar broadcast only)."""
    if g.shape == shape:
        return g
    return np.asarray(g.sum()).reshape(shape)


def _check_binary(a, b, opname):
    if not isinstance(b, Tensor):
        raise ShapeError(f"{opname}: expected Tensor or scalar, got {type(b).__name__}")
    if a.data.shape != b.data.shape and a.data.ndim != 0 and b.data.ndim != 0:
        raise ShapeError(
            f"{opname}: shapes {a.data.shape} and {b.data.shape} do not match "
            "(only scalar broadcasting is supported)"
        )


def _axis_size(shape, axis):
    if isinstance(axis, int):
        return shape[axis]
    n = 1
    for a in axis:
        n *= shape[a]
    return n


def _unreduce(g, src_shape, axis):
    if axis is None:
        return np.broadcast_to(g, src_shape)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(a % len(src_shape) for a in axes)
    keep = [1 if i in axes else s for i, s in enumerate(src_shape)]
    return np.broadcast_to(g.reshape(keep), src_shape)


# ---- linear / structured ops ----------------------------------------------


def matmul(a, b):
    """Matrix product; b may be a vector (treated as a column)."""
    if a.data.ndim != 2:
        raise ShapeError(f"matmul: left operand must be 2-D, got shape {a.data.shape}")
    if b.data.ndim not in (1, 2):
        raise ShapeError(f"matmul: right operand must be 1-D or 2-D, got shape {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree: {a.data.shape} x {b.data.shape}")
    out = Tensor._op(a.data @ b.data, (a, b))
    if out.requires_grad:
        def _bw():
            g = out.grad
            if b.data.ndim == 1:
                _accum(a, np.outer(g, b.data))
                _accum(b, a.data.T @ g)
            else:
                _accum(a, g @ b.data.T)
                _accum(b, a.data.T @ g)
        out._backward = _bw
    return out


def add_rows(y, v):
    """Add scalar v[i] to every element of row i of a matrix y."""
    _check_rows(y, v, "add_rows")
    out = Tensor._op(y.data + v.data[:, None], (y, v))
    if out.requires_grad:
        def _bw():
            _accum(y, out.grad)
            _accum(v, out.grad.sum(axis=1))
        out._backward = _bw
    return out


def mul_rows(y, v):
    """Scale row i of a matrix y by scalar v[i]."""
    _check_rows(y, v, "mul_rows")
    out = Tensor._op(y.data * v.data[:, None], (y, v))
    if out.requires_grad:
        def _bw():
            _accum(y, out.grad * v.data[:, None])
            _accum(v, (out.grad * y.data).sum(axis=1))
        out._backward = _bw
    return out


def add_row_vector(y, b):
    """Add the same length-d vector b to every row of a (rows x d) matrix."""
    if y.data.ndim != 2 or b.data.ndim != 1 or b.data.shape[0] != y.data.shape[1]:
        raise ShapeError(
            f"add_row_vector: got y shape {y.data.shape}, vector shape {b.data.shape}"
        )
    out = Tensor._op(y.data + b.data[None, :], (y, b))
    if out.requires_grad:
        def _bw():
            _accum(y, out.grad)
            _accum(b, out.grad.sum(axis=0))
        out._backward = _bw
    return out


def _check_rows(y, v, opname):
    if y.data.ndim != 2 or v.data.ndim != 1 or v.data.shape[0] != y.data.shape[0]:
        raise ShapeError(
            f"{opname}: got matrix shape {getattr(y.data, 'shape', None)}, "
            f"row vector shape {getattr(v.data, 'shape', None)}"
        )


def concat(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat: need at least one tensor")
    out = Tensor._op(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    if out.requires_grad:
        sizes = [t.data.shape[axis] for t in tensors]
        splits = np.cumsum(sizes)[:-1]
        def _bw():
            for t, piece in zip(tensors, np.split(out.grad, splits, axis=axis)):
                _accum(t, piece)
        out._backward = _bw
    return out


def stop_gradient(x):
    """Value-identical tensor through which backward propagates nothing."""
    return Tensor(x.data, requires_grad=False)


# ---- spatial ops ------------------------------------------------------------


def conv2d(x, kernel, stride=1, pad=None):
    """Cross-correlate a (c_in, h, w) input with a (c_out, c_in, k, k) kernel."""
    if x.data.ndim != 3:
        raise ShapeError(f"conv2d: input must be (c, h, w), got shape {x.data.shape}")
    if kernel.data.ndim != 4 or kernel.data.shape[2] != kernel.data.shape[3]:
        raise ShapeError(f"conv2d: kernel must be (c_out, c_in, k, k), got {kernel.data.shape}")
    if kernel.data.shape[1] != x.data.shape[0]:
        raise ShapeError(
            f"conv2d: kernel expects {kernel.data.shape[1]} input channels, "
            f"input has shape {x.data.shape}"
        )
    k = kernel.data.shape[2]
    if k % 2 == 0:
        raise ShapeError(f"conv2d: kernel size must be odd, got {k}")
    if pad is None:
        pad = (k - 1) // 2
    c_out = kernel.data.shape[0]
    xd = np.ascontiguousarray(x.data)
    cols = kernels.im2col(xd, k, stride, pad)
    w2 = kernel.data.reshape(c_out, -1)
    oh = (x.data.shape[1] + 2 * pad - k) // stride + 1
    ow = (x.data.shape[2] + 2 * pad - k) // stride + 1
    out = Tensor._op(np.asarray(w2 @ cols).reshape(c_out, oh, ow), (x, kernel))
    if out.requires_grad:
        xshape = x.data.shape
        kshape = kernel.data.shape
        def _bw():
            g2 = out.grad.reshape(c_out, -1)
            if kernel.requires_grad:
                _accum(kernel, np.asarray(g2 @ cols.T).reshape(kshape))
            if x.requires_grad:
                gcols = np.ascontiguousarray(w2.T @ g2)
                _accum(x, np.asarray(kernels.col2im(gcols, xshape, k, stride, pad)))
        out._backward = _bw
    return out


def upsample_nearest_2x(x):
    """Nearest-neighbour 2x upsampling of a (c, h, w) tensor."""
    if x.data.ndim != 3:
        raise ShapeError(f"upsample_nearest_2x: input must be (c, h, w), got {x.data.shape}")
    out = Tensor._op(np.repeat(np.repeat(x.data, 2, axis=1), 2, axis=2), (x,))
    if out.requires_grad:
        c, h, w = x.data.shape
        def _bw():
            _accum(x, out.grad.reshape(c, h, 2, w, 2).sum(axis=(2, 4)))
        out._backward = _bw
    return out


# ---- composite helpers -------------------------------------------------------


def l2_norm(x, axis):
    """Row/axis L2 norms, sqrt(sum(x^2, axis))."""
    return ((x * x).sum(axis=axis)).sqrt()


def cosine_similarity(a, b, eps=1e-8):
    """Cosine similarity of two tensors flattened to vectors, eps-guarded."""
    af = a.flatten()
    bf = b.flatten()
    na = (af * af).sum().sqrt().maximum(eps)
    nb = (bf * bf).sum().sqrt().maximum(eps)
    return (af * bf).sum() / (na * nb)


def leaky_relu(x, slope=0.01):
    return x.leaky_relu(slope)
