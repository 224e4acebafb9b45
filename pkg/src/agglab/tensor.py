"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tape records every operation in execution order (inputs always precede
outputs, so the record is already topologically sorted). backward() walks
the record once in reverse and accumulates vector-Jacobian products into
the .grad buffers of the tensors that participated.

Tensors created without a tape are constants: they can appear in any
expression but never receive gradients.
"""

import numpy as np

__all__ = [
    "Tape", "Tensor", "backward", "add", "sub", "scale", "elementwise_mul", "matmul",
    "activation", "softmax_rows", "vec_stack", "vec_unstack", "outer",
    "concat", "sum_rows", "mean_rows", "add_bias", "sum_all", "abs_", "log",
    "gather_rows", "scatter_add_rows", "segment_softmax", "expand_outer",
    "transpose", "slice_rows", "row_scale", "colvec_mul", "finite_diff_check",
]


class Tensor:
    """A dense float64 array, optionally attached to an autodiff tape."""

    __slots__ = ("data", "grad", "tape", "node_id")

    def __init__(self, data, tape=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.tape = tape
        self.node_id = tape._register() if tape is not None else None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, taped={self.tape is not None})"


class Tape:
    """Ordered record of operations for one forward/backward pass.

    Not thread-safe: a tape and the tensors on it belong to a single
    owner. Constants (tensors without a tape) are immutable by convention
    and may be shared freely.
    """

    def __init__(self):
        self._ops = []      # (out Tensor, [(in Tensor, vjp), ...]) in execution order
        self._num_nodes = 0

    def _register(self):
        nid = self._num_nodes
        self._num_nodes += 1
        return nid

    def param(self, data):
        """Create a trainable tensor on this tape."""
        return Tensor(data, tape=self)

    def watch(self, tensor):
        """Attach an existing tensor (e.g. a persistent parameter) to this tape.

        Training loops build a fresh tape per step and watch the model
        parameters so the op record never grows across steps.
        """
        tensor.tape = self
        tensor.node_id = self._register()
        return tensor

    def record(self, out, pairs):
        self._ops.append((out, pairs))

    def backward(self, loss):
        """Fill .grad on every tensor reachable from the scalar loss.

        Gradients accumulate: call zero_grad() on parameters between
        passes. Repeated backward after zeroing reproduces identical
        gradients (the traversal order is the fixed op record).
        """
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        if loss.tape is not self:
            raise ValueError("loss does not belong to this tape")
        if loss.grad is None:
            loss.grad = np.ones_like(loss.data)
        else:
            loss.grad = loss.grad + 1.0
        for out, pairs in reversed(self._ops):
            g = out.grad
            if g is None:
                continue
            for tensor, vjp in pairs:
                contrib = vjp(g)
                if tensor.grad is None:
                    tensor.grad = np.array(contrib)  # copy: vjp may return a view
                else:
                    tensor.grad += contrib


def backward(loss):
    """Run the backward pass of the tape the scalar loss lives on."""
    if loss.tape is None:
        raise ValueError("loss is a constant: nothing to differentiate")
    loss.tape.backward(loss)


def _result_tape(tensors):
    tape = None
    for t in tensors:
        if t.tape is not None:
            if tape is None:
                tape = t.tape
            elif tape is not t.tape:
                raise ValueError("operands belong to different tapes")
    return tape


def _make(data, inputs, pairs):
    """Build the result tensor; record it if any input is on a tape."""
    tape = _result_tape(inputs)
    out = Tensor(data, tape=tape)
    if tape is not None:
        tape.record(out, [(t, vjp) for t, vjp in pairs if t.tape is not None])
    return out


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ValueError(f"add: shape mismatch {a.data.shape} vs {b.data.shape}")
    return _make(a.data + b.data, (a, b), [(a, lambda g: g), (b, lambda g: g)])


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ValueError(f"sub: shape mismatch {a.data.shape} vs {b.data.shape}")
    return _make(a.data - b.data, (a, b), [(a, lambda g: g), (b, lambda g: -g)])


def scale(a, c):
    """Multiply by a python float constant."""
    a = _as_tensor(a)
    c = float(c)
    return _make(a.data * c, (a,), [(a, lambda g: g * c)])


def elementwise_mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ValueError(f"elementwise_mul: shape mismatch {a.data.shape} vs {b.data.shape}")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b), [(a, lambda g: g * bd), (b, lambda g: g * ad)])


def matmul(a, b):
    """Matrix product of 2-D tensors; backward is G·Bᵀ and Aᵀ·G."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul: shape mismatch {a.data.shape} vs {b.data.shape}")
    ad, bd = a.data, b.data
    return _make(ad @ bd, (a, b),
                 [(a, lambda g: g @ bd.T), (b, lambda g: ad.T @ g)])


_ACTIVATIONS = ("tanh", "relu", "leakyrelu", "sigmoid")


def activation(x, kind, alpha=0.2):
    """Elementwise nonlinearity. relu subgradient at 0 is taken as 0.

    alpha is the negative-side slope for leakyrelu (0.2 by default, the
    common attention-layer choice).
    """
    x = _as_tensor(x)
    xd = x.data
    if kind == "tanh":
        y = np.tanh(xd)
        return _make(y, (x,), [(x, lambda g: g * (1.0 - y * y))])
    if kind == "relu":
        mask = (xd > 0).astype(np.float64)
        return _make(xd * mask, (x,), [(x, lambda g: g * mask)])
    if kind == "leakyrelu":
        slope = np.where(xd > 0, 1.0, alpha)
        return _make(xd * slope, (x,), [(x, lambda g: g * slope)])
    if kind == "sigmoid":
        y = 1.0 / (1.0 + np.exp(-np.clip(xd, -500, 500)))
        return _make(y, (x,), [(x, lambda g: g * y * (1.0 - y))])
    raise ValueError(f"unknown activation kind {kind!r}, expected one of {_ACTIVATIONS}")


def softmax_rows(x):
    """Row-wise softmax with max subtraction; each row sums to 1."""
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ValueError(f"softmax_rows: need 2-D input, got shape {x.data.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        return y * (g - dot)

    return _make(y, (x,), [(x, vjp)])


def vec_stack(x):
    """Column-stack a (s, d) matrix into a (s·d, 1) column vector.

    Entry j·s + i of the result is x[i, j] (column-major), so the inverse
    reshape is exact down to the bit.
    """
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ValueError(f"vec_stack: need 2-D input, got shape {x.data.shape}")
    s, d = x.data.shape
    y = x.data.reshape(s * d, 1, order="F")
    return _make(y, (x,), [(x, lambda g: g.reshape(s, d, order="F"))])


def vec_unstack(v, rows, cols):
    """Inverse of vec_stack: (rows·cols, 1) column vector back to (rows, cols)."""
    v = _as_tensor(v)
    if v.data.size != rows * cols:
        raise ValueError(f"vec_unstack: size {v.data.size} != {rows}x{cols}")
    y = v.data.reshape(rows, cols, order="F")
    return _make(y, (v,), [(v, lambda g: g.reshape(rows * cols, 1, order="F"))])


def outer(m, h):
    """Outer product m·hᵀ of two column vectors; result has rank <= 1."""
    m, h = _as_tensor(m), _as_tensor(h)
    if m.data.ndim != 2 or m.data.shape[1] != 1 or h.data.ndim != 2 or h.data.shape[1] != 1:
        raise ValueError(f"outer: need column vectors, got {m.data.shape} and {h.data.shape}")
    md, hd = m.data, h.data
    return _make(md @ hd.T, (m, h),
                 [(m, lambda g: g @ hd), (h, lambda g: g.T @ md)])


def concat(tensors, axis=0):
    """Concatenate 2-D tensors along the given axis."""
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat: empty input list")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)
    pairs = []
    for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
        if axis == 0:
            pairs.append((t, lambda g, lo=lo, hi=hi: g[lo:hi]))
        else:
            pairs.append((t, lambda g, lo=lo, hi=hi: g[:, lo:hi]))
    return _make(data, tensors, pairs)


def sum_rows(x):
    """Sum over rows: (m, n) -> (1, n)."""
    x = _as_tensor(x)
    m = x.data.shape[0]
    y = x.data.sum(axis=0, keepdims=True)
    return _make(y, (x,), [(x, lambda g: np.repeat(g, m, axis=0))])


def mean_rows(x):
    """Mean over rows: (m, n) -> (1, n)."""
    x = _as_tensor(x)
    m = x.data.shape[0]
    y = x.data.mean(axis=0, keepdims=True)
    return _make(y, (x,), [(x, lambda g: np.repeat(g, m, axis=0) / m)])


def add_bias(x, b):
    """Add a (1, n) bias row to every row of a (m, n) matrix."""
    x, b = _as_tensor(x), _as_tensor(b)
    if x.data.ndim != 2 or b.data.shape != (1, x.data.shape[1]):
        raise ValueError(f"add_bias: shape mismatch {x.data.shape} vs {b.data.shape}")
    return _make(x.data + b.data, (x, b),
                 [(x, lambda g: g), (b, lambda g: g.sum(axis=0, keepdims=True))])


def sum_all(x):
    """Sum every entry into a (1, 1) scalar."""
    x = _as_tensor(x)
    shape = x.data.shape
    y = np.array([[x.data.sum()]])
    return _make(y, (x,), [(x, lambda g: np.full(shape, g[0, 0]))])


def abs_(x):
    """Elementwise absolute value; subgradient at 0 is 0."""
    x = _as_tensor(x)
    sign = np.sign(x.data)
    return _make(np.abs(x.data), (x,), [(x, lambda g: g * sign)])


def log(x):
    """Elementwise natural log; caller guarantees positive entries."""
    x = _as_tensor(x)
    xd = x.data
    return _make(np.log(xd), (x,), [(x, lambda g: g / xd)])


def gather_rows(x, idx):
    """Select rows x[idx]; backward scatter-adds into the source rows."""
    x = _as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    m = x.data.shape[0]

    def vjp(g):
        out = np.zeros_like(x.data)
        np.add.at(out, idx, g)
        return out

    return _make(x.data[idx], (x,), [(x, vjp)])


def scatter_add_rows(x, idx, num_out):
    """Sum rows of x into num_out output rows grouped by idx."""
    x = _as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    y = np.zeros((num_out, x.data.shape[1]))
    np.add.at(y, idx, x.data)
    return _make(y, (x,), [(x, lambda g: g[idx])])


def segment_softmax(logits, segments, num_segments):
    """Softmax of a (k, c) logit matrix within row groups given by segments.

    Each column is normalized independently over the rows of its segment,
    with per-segment max subtraction for stability.
    """
    logits = _as_tensor(logits)
    segments = np.asarray(segments, dtype=np.intp)
    ld = logits.data
    if ld.ndim != 2:
        raise ValueError(f"segment_softmax: need 2-D logits, got shape {ld.shape}")
    seg_max = np.full((num_segments, ld.shape[1]), -np.inf)
    np.maximum.at(seg_max, segments, ld)
    e = np.exp(ld - seg_max[segments])
    seg_sum = np.zeros((num_segments, ld.shape[1]))
    np.add.at(seg_sum, segments, e)
    y = e / seg_sum[segments]

    def vjp(g):
        dot = np.zeros((num_segments, ld.shape[1]))
        np.add.at(dot, segments, g * y)
        return y * (g - dot[segments])

    return _make(y, (logits,), [(logits, vjp)])


def expand_outer(coeff, feats):
    """Batched vec(m·hᵀ): rows (k, s) x (k, d) -> (k, s·d).

    Output column j·s + i holds coeff[:, i] * feats[:, j], the column-major
    flattening of each per-row outer product (matches vec_stack).
    """
    coeff, feats = _as_tensor(coeff), _as_tensor(feats)
    cd, fd = coeff.data, feats.data
    if cd.ndim != 2 or fd.ndim != 2 or cd.shape[0] != fd.shape[0]:
        raise ValueError(f"expand_outer: shape mismatch {cd.shape} vs {fd.shape}")
    k, s = cd.shape
    d = fd.shape[1]
    y = (fd[:, :, None] * cd[:, None, :]).reshape(k, d * s)

    def vjp_coeff(g):
        return (g.reshape(k, d, s) * fd[:, :, None]).sum(axis=1)

    def vjp_feats(g):
        return (g.reshape(k, d, s) * cd[:, None, :]).sum(axis=2)

    return _make(y, (coeff, feats), [(coeff, vjp_coeff), (feats, vjp_feats)])


def transpose(x):
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ValueError(f"transpose: need 2-D input, got shape {x.data.shape}")
    return _make(x.data.T.copy(), (x,), [(x, lambda g: g.T)])


def slice_rows(x, lo, hi):
    """Rows [lo, hi) of a 2-D tensor; backward pads the complement with zeros."""
    x = _as_tensor(x)
    m = x.data.shape[0]
    if not 0 <= lo <= hi <= m:
        raise ValueError(f"slice_rows: [{lo}, {hi}) out of range for {m} rows")

    def vjp(g):
        out = np.zeros_like(x.data)
        out[lo:hi] = g
        return out

    return _make(x.data[lo:hi].copy(), (x,), [(x, vjp)])


def row_scale(x, weights):
    """Scale each row of x by a fixed (non-trainable) per-row weight."""
    x = _as_tensor(x)
    w = np.asarray(weights, dtype=np.float64).reshape(-1, 1)
    if w.shape[0] != x.data.shape[0]:
        raise ValueError(f"row_scale: {w.shape[0]} weights for {x.data.shape[0]} rows")
    return _make(x.data * w, (x,), [(x, lambda g: g * w)])


def colvec_mul(x, c):
    """Multiply a (m, n) tensor by a (m, 1) column, broadcast across columns."""
    x, c = _as_tensor(x), _as_tensor(c)
    if c.data.shape != (x.data.shape[0], 1):
        raise ValueError(f"colvec_mul: shape mismatch {x.data.shape} vs {c.data.shape}")
    xd, cd = x.data, c.data
    return _make(xd * cd, (x, c),
                 [(x, lambda g: g * cd),
                  (c, lambda g: (g * xd).sum(axis=1, keepdims=True))])


def finite_diff_check(f, theta, eps=1e-6):
    """Max relative error between autodiff and central differences.

    f() must rebuild its graph each call (typically on a fresh tape that
    watches theta), read theta.data, and return a scalar Tensor. The
    relative error per coordinate uses a max(1, |analytic|) denominator.
    """
    if not (1e-8 <= eps <= 1e-4):
        raise ValueError(f"eps {eps} outside [1e-8, 1e-4]")
    theta.zero_grad()
    loss = f()
    loss.tape.backward(loss)
    analytic = theta.grad.copy()

    flat = theta.data.ravel()
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = f().data.item()
        flat[i] = orig - eps
        f_minus = f().data.item()
        flat[i] = orig
        fd = (f_plus - f_minus) / (2.0 * eps)
        an = analytic.ravel()[i]
        err = abs(fd - an) / max(1.0, abs(an))
        if err > worst:
            worst = err
    return worst
