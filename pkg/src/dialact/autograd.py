"""Dense-tensor reverse-mode automatic differentiation on a recorded tape.

Everything is 64-bit float. A ``Tape`` is an eager, per-step execution
context: operations append a record (inputs, output, backward closure) in
execution order, so the record list is already topologically sorted and
``backward`` is a single reverse sweep. Gradients accumulate into
``Tensor.grad``; the caller zeroes them between optimization steps.

The module also owns the parameter registry (named tensors plus the
per-parameter squared-gradient and EMA shadow buffers used by training),
the finite-difference gradient checker, and the binary checkpoint format.

Checkpoint layout (little-endian, stable across releases):

    magic   4 bytes  b"DACT"
    version uint32   currently 1
    count   uint32   number of tensors
    then per tensor:
        name_len uint16
        name     utf-8 bytes
        ndim     uint8
        dims     ndim * uint32
        values   prod(dims) * float64, row-major
"""

from __future__ import annotations

import struct

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ParamRegistry",
    "GradCheckReport",
    "ShapeError",
    "tensor_op",
    "backward",
    "grad_check",
    "matmul",
    "add",
    "sub",
    "mul",
    "concat",
    "tanh",
    "sigmoid",
    "gather",
    "pick",
    "gather_pairs",
    "conv1d",
    "max_over_time",
    "dropout",
    "softmax",
    "logsumexp",
    "exp",
    "log",
    "reduce_sum",
    "reshape",
    "transpose_last",
    "select",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = b"DACT"
CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    """Raised when operand shapes do not conform to an op's contract."""


class Tensor:
    """A dense float64 array, optionally carrying a gradient."""

    __slots__ = ("data", "requires_grad", "grad", "_tape")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Arithmetic sugar; constants are wrapped as non-grad tensors.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class _Record:
    __slots__ = ("op", "output", "backward_fn")

    def __init__(self, op, output, backward_fn):
        self.op = op
        self.output = output
        self.backward_fn = backward_fn


_ACTIVE_TAPE = None


class Tape:
    """Recorded-operation context; one single-threaded execution per tape."""

    def __init__(self):
        self.records = []

    def __enter__(self):
        global _ACTIVE_TAPE
        if _ACTIVE_TAPE is not None:
            raise RuntimeError("a tape is already active; tapes do not nest")
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = None
        return False

    def clear(self):
        self.records.clear()

    def backward(self, loss):
        """Reverse sweep from a scalar loss; accumulates into .grad fields."""
        if loss.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
        if not self.records:
            raise RuntimeError("tape is empty; nothing to differentiate")
        loss.accumulate_grad(np.ones_like(loss.data))
        for rec in reversed(self.records):
            g = rec.output.grad
            if g is not None:
                rec.backward_fn(g)


def backward(loss):
    """Run the reverse sweep on the tape that recorded ``loss``."""
    if loss._tape is None:
        raise RuntimeError("loss was not recorded on any tape")
    loss._tape.backward(loss)


def _as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _record(op, inputs, out_data, backward_fn):
    """Make the output tensor; append a record iff a tape is live and needed."""
    out = Tensor(out_data)
    tape = _ACTIVE_TAPE
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._tape = tape
        tape.records.append(_Record(op, out, backward_fn))
    return out


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    out_data = np.matmul(a.data, b.data)

    def bwd(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a.accumulate_grad(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b.accumulate_grad(_unbroadcast(gb, b.shape))

    return _record("matmul", (a, b), out_data, bwd)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out_data = a.data + b.data
    except ValueError as e:
        raise ShapeError(f"add shapes do not broadcast: {a.shape} + {b.shape}") from e

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return _record("add", (a, b), out_data, bwd)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out_data = a.data - b.data
    except ValueError as e:
        raise ShapeError(f"sub shapes do not broadcast: {a.shape} - {b.shape}") from e

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.shape))

    return _record("sub", (a, b), out_data, bwd)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out_data = a.data * b.data
    except ValueError as e:
        raise ShapeError(f"mul shapes do not broadcast: {a.shape} * {b.shape}") from e

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return _record("mul", (a, b), out_data, bwd)


def concat(tensors, axis):
    tensors = [_as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t.accumulate_grad(g[tuple(idx)])

    return _record("concat", tuple(tensors), out_data, bwd)


def tanh(x):
    x = _as_tensor(x)
    out_data = np.tanh(x.data)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * (1.0 - out_data * out_data))

    return _record("tanh", (x,), out_data, bwd)


def sigmoid(x):
    x = _as_tensor(x)
    # Stable piecewise form; avoids exp overflow for large |x|.
    d = x.data
    out_data = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * out_data * (1.0 - out_data))

    return _record("sigmoid", (x,), out_data, bwd)


def gather(table, indices):
    """Row lookup: out[..., :] = table[indices[...], :]."""
    table = _as_tensor(table)
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError(
            f"gather index out of range: [{idx.min()}, {idx.max()}] for table with {table.shape[0]} rows"
        )
    out_data = table.data[idx]

    def bwd(g):
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, idx.reshape(-1), g.reshape(-1, *table.shape[1:]))
            table.accumulate_grad(gt)

    return _record("gather", (table,), out_data, bwd)


def pick(x, indices):
    """Pick one entry along the last axis: out[...] = x[..., indices[...]]."""
    x = _as_tensor(x)
    idx = np.asarray(indices)
    if idx.shape != x.shape[:-1]:
        raise ShapeError(f"pick index shape {idx.shape} must match {x.shape[:-1]}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[-1]):
        raise IndexError(f"pick index out of range for last axis of size {x.shape[-1]}")
    out_data = np.take_along_axis(x.data, idx[..., None], axis=-1)[..., 0]

    def bwd(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            # one target per position along the picked axis, so no collisions
            np.put_along_axis(gx, idx[..., None], g[..., None], axis=-1)
            x.accumulate_grad(gx)

    return _record("pick", (x,), out_data, bwd)


def gather_pairs(m, rows, cols):
    """out[...] = m[rows[...], cols[...]] for a 2-d table ``m``."""
    m = _as_tensor(m)
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    out_data = m.data[rows, cols]

    def bwd(g):
        if m.requires_grad:
            gm = np.zeros_like(m.data)
            np.add.at(gm, (rows.reshape(-1), cols.reshape(-1)), g.reshape(-1))
            m.accumulate_grad(gm)

    return _record("gather_pairs", (m,), out_data, bwd)


def conv1d(x, weight, bias, width):
    """Valid 1-d convolution over axis 1.

    x: (N, L, C_in); weight: (width * C_in, F), laid out position-major;
    bias: (F,). Output (N, L - width + 1, F).
    """
    x, weight, bias = _as_tensor(x), _as_tensor(weight), _as_tensor(bias)
    n, length, c_in = x.shape
    if length < width:
        raise ShapeError(f"conv1d input length {length} shorter than filter width {width}")
    if weight.shape[0] != width * c_in:
        raise ShapeError(f"conv1d weight rows {weight.shape[0]} != width*C_in {width * c_in}")
    l_out = length - width + 1
    # windows: (N, L_out, width, C_in) -> columns (N, L_out, width*C_in)
    win = np.lib.stride_tricks.sliding_window_view(x.data, width, axis=1)
    col = np.ascontiguousarray(np.swapaxes(win, 2, 3)).reshape(n, l_out, width * c_in)
    out_data = col @ weight.data + bias.data

    def bwd(g):
        if bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=(0, 1)))
        if weight.requires_grad:
            gw = col.reshape(-1, width * c_in).T @ g.reshape(-1, g.shape[-1])
            weight.accumulate_grad(gw)
        if x.requires_grad:
            gcol = (g @ weight.data.T).reshape(n, l_out, width, c_in)
            gx = np.zeros_like(x.data)
            for k in range(width):
                gx[:, k : k + l_out, :] += gcol[:, :, k, :]
            x.accumulate_grad(gx)

    return _record("conv1d", (x, weight, bias), out_data, bwd)


def max_over_time(x):
    """Max-pool over axis 1 of (N, L, F); ties route to the first position."""
    x = _as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"max_over_time expects (N, L, F), got {x.shape}")
    arg = np.argmax(x.data, axis=1)
    out_data = np.take_along_axis(x.data, arg[:, None, :], axis=1)[:, 0, :]

    def bwd(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.put_along_axis(gx, arg[:, None, :], g[:, None, :], axis=1)
            x.accumulate_grad(gx)

    return _record("max_over_time", (x,), out_data, bwd)


def dropout(x, rate, rng, train):
    """Inverted dropout: kept activations scale by 1/(1-rate); identity at eval."""
    x = _as_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    out_data = x.data * mask

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * mask)

    return _record("dropout", (x,), out_data, bwd)


def softmax(x, axis=-1):
    x = _as_tensor(x)
    if np.isnan(x.data).any():
        raise ValueError("softmax received NaN input")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        if x.requires_grad:
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            x.accumulate_grad(out_data * (g - inner))

    return _record("softmax", (x,), out_data, bwd)


def logsumexp(x, axis=-1):
    x = _as_tensor(x)
    m = x.data.max(axis=axis, keepdims=True)
    out_keep = m + np.log(np.exp(x.data - m).sum(axis=axis, keepdims=True))
    out_data = np.squeeze(out_keep, axis=axis)

    def bwd(g):
        if x.requires_grad:
            w = np.exp(x.data - out_keep)
            x.accumulate_grad(np.expand_dims(g, axis) * w)

    return _record("logsumexp", (x,), out_data, bwd)


def exp(x):
    x = _as_tensor(x)
    out_data = np.exp(x.data)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g * out_data)

    return _record("exp", (x,), out_data, bwd)


def log(x):
    x = _as_tensor(x)
    out_data = np.log(x.data)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g / x.data)

    return _record("log", (x,), out_data, bwd)


def reduce_sum(x, axis=None, keepdims=False):
    x = _as_tensor(x)
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if x.requires_grad:
            if axis is None:
                x.accumulate_grad(np.broadcast_to(g, x.shape).copy())
            else:
                ge = g if keepdims else np.expand_dims(g, axis)
                x.accumulate_grad(np.broadcast_to(ge, x.shape).copy())

    return _record("reduce_sum", (x,), out_data, bwd)


def reshape(x, shape):
    x = _as_tensor(x)
    out_data = x.data.reshape(shape)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(g.reshape(x.shape))

    return _record("reshape", (x,), out_data, bwd)


def transpose_last(x):
    """Swap the last two axes."""
    x = _as_tensor(x)
    out_data = np.swapaxes(x.data, -1, -2)

    def bwd(g):
        if x.requires_grad:
            x.accumulate_grad(np.swapaxes(g, -1, -2))

    return _record("transpose_last", (x,), out_data, bwd)


def select(x, index, axis):
    """Index one slice along ``axis``, dropping that axis."""
    x = _as_tensor(x)
    if not 0 <= index < x.shape[axis]:
        raise IndexError(f"select index {index} out of range for axis {axis} of {x.shape}")
    out_data = np.take(x.data, index, axis=axis)

    def bwd(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            idx = [slice(None)] * x.ndim
            idx[axis] = index
            gx[tuple(idx)] = g
            x.accumulate_grad(gx)

    return _record("select", (x,), out_data, bwd)


_OP_DISPATCH = {
    "matmul": lambda inputs, attrs: matmul(*inputs),
    "add": lambda inputs, attrs: add(*inputs),
    "mul": lambda inputs, attrs: mul(*inputs),
    "concat": lambda inputs, attrs: concat(inputs, axis=attrs["axis"]),
    "tanh": lambda inputs, attrs: tanh(*inputs),
    "sigmoid": lambda inputs, attrs: sigmoid(*inputs),
    "gather": lambda inputs, attrs: gather(inputs[0], attrs["indices"]),
    "conv1d": lambda inputs, attrs: conv1d(*inputs, width=attrs["width"]),
    "max_over_time": lambda inputs, attrs: max_over_time(*inputs),
    "dropout": lambda inputs, attrs: dropout(
        inputs[0], attrs["rate"], attrs["rng"], attrs["train"]
    ),
}


def tensor_op(kind, inputs, **attrs):
    """Uniform entry point over the primitive kinds; see each op for contracts."""
    if kind not in _OP_DISPATCH:
        raise ValueError(f"unknown tensor_op kind: {kind!r}")
    return _OP_DISPATCH[kind](inputs, attrs)


# ---------------------------------------------------------------------------
# parameter registry
# ---------------------------------------------------------------------------


class ParamRegistry:
    """Named parameters plus the optimizer-side buffers that shadow them.

    ``sq_accum`` holds the per-element running sum of squared gradients;
    ``ema`` holds the exponential moving-average shadow, initialized to the
    initial parameter values. ``frozen_rows`` lists row indices whose
    gradient is masked to keep them pinned (padding rows).
    """

    def __init__(self):
        self.params = {}
        self.sq_accum = {}
        self.ema = {}
        self.frozen_rows = {}

    def add(self, name, value, frozen_rows=None):
        if name in self.params:
            raise ValueError(f"duplicate parameter name: {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self.params[name] = t
        self.sq_accum[name] = np.zeros_like(t.data)
        self.ema[name] = t.data.copy()
        if frozen_rows is not None:
            self.frozen_rows[name] = np.asarray(frozen_rows, dtype=np.int64)
        return t

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def names(self):
        return list(self.params)

    def zero_grads(self):
        for t in self.params.values():
            t.grad = None

    def mask_frozen_grads(self):
        for name, rows in self.frozen_rows.items():
            g = self.params[name].grad
            if g is not None:
                g[rows] = 0.0

    def trainable_mask(self, name):
        """Boolean mask of elements that actually train (frozen rows excluded)."""
        mask = np.ones(self.params[name].shape, dtype=bool)
        rows = self.frozen_rows.get(name)
        if rows is not None:
            mask[rows] = False
        return mask

    def state_dict(self):
        return {name: t.data.copy() for name, t in self.params.items()}

    def ema_dict(self):
        return {name: v.copy() for name, v in self.ema.items()}

    def load_state_dict(self, state):
        for name, value in state.items():
            if name not in self.params:
                raise KeyError(f"unknown parameter in state: {name!r}")
            if self.params[name].shape != value.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: have {self.params[name].shape}, got {value.shape}"
                )
            self.params[name].data = value.astype(np.float64).copy()

    class _EmaSwap:
        def __init__(self, registry):
            self.registry = registry
            self.saved = None

        def __enter__(self):
            self.saved = {n: t.data for n, t in self.registry.params.items()}
            for n, t in self.registry.params.items():
                t.data = self.registry.ema[n]
            return self.registry

        def __exit__(self, exc_type, exc, tb):
            for n, t in self.registry.params.items():
                t.data = self.saved[n]
            return False

    def using_ema(self):
        """Context manager: evaluate with EMA shadows in place of raw weights."""
        return ParamRegistry._EmaSwap(self)


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


class GradCheckReport:
    """Per-parameter worst relative error between analytic and numeric grads."""

    def __init__(self, tol):
        self.tol = tol
        self.entries = []  # (name, max_rel_err, n_checked)

    def record(self, name, max_rel_err, n_checked):
        self.entries.append((name, max_rel_err, n_checked))

    @property
    def passed(self):
        return all(err <= self.tol for _, err, _ in self.entries)

    def failures(self):
        return [(n, e) for n, e, _ in self.entries if e > self.tol]

    def summary(self):
        lines = []
        for name, err, n in self.entries:
            status = "ok" if err <= self.tol else "FAIL"
            lines.append(f"{status:4s} {name:32s} max_rel_err={err:.3e} ({n} elements)")
        lines.append(f"gradcheck {'PASSED' if self.passed else 'FAILED'} at tol {self.tol:g}")
        return "\n".join(lines)


def _rel_err(a, b, floor):
    return abs(a - b) / max(abs(a), abs(b), floor)


def grad_check(closure, registry, eps=1e-4, tol=1e-4, max_per_tensor=50, seed=0, floor=1e-3):
    """Compare analytic gradients of ``closure()`` against central differences.

    The closure must build and return a scalar loss tensor when called under
    an active tape, and must be deterministic (dropout off, fixed inputs).
    Frozen (pinned) rows are skipped: their gradient is masked by contract,
    so they are constants rather than parameters. Up to ``max_per_tensor``
    elements are sampled per parameter.

    The error denominator is floored at ``floor``: gradients below that
    magnitude are compared absolutely at tol*floor, which sits safely above
    the resolution of a central difference in float64 (truncation plus
    rounding is roughly 1e-9..1e-8 absolute at eps=1e-4 on O(10) losses,
    so genuinely near-zero gradients would otherwise fail on pure noise).
    """
    base1 = _loss_value(closure)
    base2 = _loss_value(closure)
    if base1 != base2:
        raise RuntimeError(
            f"closure is not deterministic: two forward passes gave {base1!r} and {base2!r}"
        )

    registry.zero_grads()
    with Tape() as tape:
        loss = closure()
    tape.backward(loss)
    registry.mask_frozen_grads()

    rng = np.random.default_rng(seed)
    report = GradCheckReport(tol)
    for name in registry.names():
        t = registry.params[name]
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        candidates = np.flatnonzero(registry.trainable_mask(name).reshape(-1))
        if candidates.size == 0:
            continue
        if candidates.size > max_per_tensor:
            chosen = rng.choice(candidates, size=max_per_tensor, replace=False)
        else:
            chosen = candidates
        flat = t.data.reshape(-1)
        worst = 0.0
        for j in sorted(int(c) for c in chosen):
            orig = flat[j]
            flat[j] = orig + eps
            up = _loss_value(closure)
            flat[j] = orig - eps
            down = _loss_value(closure)
            flat[j] = orig
            numeric = (up - down) / (2.0 * eps)
            worst = max(worst, _rel_err(analytic.reshape(-1)[j], numeric, floor))
        report.record(name, worst, len(chosen))
    return report


def _loss_value(closure):
    return float(closure().data)


# ---------------------------------------------------------------------------
# checkpoint io
# ---------------------------------------------------------------------------


def save_checkpoint(path, tensors):
    """Write named float64 arrays in the documented binary layout."""
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(tensors)))
        for name, value in tensors.items():
            raw = name.encode("utf-8")
            arr = np.ascontiguousarray(value, dtype="<f8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<I", dim))
            f.write(arr.tobytes())


def load_checkpoint(path):
    """Read a checkpoint back into a name -> float64 ndarray dict."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file: bad magic {magic!r}")
        (version,) = struct.unpack("<I", f.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (count,) = struct.unpack("<I", f.read(4))
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", f.read(2))
            name = f.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = tuple(struct.unpack("<I", f.read(4))[0] for _ in range(ndim))
            n_values = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(8 * n_values), dtype="<f8").reshape(shape)
            tensors[name] = data.astype(np.float64).copy()
    return tensors
