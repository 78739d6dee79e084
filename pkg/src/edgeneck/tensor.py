"""Dense 4-D tensors, the differentiable kernel set, and the reverse-mode tape.

Everything in this library moves through one currency: a contiguous
row-major ``(N, C, H, W)`` float buffer.  All ops are pure functions over
immutable tensors.  While a :class:`Tape` is active, ops whose result
depends on a gradient-carrying tensor append a record; :func:`backward`
replays those records in exact reverse creation order and accumulates
``d(root)/d(leaf)`` into the ``grad`` buffer of every leaf it reaches.

Convolution uses the cross-correlation convention (no kernel flip) and
accumulates each output element in ascending ``(c, ky, kx)`` order, one
rounding per term, so a scalar nested-loop reference summing in the same
order reproduces it bit-for-bit in float64.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError, ShapeError, UsageError

SUPPORTED_DTYPES = (np.float32, np.float64)
DTYPE_NAMES = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64"}


class Tensor:
    """A dense ``(N, C, H, W)`` array with an optional gradient buffer.

    Data is treated as immutable after construction.  Leaf tensors created
    with ``requires_grad=True`` carry a zero-initialized ``grad`` buffer of
    identical dims; :func:`backward` accumulates into it until
    :meth:`zero_grad` is called.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data)
        if arr.ndim != 4:
            raise ContractError(f"tensor data must be 4-D (N,C,H,W), got shape {arr.shape}")
        if arr.dtype.type not in SUPPORTED_DTYPES:
            raise ContractError(f"unsupported element type {arr.dtype}; use float32 or float64")
        if min(arr.shape) < 0:  # numpy cannot actually build these, but keep the contract explicit
            raise ContractError(f"tensor dims must be non-negative, got {arr.shape}")
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if requires_grad else None

    @property
    def dims(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def dtype_name(self):
        return DTYPE_NAMES[self.data.dtype]

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got dims {self.dims}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0

    def __repr__(self):
        shape = "x".join(str(d) for d in self.dims)
        return f"Tensor({shape}, {self.dtype_name}, requires_grad={self.requires_grad})"


def _result(data, requires_grad):
    """Build an op output: gradient flag propagated, grad buffer left unset."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = requires_grad
    out.grad = None
    return out


def tensor(values, dtype=np.float32, requires_grad=False):
    """Build a tensor from nested values, casting to the requested dtype."""
    return Tensor(np.asarray(values, dtype=dtype), requires_grad=requires_grad)


def zeros(dims, dtype=np.float32, requires_grad=False):
    return Tensor(np.zeros(dims, dtype=dtype), requires_grad=requires_grad)


def ones(dims, dtype=np.float32, requires_grad=False):
    return Tensor(np.ones(dims, dtype=dtype), requires_grad=requires_grad)


def full(dims, value, dtype=np.float32, requires_grad=False):
    return Tensor(np.full(dims, value, dtype=dtype), requires_grad=requires_grad)


def ones_like(x):
    return Tensor(np.ones_like(x.data))


def kaiming_uniform(rng, dims, dtype=np.float32):
    """Seeded uniform init in ±sqrt(6/fan_in); fan_in = dims[1]*dims[2]*dims[3]."""
    fan_in = dims[1] * dims[2] * dims[3]
    if fan_in <= 0:
        raise ContractError(f"fan_in must be positive for init, got dims {dims}")
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, dims).astype(dtype)


class Parameter:
    """A named leaf tensor with a persistent, zero-initialized gradient."""

    __slots__ = ("name", "value")

    def __init__(self, name, data):
        self.name = name
        self.value = Tensor(data, requires_grad=True)

    @property
    def dims(self):
        return self.value.dims

    @property
    def grad(self):
        return self.value.grad

    def zero_grad(self):
        self.value.zero_grad()

    def __repr__(self):
        shape = "x".join(str(d) for d in self.dims)
        return f"Parameter({self.name!r}, {shape}, {self.value.dtype_name})"


# ---------------------------------------------------------------------------
# Tape
# ---------------------------------------------------------------------------

@dataclass
class TapeRecord:
    """One recorded op: id, input refs, output ref, saved intermediates."""

    op: str
    inputs: tuple
    output: Tensor
    saved: dict = field(default_factory=dict)


class Tape:
    """Ordered op record for one execution context.

    Use as a context manager; ops executed inside the ``with`` block are
    recorded whenever their output depends on a gradient-carrying tensor.
    """

    def __init__(self):
        self.records = []

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _TAPE_STACK.pop()
        assert popped is self
        return False

    def __len__(self):
        return len(self.records)


_TAPE_STACK = []


def current_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _record(op, inputs, output, **saved):
    tape = current_tape()
    if tape is not None and output.requires_grad:
        tape.records.append(TapeRecord(op, tuple(inputs), output, saved))
    return output


# Branch tracing lets the gradient checker detect probes whose two
# evaluations straddle a non-smooth point (relu kink, pooling argmax flip).
_BRANCH_TRACE = None


@contextlib.contextmanager
def record_branches(sink):
    """Collect branch signatures (relu masks, pool argmax) into ``sink``."""
    global _BRANCH_TRACE
    previous = _BRANCH_TRACE
    _BRANCH_TRACE = sink
    try:
        yield sink
    finally:
        _BRANCH_TRACE = previous


def trace_branch(value):
    """Record one branch decision array if a branch trace is active."""
    if _BRANCH_TRACE is not None:
        _BRANCH_TRACE.append(value)


def branches_equal(a, b):
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# Shape helpers
# ---------------------------------------------------------------------------

def _pair(value, name):
    if isinstance(value, int):
        value = (value, value)
    pair = tuple(int(v) for v in value)
    if len(pair) != 2:
        raise ContractError(f"{name} must be an int or a pair, got {value!r}")
    return pair


@dataclass(frozen=True)
class ConvSpec:
    """Stride / padding / dilation / groups bundle for :func:`conv2d`."""

    stride: tuple = (1, 1)
    padding: tuple = (0, 0)
    dilation: tuple = (1, 1)
    groups: int = 1

    def __post_init__(self):
        object.__setattr__(self, "stride", _pair(self.stride, "stride"))
        object.__setattr__(self, "padding", _pair(self.padding, "padding"))
        object.__setattr__(self, "dilation", _pair(self.dilation, "dilation"))
        if min(self.stride) < 1:
            raise ContractError(f"stride must be >= 1, got {self.stride}")
        if min(self.padding) < 0:
            raise ContractError(f"padding must be >= 0, got {self.padding}")
        if min(self.dilation) < 1:
            raise ContractError(f"dilation must be >= 1, got {self.dilation}")
        if self.groups < 1:
            raise ContractError(f"groups must be >= 1, got {self.groups}")

    def out_hw(self, h, w, kh, kw):
        """Output spatial dims: floor((D + 2p - d*(k-1) - 1)/s) + 1, each >= 0."""
        oh = (h + 2 * self.padding[0] - self.dilation[0] * (kh - 1) - 1) // self.stride[0] + 1
        ow = (w + 2 * self.padding[1] - self.dilation[1] * (kw - 1) - 1) // self.stride[1] + 1
        if oh < 0 or ow < 0:
            raise ShapeError(
                f"convolution output dims ({oh}, {ow}) are negative for input "
                f"({h}, {w}), kernel ({kh}, {kw}), spec {self}"
            )
        return oh, ow


def _same_dtype(*tensors):
    dtypes = {t.dtype for t in tensors if t is not None}
    if len(dtypes) > 1:
        raise ContractError(f"operands must share one element type, got {sorted(map(str, dtypes))}")


def _reduce_broadcast(grad, dims):
    """Sum-reduce a gradient over the axes that were broadcast in forward."""
    axes = tuple(i for i in range(4) if dims[i] == 1 and grad.shape[i] > 1)
    return grad.sum(axis=axes, keepdims=True) if axes else grad


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------

def conv2d(x, weight, bias=None, spec=None):
    """Cross-correlate ``x`` with ``weight`` under ``spec``.

    ``weight`` dims are ``(C_out, C_in/groups, kH, kW)``; an optional bias
    has dims ``(1, C_out, 1, 1)``.  Each output element accumulates its
    terms in ascending ``(c, ky, kx)`` order with one rounding per term.
    """
    spec = spec or ConvSpec()
    _same_dtype(x, weight, bias)
    n, c, h, w = x.dims
    c_out, c_per_group, kh, kw = weight.dims
    if c % spec.groups != 0:
        raise ContractError(f"input channels {c} not divisible by groups {spec.groups}")
    if c_out % spec.groups != 0:
        raise ContractError(f"output channels {c_out} not divisible by groups {spec.groups}")
    if c_per_group != c // spec.groups:
        raise ContractError(
            f"weight in-channel dim {c_per_group} != input channels/groups {c // spec.groups}"
        )
    if bias is not None and bias.dims != (1, c_out, 1, 1):
        raise ContractError(f"bias dims {bias.dims} != (1, {c_out}, 1, 1)")
    oh, ow = spec.out_hw(h, w, kh, kw)

    out = _conv_forward(x.data, weight.data, None if bias is None else bias.data, spec, oh, ow)
    requires = x.requires_grad or weight.requires_grad or (bias is not None and bias.requires_grad)
    result = _result(out, requires)
    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _record("conv2d", inputs, result, spec=spec)


def _conv_forward(xd, wd, bias_d, spec, oh, ow):
    n, c, h, w = xd.shape
    c_out, c_per_group, kh, kw = wd.shape
    sy, sx = spec.stride
    py, px = spec.padding
    dy, dx = spec.dilation
    g = spec.groups
    out = np.zeros((n, c_out, oh, ow), xd.dtype)
    if out.size and xd.size:
        xp = np.pad(xd, ((0, 0), (0, 0), (py, py), (px, px))) if (py or px) else xd
        out_per_group = c_out // g
        for gi in range(g):
            og = out[:, gi * out_per_group:(gi + 1) * out_per_group]
            wg = wd[gi * out_per_group:(gi + 1) * out_per_group]
            for ci in range(c_per_group):
                xc = xp[:, gi * c_per_group + ci]
                for ky in range(kh):
                    y0 = ky * dy
                    for kx in range(kw):
                        x0 = kx * dx
                        patch = xc[:, y0:y0 + (oh - 1) * sy + 1:sy, x0:x0 + (ow - 1) * sx + 1:sx]
                        og += patch[:, None] * wg[:, ci, ky, kx].reshape(1, -1, 1, 1)
    if bias_d is not None:
        out += bias_d
    return out


def _conv_backward(rec, grad_out):
    x, weight = rec.inputs[0], rec.inputs[1]
    bias = rec.inputs[2] if len(rec.inputs) == 3 else None
    spec = rec.saved["spec"]
    xd, wd = x.data, weight.data
    n, c, h, w = xd.shape
    c_out, c_per_group, kh, kw = wd.shape
    oh, ow = grad_out.shape[2], grad_out.shape[3]
    sy, sx = spec.stride
    py, px = spec.padding
    dy, dx = spec.dilation
    g = spec.groups
    out_per_group = c_out // g

    need_x = x.requires_grad
    need_w = weight.requires_grad
    grad_x = None
    grad_w = np.zeros_like(wd) if need_w else None
    if need_x or need_w:
        xp = np.pad(xd, ((0, 0), (0, 0), (py, py), (px, px))) if (py or px) else xd
        gxp = np.zeros_like(xp) if need_x else None
        if grad_out.size:
            for gi in range(g):
                go = grad_out[:, gi * out_per_group:(gi + 1) * out_per_group]
                wg = wd[gi * out_per_group:(gi + 1) * out_per_group]
                for ci in range(c_per_group):
                    xc = xp[:, gi * c_per_group + ci]
                    for ky in range(kh):
                        y0 = ky * dy
                        for kx in range(kw):
                            x0 = kx * dx
                            ys = slice(y0, y0 + (oh - 1) * sy + 1, sy)
                            xs = slice(x0, x0 + (ow - 1) * sx + 1, sx)
                            if need_x:
                                wvec = wg[:, ci, ky, kx].reshape(1, -1, 1, 1)
                                gxp[:, gi * c_per_group + ci, ys, xs] += (go * wvec).sum(axis=1)
                            if need_w:
                                patch = xc[:, ys, xs]
                                grad_w[gi * out_per_group:(gi + 1) * out_per_group, ci, ky, kx] = (
                                    np.tensordot(go, patch, axes=([0, 2, 3], [0, 1, 2]))
                                )
        if need_x:
            grad_x = gxp[:, :, py:py + h, px:px + w] if (py or px) else gxp

    grad_b = None
    if bias is not None and bias.requires_grad:
        grad_b = grad_out.sum(axis=(0, 2, 3)).reshape(1, c_out, 1, 1)
    grads = (grad_x, grad_w) if bias is None else (grad_x, grad_w, grad_b)
    return grads


# ---------------------------------------------------------------------------
# Elementwise ops
# ---------------------------------------------------------------------------

def _check_broadcast(a_dims, b_dims):
    for axis, (da, db) in enumerate(zip(a_dims, b_dims)):
        if da != db and da != 1 and db != 1:
            raise ContractError(
                f"dims {a_dims} and {b_dims} are not broadcast-compatible at axis {axis}"
            )


def add(a, b):
    _same_dtype(a, b)
    _check_broadcast(a.dims, b.dims)
    out = _result(a.data + b.data, a.requires_grad or b.requires_grad)
    return _record("add", (a, b), out)


def _add_backward(rec, grad_out):
    a, b = rec.inputs
    ga = _reduce_broadcast(grad_out, a.dims) if a.requires_grad else None
    gb = _reduce_broadcast(grad_out, b.dims) if b.requires_grad else None
    return ga, gb


def mul(a, b):
    _same_dtype(a, b)
    _check_broadcast(a.dims, b.dims)
    out = _result(a.data * b.data, a.requires_grad or b.requires_grad)
    return _record("mul", (a, b), out)


def _mul_backward(rec, grad_out):
    a, b = rec.inputs
    ga = _reduce_broadcast(grad_out * b.data, a.dims) if a.requires_grad else None
    gb = _reduce_broadcast(grad_out * a.data, b.dims) if b.requires_grad else None
    return ga, gb


def relu(x):
    mask = x.data > 0
    trace_branch(mask)
    out = _result(np.where(mask, x.data, x.data.dtype.type(0)), x.requires_grad)
    return _record("relu", (x,), out, mask=mask)


def _relu_backward(rec, grad_out):
    return (grad_out * rec.saved["mask"],)


def sigmoid(x):
    xd = x.data
    # exp of a non-positive argument only, so large |x| cannot overflow
    pos = xd >= 0
    z = np.exp(np.where(pos, -xd, xd))
    out_d = np.where(pos, 1.0 / (1.0 + z), z / (1.0 + z)).astype(xd.dtype, copy=False)
    out = _result(out_d, x.requires_grad)
    return _record("sigmoid", (x,), out, value=out_d)


def _sigmoid_backward(rec, grad_out):
    s = rec.saved["value"]
    return (grad_out * s * (1.0 - s),)


def sqrt(x):
    if np.any(x.data < 0):
        worst = float(x.data.min())
        raise DomainError(f"sqrt of negative input (min element {worst})")
    out_d = np.sqrt(x.data)
    out = _result(out_d, x.requires_grad)
    return _record("sqrt", (x,), out, value=out_d)


def _sqrt_backward(rec, grad_out):
    with np.errstate(divide="ignore"):
        return (grad_out * (0.5 / rec.saved["value"]),)


def square(x):
    out = _result(x.data * x.data, x.requires_grad)
    return _record("square", (x,), out)


def _square_backward(rec, grad_out):
    (x,) = rec.inputs
    return (grad_out * (2.0 * x.data),)


# ---------------------------------------------------------------------------
# Reductions and resampling
# ---------------------------------------------------------------------------

def global_pool(kind, x):
    """Reduce over all H*W positions per sample and channel, to N x C x 1 x 1."""
    n, c, h, w = x.dims
    if h * w < 1:
        raise DomainError(f"global_pool over empty spatial extent {h}x{w}")
    flat = x.data.reshape(n, c, h * w)
    if kind == "avg":
        out_d = flat.mean(axis=2).reshape(n, c, 1, 1).astype(x.dtype, copy=False)
        out = _result(out_d, x.requires_grad)
        return _record("global_avg_pool", (x,), out)
    if kind == "max":
        idx = flat.argmax(axis=2)  # first maximal position in scan order
        trace_branch(idx)
        out_d = np.take_along_axis(flat, idx[:, :, None], axis=2).reshape(n, c, 1, 1)
        out = _result(out_d, x.requires_grad)
        return _record("global_max_pool", (x,), out, idx=idx)
    raise UsageError(f"unknown pool kind {kind!r}; expected 'avg' or 'max'")


def _global_avg_pool_backward(rec, grad_out):
    (x,) = rec.inputs
    n, c, h, w = x.dims
    g = np.broadcast_to(grad_out / (h * w), (n, c, h, w)).astype(grad_out.dtype, copy=True)
    return (g,)


def _global_max_pool_backward(rec, grad_out):
    (x,) = rec.inputs
    n, c, h, w = x.dims
    flat = np.zeros((n, c, h * w), grad_out.dtype)
    np.put_along_axis(flat, rec.saved["idx"][:, :, None], grad_out.reshape(n, c, 1), axis=2)
    return (flat.reshape(n, c, h, w),)


def resample(x, mode):
    """up2_nearest doubles H,W by replication; down2_max halves via 2x2 stride-2 max."""
    n, c, h, w = x.dims
    if mode == "up2_nearest":
        out_d = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)
        out = _result(out_d, x.requires_grad)
        return _record("up2_nearest", (x,), out)
    if mode == "down2_max":
        if h % 2 or w % 2:
            raise ShapeError(f"down2_max needs even spatial dims, got {h}x{w}")
        blocks = x.data.reshape(n, c, h // 2, 2, w // 2, 2)
        flat = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
        idx = flat.argmax(axis=4)  # first maximal element per block, row-major
        trace_branch(idx)
        out_d = np.take_along_axis(flat, idx[..., None], axis=4)[..., 0]
        out = _result(np.ascontiguousarray(out_d), x.requires_grad)
        return _record("down2_max", (x,), out, idx=idx)
    raise UsageError(f"unknown resample mode {mode!r}")


def _up2_nearest_backward(rec, grad_out):
    n, c, h2, w2 = grad_out.shape
    g = grad_out.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))
    return (g,)


def _down2_max_backward(rec, grad_out):
    (x,) = rec.inputs
    n, c, h, w = x.dims
    flat = np.zeros((n, c, h // 2, w // 2, 4), grad_out.dtype)
    np.put_along_axis(flat, rec.saved["idx"][..., None], grad_out[..., None], axis=4)
    g = flat.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
    return (np.ascontiguousarray(g),)


def replicate_pad(x):
    """Grow H and W by one pixel on each side, repeating the border values.

    Filters applied after this pad see a locally constant extension of the
    image instead of an artificial step against zero, so zero-sum kernels
    stay silent on flat regions all the way to the border.
    """
    n, c, h, w = x.dims
    if h < 1 or w < 1:
        raise DomainError(f"replicate_pad needs a non-empty spatial extent, got {h}x{w}")
    out_d = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)), mode="edge")
    out = _result(out_d, x.requires_grad)
    return _record("replicate_pad", (x,), out)


def _replicate_pad_backward(rec, grad_out):
    (x,) = rec.inputs
    n, c, h, w = x.dims
    g = grad_out[:, :, 1:h + 1, 1:w + 1].copy()
    # Border rows/columns received up to three replicas; fold their
    # gradients back.  When h == 1 (or w == 1) the two edge statements
    # target the same row (column), which is exactly the replica count.
    g[:, :, 0, :] += grad_out[:, :, 0, 1:w + 1]
    g[:, :, h - 1, :] += grad_out[:, :, h + 1, 1:w + 1]
    g[:, :, :, 0] += grad_out[:, :, 1:h + 1, 0]
    g[:, :, :, w - 1] += grad_out[:, :, 1:h + 1, w + 1]
    g[:, :, 0, 0] += grad_out[:, :, 0, 0]
    g[:, :, 0, w - 1] += grad_out[:, :, 0, w + 1]
    g[:, :, h - 1, 0] += grad_out[:, :, h + 1, 0]
    g[:, :, h - 1, w - 1] += grad_out[:, :, h + 1, w + 1]
    return (g,)


def channel_mean(x):
    """Average across channels, to N x 1 x H x W."""
    n, c, h, w = x.dims
    if c < 1:
        raise DomainError("channel_mean over zero channels")
    out = _result(x.data.mean(axis=1, keepdims=True).astype(x.dtype, copy=False), x.requires_grad)
    return _record("channel_mean", (x,), out)


def _channel_mean_backward(rec, grad_out):
    (x,) = rec.inputs
    n, c, h, w = x.dims
    g = np.broadcast_to(grad_out / c, (n, c, h, w)).astype(grad_out.dtype, copy=True)
    return (g,)


def concat_channels(xs):
    """Concatenate along the channel axis, preserving input order."""
    xs = tuple(xs)
    if not xs:
        raise ContractError("concat_channels needs at least one tensor")
    _same_dtype(*xs)
    base = xs[0].dims
    for t in xs[1:]:
        if (t.dims[0], t.dims[2], t.dims[3]) != (base[0], base[2], base[3]):
            raise ContractError(
                f"concat_channels spatial/batch mismatch: {t.dims} vs {base}"
            )
    out_d = np.concatenate([t.data for t in xs], axis=1)
    out = _result(out_d, any(t.requires_grad for t in xs))
    return _record("concat_channels", xs, out)


def _concat_channels_backward(rec, grad_out):
    grads = []
    offset = 0
    for t in rec.inputs:
        c = t.dims[1]
        grads.append(grad_out[:, offset:offset + c].copy() if t.requires_grad else None)
        offset += c
    return tuple(grads)


def slice_channels(x, start, stop):
    """Take channels [start, stop) as a new tensor."""
    c = x.dims[1]
    if not (0 <= start < stop <= c):
        raise ContractError(f"channel slice [{start}, {stop}) out of range for C={c}")
    out = _result(np.ascontiguousarray(x.data[:, start:stop]), x.requires_grad)
    return _record("slice_channels", (x,), out, start=start, stop=stop)


def _slice_channels_backward(rec, grad_out):
    (x,) = rec.inputs
    g = np.zeros_like(x.data)
    g[:, rec.saved["start"]:rec.saved["stop"]] = grad_out
    return (g,)


def linear(x, weight, bias=None):
    """Per-sample affine map on N x C x 1 x 1 descriptors.

    ``weight`` dims are ``(C_out, C_in, 1, 1)``; the caller may apply the
    same weights to several descriptors to share them.
    """
    _same_dtype(x, weight, bias)
    n, c, h, w = x.dims
    if (h, w) != (1, 1):
        raise ContractError(f"linear expects N x C x 1 x 1 input, got {x.dims}")
    c_out, c_in, kh, kw = weight.dims
    if (kh, kw) != (1, 1):
        raise ContractError(f"linear weight must be C_out x C_in x 1 x 1, got {weight.dims}")
    if c_in != c:
        raise ContractError(f"linear weight in-dim {c_in} != input channels {c}")
    if bias is not None and bias.dims != (1, c_out, 1, 1):
        raise ContractError(f"bias dims {bias.dims} != (1, {c_out}, 1, 1)")
    w2 = weight.data.reshape(c_out, c_in)
    out_d = (x.data.reshape(n, c) @ w2.T).reshape(n, c_out, 1, 1)
    if bias is not None:
        out_d = out_d + bias.data
    requires = x.requires_grad or weight.requires_grad or (bias is not None and bias.requires_grad)
    out = _result(out_d.astype(x.dtype, copy=False), requires)
    inputs = (x, weight) if bias is None else (x, weight, bias)
    return _record("linear", inputs, out)


def _linear_backward(rec, grad_out):
    x, weight = rec.inputs[0], rec.inputs[1]
    bias = rec.inputs[2] if len(rec.inputs) == 3 else None
    n, c = x.dims[0], x.dims[1]
    c_out = weight.dims[0]
    g2 = grad_out.reshape(n, c_out)
    w2 = weight.data.reshape(c_out, c)
    gx = (g2 @ w2).reshape(x.dims) if x.requires_grad else None
    gw = (g2.T @ x.data.reshape(n, c)).reshape(weight.dims) if weight.requires_grad else None
    gb = None
    if bias is not None and bias.requires_grad:
        gb = g2.sum(axis=0).reshape(1, c_out, 1, 1)
    return (gx, gw) if bias is None else (gx, gw, gb)


def sum_all(x):
    """Sum every element into a 1 x 1 x 1 x 1 scalar tensor."""
    out = _result(x.data.sum(dtype=x.dtype).reshape(1, 1, 1, 1), x.requires_grad)
    return _record("sum_all", (x,), out)


def _sum_all_backward(rec, grad_out):
    (x,) = rec.inputs
    return (np.broadcast_to(grad_out.reshape(()), x.dims).astype(grad_out.dtype, copy=True),)


# ---------------------------------------------------------------------------
# Backward dispatch
# ---------------------------------------------------------------------------

BACKWARD = {
    "conv2d": _conv_backward,
    "add": _add_backward,
    "mul": _mul_backward,
    "relu": _relu_backward,
    "sigmoid": _sigmoid_backward,
    "sqrt": _sqrt_backward,
    "square": _square_backward,
    "global_avg_pool": _global_avg_pool_backward,
    "global_max_pool": _global_max_pool_backward,
    "up2_nearest": _up2_nearest_backward,
    "down2_max": _down2_max_backward,
    "replicate_pad": _replicate_pad_backward,
    "channel_mean": _channel_mean_backward,
    "concat_channels": _concat_channels_backward,
    "slice_channels": _slice_channels_backward,
    "linear": _linear_backward,
    "sum_all": _sum_all_backward,
}


def backward(tape, root):
    """Accumulate d(root)/d(leaf) into the grad buffer of every leaf reached.

    ``root`` must be a 1x1x1x1 scalar produced on ``tape``.  Records are
    visited in exact reverse creation order; gradients accumulate across
    repeated calls until the leaves are explicitly zeroed.
    """
    if root.dims != (1, 1, 1, 1):
        raise ContractError(f"backward root must be a 1x1x1x1 scalar, got dims {root.dims}")
    if not any(rec.output is root for rec in tape.records):
        raise UsageError("backward root was not produced on this tape")

    pending = {id(root): np.ones((1, 1, 1, 1), root.dtype)}
    holders = {id(root): root}
    for rec in reversed(tape.records):
        grad_out = pending.pop(id(rec.output), None)
        if grad_out is None:
            continue
        holders.pop(id(rec.output), None)
        grads = BACKWARD[rec.op](rec, grad_out)
        for inp, g in zip(rec.inputs, grads):
            if g is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in pending:
                # out-of-place: backward rules may alias one array to
                # several inputs (add with no broadcast), so never mutate
                pending[key] = pending[key] + g
            else:
                pending[key] = g
                holders[key] = inp

    # whatever was never popped had no producing record on this tape: a leaf
    for key, g in pending.items():
        leaf = holders[key]
        if leaf.grad is None:
            leaf.grad = np.zeros_like(leaf.data)
        leaf.grad += g
