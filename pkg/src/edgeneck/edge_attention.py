"""Edge-guided attention: fixed Sobel edge extraction plus a channel gate.

The block sharpens the two finest backbone features.  Each feature is
cross-correlated depthwise with the constant 3x3 Sobel pair, the per
channel responses are averaged into one horizontal and one vertical
derivative map, and the Euclidean magnitude of the pair multiplies the
feature, channel-broadcast.  The second (stride-8) feature additionally
passes through a channel-wise attention gate driven by globally pooled
descriptors through a shared two-layer bottleneck.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ContractError, DomainError
from .tensor import (
    BACKWARD, ConvSpec, Parameter, Tensor, _record, _result, add,
    channel_mean, conv2d, global_pool, kaiming_uniform, linear, mul,
    relu, replicate_pad, sigmoid, trace_branch,
)

# Horizontal-derivative kernel; the vertical one is its transpose.
SOBEL_X = ((1.0, 0.0, -1.0),
           (2.0, 0.0, -2.0),
           (1.0, 0.0, -1.0))
SOBEL_Y = tuple(zip(*SOBEL_X))


def sobel_kernels(channels, dtype):
    """Depthwise weight tensors (C x 1 x 3 x 3) for the Sobel pair."""
    gx = np.broadcast_to(np.asarray(SOBEL_X, dtype), (channels, 1, 3, 3)).copy()
    gy = np.broadcast_to(np.asarray(SOBEL_Y, dtype), (channels, 1, 3, 3)).copy()
    return Tensor(gx), Tensor(gy)


def deep_sobel(x):
    """Average depthwise Sobel responses into one map per direction.

    Returns ``(grad_x, grad_y)``, each ``N x 1 x H x W``.  The kernels are
    constants; gradient flows only to ``x``.  The one-pixel pad replicates
    border values rather than inserting zeros: flat regions then produce
    zero response everywhere, including at the image border, and adding a
    constant offset to the input leaves the output unchanged.
    """
    n, c, h, w = x.dims
    if h < 1 or w < 1:
        raise DomainError(f"deep_sobel needs a non-empty spatial extent, got {h}x{w}")
    kx, ky = sobel_kernels(c, x.dtype)
    spec = ConvSpec(groups=c)
    padded = replicate_pad(x)
    gx = channel_mean(conv2d(padded, kx, spec=spec))
    gy = channel_mean(conv2d(padded, ky, spec=spec))
    return gx, gy


def edge_magnitude(gx, gy):
    """Pointwise sqrt(gx^2 + gy^2) with a zero gradient at exactly (0, 0).

    A fused op: composing sqrt, add and square would send an infinite
    factor through the chain where both inputs vanish, while the magnitude
    itself has a well-defined (sub)gradient of zero there.
    """
    if gx.dims != gy.dims:
        raise ContractError(f"edge_magnitude dims differ: {gx.dims} vs {gy.dims}")
    mag = np.sqrt(gx.data * gx.data + gy.data * gy.data)
    trace_branch(mag > 0)
    out = _result(mag, gx.requires_grad or gy.requires_grad)
    return _record("edge_magnitude", (gx, gy), out, value=mag)


def _edge_magnitude_backward(rec, grad_out):
    gx, gy = rec.inputs
    mag = rec.saved["value"]
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag > 0, grad_out / mag, grad_out.dtype.type(0))
    ga = scale * gx.data if gx.requires_grad else None
    gb = scale * gy.data if gy.requires_grad else None
    return ga, gb


BACKWARD["edge_magnitude"] = _edge_magnitude_backward


def edge_map(x):
    """Single-channel edge magnitude of a feature tensor."""
    gx, gy = deep_sobel(x)
    return edge_magnitude(gx, gy)


def edge_guide(f, fe):
    """Multiply a feature by its single-channel edge map, broadcast over C."""
    if fe.dims[1] != 1:
        raise ContractError(f"edge map must have one channel, got {fe.dims}")
    if (f.dims[0], f.dims[2], f.dims[3]) != (fe.dims[0], fe.dims[2], fe.dims[3]):
        raise ContractError(f"edge map dims {fe.dims} do not match feature dims {f.dims}")
    return mul(f, fe)


class ChannelAttention:
    """Per-channel multiplicative gate in (0, 1) from pooled descriptors.

    scale = sigmoid(w1 relu(w0 avgpool(x)) + w1 relu(w0 maxpool(x))),
    with one shared, bias-free (w0, w1) pair applied to both descriptors,
    so a zero input yields a 0.5 gate exactly.
    """

    def __init__(self, name, rng, channels, reduction=16, dtype=np.float32):
        if reduction < 1:
            raise ConfigError(f"reduction_ratio must be >= 1, got {reduction}")
        if channels % reduction != 0:
            raise ConfigError(
                f"channels {channels} not divisible by reduction_ratio {reduction}"
            )
        hidden = channels // reduction
        self.name = name
        self.channels = channels
        self.reduction = reduction
        self.w0 = Parameter(name + ".w0", kaiming_uniform(rng, (hidden, channels, 1, 1), dtype))
        self.w1 = Parameter(name + ".w1", kaiming_uniform(rng, (channels, hidden, 1, 1), dtype))

    def parameters(self):
        return [self.w0, self.w1]

    def _squeeze(self, pooled):
        return linear(relu(linear(pooled, self.w0.value)), self.w1.value)

    def scale(self, x):
        """The N x C x 1 x 1 gate alone, before multiplying the input."""
        if x.dims[1] != self.channels:
            raise ContractError(
                f"{self.name}: input has {x.dims[1]} channels, gate built for {self.channels}"
            )
        a = self._squeeze(global_pool("avg", x))
        m = self._squeeze(global_pool("max", x))
        return sigmoid(add(a, m))

    def __call__(self, x):
        return mul(x, self.scale(x))


class EdgeGuidedAttention:
    """Edge-sharpen the two finest features; channel-gate the second.

    The first feature is only edge-guided; the second is edge-guided and
    then passed through the channel gate, which is built for its channel
    count.  Each feature uses an edge map computed from itself.
    """

    def __init__(self, name, rng, channels2, reduction=16, dtype=np.float32):
        self.name = name
        self.gate = ChannelAttention(name + ".gate", rng, channels2, reduction, dtype)

    def parameters(self):
        return self.gate.parameters()

    def __call__(self, f1, f2):
        f1_guided = edge_guide(f1, edge_map(f1))
        f2_guided = edge_guide(f2, edge_map(f2))
        return f1_guided, self.gate(f2_guided)
