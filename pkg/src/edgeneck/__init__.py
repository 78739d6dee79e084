"""Numerical kernels and verification harness for an edge-guided
feature-pyramid neck: fixed Sobel edge attention, a channel gate,
multi-level aggregation, wide/asymmetric receptive-field blocks and
top-down fusion, on a minimal reverse-mode 4-D tensor core.
"""

from .aggregation import MODES, aggregate, aggregation_plan, plan_channels
from .backbone import Backbone, BackboneConfig
from .config import RunConfig, load_config, parse_config
from .edge_attention import (
    SOBEL_X, SOBEL_Y, ChannelAttention, EdgeGuidedAttention, deep_sobel,
    edge_guide, edge_magnitude, edge_map,
)
from .errors import (
    ConfigError, ContractError, DomainError, FormatError, LoadError,
    ShapeError, UsageError,
)
from .gradcheck import GradCheckReport, grad_check
from .layers import Conv2d
from .levels import PyramidLevel, PyramidSet
from .network import ForwardResult, Network, noise_image
from .pyramid import TopDownPyramid
from .receptive_field import BRANCH_WIDTH, WideFieldBlock, receptive_extent
from .tensor import (
    BACKWARD, ConvSpec, Parameter, Tape, Tensor, add, backward,
    channel_mean, concat_channels, conv2d, full, global_pool,
    kaiming_uniform, linear, mul, ones, ones_like, relu, replicate_pad,
    resample, sigmoid, slice_channels, sqrt, square, sum_all, tensor, zeros,
)

__version__ = "1.0.0"
