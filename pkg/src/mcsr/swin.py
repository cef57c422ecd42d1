"""Swin Transformer layers (windowed multi-head self-attention with optional
cyclic shift), residual blocks of them, and the groups used as the deep
feature extractor of all three branches.

Sublayers follow the pre-norm residual ordering: ``x += MHSA(LN(x))`` then
``x += MLP(LN(x))``. Attention is computed per window at scale
``1 / sqrt(embed_dim / num_heads)`` with a learned relative position bias;
shifted layers mask cross-boundary token pairs with a ``-1e9`` logit.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erf

from .errors import ConfigError
from .tensor_ops import DEFAULT_EPS, ConvSpec, _softmax_inplace, conv2d, layer_norm

MASKED_LOGIT = -1e9


@dataclass(frozen=True)
class StlConfig:
    """Shape of a single Swin Transformer layer."""

    embed_dim: int
    num_heads: int
    window: int
    shift: int
    mlp_ratio: float

    def __post_init__(self):
        if self.embed_dim % self.num_heads:
            raise ConfigError(f"embed_dim {self.embed_dim} not divisible by {self.num_heads} heads")
        if self.shift not in (0, self.window // 2):
            raise ConfigError(f"shift must be 0 or {self.window // 2}, got {self.shift}")
        if not (self.mlp_ratio * self.embed_dim).is_integer():
            raise ConfigError("mlp_ratio * embed_dim must be an integer")

    @property
    def hidden_dim(self):
        return int(self.mlp_ratio * self.embed_dim)


@dataclass(frozen=True)
class StgConfig:
    """Shape of a Swin Transformer group; even layers are unshifted, odd ones
    use a half-window cyclic shift."""

    num_rstb: int = 4
    stl_per_rstb: int = 6
    embed_dim: int = 32
    num_heads: int = 4
    window: int = 8
    mlp_ratio: float = 2.0

    def __post_init__(self):
        if self.num_rstb < 1 or self.stl_per_rstb < 1:
            raise ConfigError("num_rstb and stl_per_rstb must be positive")
        self.stl_config(0)  # validates embed/head/window compatibility

    def stl_config(self, layer_index):
        shift = 0 if layer_index % 2 == 0 else self.window // 2
        return StlConfig(self.embed_dim, self.num_heads, self.window, shift, self.mlp_ratio)


@dataclass(frozen=True)
class WindowGeometry:
    height: int
    width: int
    padded_h: int
    padded_w: int
    window: int


@dataclass(frozen=True)
class StlParams:
    norm1_gain: np.ndarray
    norm1_bias: np.ndarray
    qkv_weight: np.ndarray  # (3*dim, dim)
    qkv_bias: np.ndarray
    proj_weight: np.ndarray  # (dim, dim)
    proj_bias: np.ndarray
    bias_table: np.ndarray  # ((2*window - 1)**2, num_heads)
    norm2_gain: np.ndarray
    norm2_bias: np.ndarray
    fc1_weight: np.ndarray  # (hidden, dim)
    fc1_bias: np.ndarray
    fc2_weight: np.ndarray  # (dim, hidden)
    fc2_bias: np.ndarray


@dataclass(frozen=True)
class RstbParams:
    stls: tuple
    conv: ConvSpec


@dataclass(frozen=True)
class StgParams:
    rstbs: tuple
    conv: ConvSpec


STL_PARAM_SHAPES = (
    ("norm1.gain", lambda c: (c.embed_dim,)),
    ("norm1.bias", lambda c: (c.embed_dim,)),
    ("attn.qkv.weight", lambda c: (3 * c.embed_dim, c.embed_dim)),
    ("attn.qkv.bias", lambda c: (3 * c.embed_dim,)),
    ("attn.proj.weight", lambda c: (c.embed_dim, c.embed_dim)),
    ("attn.proj.bias", lambda c: (c.embed_dim,)),
    ("attn.bias_table", lambda c: ((2 * c.window - 1) ** 2, c.num_heads)),
    ("norm2.gain", lambda c: (c.embed_dim,)),
    ("norm2.bias", lambda c: (c.embed_dim,)),
    ("mlp.fc1.weight", lambda c: (c.hidden_dim, c.embed_dim)),
    ("mlp.fc1.bias", lambda c: (c.hidden_dim,)),
    ("mlp.fc2.weight", lambda c: (c.embed_dim, c.hidden_dim)),
    ("mlp.fc2.bias", lambda c: (c.embed_dim,)),
)


def load_stl_params(store, prefix, cfg):
    values = []
    for suffix, shape_of in STL_PARAM_SHAPES:
        arr = store.fetch(f"{prefix}.{suffix}")
        want = shape_of(cfg)
        if arr.shape != want:
            raise ConfigError(f"{prefix}.{suffix} has shape {arr.shape}, expected {want}")
        values.append(arr)
    return StlParams(*values)


def _conv_spec_from(store, prefix, in_channels, out_channels, stride=1):
    return ConvSpec(
        in_channels,
        out_channels,
        stride,
        store.fetch(f"{prefix}.weight"),
        store.fetch(f"{prefix}.bias"),
    )


def load_rstb_params(store, prefix, cfg):
    stls = tuple(
        load_stl_params(store, f"{prefix}.stl{j}", cfg.stl_config(j))
        for j in range(cfg.stl_per_rstb)
    )
    conv = _conv_spec_from(store, f"{prefix}.conv", cfg.embed_dim, cfg.embed_dim)
    return RstbParams(stls, conv)


def load_stg_params(store, prefix, cfg):
    rstbs = tuple(
        load_rstb_params(store, f"{prefix}.rstb{i}", cfg) for i in range(cfg.num_rstb)
    )
    conv = _conv_spec_from(store, f"{prefix}.conv", cfg.embed_dim, cfg.embed_dim)
    return StgParams(rstbs, conv)


@lru_cache(maxsize=None)
def relative_position_index(window):
    """Lookup table mapping each in-window token pair to its bias-table row,
    a pure function of the pair's (drow, dcol)."""
    coords = np.stack(np.meshgrid(np.arange(window), np.arange(window), indexing="ij"))
    flat = coords.reshape(2, -1)
    rel = flat[:, :, None] - flat[:, None, :]
    index = (rel[0] + window - 1) * (2 * window - 1) + (rel[1] + window - 1)
    index.flags.writeable = False
    return index


def _partition_grid(grid, window):
    hp, wp, channels = grid.shape
    ny, nx = hp // window, wp // window
    windows = (
        grid.reshape(ny, window, nx, window, channels)
        .transpose(0, 2, 1, 3, 4)
        .reshape(ny * nx, window * window, channels)
    )
    return windows, ny, nx


def _merge_grid(windows, ny, nx, window):
    channels = windows.shape[-1]
    return (
        windows.reshape(ny, nx, window, window, channels)
        .transpose(0, 2, 1, 3, 4)
        .reshape(ny * window, nx * window, channels)
    )


def _pad_to_window(grid, window):
    h, w = grid.shape[:2]
    pad_h = (-h) % window
    pad_w = (-w) % window
    if pad_h >= h or pad_w >= w:
        raise ConfigError(f"map {h}x{w} too small to reflection-pad to window {window}")
    if pad_h or pad_w:
        grid = np.pad(grid, ((0, pad_h), (0, pad_w), (0, 0)), mode="reflect")
    return grid


def window_partition(x, window):
    """Split a feature map into non-overlapping windows of ``window**2``
    tokens, reflection-padding height/width up to window multiples."""
    channels, h, w = x.shape
    grid = _pad_to_window(x.transpose(1, 2, 0), window)
    windows, _, _ = _partition_grid(grid, window)
    return windows, WindowGeometry(h, w, grid.shape[0], grid.shape[1], window)


def window_merge(windows, geom):
    """Inverse of :func:`window_partition`: reassemble and crop the padding."""
    ny = geom.padded_h // geom.window
    nx = geom.padded_w // geom.window
    grid = _merge_grid(windows, ny, nx, geom.window)
    return grid[: geom.height, : geom.width].transpose(2, 0, 1)


@lru_cache(maxsize=None)
def _shift_mask(padded_h, padded_w, window, shift):
    # Region ids follow the standard shifted-window construction: the three
    # bands per axis encode where wrapped content lands after the roll.
    ids = np.zeros((padded_h, padded_w, 1))
    bands = (slice(0, -window), slice(-window, -shift), slice(-shift, None))
    value = 0.0
    for row_band in bands:
        for col_band in bands:
            ids[row_band, col_band] = value
            value += 1.0
    window_ids = _partition_grid(ids, window)[0][:, :, 0]
    mask = np.where(window_ids[:, :, None] != window_ids[:, None, :], MASKED_LOGIT, 0.0)
    mask.flags.writeable = False
    return mask


def _window_attention(windows, cfg, params, mask=None, return_weights=False):
    n_windows, n_tokens, dim = windows.shape
    heads = cfg.num_heads
    head_dim = dim // heads
    qkv = windows.reshape(-1, dim) @ params.qkv_weight.T + params.qkv_bias
    qkv = qkv.reshape(n_windows, n_tokens, 3, heads, head_dim)
    # Contiguous (batch, n, d) stacks keep the batched matmuls on the BLAS
    # fast path; strided 4-D views are an order of magnitude slower.
    queries = np.ascontiguousarray(qkv[:, :, 0].transpose(0, 2, 1, 3)).reshape(-1, n_tokens, head_dim)
    keys_t = np.ascontiguousarray(qkv[:, :, 1].transpose(0, 2, 3, 1)).reshape(-1, head_dim, n_tokens)
    values = np.ascontiguousarray(qkv[:, :, 2].transpose(0, 2, 1, 3)).reshape(-1, n_tokens, head_dim)
    queries /= math.sqrt(head_dim)  # cheaper than scaling the n*n logits
    logits = np.matmul(queries, keys_t)
    bias = params.bias_table[relative_position_index(cfg.window)]
    grouped = logits.reshape(n_windows, heads, n_tokens, n_tokens)
    grouped += bias.transpose(2, 0, 1)[None]
    if mask is not None:
        grouped += mask[:, None]
    attn = _softmax_inplace(logits.reshape(-1, n_tokens)).reshape(logits.shape)
    merged = np.matmul(attn, values).reshape(n_windows, heads, n_tokens, head_dim)
    merged = merged.transpose(0, 2, 1, 3).reshape(n_windows, n_tokens, dim)
    out = merged @ params.proj_weight.T + params.proj_bias
    if return_weights:
        return out, attn.reshape(n_windows, heads, n_tokens, n_tokens)
    return out


def _attention_sublayer(x, cfg, params):
    channels, h, w = x.shape
    tokens = x.transpose(1, 2, 0).reshape(h * w, channels)
    normed = layer_norm(tokens, params.norm1_gain, params.norm1_bias, DEFAULT_EPS)
    grid = _pad_to_window(normed.reshape(h, w, channels), cfg.window)
    padded_h, padded_w = grid.shape[:2]
    if cfg.shift:
        grid = np.roll(grid, (-cfg.shift, -cfg.shift), axis=(0, 1))
    windows, ny, nx = _partition_grid(grid, cfg.window)
    mask = _shift_mask(padded_h, padded_w, cfg.window, cfg.shift) if cfg.shift else None
    attended = _window_attention(windows, cfg, params, mask)
    grid = _merge_grid(attended, ny, nx, cfg.window)
    if cfg.shift:
        grid = np.roll(grid, (cfg.shift, cfg.shift), axis=(0, 1))
    return grid[:h, :w].transpose(2, 0, 1)


def _gelu(x):
    scaled = x * (1.0 / math.sqrt(2.0))
    erf(scaled, out=scaled)
    scaled += 1.0
    scaled *= x
    scaled *= 0.5
    return scaled


def _mlp_sublayer(x, params):
    channels, h, w = x.shape
    tokens = x.transpose(1, 2, 0).reshape(h * w, channels)
    normed = layer_norm(tokens, params.norm2_gain, params.norm2_bias, DEFAULT_EPS)
    hidden = _gelu(normed @ params.fc1_weight.T + params.fc1_bias)
    out = hidden @ params.fc2_weight.T + params.fc2_bias
    return out.reshape(h, w, channels).transpose(2, 0, 1)


def stl_forward(x, cfg, params):
    """One Swin Transformer layer (windowed MHSA + MLP, pre-norm residuals)."""
    if x.shape[0] != cfg.embed_dim:
        raise ConfigError(f"input has {x.shape[0]} channels, STL expects {cfg.embed_dim}")
    x = x + _attention_sublayer(x, cfg, params)
    x = x + _mlp_sublayer(x, params)
    return x


def rstb_forward(x, cfg, params):
    """Residual Swin Transformer block: a chain of STLs, a 3x3 convolution,
    and a residual add of the block input."""
    if x.shape[0] != cfg.embed_dim:
        raise ConfigError(f"input has {x.shape[0]} channels, RSTB expects {cfg.embed_dim}")
    y = x
    for j, stl in enumerate(params.stls):
        y = stl_forward(y, cfg.stl_config(j), stl)
    return conv2d(y, params.conv) + x


def stg_forward(x, cfg, params):
    """Swin Transformer group: sequential RSTBs, a 3x3 convolution, and a
    group-level residual add."""
    if x.shape[0] != cfg.embed_dim:
        raise ConfigError(f"input has {x.shape[0]} channels, STG expects {cfg.embed_dim}")
    y = x
    for rstb in params.rstbs:
        y = rstb_forward(y, cfg, rstb)
    return conv2d(y, params.conv) + x
