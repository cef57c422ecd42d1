"""Multi-scale aggregation: the spatial adaptation block (statistic
remapping), the joint residual feature aggregation block, the scale chain,
and the reconstruction head.

One aggregation stage per pyramid level: level 1 works at the LR scale with
stride-1 convolutions everywhere; higher levels upsample the running target
features by a learned stride-2 transposed convolution and use stride-2
down/up pairs inside the residual refinement.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .tensor_ops import DEFAULT_EPS, ConvSpec, bicubic_upsample, conv2d, conv_transpose2d, instance_norm

SAB_STATS_SOURCES = ("pre", "post")


@dataclass(frozen=True)
class MabConfig:
    level: int
    upsample: bool
    channels: int
    stats_source: str = "pre"
    epsilon: float = DEFAULT_EPS

    def __post_init__(self):
        if self.level < 1:
            raise ConfigError("level must be >= 1")
        if self.level == 1 and self.upsample:
            raise ConfigError("level 1 must not upsample")
        if self.level > 1 and not self.upsample:
            raise ConfigError("levels above 1 must upsample")
        if self.stats_source not in SAB_STATS_SOURCES:
            raise ConfigError(f"stats_source must be one of {SAB_STATS_SOURCES}")


@dataclass(frozen=True)
class SabParams:
    conv_alpha: ConvSpec  # 2C -> C, stride 1
    conv_beta: ConvSpec  # 2C -> C, stride 1
    upsample: ConvSpec | None = None  # stride-2 transpose, levels above 1


@dataclass(frozen=True)
class JrfabParams:
    reduce: ConvSpec  # the shared Conv applied to the transferred features
    expand_ref: ConvSpec  # ConvT of the reference branch (stride-1 conv at level 1)
    expand_tar: ConvSpec  # ConvT of the target branch
    fuse: ConvSpec  # 2C -> C after concatenating the branches


def sab_forward(x_tar, f_m, params, cfg):
    """Remap matched-reference statistics onto the target distribution.

    The modulation convolutions see the concatenation of the (optionally
    upsampled) target features and the matched features; their outputs are
    folded into the target's per-channel statistics as
    ``alpha = sigma_tar * (1 + raw_alpha)`` and ``beta = mu_tar + raw_beta``,
    so zero-initialized convolutions transfer (mu, sigma) exactly.
    """
    x_tar = np.asarray(x_tar, dtype=np.float64)
    f_m = np.asarray(f_m, dtype=np.float64)
    if cfg.upsample:
        if params.upsample is None:
            raise ConfigError("upsampling stage requires an upsample spec")
        x_up = conv_transpose2d(x_tar, params.upsample)
    else:
        x_up = x_tar
    if f_m.shape != x_up.shape:
        raise ConfigError(f"matched features {f_m.shape} != target features {x_up.shape}")
    stats_src = x_tar if cfg.stats_source == "pre" else x_up
    mu = stats_src.mean(axis=(1, 2))
    sigma = stats_src.std(axis=(1, 2))
    stacked = np.concatenate([x_up, f_m], axis=0)
    raw_alpha = conv2d(stacked, params.conv_alpha)
    raw_beta = conv2d(stacked, params.conv_beta)
    alpha = sigma[:, None, None] * (1.0 + raw_alpha)
    beta = mu[:, None, None] + raw_beta
    return instance_norm(f_m, cfg.epsilon) * alpha + beta


def _expand(x, spec, cfg):
    return conv_transpose2d(x, spec) if cfg.level > 1 else conv2d(x, spec)


def jrfab_forward(f_hat, x_tar, params, cfg):
    """Dual-branch residual refinement of high-frequency content.

    Reference branch: ``f_hat + ConvT(Conv(f_hat) - x_tar)``. Target branch:
    ``ConvT(x_tar + (x_tar - Conv(f_hat)))``. The stride-2 Conv on ``f_hat``
    is shared between the branches; each branch has its own ConvT. At level 1
    all of the above are stride-1 convolutions and every map shares a scale.
    """
    f_hat = np.asarray(f_hat, dtype=np.float64)
    x_tar = np.asarray(x_tar, dtype=np.float64)
    down = conv2d(f_hat, params.reduce)
    if down.shape != x_tar.shape:
        raise ConfigError(
            f"reduced features {down.shape} do not align with target {x_tar.shape}"
        )
    ref_branch = f_hat + _expand(down - x_tar, params.expand_ref, cfg)
    tar_branch = _expand(x_tar + (x_tar - down), params.expand_tar, cfg)
    if ref_branch.shape != tar_branch.shape:
        raise ConfigError("branch outputs diverge in shape")
    return conv2d(np.concatenate([ref_branch, tar_branch], axis=0), params.fuse)


def load_sab_params(store, level, channels):
    spec = lambda name, cin, stride=1: ConvSpec(
        cin, channels, stride, store.fetch(f"mab{level}.sab.{name}.weight"),
        store.fetch(f"mab{level}.sab.{name}.bias"),
    )
    upsample = spec("up", channels, stride=2) if level > 1 else None
    return SabParams(
        conv_alpha=spec("alpha", 2 * channels),
        conv_beta=spec("beta", 2 * channels),
        upsample=upsample,
    )


def load_jrfab_params(store, level, channels):
    stride = 2 if level > 1 else 1
    spec = lambda name, cin, s: ConvSpec(
        cin, channels, s, store.fetch(f"mab{level}.jrfab.{name}.weight"),
        store.fetch(f"mab{level}.jrfab.{name}.bias"),
    )
    return JrfabParams(
        reduce=spec("down", channels, stride),
        expand_ref=spec("ta", channels, stride),
        expand_tar=spec("tb", channels, stride),
        fuse=spec("fuse", 2 * channels, 1),
    )


def mab_chain(f_tar_lr, matched, store, channels, stats_source="pre"):
    """Chain one aggregation stage per matched level, coarse to fine; the
    result sits at the finest (HR) scale."""
    x = np.asarray(f_tar_lr, dtype=np.float64)
    for level, f_m in enumerate(matched.levels, start=1):
        scale = 2 ** (level - 1)
        expected = (x.shape[0], f_tar_lr.shape[1] * scale, f_tar_lr.shape[2] * scale)
        if f_m.shape != expected:
            raise ConfigError(
                f"matched level {level} has shape {f_m.shape}, expected {expected}"
            )
        cfg = MabConfig(
            level=level, upsample=level > 1, channels=channels, stats_source=stats_source
        )
        f_hat = sab_forward(x, f_m, load_sab_params(store, level, channels), cfg)
        x = jrfab_forward(f_hat, x, load_jrfab_params(store, level, channels), cfg)
    return x


def reconstruct(hr_features, lr_image, store, uf, global_residual=True):
    """Reconstruction head: 3x3 convolution to one channel, plus a bicubic
    upsample of the LR input as a global residual (configurable). The output
    is left unclamped; clamping to [0, 1] happens at serialization."""
    hr_features = np.asarray(hr_features, dtype=np.float64)
    lr_image = np.asarray(lr_image, dtype=np.float64)
    if hr_features.shape[1:] != (lr_image.shape[0] * uf, lr_image.shape[1] * uf):
        raise ConfigError(
            f"HR features {hr_features.shape[1:]} do not match LR {lr_image.shape} x UF={uf}"
        )
    head = ConvSpec(
        hr_features.shape[0], 1, 1, store.fetch("head.weight"), store.fetch("head.bias")
    )
    image = conv2d(hr_features, head)[0]
    if global_residual:
        image = image + bicubic_upsample(lr_image, uf)
    return image
