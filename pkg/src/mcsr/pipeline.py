"""End-to-end forward pass tying the branches, matching, aggregation and
reconstruction together."""

import numpy as np

from .aggregation import mab_chain, reconstruct
from .errors import InputError
from .kspace import degrade
from .matching import match_all
from .pyramid import PyramidConfig, extract_lr_features, extract_reference_pyramid
from .weights import parameter_inventory


def validate_store(cfg, store, share_branch_stg=False, pyramid_rstb=False):
    """Completeness and closure of a weight store against a config: missing
    parameters raise MissingWeightsError, unknown names raise InputError."""
    expected = dict(parameter_inventory(cfg, share_branch_stg, pyramid_rstb))
    store.require(expected)
    unknown = sorted(set(store.names()) - set(expected))
    if unknown:
        raise InputError("unknown weight names: " + ", ".join(unknown))


def run_forward(cfg, store, lr_image, ref_image, share_branch_stg=False, pyramid_rstb=False):
    """Super-resolve ``lr_image`` guided by the high-resolution reference.

    The reference LR branch input is produced by the same k-space degradation
    used for the target, keeping both LR feature maps scale-consistent.
    """
    lr_image = np.asarray(lr_image, dtype=np.float64)
    ref_image = np.asarray(ref_image, dtype=np.float64)
    expected = (lr_image.shape[0] * cfg.uf, lr_image.shape[1] * cfg.uf)
    if ref_image.shape != expected:
        raise InputError(
            f"reference size {ref_image.shape} != UF x LR size {expected}"
        )
    key = (lambda branch: "shared") if share_branch_stg else (lambda branch: branch)
    ref_lr = degrade(ref_image, cfg.uf)
    f_tar_lr = extract_lr_features(lr_image, store, "tar_lr", cfg.stg, stg_key=key("tar_lr"))
    f_ref_lr = extract_lr_features(ref_lr, store, "ref_lr", cfg.stg, stg_key=key("ref_lr"))
    pyramid = extract_reference_pyramid(
        ref_image,
        store,
        cfg.stg,
        PyramidConfig(cfg.channels, cfg.num_levels, pyramid_rstb),
        stg_key=key("ref"),
    )
    matched = match_all(f_tar_lr, f_ref_lr, pyramid, cfg.match)
    hr_features = mab_chain(f_tar_lr, matched, store, cfg.channels, cfg.sab_stats_source)
    return reconstruct(hr_features, lr_image, store, cfg.uf, cfg.global_residual)
