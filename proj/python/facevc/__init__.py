# Copyright 2026 The facevc Authors
# SPDX-License-Identifier: Apache-2.0
"""Crossmodal voice conversion and face generation."""

from ._facevc import (
    Error,
    Model,
    conv2d,
    deconv2d,
    grad_check,
    kl_to_standard_normal,
    load_features,
    load_image,
    log_density,
    mcd,
    run_cli,
    save_features,
    save_image,
)

__all__ = [
    "Error",
    "Model",
    "conv2d",
    "deconv2d",
    "grad_check",
    "kl_to_standard_normal",
    "load_features",
    "load_image",
    "log_density",
    "mcd",
    "run_cli",
    "save_features",
    "save_image",
]
