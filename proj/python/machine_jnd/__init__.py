"""Machine-perception JND pipeline: Python bindings to the C++ core."""

# libtorch's shared libraries are resolved through the torch package.
import torch  # noqa: F401

from ._core import (
    Error,
    __version__,
    assign_label,
    cross_entropy,
    dispatch,
    load_split,
    magnitude_loss,
    merge_cams,
    normalize,
    psnr,
    spatial_loss,
    write_synthetic_archive,
)

__all__ = [
    "Error",
    "__version__",
    "assign_label",
    "cross_entropy",
    "dispatch",
    "load_split",
    "magnitude_loss",
    "merge_cams",
    "normalize",
    "psnr",
    "spatial_loss",
    "write_synthetic_archive",
]
