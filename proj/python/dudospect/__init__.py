"""Multi-pinhole cardiac SPECT simulation, MLEM reconstruction, and
dual-domain data-consistency fusion operations.

The heavy lifting lives in the C++ extension; this package re-exports the
main operations with numpy-facing signatures.
"""

from dudospect._core import (  # noqa: F401
    ConfigError,
    NumericalError,
    ScannerGeometry,
    ShapeError,
    ValidationError,
    adc_fuse,
    apply_angle_mask,
    back_project,
    build_dataset,
    build_default_geometry,
    central_column_mask,
    forward_project,
    generate_phantom,
    mlem,
    nmae,
    nmse,
    normal_dc_fuse,
    paired_t_test,
    poisson_emit,
    psnr,
    sensitivity_image,
    ssim_volume,
    thin_counts,
)

__all__ = [
    "ConfigError",
    "NumericalError",
    "ScannerGeometry",
    "ShapeError",
    "ValidationError",
    "adc_fuse",
    "apply_angle_mask",
    "back_project",
    "build_dataset",
    "build_default_geometry",
    "central_column_mask",
    "forward_project",
    "generate_phantom",
    "mlem",
    "nmae",
    "nmse",
    "normal_dc_fuse",
    "paired_t_test",
    "poisson_emit",
    "psnr",
    "sensitivity_image",
    "ssim_volume",
    "thin_counts",
]
