from .covariance import LOW_PASS, Splat2D, compute_cov3d, project_gaussian, project_gaussians
from .rasterizer import (
    ALPHA_MAX,
    ALPHA_MIN,
    PRECISIONS,
    TILE,
    RenderOutput,
    backward,
    bin_splats,
    rasterize,
    resolve_precision,
)
from .reference import render_reference
from .image_io import load_png, read_float_image, save_png, to_uint8, write_float_image

__all__ = [
    "LOW_PASS", "Splat2D", "compute_cov3d", "project_gaussian", "project_gaussians",
    "ALPHA_MAX", "ALPHA_MIN", "PRECISIONS", "TILE", "RenderOutput", "backward", "bin_splats",
    "rasterize", "resolve_precision",
    "render_reference",
    "load_png", "read_float_image", "save_png", "to_uint8", "write_float_image",
]
