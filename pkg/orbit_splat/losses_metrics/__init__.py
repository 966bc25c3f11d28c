from .photometric import (
    PSNR_CAP,
    SSIM_C1,
    SSIM_C2,
    gaussian_window,
    l1_rgb,
    l1_rgb_torch,
    mse,
    psnr,
    ssim,
    ssim_loss,
    ssim_loss_torch,
    ssim_map,
    ssim_torch,
)
from .perceptual import (
    ConvPyramidExtractor,
    FeatureExtractor,
    IdentityExtractor,
    NullExtractor,
    build_extractor,
    load_extractor,
    lpips,
    lpips_torch,
    save_extractor,
)
from .regularizers import reg_feature, reg_offset, reg_scale
from .objective import TERMS, LossBreakdown, LossWeights, total_loss
from .report import MetricRow, mean_row, read_metric_report, rows_from_report, write_metric_report

__all__ = [
    "PSNR_CAP", "SSIM_C1", "SSIM_C2", "gaussian_window", "l1_rgb", "l1_rgb_torch", "mse", "psnr",
    "ssim", "ssim_loss", "ssim_loss_torch", "ssim_map", "ssim_torch",
    "ConvPyramidExtractor", "FeatureExtractor", "IdentityExtractor", "NullExtractor",
    "build_extractor", "load_extractor", "lpips", "lpips_torch", "save_extractor",
    "reg_feature", "reg_offset", "reg_scale",
    "TERMS", "LossBreakdown", "LossWeights", "total_loss",
    "MetricRow", "mean_row", "read_metric_report", "rows_from_report", "write_metric_report",
]
