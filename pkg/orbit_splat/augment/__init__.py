from .resample import TARGET_SIZE, UPSAMPLE_FACTOR, resize_bicubic, resize_only, upsample_resize
from .flow import FlowField, estimate_flow, warp
from .interpolate import interpolate_frame
from .backends import (
    BicubicSuperResolver,
    ExternalInterpolator,
    ExternalSuperResolver,
    FlowInterpolator,
    FrameInterpolator,
    ResizeOnly,
    SuperResolver,
    build_interpolator,
    build_super_resolver,
)
from .video import (
    INTERPOLATION_TIMES,
    VideoSequence,
    augment_video,
    augmented_count,
    frame_name,
    read_augment_manifest,
    read_frame_files,
    read_video,
    write_augment_manifest,
    write_frame_files,
)

__all__ = [
    "TARGET_SIZE", "UPSAMPLE_FACTOR", "resize_bicubic", "resize_only", "upsample_resize",
    "FlowField", "estimate_flow", "warp", "interpolate_frame",
    "BicubicSuperResolver", "ExternalInterpolator", "ExternalSuperResolver", "FlowInterpolator",
    "FrameInterpolator", "ResizeOnly", "SuperResolver", "build_interpolator", "build_super_resolver",
    "INTERPOLATION_TIMES", "VideoSequence", "augment_video", "augmented_count", "frame_name",
    "read_augment_manifest", "read_frame_files", "read_video", "write_augment_manifest", "write_frame_files",
]
