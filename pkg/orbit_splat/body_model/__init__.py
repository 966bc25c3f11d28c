from .template import (
    TemplateBody,
    joint_locations,
    kinematic_order,
    load_template,
    mean_shape,
    normalize_template,
    read_body,
    validate_template,
    write_body,
)
from .skinning import (
    axis_angle_to_matrix,
    blend_rotations,
    joint_transforms,
    matrix_to_quaternion,
    quaternion_multiply,
    quaternion_to_matrix,
    skin_lbs,
)
from .sampling import (
    SurfaceSamples,
    UVPositionMap,
    apply_offsets,
    quantize_uv,
    sample_surface,
    uv_position_map,
)
from .poses import BodyState, load_body_states, read_pose_file, read_shape_file, write_pose_file
from .capsule_person import BUILTIN_ASSETS, build_capsule_person

__all__ = [
    "TemplateBody", "joint_locations", "kinematic_order", "load_template", "mean_shape",
    "normalize_template", "read_body", "validate_template", "write_body",
    "axis_angle_to_matrix", "blend_rotations", "joint_transforms", "matrix_to_quaternion",
    "quaternion_multiply", "quaternion_to_matrix", "skin_lbs",
    "SurfaceSamples", "UVPositionMap", "apply_offsets", "quantize_uv", "sample_surface",
    "uv_position_map",
    "BodyState", "load_body_states", "read_pose_file", "read_shape_file", "write_pose_file",
    "BUILTIN_ASSETS", "build_capsule_person",
]
