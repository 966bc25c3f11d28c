from .orbit import (
    CameraPose,
    NEAR_PLANE,
    look_at,
    make_camera,
    make_static_orbit,
    project,
    unproject,
    write_orbit_file,
    read_orbit_file,
)

__all__ = [
    "CameraPose",
    "NEAR_PLANE",
    "look_at",
    "make_camera",
    "make_static_orbit",
    "project",
    "unproject",
    "write_orbit_file",
    "read_orbit_file",
]
