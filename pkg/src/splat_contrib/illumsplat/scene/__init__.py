from .camera import (
    LOW_PASS,
    Z_NEAR,
    Camera,
    ProjectedGaussian,
    Projection,
    intrinsics,
    look_at,
    orbit_cameras,
    project_gaussian,
    project_gaussians,
    project_points,
)
from .gaussians import (
    PARAMETER_NAMES,
    GaussianCloud,
    GaussianPrimitive,
    build_covariance,
    clamp_log_scales_,
    normalize_quaternions_,
    quaternion_to_rotation,
)
from .io import (
    SceneHeader,
    read_camera_set,
    read_image,
    read_scene,
    read_scene_header,
    read_tensor_archive,
    write_camera_set,
    write_image,
    write_scene,
    write_tensor_archive,
)

__all__ = [
    "LOW_PASS",
    "PARAMETER_NAMES",
    "Z_NEAR",
    "Camera",
    "GaussianCloud",
    "GaussianPrimitive",
    "ProjectedGaussian",
    "Projection",
    "SceneHeader",
    "build_covariance",
    "clamp_log_scales_",
    "intrinsics",
    "look_at",
    "normalize_quaternions_",
    "orbit_cameras",
    "project_gaussian",
    "project_gaussians",
    "project_points",
    "quaternion_to_rotation",
    "read_camera_set",
    "read_image",
    "read_scene",
    "read_scene_header",
    "read_tensor_archive",
    "write_camera_set",
    "write_image",
    "write_scene",
    "write_tensor_archive",
]
