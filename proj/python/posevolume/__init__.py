"""Two-view volumetric 6D object pose toolkit."""

from ._core import (
    CameraIntrinsics,
    PoseVolumeError,
    RigidTransform,
    SynthConfig,
    add_metric,
    adds_metric,
    build_grid,
    default_intrinsics,
    derive_seed,
    evaluate_directory,
    evaluate_scene,
    generate_scenes,
    kabsch_align,
    model_points,
    project_point,
    select_keypoints,
    solve,
    triangulate,
    unproject_pixel,
)

__all__ = [
    "CameraIntrinsics",
    "PoseVolumeError",
    "RigidTransform",
    "SynthConfig",
    "add_metric",
    "adds_metric",
    "build_grid",
    "default_intrinsics",
    "derive_seed",
    "evaluate_directory",
    "evaluate_scene",
    "generate_scenes",
    "kabsch_align",
    "model_points",
    "project_point",
    "select_keypoints",
    "solve",
    "triangulate",
    "unproject_pixel",
]
