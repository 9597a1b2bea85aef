"""Procedural egocentric lives with ground-truth geometry channels."""

from .geometry import (NEAR_PLANE, CameraState, Intrinsics, pixel_dirs_world,
                       pose_from_yaw_pitch, project_points, quat_to_rot, rot_to_quat,
                       visible_point_ids)
from .io import (export_life, load_life, manifest_frame_count, read_frame_image,
                 read_ppm, read_raster, require_channel, write_ppm, write_raster)
from .life import (BACKGROUND, FrameRecord, LifeDataset, flow_between, generate_life,
                   life_brightness_stats, pairwise_flow, render_frame)
from .trajectory import TRAJECTORY_KINDS, TrajectorySpec, synthesize_trajectory
from .world import Landmark, World, albedo, generate_world, make_landmark, pattern_value

__all__ = [
    "NEAR_PLANE", "CameraState", "Intrinsics", "pixel_dirs_world", "pose_from_yaw_pitch",
    "project_points", "quat_to_rot", "rot_to_quat", "visible_point_ids",
    "export_life", "load_life", "manifest_frame_count", "read_frame_image", "read_ppm",
    "read_raster", "require_channel", "write_ppm", "write_raster",
    "BACKGROUND", "FrameRecord", "LifeDataset", "flow_between", "generate_life",
    "life_brightness_stats", "pairwise_flow", "render_frame",
    "TRAJECTORY_KINDS", "TrajectorySpec", "synthesize_trajectory",
    "Landmark", "World", "albedo", "generate_world", "make_landmark", "pattern_value",
]
