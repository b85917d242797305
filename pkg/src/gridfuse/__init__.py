"""Image-to-cloud label transfer, fusion, evaluation, and flight planning."""

__version__ = "0.1.0"

from .errors import (
    GridFuseError, DataError, ValidationError, ConvergenceError, PlyError,
)
from .geometry import (
    CameraIntrinsics, CameraPose, ProjectionStatus, ProjectionResult,
    rotation_from_euler, euler_from_rotation, world_to_camera,
    distort, undistort, project, project_batch,
)
from .cameras import Camera, load_cameras, save_cameras
from .depth import (
    DepthMap, VisibilityConfig, render_depth_map, is_visible, visible_views,
    save_depth_npy, load_depth_npy,
)
from .transfer import (
    IGNORE_LABEL, WeightMode, ViewWeighting, ClassMapping, TransferConfig,
    load_class_mapping, default_class_mapping, remap_labels,
    aggregate_logits, transfer_labels,
)
from .fusion import (
    FusionModel, TrainConfig, fuse_forward, fuse_gradient, train_fusion,
    save_model, load_model, softmax, cross_entropy,
)
from .metrics import (
    ConfusionMatrix, confusion, miou, SplitTable, split_statistics,
    format_split_table, cloud_to_cloud,
)
from .submission import (
    write_submission, read_submission, validate_labels,
    load_zone_assignment, default_zone_assignment, zones_for_subset,
)
from .ply import PointCloud, read_ply, write_ply
from .flight import (
    PylonSpec, FlightPlanConfig, Waypoint, FlightPlan,
    plan_trajectory, speed_profile, read_pylons, write_plan,
)
