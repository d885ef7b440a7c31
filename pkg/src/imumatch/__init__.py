"""IMU-guided feature matching.

Predicts where each feature of one frame lands in the next frame from
integrated IMU motion, then matches descriptors only inside a small window
around that prediction instead of against every feature of the next frame.
"""
from .errors import ImuMatchError
from .features import Descriptor, DescriptorKind, FeaturePoint, Frame
from .geometry import (CameraIntrinsics, EulerAngles, PixelPoint, Quaternion, backproject,
                       euler_to_quaternion, project, quaternion_to_rotation, transform_point)
from .imu_state import (CameraState, FrameMode, ImuSample, IntegratorConfig, RelativePose, StateLog,
                        build_log, integrate_step, relative_pose, state_at)
from .kernels import BACKEND
from .matcher import (GridIndex, MatchPair, MatchParams, MatchReport, Metric, brute_force_match,
                      build_grid, descriptor_distance, neighboring_match)
from .predictor import Prediction, PredictionStatus, predict_feature, predict_frame
from .synth import (GroundTruth, SceneConfig, Segment, generate_scene, score_matches, true_reprojection,
                    true_reprojections)

__version__ = "0.1.0"
