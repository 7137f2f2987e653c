"""lanegap: sim-to-real gap metrics for lane-keeping systems.

Image-set distribution distance, paired feature similarity, lane
segmentation accuracy, trajectory fidelity, and a desk-scale synthetic
lane-scene simulator to generate everything the metrics consume.
"""

__version__ = "0.1.0"

from .core import (
    ComputationError,
    ImageBuffer,
    ImageSet,
    RegionOfInterest,
    ValidationError,
    crop,
    load_image,
    load_image_set,
    save_image,
    to_luminance,
)
from .fid import (
    FeatureMatrix,
    FidReport,
    GaussianStats,
    builtin_features,
    fid_between_sets,
    fid_matrix,
    fit_gaussian,
    frechet_distance,
    read_feature_file,
    sqrtm_psd,
    write_feature_file,
)
from .fsim import (
    FsimParams,
    LambdaCandidate,
    default_fsim_roi,
    fsim_score,
    gradient_magnitude,
    mean_fsim,
    phase_congruency,
    select_lambda,
)
from .lane_eval import (
    AccuracyReport,
    LaneFrame,
    SegmentationRaster,
    extract_ground_truth,
    read_lane_frames,
    row_runs,
    tusimple_accuracy,
    write_lane_frames,
)
from .trajectory import (
    Centerline,
    GeoPoint,
    RestoreSpec,
    RestoreVerdict,
    SectionSpec,
    Trajectory,
    UtmPoint,
    lateral_offsets,
    latlon_to_utm,
    nearest_on_polyline,
    restoring_verdict,
    section_rmse,
    success_rate,
)
