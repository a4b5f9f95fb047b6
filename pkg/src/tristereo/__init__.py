"""Multi-view stereo disparity engine.

Hierarchical census/SGM binocular matching, gradient-weighted trinocular
fusion, semantic wire triangulation, polarization-based specular filling, and
a synthetic-scene harness that makes every stage verifiable.
"""

from .census import CensusImage, MatchDirection, census_transform, hamming_cost_volume
from .disparity import (
    binocular_pipeline,
    select_wta,
    subpixel_refine,
    uniqueness_filter,
)
from .evalbench import (
    SceneBundle,
    SceneSpec,
    bad_pixel_pct,
    generate_scene,
    load_bundle,
    save_bundle,
    wire_detection_pct,
)
from .hierarchy import CostPyramid, accumulate_hierarchy, build_cost_pyramid
from .imgcore import (
    INVALID_DISPARITY,
    CostVolume,
    DisparityMap,
    GradientPair,
    GrayImage,
    PipelineConfig,
    ValidationError,
    compute_gradients,
    downsample_half,
)
from .polar import (
    PolarChannels,
    PolarMosaic,
    SpecularRegion,
    decode_mosaic,
    plane_fill,
    segment_specular,
)
from .sgm import PathSet, sgm_aggregate
from .trinocular import WeightField, fuse_volumes, gradient_weights, trinocular_pipeline
from .wires import (
    EdgeChain,
    WireDisparitySet,
    WireProbabilityMap,
    canny_edges,
    edge_sgm,
    merge_wire_disparities,
    wire_disparities,
    wire_edge_pixels,
    wire_match_cost_h,
    wire_match_cost_v,
)

__version__ = "0.1.0"
