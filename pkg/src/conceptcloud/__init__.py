"""conceptcloud: semantic 3D maps from segmented point clouds.

Frames are turned into queryable concept clouds by rendering one
synthetic view per object, embedding each view once, fusing object and
global features, and pooling the result onto a voxel grid. Encoder work
scales with the number of objects (plus changes over time), not with the
number of captured frames.
"""

from .kernels import active_backend, available_backends
from .model import (
    ColorRGB,
    ConceptCloud,
    ConceptPoint,
    Image,
    Point3,
    RunConfig,
    SegmentedPoint,
    SegmentedPointCloud,
    validate_cloud,
)
from .pipeline import (
    FeaturePipeline,
    TimestepFeatures,
    TimestepResult,
    build_concept_update,
    embed_image,
    embed_text,
    fuse_object_feature,
)
from .voxel import aggregate, voxel_key

__version__ = "0.1.0"

__all__ = [
    "ColorRGB",
    "ConceptCloud",
    "ConceptPoint",
    "FeaturePipeline",
    "Image",
    "Point3",
    "RunConfig",
    "SegmentedPoint",
    "SegmentedPointCloud",
    "TimestepFeatures",
    "TimestepResult",
    "active_backend",
    "aggregate",
    "available_backends",
    "build_concept_update",
    "embed_image",
    "embed_text",
    "fuse_object_feature",
    "validate_cloud",
    "voxel_key",
    "__version__",
]
