"""Window-state modeling toolkit.

Pipeline pieces: time-series preparation and sample building, occupant
segmentation, a from-scratch feed-forward classifier with proximal
adaptive-gradient L1 training, imbalance-aware evaluation metrics,
cross-building weight adaptation, a single-zone thermal/CO2 co-simulation
with model feedback, and a synthetic data generator for end-to-end tests.
"""

__version__ = "0.1.0"

from .estimator import OfficeClusterer, ProfileEmbedding2D, WindowStateClassifier
from .schema import FeatureDef, FeatureSchema, canonical_schema, load_schema, save_schema

__all__ = [
    "FeatureDef",
    "FeatureSchema",
    "OfficeClusterer",
    "ProfileEmbedding2D",
    "WindowStateClassifier",
    "canonical_schema",
    "load_schema",
    "save_schema",
    "__version__",
]
