"""Lifespan organ-shape morphometrics toolkit.

Reads binary organ masks, extracts 13 mesh- and eigenvalue-based shape
features, applies cohort quality control and matching, and fits BCCG
distributional regression (smooth age effect plus linear diabetes, sex
and weight terms) with FDR-corrected group comparisons and centile
curves.
"""

__version__ = "0.1.0"

from .volume_io import VoxelMask, LabelVolume  # noqa: F401
from .morphometrics import FeatureVector, FEATURE_NAMES  # noqa: F401
