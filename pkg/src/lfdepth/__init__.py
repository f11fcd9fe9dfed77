"""Unsupervised light-field disparity estimation.

Coarse-to-fine variance cost volumes, occlusion-confidence-weighted
photometric training, and error-driven fusion of per-combination disparity
maps, on top of a small reverse-mode autodiff engine.
"""

__version__ = "0.1.0"
