"""Drag-conditioned part-level image generation on a 2D articulated toy world."""

__version__ = "0.1.0"

from draggen.drags import Drag, DragSet, encode_drags, encode_point, encoding_pyramid

__all__ = [
    "Drag",
    "DragSet",
    "encode_point",
    "encode_drags",
    "encoding_pyramid",
    "__version__",
]
