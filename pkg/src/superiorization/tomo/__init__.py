"""Parallel-beam CT simulation on a square pixel grid."""
from .geometry import ImageGrid, ScanGeometry, system_row, trace_line, view_matrix
from .phantom import (BONE, BRAIN, CSF, HEAD_EXTENT, Ellipse, Phantom, Rectangle, head_phantom,
                      rasterize_phantom, uniform_disk)
from .simulate import (NoiseModel, ProjectionData, assemble_problem, load_projection_data,
                       save_projection_data, scatter_counts, simulate_projections,
                       system_matrices)

__all__ = [
    "BONE", "BRAIN", "CSF", "HEAD_EXTENT", "Ellipse", "ImageGrid", "NoiseModel", "Phantom",
    "ProjectionData", "Rectangle", "ScanGeometry", "assemble_problem", "head_phantom",
    "load_projection_data", "rasterize_phantom", "save_projection_data", "scatter_counts",
    "simulate_projections", "system_matrices", "system_row", "trace_line", "uniform_disk",
    "view_matrix",
]
