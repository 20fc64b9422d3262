"""Meshes, labeled surfaces, Lipschitz graph charts, and distances."""

from .mesh import (Mesh, load_mesh, save_mesh, refine_uniform,
                   DIRICHLET, NEUMANN, DYNAMIC, BOUNDARY_LABELS)
from .charts import SurfaceChart, chart_metric, transition, rotation
from .surface import SurfaceMesh, surface_gradient_p1, INTERFACE
from .distance import (Points, Polyline, distance_to_submanifold,
                       as_submanifold)

__all__ = [
    "Mesh", "load_mesh", "save_mesh", "refine_uniform",
    "DIRICHLET", "NEUMANN", "DYNAMIC", "BOUNDARY_LABELS", "INTERFACE",
    "SurfaceChart", "chart_metric", "transition", "rotation",
    "SurfaceMesh", "surface_gradient_p1",
    "Points", "Polyline", "distance_to_submanifold", "as_submanifold",
]
