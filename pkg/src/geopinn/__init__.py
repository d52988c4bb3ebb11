"""Physics-constrained CNN solver for steady PDEs on irregular 2-D domains."""

from .grid import (
    BoundaryCurves,
    CurvilinearMesh,
    GridError,
    GridField,
    ReferenceGrid,
    TransformMetrics,
)
from .meshgen import (
    MeshFoldError,
    MeshGenerationError,
    compute_metrics,
    generate_mapping,
    transfinite_init,
    verify_inverse_laplacian,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryCurves",
    "CurvilinearMesh",
    "GridError",
    "GridField",
    "ReferenceGrid",
    "TransformMetrics",
    "MeshFoldError",
    "MeshGenerationError",
    "compute_metrics",
    "generate_mapping",
    "transfinite_init",
    "verify_inverse_laplacian",
    "__version__",
]
