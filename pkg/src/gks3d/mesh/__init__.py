from .geometry import (
    Mesh,
    MeshError,
    face_quadrature,
    hex_volume_quadrature,
    local_frame,
    tet_volume_quadrature,
)
from .boxgen import generate_box_mesh
from .fileio import load_mesh, save_mesh
from .stencils import StencilTable, build_stencils

__all__ = [
    "Mesh",
    "MeshError",
    "StencilTable",
    "build_stencils",
    "face_quadrature",
    "generate_box_mesh",
    "hex_volume_quadrature",
    "load_mesh",
    "local_frame",
    "save_mesh",
    "tet_volume_quadrature",
]
