"""Implicit third-order gas-kinetic finite-volume solver on tet/hex meshes."""

__version__ = "0.1.0"
