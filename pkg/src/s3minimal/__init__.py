"""Minimal surfaces in S^3 desingularizing three Clifford tori, and the Choe-Soret family.

Modules:
    s3core        points, isometries and great circles of S^3
    isogroup      finite subgroups of O(4)
    tessellation  circle collections, prisms and colorings
    plateau       the standard prism, the Killing field and the disc solver
    assembler     replication, welding, topology and export
    cli           command-line pipeline
"""
from .errors import S3MinimalError

__version__ = "0.1.0"

__all__ = ["S3MinimalError", "__version__"]
