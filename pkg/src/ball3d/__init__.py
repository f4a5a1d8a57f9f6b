"""3D bouncing-ball trajectory estimation from monocular 2D tracking."""

__version__ = "0.1.0"
