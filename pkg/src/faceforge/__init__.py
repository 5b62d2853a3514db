"""faceforge: dual-diffusion texture and geometry generation for synthetic faces."""

__version__ = "0.1.0"
