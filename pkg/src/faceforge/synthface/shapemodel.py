"""Linear height-field shape model: mean surface plus orthonormal basis.

The face is a G x G height field over the unit UV square, so unwrapping is a
pure projection/resampling problem and the least-squares identity fit has a
closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from ..errors import ParameterError


@dataclass(frozen=True)
class ShapeModel:
    """mean: (G, G) height field; basis: (d, G*G) with orthonormal rows."""

    mean: np.ndarray
    basis: np.ndarray

    @property
    def grid(self) -> int:
        return self.mean.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True)
class FaceMesh:
    """Regular-grid triangle mesh; per-vertex uv equals grid coordinates."""

    vertices: np.ndarray  # (G*G, 3)
    faces: np.ndarray  # (M, 3) int
    uv: np.ndarray  # (G*G, 2) in [0, 1]^2

    @property
    def grid(self) -> int:
        return int(round(np.sqrt(self.vertices.shape[0])))

    def heights(self) -> np.ndarray:
        g = self.grid
        return self.vertices[:, 2].reshape(g, g)


def _mean_face(G: int) -> np.ndarray:
    """Smooth dome with a nose ridge; height over the UV square."""
    v, u = np.meshgrid(np.linspace(0, 1, G), np.linspace(0, 1, G), indexing="ij")
    r2 = (u - 0.5) ** 2 + (v - 0.5) ** 2
    dome = 0.18 * np.exp(-r2 / (2 * 0.32**2))
    nose = 0.05 * np.exp(-((u - 0.5) ** 2 / (2 * 0.03**2) + (v - 0.55) ** 2 / (2 * 0.08**2)))
    return dome + nose


def default_shape_model(G: int = 64, d: int = 64) -> ShapeModel:
    """Basis = lowest-frequency 2D DCT modes (DC excluded), exactly orthonormal."""
    if d >= G * G:
        raise ParameterError("d must be smaller than G*G")
    C = scipy.fft.dct(np.eye(G), norm="ortho", axis=0)  # rows: 1D DCT modes
    # enumerate (i, j) modes by ascending frequency, skipping the DC mode
    order = sorted(
        ((i, j) for i in range(G) for j in range(G)),
        key=lambda ij: (ij[0] ** 2 + ij[1] ** 2, ij),
    )[1 : d + 1]
    basis = np.empty((d, G * G))
    for k, (i, j) in enumerate(order):
        basis[k] = np.outer(C[i], C[j]).ravel()
    return ShapeModel(mean=_mean_face(G), basis=basis)


def build_mesh(alpha: np.ndarray, model: ShapeModel) -> FaceMesh:
    """Height field z = mean + basis^T alpha on the regular UV grid."""
    alpha = np.asarray(alpha, dtype=np.float64).ravel()
    if alpha.shape[0] != model.dim:
        raise ParameterError(
            f"alpha dim {alpha.shape[0]} != model dim {model.dim}"
        )
    G = model.grid
    z = model.mean + (model.basis.T @ alpha).reshape(G, G)
    v, u = np.meshgrid(np.linspace(0, 1, G), np.linspace(0, 1, G), indexing="ij")
    vertices = np.stack([u.ravel() - 0.5, v.ravel() - 0.5, z.ravel()], axis=1)
    uv = np.stack([u.ravel(), v.ravel()], axis=1)
    faces = grid_faces(G)
    return FaceMesh(vertices=vertices, faces=faces, uv=uv)


def grid_faces(G: int) -> np.ndarray:
    """Two consistently wound triangles per grid cell."""
    idx = np.arange(G * G).reshape(G, G)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, :-1].ravel()
    d = idx[1:, 1:].ravel()
    return np.concatenate(
        [np.stack([a, b, c], axis=1), np.stack([b, d, c], axis=1)], axis=0
    ).astype(np.int64)


def fit_alpha(height_obs: np.ndarray, model: ShapeModel) -> np.ndarray:
    """Least-squares identity fit; with orthonormal rows this is a projection."""
    height_obs = np.asarray(height_obs, dtype=np.float64)
    if height_obs.shape != model.mean.shape:
        raise ParameterError(
            f"observation shape {height_obs.shape} != {model.mean.shape}"
        )
    return model.basis @ (height_obs - model.mean).ravel()


def vertex_normals(mesh: FaceMesh) -> np.ndarray:
    """Per-vertex normals of the height field from central differences."""
    G = mesh.grid
    z = mesh.heights()
    du = 1.0 / (G - 1)
    dz_du = np.gradient(z, du, axis=1)
    dz_dv = np.gradient(z, du, axis=0)
    n = np.stack([-dz_du, -dz_dv, np.ones_like(z)], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return n.reshape(-1, 3)
