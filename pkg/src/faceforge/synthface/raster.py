"""Software rasterizer: perspective projection, z-buffer, barycentric
interpolation, bilinear texture sampling, and Lambertian SH irradiance shading.

The inner rasterization loop is numba-compiled; everything is deterministic
(no antialiasing; oracles supersample instead).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..errors import ParameterError
from .shapemodel import FaceMesh, vertex_normals


@dataclass(frozen=True)
class Camera:
    yaw: float = 0.0  # degrees; positive moves the camera toward -x
    pitch: float = 0.0
    focal: float = 2.2
    distance: float = 2.5

    def __post_init__(self):
        if self.distance <= 0:
            raise ParameterError(f"camera distance must be positive, got {self.distance}")
        if abs(self.yaw) > 90:
            raise ParameterError(f"|yaw| must be <= 90, got {self.yaw}")

    def position(self) -> np.ndarray:
        ya, pi = np.deg2rad(self.yaw), np.deg2rad(self.pitch)
        return self.distance * np.array(
            [-np.sin(ya) * np.cos(pi), np.sin(pi), np.cos(ya) * np.cos(pi)]
        )

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Right, up, forward unit vectors of the camera frame (looks at origin)."""
        c = self.position()
        f = -c / np.linalg.norm(c)
        up_world = np.array([0.0, 1.0, 0.0])
        r = np.cross(f, up_world)
        r /= np.linalg.norm(r)
        u = np.cross(r, f)
        return r, u, f


@dataclass(frozen=True)
class SHLighting:
    """9 spherical-harmonic coefficients per RGB channel, shape (3, 9).

    Basis order: L00, L1-1, L10, L11, L2-2, L2-1, L20, L21, L22.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        if np.asarray(self.coeffs).shape != (3, 9):
            raise ParameterError("SH coeffs must have shape (3, 9)")

    @staticmethod
    def uniform() -> "SHLighting":
        """DC-only lighting scaled so the irradiance factor is exactly 1."""
        c = np.zeros((3, 9))
        c[:, 0] = 1.0 / _C4
        return SHLighting(coeffs=c)

    @staticmethod
    def dc(value: float) -> "SHLighting":
        c = np.zeros((3, 9))
        c[:, 0] = value
        return SHLighting(coeffs=c)

    @staticmethod
    def random(rng: np.random.Generator, dc_range=(0.6, 1.2), hi=0.3) -> "SHLighting":
        c = rng.uniform(-hi, hi, size=(3, 9))
        c[:, 0] = rng.uniform(*dc_range, size=3)
        return SHLighting(coeffs=c)


# Lambertian irradiance constants (clamped-cosine convolution weights).
_C1, _C2, _C3, _C4, _C5 = 0.429043, 0.511664, 0.743125, 0.886227, 0.247708


def sh_irradiance(normals: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Irradiance at unit normals; normals (..., 3), coeffs (3, 9) -> (..., 3)."""
    x, y, z = normals[..., 0], normals[..., 1], normals[..., 2]
    basis = np.stack(
        [
            np.full_like(x, _C4),
            2 * _C2 * y,
            2 * _C2 * z,
            2 * _C2 * x,
            2 * _C1 * x * y,
            2 * _C1 * y * z,
            _C3 * z * z - _C5,
            2 * _C1 * x * z,
            _C1 * (x * x - y * y),
        ],
        axis=-1,
    )
    return basis @ coeffs.T


@dataclass(frozen=True)
class RenderResult:
    image: np.ndarray  # (H, W, 3) in [0, 1]
    mask: np.ndarray  # (H, W) bool; False = background / invalid
    depth: np.ndarray  # (H, W) camera-space depth, +inf on background


def project_vertices(mesh: FaceMesh, cam: Camera, res: int):
    """Screen-space pixel coordinates and camera-space depths of all vertices."""
    r, u, f = cam.axes()
    rel = mesh.vertices - cam.position()
    X, Y, Z = rel @ r, rel @ u, rel @ f
    Z = np.maximum(Z, 1e-9)
    px = (cam.focal * X / Z + 0.5) * res
    py = (0.5 - cam.focal * Y / Z) * res
    return np.stack([px, py], axis=1), Z


@numba.njit(cache=True)
def _rasterize(pts, zs, tris, H, W):
    tri_id = np.full((H, W), -1, dtype=np.int64)
    bary = np.zeros((H, W, 3))
    zbuf = np.full((H, W), np.inf)
    for m in range(tris.shape[0]):
        i0, i1, i2 = tris[m, 0], tris[m, 1], tris[m, 2]
        ax, ay = pts[i0, 0], pts[i0, 1]
        bx, by = pts[i1, 0], pts[i1, 1]
        cx, cy = pts[i2, 0], pts[i2, 1]
        area = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
        if abs(area) < 1e-12:
            continue
        xmin = max(int(np.floor(min(ax, bx, cx))), 0)
        xmax = min(int(np.ceil(max(ax, bx, cx))), W - 1)
        ymin = max(int(np.floor(min(ay, by, cy))), 0)
        ymax = min(int(np.ceil(max(ay, by, cy))), H - 1)
        for y in range(ymin, ymax + 1):
            py = y + 0.5
            for x in range(xmin, xmax + 1):
                px = x + 0.5
                w0 = ((bx - px) * (cy - py) - (cx - px) * (by - py)) / area
                w1 = ((cx - px) * (ay - py) - (ax - px) * (cy - py)) / area
                w2 = 1.0 - w0 - w1
                if w0 < -1e-9 or w1 < -1e-9 or w2 < -1e-9:
                    continue
                depth = w0 * zs[i0] + w1 * zs[i1] + w2 * zs[i2]
                if depth < zbuf[y, x]:
                    zbuf[y, x] = depth
                    tri_id[y, x] = m
                    bary[y, x, 0] = w0
                    bary[y, x, 1] = w1
                    bary[y, x, 2] = w2
    return tri_id, bary, zbuf


def bilinear_sample(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample (H, W, C) image at uv in [0, 1]^2; u maps to columns, v to rows."""
    H, W = img.shape[:2]
    x = np.clip(u * (W - 1), 0, W - 1)
    y = np.clip(v * (H - 1), 0, H - 1)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def rasterize_depth(mesh: FaceMesh, cam: Camera, res: int):
    """Depth buffer plus per-pixel triangle ids and barycentrics."""
    pts, zs = project_vertices(mesh, cam, res)
    tri_id, bary, zbuf = _rasterize(pts, zs, mesh.faces, res, res)
    return tri_id, bary, zbuf


def render(
    mesh: FaceMesh,
    tex: np.ndarray,
    cam: Camera,
    light: SHLighting,
    res: int = 128,
    supersample: int = 1,
) -> RenderResult:
    """Rasterize the textured mesh under SH lighting; clamped to [0, 1]."""
    hi = res * supersample
    tri_id, bary, zbuf = rasterize_depth(mesh, cam, hi)
    normals = vertex_normals(mesh)
    valid = tri_id >= 0
    image = np.zeros((hi, hi, 3))
    if valid.any():
        tid = tri_id[valid]
        w = bary[valid]  # (K, 3)
        vidx = mesh.faces[tid]  # (K, 3)
        uv = np.einsum("kj,kjc->kc", w, mesh.uv[vidx])
        nrm = np.einsum("kj,kjc->kc", w, normals[vidx])
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        albedo = bilinear_sample(tex, uv[:, 0], uv[:, 1])
        shade = sh_irradiance(nrm, light.coeffs)
        image[valid] = np.clip(albedo * shade, 0.0, 1.0)
    if supersample > 1:
        s = supersample
        image = image.reshape(res, s, res, s, 3).mean(axis=(1, 3))
        cover = valid.reshape(res, s, res, s).mean(axis=(1, 3))
        valid = cover > 0.5
        zbuf = zbuf.reshape(res, s, res, s).min(axis=(1, 3))
    return RenderResult(image=image, mask=valid, depth=zbuf)
