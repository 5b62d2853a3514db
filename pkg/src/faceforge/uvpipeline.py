"""Texture correction and completion: unwrap posed images into incomplete UV
textures, blend multi-view partials, color-correct, and complete against a
template."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .synthface.raster import Camera, project_vertices, rasterize_depth
from .synthface.shapemodel import FaceMesh, vertex_normals

RELIABLE_VIS = 0.5


@dataclass(frozen=True)
class IncompleteTexture:
    """UV texture plus per-texel visibility in [0, 1].

    Texel colors are arbitrary wherever visibility == 0; consumers must not
    read unmasked texels.
    """

    texture: np.ndarray  # (H, W, 3)
    visibility: np.ndarray  # (H, W)

    def __post_init__(self):
        if self.texture.shape[:2] != self.visibility.shape:
            raise ParameterError("texture / visibility resolution mismatch")


@dataclass(frozen=True)
class ColorCorrection:
    applied: bool
    gain: np.ndarray  # (3,)
    offset: np.ndarray  # (3,)


def _sample_at_pixels(img: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Bilinear sample at continuous pixel coordinates (centers at x + 0.5)."""
    H, W = img.shape[:2]
    x = np.clip(px - 0.5, 0, W - 1)
    y = np.clip(py - 0.5, 0, H - 1)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def unwrap(image: np.ndarray, mesh: FaceMesh, cam: Camera) -> IncompleteTexture:
    """Project each texel's surface point into the image and sample it.

    Visibility is the clamped cosine between surface normal and view direction,
    zeroed wherever the z-buffer says the texel is occluded or off-screen.
    """
    res = image.shape[0]
    G = mesh.grid
    _, _, zbuf = rasterize_depth(mesh, cam, res)
    pts, zs = project_vertices(mesh, cam, res)
    px, py = pts[:, 0], pts[:, 1]

    # conservative occlusion test against the 2x2 pixel neighborhood
    x0 = np.clip(np.floor(px - 0.5).astype(np.int64), 0, res - 1)
    y0 = np.clip(np.floor(py - 0.5).astype(np.int64), 0, res - 1)
    x1 = np.minimum(x0 + 1, res - 1)
    y1 = np.minimum(y0 + 1, res - 1)
    znear = np.minimum.reduce(
        [zbuf[y0, x0], zbuf[y0, x1], zbuf[y1, x0], zbuf[y1, x1]]
    )
    depth_ok = zs <= znear + 2e-2

    on_screen = (px >= 0) & (px < res) & (py >= 0) & (py < res)
    normals = vertex_normals(mesh)
    to_cam = cam.position()[None, :] - mesh.vertices
    to_cam /= np.linalg.norm(to_cam, axis=1, keepdims=True)
    cosv = np.einsum("ij,ij->i", normals, to_cam)

    vis = np.where(depth_ok & on_screen, np.maximum(cosv, 0.0), 0.0)
    colors = _sample_at_pixels(image, px, py)
    vis = vis.reshape(G, G)
    colors = colors.reshape(G, G, 3)
    # the outermost texel ring sits on the silhouette: its normals are
    # one-sided estimates and its samples straddle the background, so it
    # inherits the nearest interior texel instead
    for src, dst in ((1, 0), (-2, -1)):
        colors[dst, :] = colors[src, :]
        vis[dst, :] = vis[src, :]
        colors[:, dst] = colors[:, src]
        vis[:, dst] = vis[:, src]
    colors[vis == 0] = 0.0
    return IncompleteTexture(texture=colors, visibility=vis)


def color_correct(
    partial: IncompleteTexture, reference: IncompleteTexture
) -> tuple[IncompleteTexture, ColorCorrection]:
    """Per-channel affine (gain, offset) least-squares fit on the overlap.

    The fit matches the partial's overlap statistics to the reference and is
    applied to every visible texel.  An empty overlap skips correction.
    """
    overlap = (partial.visibility > RELIABLE_VIS) & (
        reference.visibility > RELIABLE_VIS
    )
    if not overlap.any():
        return partial, ColorCorrection(
            applied=False, gain=np.ones(3), offset=np.zeros(3)
        )
    gain = np.ones(3)
    offset = np.zeros(3)
    for c in range(3):
        p = partial.texture[..., c][overlap]
        r = reference.texture[..., c][overlap]
        A = np.stack([p, np.ones_like(p)], axis=1)
        (g, b), *_ = np.linalg.lstsq(A, r, rcond=None)
        gain[c], offset[c] = g, b
    visible = partial.visibility > 0
    out = partial.texture.copy()
    out[visible] = np.clip(out[visible] * gain + offset, 0.0, 1.0)
    return (
        IncompleteTexture(texture=out, visibility=partial.visibility),
        ColorCorrection(applied=True, gain=gain, offset=offset),
    )


def blend(
    frontal: IncompleteTexture,
    left: IncompleteTexture,
    right: IncompleteTexture,
    feather: float = 3.0,
) -> IncompleteTexture:
    """Per-texel convex combination weighted by Gaussian-feathered visibility.

    Feathered weights are masked back to each input's visible support, so a
    texel seen by only one view copies that view exactly.
    """
    parts = (frontal, left, right)
    shape = frontal.visibility.shape
    for p in parts:
        if p.visibility.shape != shape:
            raise ParameterError("blend inputs must share a resolution")
    weights = []
    for p in parts:
        w = ndimage.gaussian_filter(p.visibility, sigma=feather)
        weights.append(np.where(p.visibility > 0, w, 0.0))
    wsum = np.sum(weights, axis=0)
    out = np.zeros_like(frontal.texture)
    covered = wsum > 0
    for p, w in zip(parts, weights):
        frac = np.zeros(shape)
        frac[covered] = w[covered] / wsum[covered]
        out += frac[..., None] * p.texture
    vis = np.maximum.reduce([p.visibility for p in parts])
    return IncompleteTexture(texture=out, visibility=vis)


def complete(
    blended: IncompleteTexture,
    template: np.ndarray,
    border: float = 6.0,
    color_match: bool = True,
) -> np.ndarray:
    """Fill invisible texels from the template with a feathered transition.

    The template is first per-channel mean/std matched to the blended texture
    over the visible region; visible texels keep their blended values exactly.
    """
    if template.shape != blended.texture.shape:
        raise ParameterError("template resolution mismatch")
    visible = blended.visibility > RELIABLE_VIS
    matched = template.astype(np.float64)
    if not visible.any():
        return np.clip(matched, 0.0, 1.0)
    if color_match:
        matched = matched.copy()
        for c in range(3):
            t = template[..., c][visible]
            b = blended.texture[..., c][visible]
            t_std = t.std()
            scale = b.std() / t_std if t_std > 1e-12 else 1.0
            matched[..., c] = (template[..., c] - t.mean()) * scale + b.mean()
    # linear ramp from 1 inside the visible region to 0 beyond the border
    dist = ndimage.distance_transform_edt(~visible)
    alpha = np.clip(1.0 - dist / border, 0.0, 1.0)
    alpha[visible] = 1.0
    out = alpha[..., None] * blended.texture + (1.0 - alpha[..., None]) * matched
    return np.clip(out, 0.0, 1.0)


def reconstruct_from_views(
    mesh: FaceMesh,
    views: dict,
    template: np.ndarray,
    feather: float = 3.0,
    border: float = 6.0,
) -> np.ndarray:
    """Full correction/completion pipeline over the three uniform-light views."""
    partials = {yaw: unwrap(img, mesh, Camera(yaw=yaw)) for yaw, img in views.items()}
    frontal = partials[0.0]
    sides = []
    for yaw in sorted(k for k in partials if k != 0.0):
        corrected, _ = color_correct(partials[yaw], frontal)
        sides.append(corrected)
    blended = blend(frontal, sides[0], sides[1], feather=feather)
    return complete(blended, template, border=border)
