"""Procedural albedo textures driven by the attribute vector.

Textures are illumination-free and left-right symmetric by construction
(freckles are placed in mirrored pairs), so their brightness-symmetry error is
near zero.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..errors import ParameterError
from .attributes import AttributeVector

_SKIN_LIGHT = np.array([0.95, 0.82, 0.72])
_SKIN_DARK = np.array([0.45, 0.30, 0.22])
_BEARD_DARKEN = 0.55
_MAX_FRECKLES = 100


def _uv_grid(res: int):
    v, u = np.meshgrid(
        np.linspace(0, 1, res), np.linspace(0, 1, res), indexing="ij"
    )
    return u, v


def _ellipse(u, v, cu, cv, ru, rv):
    return ((u - cu) / ru) ** 2 + ((v - cv) / rv) ** 2


def _soft_mask(d2: np.ndarray, edge: float = 0.35) -> np.ndarray:
    """Smooth inside/outside mask from a squared ellipse distance.

    1 well inside (d2 << 1), 0 outside, with a smoothstep transition of
    relative width ``edge`` so resampling the texture stays well-behaved.
    """
    t = np.clip((1.0 + edge - d2) / (2.0 * edge), 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _speckle_rng(attrs: AttributeVector) -> np.random.Generator:
    # Seeded by everything except freckle density, so raising the density only
    # extends the same speckle sequence (count monotonicity stays strict).
    key = np.array(
        [
            attrs.age,
            attrs.tone,
            float(attrs.male),
            attrs.wrinkle_depth,
            attrs.beard_coverage,
            attrs.lip_color,
            attrs.eyebrow_color,
        ],
        dtype=np.float64,
    )
    digest = hashlib.sha256(key.tobytes()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def synth_texture(attrs: AttributeVector, res: int = 64) -> np.ndarray:
    """Compose the albedo texture for one identity; (res, res, 3) in [0, 1]."""
    if res % 8 != 0:
        raise ParameterError(f"texture resolution must be divisible by 8, got {res}")
    u, v = _uv_grid(res)

    base = _SKIN_LIGHT + (attrs.tone**1.2) * (_SKIN_DARK - _SKIN_LIGHT)
    base = base + attrs.age * 0.08 * (np.array([0.5, 0.5, 0.5]) - base)
    tex = np.empty((res, res, 3))
    tex[:] = base
    # mild symmetric vertical shading-free gradient (skin is lighter on top)
    tex *= (1.0 - 0.05 * (v - 0.5))[..., None]

    # wrinkles: symmetric horizontal creases on the forehead and under the eyes
    wr = np.zeros((res, res))
    for cv, width, span in ((0.14, 0.024, 0.30), (0.20, 0.024, 0.26), (0.26, 0.022, 0.22)):
        line = np.exp(-((v - cv) ** 2) / (2 * width**2))
        window = np.exp(-((u - 0.5) ** 2) / (2 * span**2))
        wr += line * window
    for side in (0.30, 0.70):
        line = np.exp(-((v - 0.54) ** 2) / (2 * 0.02**2))
        window = np.exp(-((u - side) ** 2) / (2 * 0.05**2))
        wr += 0.8 * line * window
    tex *= (1.0 - 0.30 * attrs.wrinkle_depth * np.clip(wr, 0, 1))[..., None]

    # beard: jaw/chin ellipse minus the mouth, darkened with coverage
    beard = _soft_mask(_ellipse(u, v, 0.5, 0.82, 0.34, 0.22)) * (
        1.0 - _soft_mask(_ellipse(u, v, 0.5, 0.72, 0.14, 0.05))
    )
    tex *= 1.0 - (_BEARD_DARKEN * attrs.beard_coverage * beard)[..., None]

    # freckles: mirrored speckle pairs on the cheeks
    rng = _speckle_rng(attrs)
    centers = rng.uniform(size=(_MAX_FRECKLES, 2))
    n = int(round(attrs.freckle_density * _MAX_FRECKLES))
    for k in range(n):
        cu = 0.12 + 0.20 * centers[k, 0]  # left cheek band
        cv = 0.45 + 0.25 * centers[k, 1]
        for mu in (cu, 1.0 - cu):
            spot = np.exp(
                -(((u - mu) ** 2) + (v - cv) ** 2) / (2 * (1.6 / res) ** 2)
            )
            tex *= (1.0 - 0.22 * np.clip(spot, 0, 1))[..., None]

    def paint(mask, color):
        m = mask[..., None]
        tex[:] = tex * (1.0 - m) + color * m

    # eyes: sclera + dark iris, fixed symmetric locations
    for cu in (0.34, 0.66):
        paint(_soft_mask(_ellipse(u, v, cu, 0.44, 0.07, 0.03)), np.array([0.92, 0.92, 0.90]))
        paint(_soft_mask(_ellipse(u, v, cu, 0.44, 0.028, 0.028)), np.array([0.18, 0.12, 0.08]))

    # eyebrows
    brow_color = np.array([0.75, 0.62, 0.45]) + attrs.eyebrow_color * (
        np.array([0.08, 0.06, 0.05]) - np.array([0.75, 0.62, 0.45])
    )
    for cu in (0.34, 0.66):
        paint(_soft_mask(_ellipse(u, v, cu, 0.36, 0.09, 0.018)), brow_color)

    # lips
    lip_color = np.array([0.80, 0.60, 0.58]) + attrs.lip_color * (
        np.array([0.55, 0.10, 0.12]) - np.array([0.80, 0.60, 0.58])
    )
    paint(_soft_mask(_ellipse(u, v, 0.5, 0.72, 0.12, 0.035)), lip_color)

    return np.clip(tex, 0.0, 1.0)


_TEMPLATE_ATTRS = AttributeVector(
    age=0.4,
    tone=0.35,
    male=False,
    freckle_density=0.0,
    wrinkle_depth=0.0,
    beard_coverage=0.0,
    lip_color=0.4,
    eyebrow_color=0.6,
    face_width=0.0,
    nose_height=0.0,
    eye_spacing=0.0,
    chin_shape=0.0,
)


def default_template(res: int = 64) -> np.ndarray:
    """Neutral template texture used by the completion stage."""
    return synth_texture(_TEMPLATE_ATTRS, res)
