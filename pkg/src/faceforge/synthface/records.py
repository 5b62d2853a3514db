"""Ground-truth dataset records: one fully determined synthetic identity."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ParameterError
from .attributes import (
    AttributeVector,
    GeoMap,
    attrs_to_alpha,
    default_geo_map,
    sample_attributes,
    synth_prompt,
)
from .raster import Camera, SHLighting, render
from .shapemodel import ShapeModel, build_mesh, default_shape_model
from .texture import synth_texture

VIEW_YAWS = (-35.0, 0.0, 35.0)


@dataclass(frozen=True)
class GenerationConfig:
    texture_res: int = 64
    view_res: int = 128
    grid: int = 64
    alpha_dim: int = 64
    k_relit: int = 5
    relit_yaw: float = 45.0
    relit_pitch: float = 12.0
    sh_dc: tuple = (0.6, 1.2)
    sh_hi: float = 0.3
    render_images: bool = True  # False: attributes/alpha/prompt only (geometry work)


@dataclass(frozen=True)
class RelitView:
    image: np.ndarray
    camera: Camera
    light: SHLighting


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    seed: int
    attrs: AttributeVector
    alpha: np.ndarray
    prompt: str
    uv_gt: np.ndarray | None = None
    views: dict = field(default_factory=dict)  # yaw -> (res, res, 3) image
    relit: list = field(default_factory=list)  # list[RelitView]
    corrupted: bool = False


def default_models(cfg: GenerationConfig) -> tuple[ShapeModel, GeoMap]:
    return (
        default_shape_model(G=cfg.grid, d=cfg.alpha_dim),
        default_geo_map(d=cfg.alpha_dim),
    )


def make_record(
    seed: int,
    cfg: GenerationConfig = GenerationConfig(),
    shape_model: ShapeModel | None = None,
    geo_map: GeoMap | None = None,
) -> DatasetRecord:
    """Generate one identity; byte-identical for identical (seed, cfg)."""
    if shape_model is None or geo_map is None:
        sm, gm = default_models(cfg)
        shape_model = shape_model or sm
        geo_map = geo_map or gm
    attrs = sample_attributes(seed)
    alpha = attrs_to_alpha(attrs, geo_map)
    prompt = synth_prompt(attrs)
    rec_id = f"id{seed:08d}"
    if not cfg.render_images:
        return DatasetRecord(id=rec_id, seed=seed, attrs=attrs, alpha=alpha, prompt=prompt)

    uv_gt = synth_texture(attrs, cfg.texture_res)
    mesh = build_mesh(alpha, shape_model)
    views = {
        yaw: render(mesh, uv_gt, Camera(yaw=yaw), SHLighting.uniform(), res=cfg.view_res).image
        for yaw in VIEW_YAWS
    }
    rng = np.random.default_rng(np.random.SeedSequence([0x5EC0, seed]))
    relit = []
    for _ in range(cfg.k_relit):
        cam = Camera(
            yaw=float(rng.uniform(-cfg.relit_yaw, cfg.relit_yaw)),
            pitch=float(rng.uniform(-cfg.relit_pitch, cfg.relit_pitch)),
        )
        light = SHLighting.random(rng, dc_range=cfg.sh_dc, hi=cfg.sh_hi)
        relit.append(
            RelitView(
                image=render(mesh, uv_gt, cam, light, res=cfg.view_res).image,
                camera=cam,
                light=light,
            )
        )
    return DatasetRecord(
        id=rec_id,
        seed=seed,
        attrs=attrs,
        alpha=alpha,
        prompt=prompt,
        uv_gt=uv_gt,
        views=views,
        relit=relit,
    )


OCCLUSION_AREA = (0.02, 0.10)


def corrupt(rec: DatasetRecord, kind: str, seed: int) -> DatasetRecord:
    """Labeled flawed variant of a record (uv texture artifacts)."""
    if rec.uv_gt is None:
        raise ParameterError("record has no texture to corrupt")
    rng = np.random.default_rng(np.random.SeedSequence([0xBAD, seed]))
    uv = rec.uv_gt.copy()
    res = uv.shape[0]
    if kind == "occlusion":
        # draw away from the band edges so integer rounding stays inside it
        frac = rng.uniform(OCCLUSION_AREA[0] + 0.01, OCCLUSION_AREA[1] - 0.01)
        aspect = rng.uniform(0.5, 2.0)
        h = int(np.clip(round(np.sqrt(frac * res * res * aspect)), 2, res))
        w = int(np.clip(round(frac * res * res / h), 2, res))
        y0 = rng.integers(0, res - h + 1)
        x0 = rng.integers(0, res - w + 1)
        uv[y0 : y0 + h, x0 : x0 + w] = rng.uniform(size=3)
    elif kind == "lighting-bake":
        ramp = np.linspace(1.0 - 0.3, 1.0 + 0.3, res)
        if rng.uniform() < 0.5:
            ramp = ramp[::-1]
        uv = np.clip(uv * ramp[None, :, None], 0.0, 1.0)
    else:
        raise ParameterError(f"unknown corruption kind: {kind}")
    return replace(rec, uv_gt=uv, corrupted=True)
