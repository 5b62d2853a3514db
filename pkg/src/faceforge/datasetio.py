"""Dataset directory persistence.

Layout: ``manifest.jsonl`` (one descriptor per record), ``uv/<id>.png``,
``views/<id>_<yaw>.png``, ``relit/<id>_<k>.png``, ``alpha/<id>.json``,
``prompts/<id>.txt``; incomplete textures as ``uvpart``/``uvmask`` PNG pairs.
Images are 8-bit PNG, so loading quantizes colors to 1/255 steps; writing a
loaded dataset back is byte-stable.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ParameterError
from .synthface import (
    AttributeVector,
    Camera,
    DatasetRecord,
    RelitView,
    SHLighting,
    attribute_bins,
)
from .uvpipeline import IncompleteTexture

SUBDIRS = ("uv", "views", "relit", "alpha", "prompts")


def _to_u8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def save_png(path, img: np.ndarray) -> None:
    """8-bit PNG; RGB for (H, W, 3) input, grayscale for (H, W)."""
    arr = _to_u8(img)
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(arr, mode=mode).save(path, format="PNG")


def load_png(path) -> np.ndarray:
    """PNG to float image in [0, 1]; (H, W, 3) or (H, W) for grayscale."""
    arr = np.asarray(Image.open(path))
    return arr.astype(np.float64) / 255.0


def _yaw_tag(yaw: float) -> str:
    return f"{int(round(yaw)):+d}"


def write_dataset(records, out_dir) -> Path:
    """Write records and return the manifest path; deterministic byte-for-byte."""
    out = Path(out_dir)
    for sub in SUBDIRS:
        (out / sub).mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.jsonl"
    with open(manifest, "w") as mf:
        for rec in records:
            entry = {
                "id": rec.id,
                "seed": rec.seed,
                "attrs": _attrs_dict(rec.attrs),
                "bins": attribute_bins(rec.attrs),
                "corrupted": rec.corrupted,
                "paths": {
                    "alpha": f"alpha/{rec.id}.json",
                    "prompt": f"prompts/{rec.id}.txt",
                },
            }
            with open(out / "alpha" / f"{rec.id}.json", "w") as f:
                json.dump([float(a) for a in rec.alpha], f)
            (out / "prompts" / f"{rec.id}.txt").write_text(rec.prompt)
            if rec.uv_gt is not None:
                save_png(out / "uv" / f"{rec.id}.png", rec.uv_gt)
                entry["paths"]["uv"] = f"uv/{rec.id}.png"
            view_paths = {}
            for yaw in sorted(rec.views):
                p = f"views/{rec.id}_{_yaw_tag(yaw)}.png"
                save_png(out / p, rec.views[yaw])
                view_paths[_yaw_tag(yaw)] = p
            if view_paths:
                entry["paths"]["views"] = view_paths
            relit = []
            for k, rv in enumerate(rec.relit):
                p = f"relit/{rec.id}_{k}.png"
                save_png(out / p, rv.image)
                relit.append(
                    {
                        "path": p,
                        "yaw": rv.camera.yaw,
                        "pitch": rv.camera.pitch,
                        "sh": [list(row) for row in np.asarray(rv.light.coeffs)],
                    }
                )
            if relit:
                entry["relit"] = relit
            mf.write(json.dumps(entry, sort_keys=True) + "\n")
    return manifest


def _attrs_dict(attrs: AttributeVector) -> dict:
    from dataclasses import asdict

    d = asdict(attrs)
    return {k: (bool(v) if k == "male" else float(v)) for k, v in d.items()}


def read_dataset(out_dir) -> list:
    """Load a written dataset back into records (images 8-bit quantized)."""
    out = Path(out_dir)
    manifest = out / "manifest.jsonl"
    if not manifest.exists():
        raise ParameterError(f"no manifest.jsonl under {out}")
    records = []
    for line in manifest.read_text().splitlines():
        entry = json.loads(line)
        attrs = AttributeVector(**entry["attrs"])
        with open(out / entry["paths"]["alpha"]) as f:
            alpha = np.array(json.load(f), dtype=np.float64)
        prompt = (out / entry["paths"]["prompt"]).read_text()
        uv_gt = (
            load_png(out / entry["paths"]["uv"]) if "uv" in entry["paths"] else None
        )
        views = {
            float(tag): load_png(out / p)
            for tag, p in entry["paths"].get("views", {}).items()
        }
        relit = [
            RelitView(
                image=load_png(out / rv["path"]),
                camera=Camera(yaw=rv["yaw"], pitch=rv["pitch"]),
                light=SHLighting(coeffs=np.array(rv["sh"], dtype=np.float64)),
            )
            for rv in entry.get("relit", [])
        ]
        records.append(
            DatasetRecord(
                id=entry["id"],
                seed=entry["seed"],
                attrs=attrs,
                alpha=alpha,
                prompt=prompt,
                uv_gt=uv_gt,
                views=views,
                relit=relit,
                corrupted=entry.get("corrupted", False),
            )
        )
    return records


def write_incomplete(part: IncompleteTexture, out_dir, rec_id: str, view: str) -> tuple:
    """Persist an incomplete texture as paired texture/mask PNGs."""
    out = Path(out_dir)
    (out / "uvpart").mkdir(parents=True, exist_ok=True)
    (out / "uvmask").mkdir(parents=True, exist_ok=True)
    tex_path = out / "uvpart" / f"{rec_id}_{view}.png"
    mask_path = out / "uvmask" / f"{rec_id}_{view}.png"
    save_png(tex_path, part.texture)
    save_png(mask_path, part.visibility)
    return tex_path, mask_path


def read_incomplete(out_dir, rec_id: str, view: str) -> IncompleteTexture:
    out = Path(out_dir)
    return IncompleteTexture(
        texture=load_png(out / "uvpart" / f"{rec_id}_{view}.png"),
        visibility=load_png(out / "uvmask" / f"{rec_id}_{view}.png"),
    )
