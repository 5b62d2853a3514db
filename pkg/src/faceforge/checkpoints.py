"""Deterministic checkpoint archives.

A checkpoint is a zip of ``.npy`` member files plus ``metadata.json``; member
order and timestamps are fixed so identical contents produce identical bytes.
Loaders validate the stored architecture config against the rebuilt model and
reject mismatches.
"""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np
import torch

from .diffusion import build_schedule
from .errors import ConfigurationError, DependencyError
from .nets import (
    ConditionalUNet2d,
    DualEncoder,
    IdentityUNet1d,
    QualityClassifier,
    TextEncoder,
    TextureVAE,
)
from .training import GeometryDiffusion, TextureDiffusion
from .vocab import vocab_size

_EPOCH = (1980, 1, 1, 0, 0, 0)  # fixed zip timestamp for byte-stable archives
FORMAT_VERSION = 1


def save_arrays(path, arrays: dict, metadata: dict) -> None:
    """Write named float arrays + metadata as a byte-deterministic zip."""
    meta = dict(metadata)
    meta["format_version"] = FORMAT_VERSION
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(
                buf, np.ascontiguousarray(arrays[name]), allow_pickle=False
            )
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=_EPOCH), buf.getvalue())
        zf.writestr(
            zipfile.ZipInfo("metadata.json", date_time=_EPOCH),
            json.dumps(meta, indent=2, sort_keys=True),
        )


def load_arrays(path) -> tuple[dict, dict]:
    """Inverse of :func:`save_arrays`."""
    arrays = {}
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("metadata.json"))
        for info in zf.infolist():
            if info.filename.endswith(".npy"):
                arrays[info.filename[: -len(".npy")]] = np.lib.format.read_array(
                    io.BytesIO(zf.read(info)), allow_pickle=False
                )
    return arrays, meta


def _pack_state(module: torch.nn.Module, prefix: str, arrays: dict) -> None:
    for name, tensor in module.state_dict().items():
        arrays[f"{prefix}/{name}"] = tensor.detach().cpu().numpy()


def _unpack_state(module: torch.nn.Module, prefix: str, arrays: dict) -> None:
    state = {}
    want = {k: v.shape for k, v in module.state_dict().items()}
    for name, shape in want.items():
        key = f"{prefix}/{name}"
        if key not in arrays:
            raise ConfigurationError(f"checkpoint missing parameter {key}")
        arr = arrays[key]
        if tuple(arr.shape) != tuple(shape):
            # the npy reader promotes 0-d arrays to (1,); undo that
            if arr.size == 1 and int(np.prod(shape)) == 1:
                arr = arr.reshape(tuple(shape))
            else:
                raise ConfigurationError(
                    f"shape mismatch for {key}: checkpoint {arr.shape}, model {tuple(shape)}"
                )
        state[name] = torch.from_numpy(arr.copy())
    module.load_state_dict(state)


def _check_kind(meta: dict, kind: str, path) -> None:
    if meta.get("kind") != kind:
        raise ConfigurationError(
            f"{path}: checkpoint kind {meta.get('kind')!r}, expected {kind!r}"
        )


def save_vae(path, model: TextureVAE, metadata: dict | None = None) -> None:
    arrays: dict = {}
    _pack_state(model, "vae", arrays)
    save_arrays(path, arrays, {"kind": "vae", **(metadata or {})})


def load_vae(path) -> TextureVAE:
    arrays, meta = load_arrays(path)
    _check_kind(meta, "vae", path)
    model = TextureVAE()
    _unpack_state(model, "vae", arrays)
    return model.eval()


def save_tdm(path, model: TextureDiffusion, metadata: dict | None = None) -> None:
    arrays: dict = {}
    _pack_state(model.unet, "unet", arrays)
    _pack_state(model.text_encoder, "text_encoder", arrays)
    _pack_state(model.vae, "vae", arrays)
    meta = {
        "kind": "tdm",
        "latent_scale": model.latent_scale,
        "num_steps": model.schedule.num_steps,
        **(metadata or {}),
    }
    save_arrays(path, arrays, meta)


def load_tdm(path) -> TextureDiffusion:
    arrays, meta = load_arrays(path)
    _check_kind(meta, "tdm", path)
    unet = ConditionalUNet2d()
    tenc = TextEncoder(vocab_size())
    vae = TextureVAE()
    _unpack_state(unet, "unet", arrays)
    _unpack_state(tenc, "text_encoder", arrays)
    _unpack_state(vae, "vae", arrays)
    model = TextureDiffusion(
        unet=unet.eval(),
        text_encoder=tenc.eval(),
        vae=vae.eval(),
        latent_scale=float(meta["latent_scale"]),
        schedule=build_schedule(int(meta["num_steps"])),
    )
    return model


def save_gdm(path, model: GeometryDiffusion, metadata: dict | None = None) -> None:
    arrays: dict = {
        "alpha_mean": model.alpha_mean,
        "alpha_std": model.alpha_std,
    }
    _pack_state(model.net, "net", arrays)
    _pack_state(model.text_encoder, "text_encoder", arrays)
    meta = {"kind": "gdm", "num_steps": model.schedule.num_steps, **(metadata or {})}
    save_arrays(path, arrays, meta)


def load_gdm(path) -> GeometryDiffusion:
    arrays, meta = load_arrays(path)
    _check_kind(meta, "gdm", path)
    net = IdentityUNet1d()
    tenc = TextEncoder(vocab_size())
    _unpack_state(net, "net", arrays)
    _unpack_state(tenc, "text_encoder", arrays)
    return GeometryDiffusion(
        net=net.eval(),
        text_encoder=tenc.eval(),
        alpha_mean=arrays["alpha_mean"],
        alpha_std=arrays["alpha_std"],
        schedule=build_schedule(int(meta["num_steps"])),
    )


def save_dual_encoder(path, enc: DualEncoder, metadata: dict | None = None) -> None:
    arrays: dict = {}
    _pack_state(enc, "dualenc", arrays)
    save_arrays(path, arrays, {"kind": "dualenc", **(metadata or {})})


def load_dual_encoder(path) -> DualEncoder:
    arrays, meta = load_arrays(path)
    _check_kind(meta, "dualenc", path)
    enc = DualEncoder(vocab_size())
    _unpack_state(enc, "dualenc", arrays)
    return enc.eval()


def save_quality(path, clf: QualityClassifier, metadata: dict | None = None) -> None:
    arrays: dict = {"threshold": np.array(clf.threshold, dtype=np.float64)}
    _pack_state(clf, "quality", arrays)
    save_arrays(path, arrays, {"kind": "quality", **(metadata or {})})


def load_quality(path) -> QualityClassifier:
    arrays, meta = load_arrays(path)
    _check_kind(meta, "quality", path)
    clf = QualityClassifier()
    _unpack_state(clf, "quality", arrays)
    clf.threshold = float(np.asarray(arrays["threshold"]).reshape(()))
    return clf.eval()


def require(path, what: str):
    """Raise a dependency error naming the missing checkpoint."""
    import os

    if not os.path.exists(path):
        raise DependencyError(f"missing {what} checkpoint: {path}")
    return path
