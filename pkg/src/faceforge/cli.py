"""Command-line entry point.

Subcommands: ``gen-data``, ``train``, ``sample``, ``edit``, ``unwrap``,
``evaluate``, ``filter``.  Exit codes: 0 success, 2 usage/config error,
3 missing dependency (checkpoint), 4 IO error.
"""

from __future__ import annotations

import functools
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import checkpoints as ckpt
from .config import RunConfig, load_config
from .datasetio import (
    load_png,
    read_dataset,
    save_png,
    write_dataset,
    write_incomplete,
)
from .errors import (
    ConfigurationError,
    DependencyError,
    ParameterError,
    VocabularyError,
)
from .evalkit import (
    alignment_filter,
    evaluate_corpus,
    quality_filter,
    train_dual_encoder,
    train_quality_classifier,
)
from .objio import write_obj
from .synthface import (
    Camera,
    GenerationConfig,
    build_mesh,
    default_shape_model,
    fit_alpha,
    geo_clauses,
    make_record,
)
from .training import (
    TrainConfig,
    encode_texture_latent,
    gdm_sample,
    tdm_sample,
    train_gdm,
    train_tdm,
    train_vae,
)
from .diffusion import GuidanceConfig
from .uvpipeline import unwrap

EXIT_USAGE = 2
EXIT_DEPENDENCY = 3
EXIT_IO = 4


def _handled(fn):
    """Map domain errors to the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigurationError, ParameterError, VocabularyError) as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_USAGE)
        except DependencyError as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(EXIT_DEPENDENCY)
        except OSError as e:
            click.echo(f"io error: {e}", err=True)
            sys.exit(EXIT_IO)

    return wrapper


@click.group()
def main():
    """Text/image conditioned generation of 3D face textures and geometry."""


_config_opt = click.option(
    "--config", "config_path", default=None, help="YAML run config (defaults apply)."
)


def _cfg(config_path) -> RunConfig:
    return load_config(config_path) if config_path else RunConfig()


@main.command("gen-data")
@_config_opt
@click.option("--count", default=None, type=int, help="Records to generate (overrides config).")
@click.option("--seed", default=0, show_default=True, help="First record seed.")
@click.option("--out", "out_dir", required=True, help="Output dataset directory.")
@click.option("--quality-ckpt", default=None, help="Quality classifier checkpoint (filter stage 1).")
@click.option("--dualenc-ckpt", default=None, help="Dual encoder checkpoint (filter stage 2).")
@_handled
def gen_data(config_path, count, seed, out_dir, quality_ckpt, dualenc_ckpt):
    """Generate a synthetic dataset (optionally filtered) under OUT."""
    cfg = _cfg(config_path)
    n = count if count is not None else cfg.data.count
    gen = GenerationConfig(
        texture_res=cfg.data.texture_res,
        view_res=cfg.data.view_res,
        k_relit=cfg.data.k_relit,
    )
    records = [make_record(seed + i, gen) for i in range(n)]
    report = {"generated": n, "config": cfg.to_dict(), "filter": None}
    if cfg.data.filter:
        clf = ckpt.load_quality(ckpt.require(quality_ckpt or "", "quality classifier"))
        enc = ckpt.load_dual_encoder(ckpt.require(dualenc_ckpt or "", "dual encoder"))
        kept, rejected = [], {"quality": 0, "alignment": 0}
        for rec in records:
            if not quality_filter(rec, clf, cfg.data.quality_threshold):
                rejected["quality"] += 1
            elif not alignment_filter(rec, enc, cfg.data.alignment_threshold):
                rejected["alignment"] += 1
            else:
                kept.append(rec)
        report["filter"] = {"retained": len(kept), "rejected": rejected}
        records = kept
    manifest = write_dataset(records, out_dir)
    (Path(out_dir) / "filter_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True)
    )
    click.echo(f"wrote {len(records)} records to {manifest}")


@main.command("train")
@click.argument("model", type=click.Choice(["vae", "tdm", "gdm", "dualenc"]))
@_config_opt
@click.option("--data", "data_dir", required=True, help="Dataset directory (gen-data output).")
@click.option("--vae-ckpt", default=None, help="Trained VAE checkpoint (required for tdm).")
@click.option("--out", "out_path", required=True, help="Output checkpoint path.")
@click.option("--trace", "trace_path", default=None, help="Loss trace CSV path.")
@_handled
def train(model, config_path, data_dir, vae_ckpt, out_path, trace_path):
    """Train MODEL on a generated dataset and write a checkpoint."""
    cfg = _cfg(config_path)
    tc = TrainConfig(
        batch_size=cfg.train.batch_size,
        steps=cfg.train.steps,
        lr=cfg.train.lr,
        p_drop=cfg.train.p_drop,
        seed=cfg.train.seed,
        beta_kl=cfg.train.beta_kl,
    )
    records = read_dataset(data_dir)
    meta = {"train_config": cfg.to_dict()["train"], "seed": tc.seed}
    if model == "vae":
        net, trace = train_vae(records, tc)
        ckpt.save_vae(out_path, net, meta)
    elif model == "tdm":
        vae = ckpt.load_vae(ckpt.require(vae_ckpt or "", "vae"))
        net, trace = train_tdm(records, vae, tc)
        ckpt.save_tdm(out_path, net, meta)
    elif model == "gdm":
        net, trace = train_gdm(records, tc)
        ckpt.save_gdm(out_path, net, meta)
    else:
        net, trace = train_dual_encoder(records, tc)
        ckpt.save_dual_encoder(out_path, net, meta)
    if trace_path:
        trace.to_csv(trace_path)
    click.echo(f"trained {model}: final loss {trace.losses[-1]:.4f} -> {out_path}")


def _load_image_prompt(image_path):
    """Image prompt PNG + JSON sidecar with camera (and optional heights)."""
    img = load_png(image_path)
    sidecar = Path(image_path).with_suffix(".json")
    if not sidecar.exists():
        raise DependencyError(f"image prompt needs a camera sidecar: {sidecar}")
    meta = json.loads(sidecar.read_text())
    cam = Camera(yaw=float(meta.get("yaw", 0.0)), pitch=float(meta.get("pitch", 0.0)))
    heights = None
    if "heights" in meta:
        heights = np.load(Path(image_path).parent / meta["heights"])
    return img, cam, meta, heights


@main.command("sample")
@_config_opt
@click.option("--tdm-ckpt", default=None, help="Texture model checkpoint.")
@click.option("--gdm-ckpt", default=None, help="Geometry model checkpoint.")
@click.option("--text", default=None, help="Text prompt (closed vocabulary).")
@click.option("--image", "image_path", default=None, help="Image prompt PNG (with .json sidecar).")
@click.option("--unconditional", is_flag=True, help="Sample with all conditions null.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, help="Output directory.")
@_handled
def sample(config_path, tdm_ckpt, gdm_ckpt, text, image_path, unconditional, seed, out_dir):
    """Generate texture (TDM) and/or geometry (GDM) into OUT."""
    if text is None and image_path is None and not unconditional:
        raise ConfigurationError(
            "provide --text and/or --image, or pass --unconditional"
        )
    if tdm_ckpt is None and gdm_ckpt is None:
        raise DependencyError("need at least one of --tdm-ckpt / --gdm-ckpt")
    cfg = _cfg(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    info = {"seed": seed, "text": text, "image": image_path, "config": cfg.to_dict()}

    shape_model = default_shape_model()
    alpha = None
    image = cam = heights = None
    if image_path is not None:
        image, cam, _, heights = _load_image_prompt(image_path)

    if tdm_ckpt is not None:
        tdm = ckpt.load_tdm(tdm_ckpt)
        image_latent = None
        if image is not None:
            if alpha is None and heights is not None:
                alpha = fit_alpha(heights, shape_model)
            mesh = build_mesh(
                alpha if alpha is not None else np.zeros(shape_model.dim), shape_model
            )
            part = unwrap(image, mesh, cam)
            image_latent = (
                encode_texture_latent(tdm.vae, part.texture) * tdm.latent_scale
            )
        tex = tdm_sample(
            tdm,
            text or "",
            image_latent=image_latent,
            guidance=GuidanceConfig(
                scale=cfg.sample.texture_guidance, sampler_steps=cfg.sample.texture_steps
            ),
            seed=seed,
            shuffle_seed=seed if text else None,
        )
        save_png(out / "texture.png", tex)
        info["texture"] = "texture.png"

    if gdm_ckpt is not None or heights is not None:
        if heights is not None:
            # geometry recovered from the image prompt's depth sidecar
            alpha = fit_alpha(heights, shape_model)
        else:
            gdm = ckpt.load_gdm(ckpt.require(gdm_ckpt, "gdm"))
            geo_prompt = geo_clauses(text) if text else ""
            alpha = gdm_sample(
                gdm,
                geo_prompt,
                guidance=GuidanceConfig(
                    scale=cfg.sample.geometry_guidance,
                    sampler_steps=cfg.sample.geometry_steps,
                ),
                seed=seed,
            )
        mesh = build_mesh(alpha, shape_model)
        write_obj(out / "face.obj", mesh, "texture.png" if tdm_ckpt else None)
        (out / "alpha.json").write_text(json.dumps([float(a) for a in alpha]))
        info["mesh"] = "face.obj"

    info["wall_clock_s"] = round(time.perf_counter() - t0, 3)
    (out / "sample_info.json").write_text(json.dumps(info, indent=2, sort_keys=True))
    click.echo(f"sampled in {info['wall_clock_s']} s -> {out}")


@main.command("edit")
@_config_opt
@click.option("--tdm-ckpt", required=True, help="Texture model checkpoint.")
@click.option("--base", "base_prompt", required=True, help="Base text prompt.")
@click.option("--edited", "edited_prompt", required=True, help="Edited text prompt.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, help="Output directory.")
@_handled
def edit(config_path, tdm_ckpt, base_prompt, edited_prompt, seed, out_dir):
    """Sample base and edited prompts with an identical noise stream."""
    cfg = _cfg(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tdm = ckpt.load_tdm(tdm_ckpt)
    g = GuidanceConfig(
        scale=cfg.sample.texture_guidance, sampler_steps=cfg.sample.texture_steps
    )
    tex_a = tdm_sample(tdm, base_prompt, guidance=g, seed=seed)
    tex_b = tdm_sample(tdm, edited_prompt, guidance=g, seed=seed)
    heat = np.abs(tex_a - tex_b).mean(axis=-1)
    save_png(out / "base.png", tex_a)
    save_png(out / "edited.png", tex_b)
    save_png(out / "diff.png", np.clip(heat / max(heat.max(), 1e-9), 0, 1))
    click.echo(f"edit pair written to {out}")


@main.command("unwrap")
@click.option("--image", "image_path", required=True, help="Posed view PNG (with .json sidecar).")
@click.option("--alpha", "alpha_path", default=None, help="Identity coefficients JSON.")
@click.option("--out", "out_dir", required=True, help="Output directory.")
@click.option("--id", "rec_id", default="input", show_default=True, help="Output file stem.")
@_handled
def unwrap_cmd(image_path, alpha_path, out_dir, rec_id):
    """Unwrap a posed image into an incomplete UV texture + mask."""
    image, cam, _, heights = _load_image_prompt(image_path)
    shape_model = default_shape_model()
    if alpha_path is not None:
        alpha = np.array(json.loads(Path(alpha_path).read_text()))
    elif heights is not None:
        alpha = fit_alpha(heights, shape_model)
    else:
        alpha = np.zeros(shape_model.dim)
    mesh = build_mesh(alpha, shape_model)
    part = unwrap(image, mesh, cam)
    tex_path, mask_path = write_incomplete(
        part, out_dir, rec_id, f"{int(round(cam.yaw)):+d}"
    )
    click.echo(f"wrote {tex_path} and {mask_path}")


@main.command("evaluate")
@_config_opt
@click.option("--data", "data_dir", required=True, help="Dataset directory to evaluate.")
@click.option(
    "--metrics",
    default="bs_error",
    show_default=True,
    help="Comma-separated subset of bs_error,identity_similarity,alignment.",
)
@click.option("--dualenc-ckpt", default=None, help="Dual encoder checkpoint (identity/alignment).")
@click.option("--out", "out_path", required=True, help="Report JSON path.")
@_handled
def evaluate(config_path, data_dir, metrics, dualenc_ckpt, out_path):
    """Run corpus metrics and write a JSON report."""
    cfg = _cfg(config_path)
    records = read_dataset(data_dir)
    if not records:
        raise ParameterError(f"no records under {data_dir}")
    wanted = tuple(m.strip() for m in metrics.split(",") if m.strip())
    enc = None
    if {"identity_similarity", "alignment"} & set(wanted):
        enc = ckpt.load_dual_encoder(ckpt.require(dualenc_ckpt or "", "dual encoder"))
    report = evaluate_corpus(
        records, metrics=wanted, dual_encoder=enc, bs_kernel=cfg.metrics.bs_kernel
    )
    Path(out_path).write_text(report.to_json())
    click.echo(f"report written to {out_path}")


@main.command("filter")
@_config_opt
@click.option("--data", "data_dir", required=True, help="Dataset directory to filter.")
@click.option("--quality-ckpt", required=True, help="Quality classifier checkpoint.")
@click.option("--dualenc-ckpt", required=True, help="Dual encoder checkpoint.")
@click.option("--out", "out_path", required=True, help="Filter report JSON path.")
@_handled
def filter_cmd(config_path, data_dir, quality_ckpt, dualenc_ckpt, out_path):
    """Apply the dual-stage filter to a dataset and report retention."""
    cfg = _cfg(config_path)
    records = read_dataset(data_dir)
    if not records:
        raise ParameterError(f"no records under {data_dir}")
    clf = ckpt.load_quality(ckpt.require(quality_ckpt, "quality classifier"))
    enc = ckpt.load_dual_encoder(ckpt.require(dualenc_ckpt, "dual encoder"))
    retained, rejected = [], {"quality": [], "alignment": []}
    for rec in records:
        if not quality_filter(rec, clf, cfg.data.quality_threshold):
            rejected["quality"].append(rec.id)
        elif not alignment_filter(rec, enc, cfg.data.alignment_threshold):
            rejected["alignment"].append(rec.id)
        else:
            retained.append(rec.id)
    report = {
        "retained": retained,
        "rejected": rejected,
        "thresholds": {
            "quality": cfg.data.quality_threshold,
            "alignment": cfg.data.alignment_threshold,
        },
    }
    Path(out_path).write_text(json.dumps(report, indent=2, sort_keys=True))
    click.echo(
        f"retained {len(retained)}/{len(records)} "
        f"(quality -{len(rejected['quality'])}, alignment -{len(rejected['alignment'])})"
    )


if __name__ == "__main__":
    main()
