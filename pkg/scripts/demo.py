#!/usr/bin/env python3
"""Minutes-scale end-to-end demo.

Generates a small synthetic dataset, trains the texture VAE, both diffusion
models, and the dual encoder at toy step counts, then samples a textured face
from a text prompt and writes everything under the output directory.  The
result is low-fidelity (the point is exercising the full pipeline); see
``train_models.py`` for the desk-scale configuration.
"""

import argparse
import time
from pathlib import Path

from faceforge.cli import main as cli


def run(args):
    t0 = time.time()
    out = Path(args.out)
    cfg = out / "run.yaml"
    out.mkdir(parents=True, exist_ok=True)
    cfg.write_text(
        f"data:\n  count: {args.count}\n  k_relit: 2\n"
        f"train:\n  steps: {args.steps}\n  batch_size: 8\n  lr: 0.001\n"
        "sample:\n  texture_steps: 50\n  geometry_steps: 50\n"
    )

    def cli_run(*argv):
        print(f"$ faceforge {' '.join(argv)}")
        cli.main(args=list(argv), standalone_mode=False)

    cli_run("gen-data", "--config", str(cfg), "--out", str(out / "data"))
    cli_run("train", "vae", "--config", str(cfg), "--data", str(out / "data"),
            "--out", str(out / "vae.ckpt"), "--trace", str(out / "vae_trace.csv"))
    cli_run("train", "tdm", "--config", str(cfg), "--data", str(out / "data"),
            "--vae-ckpt", str(out / "vae.ckpt"), "--out", str(out / "tdm.ckpt"))
    cli_run("train", "gdm", "--config", str(cfg), "--data", str(out / "data"),
            "--out", str(out / "gdm.ckpt"))
    cli_run("sample", "--config", str(cfg),
            "--tdm-ckpt", str(out / "tdm.ckpt"), "--gdm-ckpt", str(out / "gdm.ckpt"),
            "--text", args.prompt, "--seed", str(args.seed),
            "--out", str(out / "sample"))
    cli_run("evaluate", "--data", str(out / "data"),
            "--out", str(out / "metrics.json"))
    print(f"done in {time.time() - t0:.0f} s; outputs under {out}")


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="demo_out")
    p.add_argument("--count", type=int, default=24, help="dataset size")
    p.add_argument("--steps", type=int, default=200, help="training steps per model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--prompt",
        default="a young man, tan skin, full beard, wide face, square chin",
    )
    run(p.parse_args())
