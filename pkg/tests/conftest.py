"""Shared fixtures: generated corpora and trained models.

Training the diffusion models takes minutes, so trained models (and a few
expensive sample batches) are cached under ``tests/.cache``, keyed by name.
Corpus generation is seed-deterministic and cheap, so datasets are rebuilt
fresh each session and the caches stay valid.  Delete ``tests/.cache`` to
force retraining.
"""

from pathlib import Path

import numpy as np
import pytest

from faceforge import checkpoints as ckpt
from faceforge.evalkit import train_dual_encoder, train_quality_classifier
from faceforge.synthface import GenerationConfig, corrupt, make_record
from faceforge.training import TrainConfig, train_gdm, train_tdm, train_vae

CACHE = Path(__file__).parent / ".cache"

TDM_COUNT = 256  # identities in the texture-training corpus
GDM_COUNT = 2000  # identities in the geometry-training corpus
HOLDOUT_SEED0 = 10_000  # held-out identities start at this seed
HOLDOUT_COUNT = 200

TDM_GEN = GenerationConfig(k_relit=2)
GDM_GEN = GenerationConfig(render_images=False)

VAE_TRAIN = TrainConfig(steps=600, batch_size=16, lr=1e-3, seed=0)
TDM_TRAIN = TrainConfig(steps=4000, batch_size=16, lr=2e-4, seed=0)
GDM_TRAIN = TrainConfig(steps=3000, batch_size=32, lr=2e-4, seed=0)
DUALENC_TRAIN = TrainConfig(steps=1200, batch_size=32, lr=1e-3, seed=0)
# texture-prompt alignment benefits from a longer contrastive run
DUALENC_TEXTURE_TRAIN = TrainConfig(steps=4000, batch_size=32, lr=1e-3, seed=0)
QUALITY_TRAIN = TrainConfig(steps=400, batch_size=32, lr=1e-3, seed=0)


def _cached_model(name, save, load, build):
    path = CACHE / f"{name}.ckpt"
    if path.exists():
        return load(path)
    model = build()
    CACHE.mkdir(exist_ok=True)
    save(path, model)
    return model


def cached_arrays(name, build) -> dict:
    """Disk-cached dict of named numpy arrays (for expensive sample batches)."""
    path = CACHE / f"{name}.npz"
    if path.exists():
        with np.load(path) as z:
            return {k: z[k] for k in z.files}
    arrays = build()
    CACHE.mkdir(exist_ok=True)
    np.savez(path, **arrays)
    return arrays


def build_tdm_corpus():
    return [make_record(s, TDM_GEN) for s in range(TDM_COUNT)]


def build_gdm_corpus():
    return [make_record(s, GDM_GEN) for s in range(GDM_COUNT)]


def build_holdout():
    return [
        make_record(HOLDOUT_SEED0 + s, TDM_GEN) for s in range(HOLDOUT_COUNT)
    ]


@pytest.fixture(scope="session")
def dataset_tdm():
    return build_tdm_corpus()


@pytest.fixture(scope="session")
def dataset_gdm():
    return build_gdm_corpus()


@pytest.fixture(scope="session")
def holdout_records():
    return build_holdout()


@pytest.fixture(scope="session")
def vae_trained(dataset_tdm):
    return _cached_model(
        "vae",
        ckpt.save_vae,
        ckpt.load_vae,
        lambda: train_vae(dataset_tdm, VAE_TRAIN)[0],
    )


@pytest.fixture(scope="session")
def tdm_trained(dataset_tdm, vae_trained):
    return _cached_model(
        "tdm",
        ckpt.save_tdm,
        ckpt.load_tdm,
        lambda: train_tdm(dataset_tdm, vae_trained, TDM_TRAIN)[0],
    )


@pytest.fixture(scope="session")
def gdm_trained(dataset_gdm):
    return _cached_model(
        "gdm",
        ckpt.save_gdm,
        ckpt.load_gdm,
        lambda: train_gdm(dataset_gdm, GDM_TRAIN)[0],
    )


@pytest.fixture(scope="session")
def dualenc_views(dataset_tdm):
    return _cached_model(
        "dualenc_views",
        ckpt.save_dual_encoder,
        ckpt.load_dual_encoder,
        lambda: train_dual_encoder(dataset_tdm, DUALENC_TRAIN)[0],
    )


@pytest.fixture(scope="session")
def dualenc_texture(dataset_tdm):
    return _cached_model(
        "dualenc_texture",
        ckpt.save_dual_encoder,
        ckpt.load_dual_encoder,
        lambda: train_dual_encoder(dataset_tdm, DUALENC_TEXTURE_TRAIN, source="texture")[0],
    )


def flawed_variants(records, seed0=0):
    """One corrupted copy per record, alternating corruption kinds."""
    kinds = ("occlusion", "lighting-bake")
    return [
        corrupt(rec, kinds[i % 2], seed0 + i) for i, rec in enumerate(records)
    ]


@pytest.fixture(scope="session")
def quality_clf(dataset_tdm):
    def build():
        clean = dataset_tdm[:200]
        flawed = flawed_variants(clean)
        return train_quality_classifier(clean, flawed, QUALITY_TRAIN)[0]

    return _cached_model(
        "quality", ckpt.save_quality, ckpt.load_quality, build
    )
