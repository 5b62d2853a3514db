"""Metrics and data filtering: brightness-symmetry error, identity similarity,
text-image alignment, and the dual-stage quality/alignment filter."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ConfigurationError, ParameterError
from .nets import DualEncoder, QualityClassifier
from .training import LossTrace, TrainConfig, pad_tokens
from .vocab import tokenize, vocab_size

# BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])
DEFAULT_BS_KERNEL = 55


def _gaussian_taps(kernel: int) -> np.ndarray:
    """Normalized half-kernel taps [k0, k1, ..., k_r] for sigma = kernel / 6."""
    r = kernel // 2
    sigma = kernel / 6.0
    full = np.exp(-0.5 * (np.arange(-r, r + 1) / sigma) ** 2)
    full /= full.sum()
    return full[r:]


def _blur_h(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Horizontal Gaussian pass, reflect padding.

    Symmetric tap pairs are added before scaling, which makes the pass exactly
    equivariant to horizontal flips in floating point — the flip-symmetry
    invariants of the metric then hold bitwise, not just approximately.
    """
    r = len(taps) - 1
    p = np.pad(img, ((0, 0), (r, r)), mode="reflect")
    out = taps[0] * img.astype(np.float64)
    for i in range(1, r + 1):
        W = img.shape[1]
        left = p[:, r - i : r - i + W]
        right = p[:, r + i : r + i + W]
        out += taps[i] * (left + right)
    return out


def _blur_v(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    return _blur_h(img.T, taps).T


def bs_error(
    tex: np.ndarray, kernel: int = DEFAULT_BS_KERNEL, reduce: str = "mean"
) -> float:
    """Brightness-symmetry error of a UV texture.

    Gaussian-blur the BT.601 luma channel (sigma = kernel/6, reflect padding)
    and return the L1 distance to its horizontal flip — "mean" per pixel by
    default, "sum" for the raw total.
    """
    tex = np.asarray(tex, dtype=np.float64)
    if tex.ndim != 3 or tex.shape[2] != 3:
        raise ParameterError(f"expected (H, W, 3) texture, got {tex.shape}")
    if kernel % 2 == 0 or kernel < 1:
        raise ParameterError(f"kernel size must be odd and positive, got {kernel}")
    if reduce not in ("mean", "sum"):
        raise ParameterError(f"reduce must be 'mean' or 'sum', got {reduce!r}")
    # elementwise (not matmul) so the result is bitwise flip-equivariant
    y = _LUMA[0] * tex[..., 0] + _LUMA[1] * tex[..., 1] + _LUMA[2] * tex[..., 2]
    taps = _gaussian_taps(kernel)
    blurred = _blur_v(_blur_h(y, taps), taps)
    diff = np.abs(blurred - blurred[:, ::-1])
    return float(diff.mean() if reduce == "mean" else diff.sum())


def identity_similarity(
    img_a: np.ndarray, img_b: np.ndarray, enc: DualEncoder
) -> float:
    """Cosine similarity of the image-branch embeddings, in [-1, 1]."""
    batch = torch.from_numpy(
        np.stack([img_a, img_b]).astype(np.float32).transpose(0, 3, 1, 2)
    )
    with torch.no_grad():
        e = enc.encode_image(batch)
    return float((e[0] * e[1]).sum().clamp(-1.0, 1.0))


def alignment_score(img: np.ndarray, prompt: str, enc: DualEncoder) -> float:
    """Cosine similarity between the image and prompt embeddings."""
    x = torch.from_numpy(
        np.asarray(img, dtype=np.float32).transpose(2, 0, 1)
    )[None]
    ids = torch.tensor([pad_tokens(tokenize(prompt))], dtype=torch.long)
    with torch.no_grad():
        s = enc.similarity(x, ids)
    return float(s[0].clamp(-1.0, 1.0))


def train_dual_encoder(
    dataset, cfg: TrainConfig, source: str = "views"
) -> tuple[DualEncoder, LossTrace]:
    """Symmetric in-batch contrastive training on (image, prompt) pairs.

    With ``source="views"`` the image side is the frontal render and a second
    contrastive term over two views of the same identity shapes the image
    branch for identity similarity.  ``source="texture"`` trains directly on
    the UV textures (single image per identity, no multi-view term).
    """
    if cfg.batch_size < 2:
        raise ConfigurationError("contrastive training needs batch_size >= 2")
    if not dataset:
        raise ParameterError("dataset is empty")
    if source not in ("views", "texture"):
        raise ConfigurationError(f"source must be 'views' or 'texture', got {source!r}")
    views = {}
    if source == "texture":
        views[0.0] = torch.from_numpy(
            np.stack([r.uv_gt for r in dataset])
            .astype(np.float32)
            .transpose(0, 3, 1, 2)
        )
    else:
        for yaw in (-35.0, 0.0, 35.0):
            views[yaw] = torch.from_numpy(
                np.stack([r.views[yaw] for r in dataset])
                .astype(np.float32)
                .transpose(0, 3, 1, 2)
            )
    tokens = torch.tensor(
        [pad_tokens(tokenize(r.prompt)) for r in dataset], dtype=torch.long
    )
    torch.manual_seed(cfg.seed)
    enc = DualEncoder(vocab_size())
    opt = torch.optim.AdamW(enc.parameters(), lr=cfg.lr, weight_decay=0.01)
    rng = np.random.default_rng(np.random.SeedSequence([0xD7A1, cfg.seed]))
    trace = LossTrace()
    yaws = (-35.0, 0.0, 35.0)
    N = len(dataset)
    ce = torch.nn.functional.cross_entropy
    for step in range(cfg.steps):
        idx = rng.choice(N, size=min(cfg.batch_size, N), replace=False)
        scale = enc.logit_scale.exp().clamp(max=100.0)
        ei = enc.encode_image(views[0.0][idx])
        et = enc.encode_text(tokens[idx])
        logits = scale * ei @ et.T
        target = torch.arange(len(idx))
        loss = 0.5 * (ce(logits, target) + ce(logits.T, target))
        if source == "views":
            ya, yb = rng.choice(3, size=2, replace=False)
            ea = enc.encode_image(views[yaws[ya]][idx])
            eb = enc.encode_image(views[yaws[yb]][idx])
            vlogits = scale * ea @ eb.T
            loss = loss + 0.5 * (ce(vlogits, target) + ce(vlogits.T, target))
        opt.zero_grad()
        loss.backward()
        opt.step()
        trace.append(step, loss.item())
    return enc, trace


def train_quality_classifier(
    clean, flawed, cfg: TrainConfig
) -> tuple[QualityClassifier, LossTrace]:
    """Binary clean-vs-flawed training on ground-truth UV textures."""
    if not clean or not flawed:
        raise ParameterError("need both clean and flawed records")

    def stack(recs):
        return torch.from_numpy(
            np.stack([r.uv_gt for r in recs]).astype(np.float32).transpose(0, 3, 1, 2)
        )

    x = torch.cat([stack(clean), stack(flawed)])
    labels = torch.cat(
        [torch.ones(len(clean)), torch.zeros(len(flawed))]
    )
    torch.manual_seed(cfg.seed)
    clf = QualityClassifier()
    opt = torch.optim.AdamW(clf.parameters(), lr=cfg.lr, weight_decay=0.01)
    rng = np.random.default_rng(np.random.SeedSequence([0x9C, cfg.seed]))
    trace = LossTrace()
    for step in range(cfg.steps):
        idx = rng.integers(0, x.shape[0], cfg.batch_size)
        loss = torch.nn.functional.binary_cross_entropy_with_logits(
            clf(x[idx]), labels[idx]
        )
        opt.zero_grad()
        loss.backward()
        opt.step()
        trace.append(step, loss.item())
    return clf, trace


def quality_filter(rec, clf: QualityClassifier, threshold: float | None = None) -> bool:
    """Keep the record iff the classifier's clean score reaches the threshold."""
    thr = clf.threshold if threshold is None else threshold
    x = torch.from_numpy(
        np.asarray(rec.uv_gt, dtype=np.float32).transpose(2, 0, 1)
    )[None]
    with torch.no_grad():
        return bool(clf.score(x)[0] >= thr)


def alignment_filter(rec, enc: DualEncoder, threshold: float) -> bool:
    """Keep the record iff its frontal view aligns with its prompt."""
    return alignment_score(rec.views[0.0], rec.prompt, enc) >= threshold


# the three Table-style view pairings: (left, front), (left, right), (front, right)
VIEW_PAIRS = (("left", "front"), ("left", "right"), ("front", "right"))
_YAW_OF = {"left": 35.0, "front": 0.0, "right": -35.0}


@dataclass
class MetricReport:
    """Per-record metric values plus exact corpus aggregates."""

    values: dict  # metric name -> list of per-record floats
    config: dict = field(default_factory=dict)

    def aggregates(self) -> dict:
        out = {}
        for name, vals in self.values.items():
            arr = np.asarray(vals, dtype=np.float64)
            out[name] = {
                "mean": float(arr.mean()),
                "std": float(arr.std()),
                "count": int(arr.size),
            }
        return out

    def to_json(self) -> str:
        return json.dumps(
            {"values": self.values, "aggregates": self.aggregates(), "config": self.config},
            indent=2,
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "MetricReport":
        obj = json.loads(text)
        return MetricReport(values=obj["values"], config=obj.get("config", {}))


def evaluate_corpus(
    records,
    metrics=("bs_error",),
    dual_encoder: DualEncoder | None = None,
    bs_kernel: int = DEFAULT_BS_KERNEL,
) -> MetricReport:
    """Per-record metrics over a corpus; encoder-based metrics need an encoder."""
    if not records:
        raise ParameterError("empty corpus")
    needs_enc = {"identity_similarity", "alignment"}
    if needs_enc & set(metrics) and dual_encoder is None:
        raise ConfigurationError("identity/alignment metrics need a dual encoder")
    values: dict = {m: [] for m in metrics if m != "identity_similarity"}
    if "identity_similarity" in metrics:
        for a, b in VIEW_PAIRS:
            values[f"identity_similarity/{a}-{b}"] = []
    for rec in records:
        if "bs_error" in metrics:
            values["bs_error"].append(bs_error(rec.uv_gt, kernel=bs_kernel))
        if "alignment" in metrics:
            values["alignment"].append(
                alignment_score(rec.views[0.0], rec.prompt, dual_encoder)
            )
        if "identity_similarity" in metrics:
            for a, b in VIEW_PAIRS:
                values[f"identity_similarity/{a}-{b}"].append(
                    identity_similarity(
                        rec.views[_YAW_OF[a]], rec.views[_YAW_OF[b]], dual_encoder
                    )
                )
    return MetricReport(
        values=values,
        config={"metrics": list(metrics), "bs_kernel": bs_kernel},
    )
