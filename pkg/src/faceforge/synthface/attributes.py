"""Parametric face attributes, the structured prompt template, and the
ground-truth linear map from geometry attributes to identity coefficients.

Prompts are built from a closed clause vocabulary in three groups (demographic
base, skin texture, geometry), comma-separated, and parse back exactly to the
quantized attribute bins they were rendered from.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError

GEO_ATTRS = ("face_width", "nose_height", "eye_spacing", "chin_shape")
TEX_ATTRS = (
    "freckle_density",
    "wrinkle_depth",
    "beard_coverage",
    "lip_color",
    "eyebrow_color",
)


@dataclass(frozen=True)
class AttributeVector:
    """Semantic parameters of one synthetic identity.

    Base and texture components live in [0, 1]; geometry components in [-1, 1].
    """

    age: float
    tone: float
    male: bool
    freckle_density: float
    wrinkle_depth: float
    beard_coverage: float
    lip_color: float
    eyebrow_color: float
    face_width: float
    nose_height: float
    eye_spacing: float
    chin_shape: float

    def __post_init__(self):
        for name in ("age", "tone") + TEX_ATTRS:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name}={v} outside [0, 1]")
        for name in GEO_ATTRS:
            v = getattr(self, name)
            if not -1.0 <= v <= 1.0:
                raise ParameterError(f"{name}={v} outside [-1, 1]")

    @property
    def geo(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in GEO_ATTRS], dtype=np.float64)

    @property
    def tex(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in TEX_ATTRS], dtype=np.float64)


def sample_attributes(seed: int) -> AttributeVector:
    """Deterministic attribute draw; every component uniform over its range."""
    rng = np.random.default_rng(np.random.SeedSequence([0xA77A, seed]))
    u = rng.uniform(size=12)
    return AttributeVector(
        age=u[0],
        tone=u[1],
        male=bool(u[2] < 0.5),
        freckle_density=u[3],
        wrinkle_depth=u[4],
        beard_coverage=u[5],
        lip_color=u[6],
        eyebrow_color=u[7],
        face_width=2.0 * u[8] - 1.0,
        nose_height=2.0 * u[9] - 1.0,
        eye_spacing=2.0 * u[10] - 1.0,
        chin_shape=2.0 * u[11] - 1.0,
    )


# ---------------------------------------------------------------------------
# Quantization and clause templates
# ---------------------------------------------------------------------------

def bin01(x: float, n: int) -> int:
    """Quantize [0, 1] into n equal bins."""
    return min(int(x * n), n - 1)


def bin_sym(x: float, n: int) -> int:
    """Quantize [-1, 1] into n equal bins."""
    return bin01((x + 1.0) / 2.0, n)


_AGE_WORDS = ["young", "middle-aged", "elderly"]
_TONE = ["very fair skin", "fair skin", "tan skin", "brown skin", "dark skin"]
_FRECKLES = ["no freckles", "sparse freckles", "scattered freckles", "dense freckles"]
_WRINKLES = ["no wrinkles", "faint wrinkles", "moderate wrinkles", "deep wrinkles"]
_BEARD = ["clean shaven", "light stubble", "short beard", "full beard"]
_LIPS = ["pale lips", "pink lips", "red lips", "deep red lips"]
_BROWS = ["light eyebrows", "brown eyebrows", "dark eyebrows", "black eyebrows"]
_FACE_WIDTH = [
    "very narrow face",
    "narrow face",
    "average width face",
    "wide face",
    "very wide face",
]
_NOSE = ["low nose bridge", "medium nose bridge", "high nose bridge"]
_EYE_SPACING = ["close set eyes", "average eye spacing", "wide set eyes"]
_CHIN = ["pointed chin", "rounded chin", "square chin"]

_BASE_SEX = {True: "man", False: "woman"}

# attribute name -> (clause list, group)
CLAUSE_TABLES = {
    "tone": (_TONE, "base"),
    "freckle_density": (_FRECKLES, "tex"),
    "wrinkle_depth": (_WRINKLES, "tex"),
    "beard_coverage": (_BEARD, "tex"),
    "lip_color": (_LIPS, "tex"),
    "eyebrow_color": (_BROWS, "tex"),
    "face_width": (_FACE_WIDTH, "geo"),
    "nose_height": (_NOSE, "geo"),
    "eye_spacing": (_EYE_SPACING, "geo"),
    "chin_shape": (_CHIN, "geo"),
}


def _age_sex_clause(age_bin: int, male: bool) -> str:
    word = _AGE_WORDS[age_bin]
    article = "an" if word[0] in "aeiou" else "a"
    return f"{article} {word} {_BASE_SEX[male]}"


def all_clauses() -> dict[str, tuple[str, int]]:
    """Every clause string -> (attribute name, bin index)."""
    table: dict[str, tuple[str, int]] = {}
    for age_bin in range(len(_AGE_WORDS)):
        for male in (True, False):
            table[_age_sex_clause(age_bin, male)] = ("age_sex", age_bin * 2 + int(male))
    for attr, (clauses, _) in CLAUSE_TABLES.items():
        for i, c in enumerate(clauses):
            table[c] = (attr, i)
    return table


_CLAUSE_LOOKUP = all_clauses()
_GEO_CLAUSES = frozenset(
    c for attr in GEO_ATTRS for c in CLAUSE_TABLES[attr][0]
)


def attribute_bins(attrs: AttributeVector) -> dict[str, int]:
    bins = {"age": bin01(attrs.age, 3), "sex": int(attrs.male)}
    for attr, (clauses, _) in CLAUSE_TABLES.items():
        v = getattr(attrs, attr)
        if attr in GEO_ATTRS:
            bins[attr] = bin_sym(v, len(clauses))
        else:
            bins[attr] = bin01(v, len(clauses))
    return bins


def synth_prompt(attrs: AttributeVector) -> str:
    """Render attributes into the structured three-group clause prompt."""
    bins = attribute_bins(attrs)
    clauses = [_age_sex_clause(bins["age"], attrs.male)]
    for attr in ("tone",) + TEX_ATTRS + GEO_ATTRS:
        clauses.append(CLAUSE_TABLES[attr][0][bins[attr]])
    return ", ".join(clauses)


def parse_prompt(prompt: str) -> dict[str, int]:
    """Invert the prompt template back to quantized bins.

    Raises ParameterError for clauses outside the closed vocabulary.
    """
    bins: dict[str, int] = {}
    for clause in prompt.split(", "):
        clause = clause.strip()
        if not clause:
            continue
        if clause not in _CLAUSE_LOOKUP:
            raise ParameterError(f"unknown clause: {clause!r}")
        attr, idx = _CLAUSE_LOOKUP[clause]
        if attr == "age_sex":
            bins["age"] = idx // 2
            bins["sex"] = idx % 2
        else:
            bins[attr] = idx
    return bins


def geo_clauses(prompt: str) -> str:
    """Keep only the geometry clause group of a prompt."""
    kept = [c.strip() for c in prompt.split(", ") if c.strip() in _GEO_CLAUSES]
    return ", ".join(kept)


# ---------------------------------------------------------------------------
# Geometry attributes -> identity coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeoMap:
    """Fixed injective linear map from geometry attributes into alpha space.

    ``basis`` has orthonormal columns (d x 4), so the pseudo-inverse is its
    transpose and geometry attributes are exactly recoverable from alpha.
    """

    basis: np.ndarray
    residual_scale: float = 0.2

    @property
    def dim(self) -> int:
        return self.basis.shape[0]


def default_geo_map(d: int = 64, seed: int = 7) -> GeoMap:
    rng = np.random.default_rng(np.random.SeedSequence([0x6E0, seed]))
    q, _ = np.linalg.qr(rng.normal(size=(d, len(GEO_ATTRS))))
    return GeoMap(basis=q)


def _identity_residual(attrs: AttributeVector, gmap: GeoMap) -> np.ndarray:
    """Small residual determined by the non-geometry attributes, kept in the
    orthogonal complement of the geo subspace so recovery stays exact."""
    key = np.array(
        [attrs.age, attrs.tone, float(attrs.male), *attrs.tex], dtype=np.float64
    )
    digest = hashlib.sha256(key.tobytes()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    r = rng.normal(size=gmap.dim)
    r = r - gmap.basis @ (gmap.basis.T @ r)
    return gmap.residual_scale * r


def attrs_to_alpha(attrs: AttributeVector, gmap: GeoMap) -> np.ndarray:
    """alpha = basis @ geo + residual(attrs), residual orthogonal to the map."""
    return gmap.basis @ attrs.geo + _identity_residual(attrs, gmap)


def alpha_to_geo(alpha: np.ndarray, gmap: GeoMap) -> np.ndarray:
    """Least-squares recovery of the geometry attributes (exact by design)."""
    return gmap.basis.T @ np.asarray(alpha, dtype=np.float64)
