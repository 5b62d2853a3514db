"""Run configuration: a YAML file with strict (unknown-key-rejecting) parsing.

Every field has a default; ``RunConfig.schema()`` documents them all, and the
parsed config is echoed verbatim into command outputs for reproducibility.
"""

from dataclasses import asdict, dataclass, field, fields, is_dataclass

import yaml

from .errors import ConfigurationError


@dataclass(frozen=True)
class DataConfig:
    count: int = 100  # records to generate
    texture_res: int = 64  # UV texture resolution (divisible by 8)
    view_res: int = 128  # rendered view resolution
    k_relit: int = 5  # random-lighting images per identity
    filter: bool = False  # run the dual-stage filter after generation
    quality_threshold: float = 0.5  # clean-probability cutoff, stage 1
    alignment_threshold: float = 0.0  # cosine cutoff, stage 2


@dataclass(frozen=True)
class TrainSection:
    steps: int = 2000  # optimizer steps
    batch_size: int = 16
    lr: float = 1e-4
    p_drop: float = 0.1  # per-condition drop probability
    seed: int = 0
    beta_kl: float = 1e-6  # KL weight (VAE only)


@dataclass(frozen=True)
class SampleConfig:
    texture_steps: int = 100  # sampler steps for the texture model
    texture_guidance: float = 6.0
    geometry_steps: int = 200  # sampler steps for the geometry model
    geometry_guidance: float = 1.5
    seed: int = 0


@dataclass(frozen=True)
class MetricConfig:
    bs_kernel: int = 55  # Gaussian kernel size for brightness symmetry


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainSection = field(default_factory=TrainSection)
    sample: SampleConfig = field(default_factory=SampleConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def schema() -> str:
        """Documented defaults, one ``section.key = default`` per line."""
        lines = []
        for sec in fields(RunConfig):
            for f in fields(sec.type):
                lines.append(f"{sec.name}.{f.name} = {f.default!r}")
        return "\n".join(lines)


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path or 'config'}: expected a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigurationError(
            f"unknown config key(s) {sorted(unknown)} under '{path or 'top level'}'"
        )
    kwargs = {}
    for name, f in known.items():
        if name not in data:
            continue
        if is_dataclass(f.type):
            kwargs[name] = _build(f.type, data[name], f"{path}.{name}" if path else name)
        else:
            value = data[name]
            want = f.type
            if want is float and isinstance(value, int):
                value = float(value)
            if not isinstance(value, want) or (want is not bool and isinstance(value, bool)):
                raise ConfigurationError(
                    f"config key '{path + '.' if path else ''}{name}' expects "
                    f"{want.__name__}, got {type(value).__name__}"
                )
            kwargs[name] = value
    return cls(**kwargs)


def load_config(path_or_text) -> RunConfig:
    """Parse YAML from a path or literal text; unknown keys are rejected."""
    text = path_or_text
    try:
        with open(path_or_text) as f:
            text = f.read()
    except (OSError, TypeError):
        pass
    data = yaml.safe_load(text) if text else None
    if data is None:
        return RunConfig()
    return _build(RunConfig, data, "")
