"""Run configuration, loadable from TOML or JSON.

Example (TOML)::

    dataset = "data/aptos"
    split = "final_test"
    workers = 4

    [embedder]
    kind = "reference"          # or "external" with pred = "...", gt = "..."

    [ssim]
    k1 = 0.01
    k2 = 0.03

    [preprocess]
    border_tau = 10
    ruler = [0, 456, 90, 40]    # x0, y0, w, h; omit for a bottom-left 90x40 box

    [[corruptions]]
    kind = "gaussian_noise"
    steps = 100
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from .baselines import CorruptionSpec
from .dataset import SPLITS
from .errors import ConfigError
from .metrics import PSNR_CAP, SsimParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class PreprocessConfig:
    border_tau: int = 10
    fundus_size: tuple[int, int] = (224, 224)
    ruler: tuple[int, int, int, int] | None = None
    ruler_size: tuple[int, int] = (90, 40)
    trunc_lo: int = 62
    trunc_hi: int = 255
    keep_v: float = 0.20
    keep_h: float = 0.60
    direction_view_size: tuple[int, int] = (768, 496)
    sequence_input_size: tuple[int, int] = (256, 256)
    sequence_radius: float = 124.0


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = "reference"
    pred: Path | None = None
    gt: Path | None = None

    def __post_init__(self):
        if self.kind not in ("reference", "external"):
            raise ConfigError(f"embedder kind must be 'reference' or 'external', got {self.kind!r}")
        if self.kind == "external" and (self.pred is None or self.gt is None):
            raise ConfigError("external embedder needs both 'pred' and 'gt' embedding CSV paths")


@dataclass(frozen=True)
class RunConfig:
    dataset: Path | None = None
    split: str = "final_test"
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    ssim: SsimParams = field(default_factory=SsimParams)
    psnr_cap: float = PSNR_CAP
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    corruptions: tuple[CorruptionSpec, ...] = ()
    workers: int | None = None

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ConfigError(f"unknown split {self.split!r}; expected one of {SPLITS}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table/object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {sorted(unknown)}")
    out = {}
    for k, v in data.items():
        out[k] = tuple(v) if isinstance(v, list) else v
    try:
        return cls(**out)
    except TypeError as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def config_from_dict(data: dict, base_dir=None) -> RunConfig:
    """Build a :class:`RunConfig`; relative paths resolve against ``base_dir``."""
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    data = dict(data)
    unknown = set(data) - {f.name for f in fields(RunConfig)}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")

    def resolve(p):
        p = Path(p)
        p = p if p.is_absolute() else base / p
        if not p.exists():
            raise ConfigError(f"path does not exist: {p}")
        return p

    kwargs = {}
    if "dataset" in data:
        kwargs["dataset"] = resolve(data["dataset"])
    for key in ("split", "psnr_cap", "workers"):
        if key in data:
            kwargs[key] = data[key]
    if "embedder" in data:
        emb = dict(data["embedder"]) if isinstance(data["embedder"], dict) else {"kind": data["embedder"]}
        for key in ("pred", "gt"):
            if emb.get(key) is not None:
                emb[key] = resolve(emb[key])
        kwargs["embedder"] = _build(EmbedderConfig, emb, "embedder")
    if "ssim" in data:
        kwargs["ssim"] = _build(SsimParams, data["ssim"], "ssim")
    if "preprocess" in data:
        kwargs["preprocess"] = _build(PreprocessConfig, data["preprocess"], "preprocess")
    if "corruptions" in data:
        specs = data["corruptions"]
        if not isinstance(specs, list):
            raise ConfigError("corruptions must be a list")
        kwargs["corruptions"] = tuple(CorruptionSpec.from_dict(s) for s in specs)
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = path.read_bytes()
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw.decode("utf-8"))
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: cannot parse config ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a table/object")
    return config_from_dict(data, base_dir=path.parent)
