"""Pipeline configuration: dataclasses mirrored by the JSON config file."""

import json
import os
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

from .errors import ConfigError, LayoutError
from .layout import LayoutConfig, Strategy
from .relight import BlendParams

SEED_ENV_VAR = "SEGFORGE_SEED"


class Mode(str, Enum):
    FC = "fc"
    GC = "gc"
    SFC = "sfc"
    SGC = "sgc"
    MIX = "mix"


@dataclass
class LibraryConfig:
    manifest: str | None = None
    scores: str | None = None
    retain_fraction: float | None = None
    # Category pools for the FC/SFC and GC/SGC modes: inline lists or a path
    # to a one-category-per-line text file. Unset means "all categories".
    frequent_categories: list[str] | str | None = None
    general_categories: list[str] | str | None = None


@dataclass
class MixConfig:
    real_manifest: str = ""
    synth_manifest: str = ""
    real_fraction: float = 0.5


@dataclass
class BackendsConfig:
    relight: str = "stub"  # stub | http
    relight_endpoint: str | None = None
    relight_timeout: float = 120.0
    relight_prompt: str = "a realistic, well-lit scene"
    relight_seed: int = 0
    relight_identity: bool = False
    expr: str = "template"  # template | http
    expr_endpoint: str | None = None
    expr_timeout: float = 60.0


@dataclass
class BackgroundConfig:
    type: str = "solid"  # solid | image
    rgb: tuple[int, int, int] = (128, 128, 128)
    path: str | None = None


@dataclass
class PipelineConfig:
    global_seed: int = 0
    num_images: int = 1
    mode: Mode = Mode.FC
    output_dir: str = "dataset"
    workers: int = 1
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    blend: BlendParams = field(default_factory=BlendParams)
    backends: BackendsConfig = field(default_factory=BackendsConfig)
    library: LibraryConfig = field(default_factory=LibraryConfig)
    mix: MixConfig | None = None
    background: BackgroundConfig = field(default_factory=BackgroundConfig)
    label_text_mix: tuple[float, float] = (0.66, 0.34)  # category vs phrase
    min_visible_area: int = 1
    failure_abort_rate: float = 0.01
    expressions_per_type: tuple[int, int] = (3, 6)

    def validate(self):
        if self.num_images < 1:
            raise ConfigError(f"num_images must be >= 1, got {self.num_images}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if abs(sum(self.label_text_mix) - 1.0) > 1e-9 or any(p < 0 for p in self.label_text_mix):
            raise ConfigError(f"label_text_mix must be non-negative and sum to 1, got {self.label_text_mix}")
        if self.min_visible_area < 1:
            raise ConfigError("min_visible_area must be >= 1")
        if not 0.0 <= self.failure_abort_rate <= 1.0:
            raise ConfigError("failure_abort_rate must be in [0, 1]")
        lo, hi = self.expressions_per_type
        if not 1 <= lo <= hi:
            raise ConfigError(f"expressions_per_type must satisfy 1 <= min <= max, got {self.expressions_per_type}")
        if self.mode == Mode.MIX:
            if self.mix is None or not self.mix.real_manifest or not self.mix.synth_manifest:
                raise ConfigError("mode 'mix' requires mix.real_manifest and mix.synth_manifest")
            if not 0.0 <= self.mix.real_fraction <= 1.0:
                raise ConfigError("mix.real_fraction must be in [0, 1]")
        elif not self.library.manifest:
            raise ConfigError(f"mode {self.mode.value!r} requires library.manifest")
        if self.backends.relight not in ("stub", "http"):
            raise ConfigError(f"unknown relight backend {self.backends.relight!r}")
        if self.backends.relight == "http" and not self.backends.relight_endpoint:
            raise ConfigError("relight backend 'http' requires an endpoint")
        if self.backends.expr not in ("template", "http"):
            raise ConfigError(f"unknown expression backend {self.backends.expr!r}")
        if self.backends.expr == "http" and not self.backends.expr_endpoint:
            raise ConfigError("expression backend 'http' requires an endpoint")
        if self.background.type not in ("solid", "image"):
            raise ConfigError(f"background type must be solid|image, got {self.background.type!r}")
        try:
            self.layout.validate()
            self.blend.validate()
        except (ValueError, LayoutError) as exc:
            raise ConfigError(str(exc)) from exc

    def snapshot(self) -> dict:
        d = asdict(self)
        d["mode"] = self.mode.value
        d["layout"]["strategy"] = self.layout.strategy.value
        return d


def _build(section_cls, data: dict, path: str):
    known = {f.name for f in section_cls.__dataclass_fields__.values()}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {path}")
    return data


def config_from_dict(data: dict) -> PipelineConfig:
    """Build a PipelineConfig from a config-file dictionary."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    data = dict(data)
    cfg = PipelineConfig()
    try:
        if "mode" in data:
            cfg.mode = Mode(data.pop("mode"))
        if "layout" in data:
            lay = dict(data.pop("layout"))
            if "strategy" in lay:
                lay["strategy"] = Strategy(lay["strategy"])
            if "bin_proportions" in lay:
                lay["bin_proportions"] = tuple(lay["bin_proportions"])
            if "count_histogram" in lay and lay["count_histogram"] is not None:
                lay["count_histogram"] = {int(k): float(v) for k, v in lay["count_histogram"].items()}
            cfg.layout = LayoutConfig(**_build(LayoutConfig, lay, "layout"))
        if "blend" in data:
            cfg.blend = BlendParams(**_build(BlendParams, dict(data.pop("blend")), "blend"))
        if "backends" in data:
            cfg.backends = BackendsConfig(**_build(BackendsConfig, dict(data.pop("backends")), "backends"))
        if "library" in data:
            cfg.library = LibraryConfig(**_build(LibraryConfig, dict(data.pop("library")), "library"))
        if "mix" in data and data["mix"] is not None:
            cfg.mix = MixConfig(**_build(MixConfig, dict(data.pop("mix")), "mix"))
        else:
            data.pop("mix", None)
        if "background" in data:
            bg = dict(data.pop("background"))
            if "rgb" in bg:
                bg["rgb"] = tuple(bg["rgb"])
            cfg.background = BackgroundConfig(**_build(BackgroundConfig, bg, "background"))
        if "label_text_mix" in data:
            mix = data.pop("label_text_mix")
            if isinstance(mix, dict):
                cfg.label_text_mix = (float(mix.get("category", 0.66)), float(mix.get("phrase", 0.34)))
            else:
                cfg.label_text_mix = tuple(float(v) for v in mix)
        if "expressions_per_type" in data:
            cfg.expressions_per_type = tuple(int(v) for v in data.pop("expressions_per_type"))
        for key in ("global_seed", "num_images", "output_dir", "workers",
                    "min_visible_area", "failure_abort_rate"):
            if key in data:
                setattr(cfg, key, data.pop(key))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    if data:
        raise ConfigError(f"unknown top-level config key(s): {sorted(data)}")
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            cfg.global_seed = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR}={env_seed!r} is not an integer") from exc
    cfg.validate()
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def load_category_pool(value) -> list[str] | None:
    """Resolve a pool config value: list of names, path to a text file, or None."""
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    path = Path(value)
    try:
        with path.open("r", encoding="utf-8") as fh:
            return [line.strip() for line in fh if line.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read category pool file {path}: {exc}") from exc
