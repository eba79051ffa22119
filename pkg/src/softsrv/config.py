"""Experiment configuration: dataclass sections, named presets, INI round trip.

The file format is key-value-with-sections text (configparser syntax). A
config always starts from a named preset and applies overrides on top;
every seed is explicit, and the fully resolved config serializes into
reports for provenance. Unknown sections, unknown keys, and unparsable
values raise ConfigError.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

from .errors import ConfigError

VARIANTS = ("ss_np", "ss_mp", "ss_mc")
METHODS = VARIANTS + ("pt", "ptsr")


@dataclass
class CorpusSection:
    grammar: str = "arithmetic"
    n_examples: int = 400
    n_aux: int = 200
    n_generic: int = 300


@dataclass
class BackboneSection:
    d: int = 64
    n_layers: int = 4
    n_heads: int = 4
    ffn_dim: int = 256
    max_seq: int = 256
    vocab_size: int = 512
    dtype: str = "float64"
    pretrain_steps: int = 2000
    pretrain_lr: float = 1e-3
    pretrain_batch: int = 8


@dataclass
class EmbedderSection:
    d: int = 32
    n_layers: int = 2
    n_heads: int = 2
    ffn_dim: int = 128
    d_e: int = 32
    pretrain_steps: int = 800
    pretrain_lr: float = 1e-3
    pretrain_batch: int = 8


@dataclass
class SoftSRVSection:
    t: int = 16
    k: int = 2
    mlp_hidden: int = 128
    mlp_layers: int = 3


@dataclass
class TrainerSection:
    steps: int = 2000
    lr: float = 1e-3
    batch_size: int = 8
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 1.0


@dataclass
class GenerationSection:
    method: str = "ss_mc"
    n_raw: int = 2000
    question_temperature: float = 1.0
    answer_temperature: float = 1.0
    pt_temperature: float = 2.0
    max_new_tokens: int = 48
    pt_template: str = "diversified"  # or "undiversified"
    ptsr_max_rounds: int = 3
    ptsr_stop_text: str = "Stop"


@dataclass
class PostprocessSection:
    n_select: int = 500
    svd_dims: int = 16
    kmeans_k: int = 32
    kmeans_batch: int = 64
    kmeans_iterations: int = 50
    decontam_n: int = 13


@dataclass
class MauveSection:
    k: int = 32
    c: float = 5.0
    grid_size: int = 101


@dataclass
class StudentSection:
    d: int = 32
    n_layers: int = 2
    n_heads: int = 2
    ffn_dim: int = 128
    pretrain_steps: int = 800
    pretrain_lr: float = 1e-3
    pretrain_batch: int = 8
    finetune_steps: int = 500
    finetune_lr: float = 1e-3
    finetune_batch: int = 8


@dataclass
class SeedsSection:
    corpus: int = 101
    backbone: int = 102
    embedder: int = 103
    train: int = 104
    generate: int = 105
    answers: int = 106
    postprocess: int = 107
    mauve: int = 108
    student: int = 109


@dataclass
class PathsSection:
    out_dir: str = "runs/desk"


@dataclass
class ExperimentConfig:
    preset: str = "desk"
    corpus: CorpusSection = field(default_factory=CorpusSection)
    backbone: BackboneSection = field(default_factory=BackboneSection)
    embedder: EmbedderSection = field(default_factory=EmbedderSection)
    softsrv: SoftSRVSection = field(default_factory=SoftSRVSection)
    trainer: TrainerSection = field(default_factory=TrainerSection)
    generation: GenerationSection = field(default_factory=GenerationSection)
    postprocess: PostprocessSection = field(default_factory=PostprocessSection)
    mauve: MauveSection = field(default_factory=MauveSection)
    student: StudentSection = field(default_factory=StudentSection)
    seeds: SeedsSection = field(default_factory=SeedsSection)
    paths: PathsSection = field(default_factory=PathsSection)

    def validate(self) -> "ExperimentConfig":
        if self.generation.method not in METHODS:
            raise ConfigError(f"generation.method must be one of {METHODS}")
        if self.corpus.grammar not in ("arithmetic", "truefalse"):
            raise ConfigError("corpus.grammar must be 'arithmetic' or 'truefalse'")
        if self.generation.pt_template not in ("diversified", "undiversified"):
            raise ConfigError("generation.pt_template must be 'diversified' or 'undiversified'")
        if not self.paths.out_dir:
            raise ConfigError("paths.out_dir is required")
        if self.softsrv.t >= self.backbone.max_seq:
            raise ConfigError("softsrv.t must be smaller than backbone.max_seq")
        for name, value in vars(self.seeds).items():
            if not isinstance(value, int):
                raise ConfigError(f"seeds.{name} must be an integer")
        return self


# Named presets. "desk" is the dataclass defaults; "paper" mirrors the
# large-scale recipe (prompt width 128, 20K steps at lr 5e-6, 700-cluster
# k-means over 100 SVD dims, 13-gram decontamination, 32-cluster mauve).
def preset_config(name: str) -> ExperimentConfig:
    if name == "desk":
        return ExperimentConfig()
    if name == "paper":
        cfg = ExperimentConfig(preset="paper")
        cfg.softsrv.t = 128
        cfg.trainer.steps = 20000
        cfg.trainer.lr = 5e-6
        cfg.generation.n_raw = 100000
        cfg.postprocess.n_select = 50000
        cfg.postprocess.kmeans_k = 700
        cfg.postprocess.svd_dims = 100
        cfg.postprocess.decontam_n = 13
        cfg.mauve.k = 32
        cfg.paths.out_dir = "runs/paper"
        return cfg
    raise ConfigError(f"unknown preset {name!r}")


_SECTION_ORDER = (
    "corpus", "backbone", "embedder", "softsrv", "trainer", "generation",
    "postprocess", "mauve", "student", "seeds", "paths",
)


def _coerce(section: str, key: str, raw: str, current):
    try:
        if isinstance(current, bool):
            return raw.strip().lower() in ("1", "true", "yes")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc


def apply_overrides(cfg: ExperimentConfig, parser: configparser.ConfigParser) -> ExperimentConfig:
    for section in parser.sections():
        if section == "meta":
            continue
        if section not in _SECTION_ORDER:
            raise ConfigError(f"unknown section [{section}]")
        target = getattr(cfg, section)
        known = {f.name for f in fields(target)}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {section}.{key}")
            setattr(target, key, _coerce(section, key, raw, getattr(target, key)))
    return cfg


def load_config(path: str, preset: str | None = None) -> ExperimentConfig:
    """Resolve preset then file overrides. The file may name its own preset
    in [meta] preset=...; an explicit argument wins."""
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"config file not found: {path}")
    name = preset or parser.get("meta", "preset", fallback="desk")
    cfg = preset_config(name)
    cfg.preset = name
    return apply_overrides(cfg, parser).validate()


def override_master_seed(cfg: ExperimentConfig, master: int) -> ExperimentConfig:
    """Replace every stage seed with master + a fixed per-stage offset."""
    for offset, name in enumerate(
        ("corpus", "backbone", "embedder", "train", "generate",
         "answers", "postprocess", "mauve", "student"),
        start=1,
    ):
        setattr(cfg.seeds, name, int(master) + offset)
    return cfg


def to_ini_text(cfg: ExperimentConfig) -> str:
    """Canonical serialization: fixed section and key order, repr-stable values."""
    buf = io.StringIO()
    buf.write("[meta]\n")
    buf.write(f"preset = {cfg.preset}\n\n")
    for section in _SECTION_ORDER:
        buf.write(f"[{section}]\n")
        target = getattr(cfg, section)
        for f in fields(target):
            value = getattr(target, f.name)
            if isinstance(value, float):
                buf.write(f"{f.name} = {value!r}\n")
            else:
                buf.write(f"{f.name} = {value}\n")
        buf.write("\n")
    return buf.getvalue()


def save_config(path: str, cfg: ExperimentConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_ini_text(cfg))
