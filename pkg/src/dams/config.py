"""Run configuration: defaults, config-file parsing, flag overrides.

Config files are plain `key = value` lines with `#` comments. Precedence
is flag > file > default, and unknown keys are rejected. Every command
writes the resolved configuration back out so a run can be reproduced
from its output directory alone.
"""

import dataclasses
import os
from dataclasses import dataclass

from .errors import ConfigError
from .model.layers import PAPER_CONFIG, TOY_CONFIG, BlockConfig

GROUPS = ("emb", "d_e", "d_g", "s_e", "s_h", "s_g", "b_h", "critic_e", "critic_g")


@dataclass
class RunConfig:
    preset: str = "toy"
    seed: int = 0
    out_dir: str = "runs/default"
    threads: int = 0  # 0 = use DAMS_THREADS or 1

    # corpus paths
    dialogues: str = ""
    shorttexts: str = ""
    articles: str = ""
    finetune: str = ""
    dev: str = ""
    vocab: str = ""
    vocab_size: int = 2000

    # synthetic generation sizes
    synth_dialogues: int = 2000
    synth_shorttexts: int = 2000
    synth_articles: int = 2000
    synth_finetune: int = 400

    # pretraining
    steps: int = 3000
    warmup: int = 150
    batch_size: int = 8
    alpha: float = 0.1
    lr: float = 3e-3
    lr_emb: float = -1.0  # per-group overrides; -1 means "use lr"
    lr_d_e: float = -1.0
    lr_d_g: float = -1.0
    lr_s_e: float = -1.0
    lr_s_h: float = -1.0
    lr_s_g: float = -1.0
    lr_b_h: float = -1.0
    lr_critic_e: float = -1.0
    lr_critic_g: float = -1.0
    dropout: float = 0.1
    clip_norm: float = 1.0
    checkpoint_interval: int = 1000
    eval_interval: int = 50
    with_dialogues: bool = True
    with_shorttexts: bool = True
    with_articles: bool = True

    # fine-tuning
    finetune_steps: int = 1000
    finetune_warmup: int = 50
    train_fraction: float = 1.0
    from_checkpoint: str = ""

    # decoding
    beam_size: int = 3
    min_length: int = 3
    max_length: int = 24
    length_penalty: float = 0.7

    # numerics
    dtype: str = "float64"

    # optional overrides of the preset architecture
    model_dim: int = 0
    layers: int = 0
    heads: int = 0
    ffn_dim: int = 0

    def validate(self):
        if self.preset not in ("toy", "paper"):
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError(f"unknown dtype {self.dtype!r}")
        if self.steps < 1:
            raise ConfigError("steps must be positive")
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.beam_size < 1:
            raise ConfigError("beam_size must be >= 1")
        if not 0 <= self.min_length < self.max_length:
            raise ConfigError("need 0 <= min_length < max_length")
        if not 0.0 <= self.train_fraction <= 1.0:
            raise ConfigError("train_fraction must be in [0, 1]")
        return self

    def block_config(self) -> BlockConfig:
        base = TOY_CONFIG if self.preset == "toy" else PAPER_CONFIG
        return BlockConfig(
            layers=self.layers or base.layers,
            heads=self.heads or base.heads,
            model_dim=self.model_dim or base.model_dim,
            ffn_dim=self.ffn_dim or base.ffn_dim,
            max_positions=base.max_positions,
            max_sentences=base.max_sentences,
            dropout=self.dropout,
        )

    def group_lrs(self) -> dict:
        out = {}
        for g in GROUPS:
            override = getattr(self, f"lr_{g}")
            out[g] = self.lr if override < 0 else override
        return out

    def resolved_threads(self) -> int:
        if self.threads > 0:
            return self.threads
        env = os.environ.get("DAMS_THREADS", "")
        return int(env) if env.isdigit() and int(env) > 0 else 1


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _parse_value(key, raw):
    f = _FIELDS[key]
    raw = raw.strip()
    if f.type in ("int", int):
        return int(raw)
    if f.type in ("float", float):
        return float(raw)
    if f.type in ("bool", bool):
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"bad boolean for {key}: {raw!r}")
    return raw


def parse_config_file(path):
    """Key/value pairs from a config file; unknown keys are rejected."""
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in _FIELDS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _parse_value(key, raw)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}")
    return values


def load_config(path=None, overrides=None) -> RunConfig:
    """Defaults, then file values, then explicit overrides."""
    values = {}
    if path:
        values.update(parse_config_file(path))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = val
    return RunConfig(**values).validate()


def write_resolved(cfg: RunConfig, path):
    with open(path, "w", encoding="utf-8") as f:
        for field in sorted(_FIELDS):
            f.write(f"{field} = {getattr(cfg, field)}\n")
