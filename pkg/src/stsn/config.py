"""Training configuration, presets, and config-file loading."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field, fields

ABLATIONS = ("no_slot_attention", "no_tcn", "small_transformer_L4", "no_augmentations", "no_dropout")
REGIMES = ("standard", "recon_pretrain", "dual_train")

# fields that change the parameter set or the forward computation
ARCH_FIELDS = (
    "image_size",
    "image_channels",
    "enc_channels",
    "dec_channels",
    "dec_layers",
    "K",
    "D_slot",
    "T",
    "L",
    "H",
    "D_head",
    "D_MLP",
    "slot_attention",
    "tcn",
)


@dataclass
class TrainConfig:
    # optimization defaults
    batch_size: int = 16
    lr: float = 4e-4
    warmup_steps: int = 75_000
    epochs: int = 500
    lam: float = 1000.0
    micro_batch: int = 1
    # slot attention
    K: int = 9
    D_slot: int = 32
    T: int = 3
    # transformer
    L: int = 6
    H: int = 8
    D_head: int = 32
    D_MLP: int = 512
    dropout: float = 0.1
    # images and conv stacks
    image_size: int = 80
    image_channels: int = 1
    enc_channels: int = 32
    dec_channels: int = 32
    dec_layers: int = 3
    augment: bool = True
    seed: int = 0
    ablations: tuple = ()
    regime: str = "standard"
    # stop once running train accuracy reaches this value (None: run all epochs)
    target_train_acc: float | None = None
    # seconds; training stops after the epoch that crosses it (None: no limit)
    time_budget: float | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.ablations, str):
            self.ablations = tuple(a for a in self.ablations.split(",") if a)
        self.ablations = tuple(self.ablations)
        validate_ablations(self.ablations)
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")

    # effective architecture after ablations ---------------------------------
    @property
    def slot_attention(self):
        return "no_slot_attention" not in self.ablations

    @property
    def tcn(self):
        return "no_tcn" not in self.ablations

    @property
    def effective_K(self):
        return self.K if self.slot_attention else 1

    @property
    def effective_L(self):
        return 4 if "small_transformer_L4" in self.ablations else self.L

    @property
    def effective_dropout(self):
        return 0.0 if "no_dropout" in self.ablations else self.dropout

    @property
    def effective_augment(self):
        return self.augment and "no_augmentations" not in self.ablations

    def arch(self):
        out = {}
        for name in ARCH_FIELDS:
            if name == "K":
                out[name] = self.effective_K
            elif name == "L":
                out[name] = self.effective_L
            else:
                out[name] = getattr(self, name)
        return out

    def config_hash(self):
        blob = json.dumps(self.arch(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["ablations"] = list(self.ablations)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: _coerce(cls, k, v) for k, v in d.items()})

    def replace(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return TrainConfig.from_dict(d)


def validate_ablations(flags):
    for f in flags:
        if f not in ABLATIONS:
            raise ValueError(f"unknown ablation {f!r}; expected one of {ABLATIONS}")
    if len(set(flags)) != len(flags):
        raise ValueError(f"duplicate ablation flags: {flags}")
    # each ablation run combines at most one component removal with -dropout
    main = [f for f in flags if f != "no_dropout"]
    if len(main) > 1:
        raise ValueError(f"conflicting ablation flags {main}: one component per run")


_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _coerce(cls, key, value):
    kind = _TYPES[key]
    if isinstance(value, str):
        if "bool" in kind:
            return value.strip().lower() in ("1", "true", "yes", "on")
        if kind.startswith("int"):
            return int(float(value))
        if kind.startswith("float"):
            if "None" in kind and value.strip().lower() in ("", "none", "null"):
                return None
            return float(value)
        if key == "ablations":
            return tuple(a.strip() for a in value.split(",") if a.strip())
        if key == "extras":
            return json.loads(value)
    if key == "ablations" and isinstance(value, list):
        return tuple(value)
    return value


PRESETS = {
    "iraven": {},
    "pgm-neutral": dict(K=16, batch_size=96, lr=8e-5, warmup_steps=10_000, epochs=161, L=24, dropout=0.0, augment=False),
    "pgm-interpolation": dict(
        K=16, batch_size=96, lr=8e-5, warmup_steps=10_000, epochs=83, L=24, dropout=0.0, augment=False
    ),
    "pgm-extrapolation": dict(
        K=16, batch_size=96, lr=8e-5, warmup_steps=10_000, epochs=71, L=6, dropout=0.0, augment=False
    ),
    "clevr": dict(
        K=9,
        D_slot=64,
        image_size=128,
        image_channels=3,
        enc_channels=64,
        dec_channels=64,
        dec_layers=5,
        batch_size=64,
        lr=8e-5,
        warmup_steps=10_000,
        epochs=200,
        L=24,
        dropout=0.0,
        augment=False,
    ),
    # desk-scale STSN used by the learning smoke tests
    "desk": dict(
        image_size=48,
        K=9,
        D_slot=32,
        L=2,
        batch_size=16,
        lr=4e-4,
        warmup_steps=500,
        epochs=100,
        dropout=0.0,
    ),
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    d = dict(PRESETS[name])
    d.update(overrides)
    return TrainConfig.from_dict(d)


def parse_config_text(text):
    """Parse a JSON object or ``key=value`` lines (``#`` comments allowed)."""
    stripped = text.strip()
    if stripped.startswith("{"):
        return json.loads(stripped)
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path=None, overrides=None, base=None, env=None):
    """Resolve a config: preset/base < file < STSN_SEED < explicit overrides."""
    env = os.environ if env is None else env
    d = (base or TrainConfig()).to_dict()
    if path:
        with open(path, encoding="utf-8") as fh:
            d.update(parse_config_text(fh.read()))
    if env.get("STSN_SEED"):
        d["seed"] = int(env["STSN_SEED"])
    if overrides:
        d.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig.from_dict(d)
