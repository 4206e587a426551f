"""Task configuration as flat ``key = value`` text.

Blank lines and ``#`` comments are ignored. Unset optional values serialize
as an empty right-hand side. ``hidden`` is written dash-separated, e.g.
``hidden = 288-16-288``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .reconstruct import TrainConfig

TASKS = ("inpaint", "deblur", "sr", "denoise")

_TRAIN_FIELDS = {f.name for f in fields(TrainConfig)}


@dataclass
class TaskConfig:
    task: str = "inpaint"
    input: str | None = None
    reference: str | None = None
    mask: str | None = None
    output_dir: str = "out"
    missing_rate: float | None = None
    blur_width: int | None = None
    blur_std: float | None = None
    sr_factor: int | None = None
    noise_sigma: float = 0.0  # 0..255 scale
    patch_side: int = 8
    stride: int = 1
    hidden: tuple[int, ...] = (64, 6, 64)
    sigma: float = 0.05
    seed: int = 0
    canonical: bool = True
    slope: float = 0.2
    # optimizer settings, mirrored from TrainConfig
    max_iters: int = 2000
    lr_x: float = 0.01
    lr_theta: float = 0.01
    lr_final_ratio: float = 1.0
    assign_every: int = 10
    lambda_init: float = 1.0
    target_ratio: float = 0.5
    lambda_rate: float = 0.05
    lambda_min: float = 1e-4
    lambda_max: float = 1e4
    early_stop: bool = False
    patience: int = 10

    def validate(self) -> "TaskConfig":
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {', '.join(TASKS)}")
        if self.patch_side < 1 or self.stride < 1:
            raise ValueError("patch_side and stride must be >= 1")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError("hidden layer sizes must be positive")
        if self.sigma < 0 or self.noise_sigma < 0:
            raise ValueError("noise levels must be non-negative")
        if self.missing_rate is not None and not 0 <= self.missing_rate < 1:
            raise ValueError("missing_rate must lie in [0, 1)")
        if self.task == "inpaint" and self.input is not None and self.mask is None:
            raise ValueError("inpaint on a given input needs a mask")
        if self.task == "inpaint" and self.input is None and self.missing_rate is None:
            raise ValueError("inpaint from a reference needs missing_rate")
        if self.task == "deblur" and (self.blur_width is None or self.blur_width < 1 or self.blur_width % 2 == 0):
            raise ValueError("deblur needs an odd blur_width")
        if self.task == "sr" and (self.sr_factor is None or self.sr_factor < 1):
            raise ValueError("sr needs sr_factor >= 1")
        if self.input is None and self.reference is None:
            raise ValueError("need an input image or a reference to degrade")
        self.train_config()
        return self

    def train_config(self) -> TrainConfig:
        """Optimizer settings; the early-stop energy comes from ``noise_sigma``.

        The expected residual of a fit that stops at the noise is
        ``N * (noise_sigma / 255)^2`` for ``N`` observed values; callers
        replace ``noise_energy`` once the observation size is known.
        """
        kw = {k: getattr(self, k) for k in _TRAIN_FIELDS if hasattr(self, k)}
        return TrainConfig(**kw)

    def replace(self, **changes) -> "TaskConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str, base: "TaskConfig | None" = None) -> "TaskConfig":
        pairs = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {n}: expected key = value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            pairs[key] = value
        return (base or cls()).with_overrides(pairs)

    @classmethod
    def load(cls, path) -> "TaskConfig":
        return cls.from_text(Path(path).read_text())

    def with_overrides(self, pairs: dict[str, str]) -> "TaskConfig":
        types = {f.name: f.type for f in fields(self)}
        changes = {}
        for key, value in pairs.items():
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            changes[key] = _parse(types[key], value, key)
        return self.replace(**changes)


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return "-".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(type_name: str, text: str, key: str):
    optional = "None" in type_name
    if text == "":
        if optional:
            return None
        raise ValueError(f"{key} needs a value")
    base = type_name.replace(" | None", "")
    try:
        if base == "bool":
            lowered = text.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return lowered in ("true", "1", "yes")
        if base == "int":
            return int(text)
        if base == "float":
            return float(text)
        if base.startswith("tuple"):
            return tuple(int(v) for v in text.split("-"))
    except ValueError:
        raise ValueError(f"bad value for {key}: {text!r}") from None
    return text


def preset_names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("mmqs.presets").iterdir() if p.name.endswith(".cfg"))


def load_preset(name: str) -> TaskConfig:
    path = resources.files("mmqs.presets") / f"{name}.cfg"
    if not path.is_file():
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return TaskConfig.from_text(path.read_text())


def resolve(name: str) -> TaskConfig:
    """A config file path, or the name of a shipped preset."""
    if Path(name).is_file():
        return TaskConfig.load(name)
    return load_preset(name)
