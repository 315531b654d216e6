"""Engine configuration. Defaults reproduce the published constants."""

from __future__ import annotations

from dataclasses import dataclass, field, fields


@dataclass(frozen=True)
class Config:
    prefilter_window: int = 16       # N: adjacent instructions checked at once
    hi_threshold: float = 0.95       # prefilter: p > hi  => valid
    lo_threshold: float = 0.05       # prefilter: p < lo  => invalid
    single_threshold: float = 0.5    # single checks and reverse single mode
    bfs_limit: int = 32              # related-instruction context size
    batch_size: int = 32             # M: classifier batch size
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lo_threshold < self.single_threshold < self.hi_threshold <= 1.0:
            raise ValueError("thresholds must satisfy 0 <= lo < single < hi <= 1")
        for name in ("prefilter_window", "bfs_limit", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_TYPES = {f.name: f.type for f in fields(Config)}


def parse_config_file(text: str) -> dict:
    """Parse ``key = value`` lines (comments with '#') into Config kwargs."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"line {lineno}: unknown option {key!r}")
        caster = float if "float" in str(_FIELD_TYPES[key]) else int
        out[key] = caster(value)
    return out


def load_config(path: str | None = None, **overrides) -> Config:
    kwargs: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            kwargs.update(parse_config_file(fh.read()))
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return Config(**kwargs)
