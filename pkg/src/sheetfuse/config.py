"""Run configuration: defaults, file loading, overrides, validation.

All tunables live on one flat dataclass addressed by dotted keys (the
CLI's --set syntax and the config file format).  Precedence is
defaults, then config file, then --set overrides, and every value is
validated before any pixel is read.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

from sheetfuse.boundary import EmConfig


def _parse_directions(text):
    inner = text.strip()
    if inner.startswith("[") and inner.endswith("]"):
        inner = inner[1:-1]
    try:
        vals = tuple(int(p) for p in inner.split(",") if p.strip())
    except ValueError:
        raise ValueError(f"cannot parse direction levels from {text!r}") from None
    if not vals:
        raise ValueError(f"cannot parse direction levels from {text!r}")
    return vals


def _parse_optional_float(text):
    if text.strip().lower() in ("none", "auto"):
        return None
    return float(text)


def _parse_optional_int(text):
    if text.strip().lower() in ("none", "auto"):
        return None
    return int(text)


@dataclass
class RunConfig:
    """Resolved tunables for a fusion run.

    seg_alpha None means 0.05 * max(image rows, cols), chosen per slice
    shape; workers None means the machine's logical CPU count.
    """

    nsct_scales: int = 3
    nsct_directions: tuple = (2, 3, 3)
    nsct_epsilon: float = 1e-3
    seg_bins: int = 256
    seg_alpha: float | None = None
    seg_min_component_px: int = 64
    em_lambda: float = 0.5
    em_s: int = 10
    em_q: int = 2
    em_max_iters: int = 50
    em_tol: int = 0
    fuse_feather: int = 5
    io_axis: str = "rows"
    io_a_side: str = "top"
    workers: int | None = None
    sources: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.nsct_scales < 1:
            raise ValueError("nsct.scales must be >= 1")
        if len(self.nsct_directions) != self.nsct_scales:
            raise ValueError(
                f"nsct.directions needs {self.nsct_scales} entries, "
                f"got {len(self.nsct_directions)}")
        if any(d < 1 for d in self.nsct_directions):
            raise ValueError("nsct.directions entries must be >= 1")
        if self.nsct_epsilon <= 0:
            raise ValueError("nsct.epsilon must be > 0")
        if self.seg_bins < 2:
            raise ValueError("seg.bins must be >= 2")
        if self.seg_alpha is not None and self.seg_alpha <= 0:
            raise ValueError("seg.alpha must be > 0")
        if self.seg_min_component_px < 0:
            raise ValueError("seg.min_component_px must be >= 0")
        if self.fuse_feather < 0:
            raise ValueError("fuse.feather must be >= 0")
        if self.io_axis not in ("rows", "cols"):
            raise ValueError("io.axis must be rows or cols")
        if self.io_a_side not in ("top", "bottom"):
            raise ValueError("io.a_side must be top or bottom")
        if self.workers is not None and self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.em_config()   # EmConfig performs the em.* range checks

    def em_config(self) -> EmConfig:
        return EmConfig(lambda_=self.em_lambda, s=self.em_s, q=self.em_q,
                        max_iters=self.em_max_iters, tol=self.em_tol)

    def resolved_alpha(self, rows: int, cols: int) -> float:
        if self.seg_alpha is not None:
            return self.seg_alpha
        return 0.05 * max(rows, cols)

    def resolved_workers(self) -> int:
        if self.workers is not None:
            return self.workers
        return os.cpu_count() or 1

    def resolved(self, rows: int | None = None, cols: int | None = None) -> dict:
        """Fully resolved values, dotted keys, for the run manifest."""
        out = {}
        for key, attr in _KEYS.items():
            out[key] = getattr(self, attr)
        if rows is not None and cols is not None:
            out["seg.alpha"] = self.resolved_alpha(rows, cols)
        out["workers"] = self.resolved_workers()
        out["nsct.directions"] = list(self.nsct_directions)
        return out


# dotted key -> (attribute, parser)
_FIELDS = {
    "nsct.scales": ("nsct_scales", int),
    "nsct.directions": ("nsct_directions", _parse_directions),
    "nsct.epsilon": ("nsct_epsilon", float),
    "seg.bins": ("seg_bins", int),
    "seg.alpha": ("seg_alpha", _parse_optional_float),
    "seg.min_component_px": ("seg_min_component_px", int),
    "em.lambda": ("em_lambda", float),
    "em.s": ("em_s", int),
    "em.Q": ("em_q", int),
    "em.max_iters": ("em_max_iters", int),
    "em.tol": ("em_tol", int),
    "fuse.feather": ("fuse_feather", int),
    "io.axis": ("io_axis", str.strip),
    "io.a_side": ("io_a_side", str.strip),
    "workers": ("workers", _parse_optional_int),
}
_KEYS = {key: attr for key, (attr, _) in _FIELDS.items()}


def _coerce(key: str, raw: str):
    if key not in _FIELDS:
        raise ValueError(f"unknown config key: {key}")
    _, parser = _FIELDS[key]
    try:
        return parser(raw.strip())
    except ValueError as err:
        raise ValueError(f"bad value for {key}: {raw.strip()!r} ({err})") from None


def parse_config_file(path) -> dict:
    """Read a flat `key = value` file; # starts a comment."""
    updates = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValueError(f"{path}:{lineno}: expected key = value, got {text!r}")
            key, raw = text.split("=", 1)
            key = key.strip()
            updates[key] = _coerce(key, raw)
    return updates


def build_config(config_path=None, overrides=()) -> RunConfig:
    """Assemble a validated RunConfig: defaults, then the optional
    config file, then `key=value` override strings, last writer wins."""
    values = {}
    sources = {}
    if config_path is not None:
        for key, val in parse_config_file(config_path).items():
            values[_KEYS[key]] = val
            sources[key] = "file"
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        values[_KEYS[key]] = _coerce(key, raw)   # _coerce rejects unknown keys first
        sources[key] = "override"
    return RunConfig(sources=sources, **values)


def update_config(cfg: RunConfig, **changes) -> RunConfig:
    """Functional update preserving validation."""
    return replace(cfg, **changes)
