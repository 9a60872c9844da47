"""Run configuration: JSON schema, validation, CLI overrides."""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from .embeddings import BACKEND_KINDS, BackendSpec
from .learners import KINDS


class ConfigError(ValueError):
    """Raised for invalid or incomplete run configuration."""


@dataclass(frozen=True)
class BackendConfig:
    """One embedding backend entry: spec fields plus run plumbing."""

    name: str
    kind: str
    dim: int
    class_separation: float = 6.0
    seed: int | None = None        # derived from the run seed when absent
    source_dir: str | None = None
    patch_count_min: int = 16
    patch_count_max: int = 48

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("backend name must be non-empty")
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.dim < 1:
            raise ConfigError("backend dim must be >= 1")
        if not 1 <= self.patch_count_min <= self.patch_count_max:
            raise ConfigError("patch count range must satisfy 1 <= min <= max")
        if self.kind == "precomputed" and not self.source_dir:
            raise ConfigError(f"backend {self.name!r}: precomputed kind needs source_dir")

    def spec(self, run_seed: int) -> BackendSpec:
        seed = self.seed if self.seed is not None else derive_seed(run_seed, self.name)
        return BackendSpec(
            kind=self.kind,
            dim=self.dim,
            seed=seed,
            source_dir=self.source_dir,
            class_separation=self.class_separation,
        )


def derive_seed(run_seed: int, tag: str) -> int:
    return (run_seed * 1_000_003 + zlib.crc32(tag.encode("utf-8"))) & 0x7FFFFFFF


@dataclass
class RunConfig:
    manifest: str
    out_dir: str
    cache_dir: str
    seed: int
    backends: list[BackendConfig]
    delimiter: str = ","
    classifiers: list[str] = field(default_factory=lambda: list(KINDS))
    grids: dict[str, dict[str, list]] = field(default_factory=dict)
    cv_folds: int = 5
    selected_classifier: str = "logistic_regression"
    venkatraman_permutations: int = 2000
    learning_curve_sizes: list[int] = field(default_factory=list)
    learning_curve_repeats: int = 5
    tracker_jsonl: str = "events.jsonl"
    webhook_url: str | None = None
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.seed is None:
            raise ConfigError("seed is mandatory")
        if not self.backends:
            raise ConfigError("at least one backend is required")
        names = [b.name for b in self.backends]
        if len(set(names)) != len(names):
            raise ConfigError("backend names must be unique")
        unknown = [c for c in self.classifiers if c not in KINDS]
        if unknown:
            raise ConfigError(f"unknown classifier kind(s): {', '.join(unknown)}")
        if self.selected_classifier not in self.classifiers:
            raise ConfigError(
                f"selected classifier {self.selected_classifier!r} is not in the classifier list"
            )
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")
        if self.venkatraman_permutations < 1:
            raise ConfigError("venkatraman_permutations must be >= 1")
        if self.learning_curve_sizes:
            sizes = self.learning_curve_sizes
            if any(b <= a for a, b in zip(sizes, sizes[1:])):
                raise ConfigError("learning_curve_sizes must be strictly increasing")
            if sizes[0] < 1:
                raise ConfigError("learning_curve_sizes must be positive")
        if self.learning_curve_repeats < 1:
            raise ConfigError("learning_curve_repeats must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "manifest": self.manifest,
            "out_dir": self.out_dir,
            "cache_dir": self.cache_dir,
            "seed": self.seed,
            "delimiter": self.delimiter,
            "backends": [
                {
                    "name": b.name,
                    "kind": b.kind,
                    "dim": b.dim,
                    "class_separation": b.class_separation,
                    "seed": b.seed,
                    "source_dir": b.source_dir,
                    "patch_count_min": b.patch_count_min,
                    "patch_count_max": b.patch_count_max,
                }
                for b in self.backends
            ],
            "classifiers": list(self.classifiers),
            "grids": self.grids,
            "cv_folds": self.cv_folds,
            "selected_classifier": self.selected_classifier,
            "venkatraman_permutations": self.venkatraman_permutations,
            "learning_curve_sizes": list(self.learning_curve_sizes),
            "learning_curve_repeats": self.learning_curve_repeats,
            "tracker_jsonl": self.tracker_jsonl,
            "webhook_url": self.webhook_url,
            "jobs": self.jobs,
        }

    def run_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return f"{zlib.crc32(blob):08x}{len(blob):04x}"


def config_from_dict(raw: dict) -> RunConfig:
    try:
        backends = [BackendConfig(**b) for b in raw.get("backends", [])]
        known = {f for f in RunConfig.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        kwargs = {k: v for k, v in raw.items() if k != "backends"}
        for required in ("manifest", "out_dir", "cache_dir", "seed"):
            if required not in kwargs:
                raise ConfigError(f"missing required config key {required!r}")
        return RunConfig(backends=backends, **kwargs)
    except TypeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(raw)
