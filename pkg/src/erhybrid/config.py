"""Pipeline configuration: defaults, TOML loading, and validation.

Configuration is a flat TOML file plus an optional [weights] table. CLI
flags override the file; ER_EMBED_ENDPOINT overrides the file's
remote_endpoint but not an explicit flag. Validation errors always name the
offending key.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigError, InvalidWeights
from .verify import FieldWeights

EMBEDDERS = ("hash", "tfidf", "remote")
INDEX_KINDS = ("flat", "rpforest")
MODES = ("hybrid", "embedding_only", "allpairs")

_INT_KEYS = {"dim", "ngram_n", "seed", "n_trees", "leaf_size", "search_budget", "k", "threads"}
_FLOAT_KEYS = {"accept_threshold", "ground_truth_threshold", "remote_timeout"}
_STR_KEYS = {
    "refs", "queries", "truth", "embedder", "index", "mode",
    "out_dir", "cache_dir", "remote_endpoint",
}


@dataclass
class PipelineConfig:
    refs: str | None = None
    queries: str | None = None
    truth: str | None = None
    embedder: str = "hash"
    dim: int = 768
    ngram_n: int = 3
    seed: int = 42
    index: str = "flat"
    n_trees: int = 8
    leaf_size: int = 32
    search_budget: int | None = None
    k: int = 5
    accept_threshold: float = 0.75
    ground_truth_threshold: float = 0.8
    mode: str = "hybrid"
    weights: FieldWeights = field(default_factory=FieldWeights)
    # 0 means "use available parallelism"; results never depend on it.
    threads: int = 0
    out_dir: str = "out"
    cache_dir: str | None = None
    remote_endpoint: str | None = None
    remote_timeout: float = 30.0

    def validate(self) -> "PipelineConfig":
        if self.embedder not in EMBEDDERS:
            raise ConfigError(f"embedder must be one of {EMBEDDERS} (got {self.embedder!r})")
        if self.index not in INDEX_KINDS:
            raise ConfigError(f"index must be one of {INDEX_KINDS} (got {self.index!r})")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES} (got {self.mode!r})")
        if self.dim < 2:
            raise ConfigError(f"dim must be >= 2 (got {self.dim})")
        if not 2 <= self.ngram_n <= 5:
            raise ConfigError(f"ngram_n must be in [2, 5] (got {self.ngram_n})")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative (got {self.seed})")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1 (got {self.k})")
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1 (got {self.n_trees})")
        if self.leaf_size < 2:
            raise ConfigError(f"leaf_size must be >= 2 (got {self.leaf_size})")
        if self.search_budget is not None and self.search_budget < self.k:
            raise ConfigError(
                f"search_budget must be >= k ({self.k}) (got {self.search_budget})"
            )
        if not 0.0 <= self.accept_threshold <= 1.0:
            raise ConfigError(
                f"accept_threshold must be in [0, 1] (got {self.accept_threshold})"
            )
        if not -1.0 < self.ground_truth_threshold <= 1.0:
            raise ConfigError(
                f"ground_truth_threshold must be in (-1, 1] "
                f"(got {self.ground_truth_threshold})"
            )
        if self.threads < 0:
            raise ConfigError(f"threads must be >= 0 (got {self.threads})")
        if self.remote_timeout <= 0:
            raise ConfigError(f"remote_timeout must be positive (got {self.remote_timeout})")
        if self.embedder == "remote" and not self.remote_endpoint:
            raise ConfigError("remote_endpoint is required when embedder = 'remote'")
        return self

    def effective_threads(self) -> int:
        if self.threads == 0:
            return os.cpu_count() or 1
        return self.threads


def _coerce(key: str, value: Any) -> Any:
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer (got {value!r})")
        return value
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number (got {value!r})")
        return float(value)
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string (got {value!r})")
        return value
    raise ConfigError(f"unknown config key {key!r}")


def load_config(
    path: str | None = None, overrides: Mapping[str, Any] | None = None
) -> PipelineConfig:
    """Build a validated config from an optional TOML file plus overrides.

    Precedence, lowest to highest: dataclass defaults, file values,
    ER_EMBED_ENDPOINT, overrides (typically CLI flags; None values are
    treated as absent).
    """
    data: dict[str, Any] = {}
    weights_raw: Mapping[str, float] | None = None
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML ({exc})") from exc
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc})") from exc
        weights_raw = raw.pop("weights", None)
        if weights_raw is not None and not isinstance(weights_raw, dict):
            raise ConfigError("weights must be a table of field -> weight")
        for key, value in raw.items():
            data[key] = _coerce(key, value)

    endpoint_env = os.environ.get("ER_EMBED_ENDPOINT")
    if endpoint_env:
        data["remote_endpoint"] = endpoint_env

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "weights":
            weights_raw = value
            continue
        if key not in {f.name for f in fields(PipelineConfig)}:
            raise ConfigError(f"unknown config key {key!r}")
        data[key] = value

    try:
        weights = (
            FieldWeights.from_mapping(weights_raw) if weights_raw is not None else FieldWeights()
        )
    except InvalidWeights as exc:
        raise ConfigError(f"weights: {exc}") from exc

    return PipelineConfig(weights=weights, **data).validate()
