"""Platform configuration: file loading plus environment overrides.

Config files are JSON. Scalar fields can be overridden by environment
variables named ``QALOOP_<FIELD>`` (e.g. ``QALOOP_LISTEN_PORT=9000``,
``QALOOP_DATA_DIR=/var/qaloop``, ``QALOOP_WIN_THRESHOLD=0.5``).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .adversary import AdversaryDescriptor
from .engine import EligibilityRules, EngineConfig
from .errors import ConfigError
from .metrics import AdjudicationPolicy

ENV_PREFIX = "QALOOP_"

# Fields overridable from the environment, with their parsers.
_ENV_FIELDS = {
    "LISTEN_HOST": ("listen_host", str),
    "LISTEN_PORT": ("listen_port", int),
    "DATA_DIR": ("data_dir", str),
    "SEED": ("seed", int),
    "WIN_THRESHOLD": ("win_threshold", float),
    "MATCH_THRESHOLD": ("match_threshold", float),
    "REVIEW_BATCH_SIZE": ("review_batch_size", int),
    "STATIC_DIR": ("static_dir", str),
}


@dataclass(frozen=True)
class TokenEntry:
    token: str
    role: str  # worker | admin
    worker_id: str | None = None


@dataclass
class PlatformConfig:
    adversaries: list[AdversaryDescriptor] = field(default_factory=list)
    listen_host: str = "127.0.0.1"
    listen_port: int = 8000
    data_dir: Path = Path("data")
    seed: int = 0
    win_threshold: float = 0.4
    match_threshold: float = 0.4
    review_batch_size: int = 10
    max_questions_per_hit: int = 5
    hit_pay_usd: float = 2.00
    eligibility: EligibilityRules = field(default_factory=EligibilityRules)
    tokens: list[TokenEntry] = field(default_factory=list)
    static_dir: Path | None = None

    def validate(self) -> None:
        if not self.adversaries:
            raise ConfigError("at least one adversary must be registered")
        if not 0.0 <= self.win_threshold <= 1.0:
            raise ConfigError("win_threshold must be in [0, 1]")
        if not 0.0 <= self.match_threshold <= 1.0:
            raise ConfigError("match_threshold must be in [0, 1]")
        if self.review_batch_size < 1:
            raise ConfigError("review_batch_size must be positive")
        seen = set()
        for descriptor in self.adversaries:
            if descriptor.id in seen:
                raise ConfigError(f"duplicate adversary id {descriptor.id!r}")
            seen.add(descriptor.id)

    @property
    def policy(self) -> AdjudicationPolicy:
        return AdjudicationPolicy(
            win_threshold=self.win_threshold,
            match_threshold=self.match_threshold,
        )

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            policy=self.policy,
            max_questions_per_hit=self.max_questions_per_hit,
            hit_pay_usd=self.hit_pay_usd,
            review_batch_size=self.review_batch_size,
            eligibility=self.eligibility,
            seed=self.seed,
        )


def _parse_adversaries(raw: list) -> list[AdversaryDescriptor]:
    descriptors = []
    for entry in raw:
        try:
            descriptors.append(
                AdversaryDescriptor(
                    id=entry["id"],
                    kind=entry["kind"],
                    endpoint=entry.get("endpoint"),
                    config=entry.get("config", {}),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad adversary entry {entry!r}: {exc}") from exc
    return descriptors


def load_config(path: str | Path | None = None, env: dict | None = None) -> PlatformConfig:
    """Build a PlatformConfig from an optional file and the environment."""
    env = os.environ if env is None else env
    config = PlatformConfig()
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        config.adversaries = _parse_adversaries(raw.get("adversaries", []))
        config.listen_host = raw.get("listen_host", config.listen_host)
        config.listen_port = raw.get("listen_port", config.listen_port)
        config.data_dir = Path(raw.get("data_dir", config.data_dir))
        config.seed = raw.get("seed", config.seed)
        config.win_threshold = raw.get("win_threshold", config.win_threshold)
        config.match_threshold = raw.get(
            "match_threshold", config.match_threshold
        )
        config.review_batch_size = raw.get(
            "review_batch_size", config.review_batch_size
        )
        config.max_questions_per_hit = raw.get(
            "max_questions_per_hit", config.max_questions_per_hit
        )
        config.hit_pay_usd = raw.get("hit_pay_usd", config.hit_pay_usd)
        if "eligibility" in raw:
            entry = raw["eligibility"]
            config.eligibility = EligibilityRules(
                min_approval_rate=entry.get("min_approval_rate", 0.98),
                min_lifetime_hits=entry.get("min_lifetime_hits", 1000),
                countries=tuple(entry.get("countries", ("CA", "GB", "US"))),
            )
        config.tokens = [
            TokenEntry(
                token=entry["token"],
                role=entry["role"],
                worker_id=entry.get("worker_id"),
            )
            for entry in raw.get("tokens", [])
        ]
        if raw.get("static_dir"):
            config.static_dir = Path(raw["static_dir"])

    for env_name, (field_name, parse) in _ENV_FIELDS.items():
        value = env.get(ENV_PREFIX + env_name)
        if value is None:
            continue
        try:
            parsed = parse(value)
        except ValueError as exc:
            raise ConfigError(
                f"bad value for {ENV_PREFIX + env_name}: {value!r}"
            ) from exc
        if field_name in ("data_dir", "static_dir"):
            parsed = Path(parsed)
        setattr(config, field_name, parsed)
    return config
