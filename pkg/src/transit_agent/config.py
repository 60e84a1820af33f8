"""Application configuration: provider selection, limits, timeouts.

Providers are always chosen through configuration (never hard-wired) so the
evaluation harness can swap them per run; credentials come from environment
variables only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from transit_agent.providers import (
    HttpProvider,
    HttpProviderConfig,
    Provider,
    ScriptedProvider,
    load_scripted_provider,
)


@dataclass
class AppConfig:
    db_path: str = "transit.sqlite"
    runstore_path: str = "runstore.sqlite"
    annotations_path: str = ""
    exemplars_path: str = ""
    provider: dict = field(default_factory=dict)
    retrieval_k: int = 3
    row_limit: int | None = 50  # None disables limit injection (eval runs)
    memory_turns: int = 5
    repair_rounds: int = 1
    repair_rules: list | None = None  # rule-id allowlist; None enables all
    query_timeout_s: float = 30.0
    request_timeout_s: float = 60.0
    synthesis_row_cap: int = 50
    prompt_char_limit: int | None = None
    classify_with_provider: bool = False
    cors_origin: str = "*"
    session_idle_hours: float = 24.0

    def resolve_paths(self, base: Path):
        for name in ("db_path", "runstore_path", "annotations_path", "exemplars_path"):
            value = getattr(self, name)
            if value and not Path(value).is_absolute():
                setattr(self, name, str((base / value).resolve()))
        script = self.provider.get("script")
        if script and not Path(script).is_absolute():
            self.provider["script"] = str((base / script).resolve())


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    known = {f for f in AppConfig.__dataclass_fields__}
    config = AppConfig(**{k: v for k, v in data.items() if k in known})
    config.resolve_paths(path.parent)
    return config


def build_provider(config: AppConfig) -> Provider:
    kind = config.provider.get("kind", "scripted")
    if kind == "scripted":
        script = config.provider.get("script")
        if script:
            return load_scripted_provider(script)
        return ScriptedProvider([])
    if kind == "http":
        return HttpProvider(
            HttpProviderConfig(
                base_url=config.provider["base_url"],
                completion_model=config.provider["completion_model"],
                embedding_model=config.provider.get("embedding_model", ""),
                api_key_env=config.provider.get("api_key_env", "TRANSIT_AGENT_API_KEY"),
                timeout_s=float(config.provider.get("timeout_s", 60.0)),
                max_retries=int(config.provider.get("max_retries", 3)),
            )
        )
    raise ValueError(f"unknown provider kind {kind!r}")
