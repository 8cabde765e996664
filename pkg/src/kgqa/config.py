"""Run configuration: TOML file, then environment, then command-line flags (highest wins).

Example ``kgqa.toml``::

    t_max = 10
    n_reflect = 2
    workers = 4
    out = "runs/latest"
    catalog_dir = "prompts"          # optional; <catalog_dir>/<domain>/reasoning.txt ...

    [graphs]
    Healthcare = "data/biomedical.json"

    [retrieval_fields]
    Healthcare = ["name"]

    [generation]
    temperature = 0.7
    top_p = 0.9

    [backend]                        # reasoning backend; judge/reflection/scoring inherit
    kind = "remote"                  # or "scripted"
    url = "http://localhost:8000/v1"
    model = "llama-3.1-70b-instruct"

    [backend.judge]
    model = "qwen2.5-7b-instruct"

    [retry]
    max_attempts = 3
    backoff = [1.0, 2.0, 4.0]
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .llm_gateway import DEFAULT_TIMEOUT_S, GenerationParams, RetryPolicy
from .orchestrator import AgentSettings

ENV_VARS = {
    "GC_LLM_URL": ("backend", "url"),
    "GC_LLM_MODEL": ("backend", "model"),
    "GC_LLM_KEY": ("backend", "key"),
    "GC_T_MAX": ("t_max",),
    "GC_N_REFLECT": ("n_reflect",),
    "GC_WORKERS": ("workers",),
    "GC_OUT": ("out",),
}

BACKEND_ROLES = ("judge", "reflection", "scoring")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BackendSettings:
    kind: str = "remote"
    url: Optional[str] = None
    model: Optional[str] = None
    key: Optional[str] = None
    script: Optional[str] = None
    timeout: float = DEFAULT_TIMEOUT_S

    def redacted(self) -> dict[str, Any]:
        d = asdict(self)
        if d["key"]:
            d["key"] = "***"
        return d


@dataclass(frozen=True)
class RunConfig:
    graphs: Mapping[str, str] = field(default_factory=dict)
    catalog_dir: Optional[str] = None
    backend: BackendSettings = BackendSettings()
    role_backends: Mapping[str, BackendSettings] = field(default_factory=dict)
    t_max: int = 10
    n_reflect: int = 2
    generation: GenerationParams = GenerationParams()
    retrieval_fields: Mapping[str, list[str]] = field(default_factory=dict)
    scorer: str = "bm25"
    neighbour_cap: int = 50
    max_scratchpad_chars: Optional[int] = None
    workers: int = 1
    out: str = "runs"
    score_with_judge: bool = True
    retry: RetryPolicy = RetryPolicy()
    seed: Optional[int] = None  # reserved; the engine itself draws no random numbers

    def __post_init__(self) -> None:
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")
        if self.n_reflect < 0:
            raise ConfigError("n_reflect must be >= 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for b in [self.backend, *self.role_backends.values()]:
            if b.kind not in ("remote", "scripted"):
                raise ConfigError(f"unknown backend kind {b.kind!r} (use 'remote' or 'scripted')")

    def backend_for(self, role: str) -> BackendSettings:
        return self.role_backends.get(role, self.backend)

    def agent_settings(self) -> AgentSettings:
        return AgentSettings(
            max_steps=self.t_max,
            max_reflections=self.n_reflect,
            reasoning_params=replace(self.generation, stop_sequences=self.generation.stop_sequences or ("Observation",)),
            judge_params=replace(self.generation, stop_sequences=()),
            reflection_params=replace(self.generation, stop_sequences=()),
            neighbour_cap=self.neighbour_cap,
            max_scratchpad_chars=self.max_scratchpad_chars,
        )

    def describe(self) -> dict[str, Any]:
        return {
            "graphs": dict(self.graphs),
            "catalog_dir": self.catalog_dir,
            "backend": self.backend.redacted(),
            "role_backends": {k: v.redacted() for k, v in self.role_backends.items()},
            "t_max": self.t_max,
            "n_reflect": self.n_reflect,
            "generation": asdict(self.generation),
            "retrieval_fields": dict(self.retrieval_fields),
            "scorer": self.scorer,
            "neighbour_cap": self.neighbour_cap,
            "max_scratchpad_chars": self.max_scratchpad_chars,
            "workers": self.workers,
            "out": self.out,
            "score_with_judge": self.score_with_judge,
            "retry": asdict(self.retry),
            "seed": self.seed,
        }


def _set(tree: dict[str, Any], path: tuple[str, ...], value: Any) -> None:
    for key in path[:-1]:
        tree = tree.setdefault(key, {})
    tree[path[-1]] = value


def merge_layers(file_doc: Mapping[str, Any], env: Mapping[str, str], flags: Mapping[str, Any]) -> dict[str, Any]:
    """Combine raw layers; ``flags`` keys are dotted paths such as ``backend.url``."""
    tree: dict[str, Any] = {k: (dict(v) if isinstance(v, dict) else v) for k, v in file_doc.items()}
    if isinstance(tree.get("backend"), dict):
        tree["backend"] = {k: (dict(v) if isinstance(v, dict) else v) for k, v in tree["backend"].items()}
    for var, path in ENV_VARS.items():
        if env.get(var):
            _set(tree, path, env[var])
    for dotted, value in flags.items():
        if value is not None:
            _set(tree, tuple(dotted.split(".")), value)
    return tree


def _backend(doc: Mapping[str, Any], base: Optional[BackendSettings] = None, where: str = "backend") -> BackendSettings:
    base = base or BackendSettings()
    known = set(BackendSettings.__dataclass_fields__)
    unknown = set(doc) - known - set(BACKEND_ROLES)
    if unknown:
        raise ConfigError(f"[{where}] unknown key(s): {', '.join(sorted(unknown))}")
    values = {k: doc[k] for k in known if k in doc}
    if "timeout" in values:
        values["timeout"] = float(values["timeout"])
    return replace(base, **values)


def build_config(tree: Mapping[str, Any]) -> RunConfig:
    tree = dict(tree)
    backend_doc = dict(tree.pop("backend", {}) or {})
    role_docs = {r: backend_doc.pop(r) for r in BACKEND_ROLES if r in backend_doc}
    base = _backend(backend_doc)
    roles = {r: _backend(d, base, f"backend.{r}") for r, d in role_docs.items()}

    gen = dict(tree.pop("generation", {}) or {})
    if "stop_sequences" in gen:
        gen["stop_sequences"] = tuple(gen["stop_sequences"])
    retry = dict(tree.pop("retry", {}) or {})
    if "backoff" in retry:
        retry["backoff"] = tuple(float(x) for x in retry["backoff"])

    known = set(RunConfig.__dataclass_fields__) - {"backend", "role_backends", "generation", "retry"}
    unknown = set(tree) - known
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(sorted(unknown))}")
    for key in ("t_max", "n_reflect", "workers", "neighbour_cap", "seed", "max_scratchpad_chars"):
        if tree.get(key) is not None:
            try:
                tree[key] = int(tree[key])
            except (TypeError, ValueError):
                raise ConfigError(f"{key} must be an integer, got {tree[key]!r}") from None
    try:
        return RunConfig(
            backend=base,
            role_backends=roles,
            generation=GenerationParams(**gen),
            retry=RetryPolicy(**retry),
            **tree,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(
    path: Optional[str | Path] = None,
    flags: Optional[Mapping[str, Any]] = None,
    env: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    doc: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            doc = tomllib.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        base_dir = path.parent
        # relative paths in the file are relative to the file itself
        if "graphs" in doc:
            doc["graphs"] = {d: str((base_dir / p)) for d, p in doc["graphs"].items()}
        if doc.get("catalog_dir"):
            doc["catalog_dir"] = str(base_dir / doc["catalog_dir"])
        backend = doc.get("backend", {})
        for section in [backend, *(backend.get(r, {}) for r in BACKEND_ROLES)]:
            if section.get("script"):
                section["script"] = str(base_dir / section["script"])
    tree = merge_layers(doc, os.environ if env is None else env, flags or {})
    return build_config(tree)
