"""Replay a golden transcript fixture through the engine with a scripted backend."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .graph_store import graph_from_dict
from .llm_gateway import ScriptedBackend, ScriptEntry
from .orchestrator import AgentSettings, Backends, EpisodeState, run_episode
from .prompts import PromptCatalog
from .retrieval import build_index

BUNDLED = ("amazon", "biomedical")


def bundled_fixture(name: str) -> Path:
    return Path(str(resources.files(__package__).joinpath("fixtures", f"{name}.json")))


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ReplayResult:
    fixture: str
    checks: list[Check] = field(default_factory=list)
    state: Optional[EpisodeState] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def first_divergence(expected: str, actual: str) -> str:
    exp, act = expected.split("\n"), actual.split("\n")
    for i in range(max(len(exp), len(act))):
        e = exp[i] if i < len(exp) else "<missing>"
        a = act[i] if i < len(act) else "<missing>"
        if e != a:
            return f"line {i + 1}:\n  expected: {e}\n  actual:   {a}"
    return "identical"


def load_fixture(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists() and str(path) in BUNDLED:
        path = bundled_fixture(str(path))
    return json.loads(path.read_text(encoding="utf-8"))


def replay(fixture: dict[str, Any] | str | Path) -> ReplayResult:
    fx = fixture if isinstance(fixture, dict) else load_fixture(fixture)
    graph = graph_from_dict(fx["graph"], source=f"fixture {fx.get('name', '?')}")
    idx = build_index(graph, fx.get("retrieval_fields"))
    catalog = PromptCatalog.default(graph_definition=fx.get("graph_definition", ""), examples=fx.get("examples", ""))
    backend = ScriptedBackend([ScriptEntry(e["reply"], e.get("match")) for e in fx["script"]], name=fx.get("name", "fixture"))
    settings = AgentSettings(max_steps=fx.get("t_max", 10), max_reflections=fx.get("n_reflect", 2))

    result = ReplayResult(fx.get("name", "fixture"))
    try:
        state = run_episode(graph, idx, Backends(backend), catalog, fx["question"], settings=settings)
    except AssertionError as exc:
        result.checks.append(Check("script", False, str(exc)))
        return result
    result.state = state
    exp = fx["expected"]

    pads = [t.scratchpad() for t in state.attempts]
    for i, want in enumerate(exp["scratchpads"]):
        got = pads[i] if i < len(pads) else ""
        result.checks.append(Check(f"scratchpad[{i + 1}]", got == want,
                                   "" if got == want else first_divergence(want, got)))
    checks = [
        ("final_answer", state.final_answer, exp["final_answer"]),
        ("attempts", state.attempts_used, exp["attempts"]),
        ("reflections", state.n, exp["reflections"]),
        ("correct", state.correct, exp.get("correct", True)),
        ("script_consumed", backend.cursor, len(backend.script)),
    ]
    for name, got, want in checks:
        result.checks.append(Check(name, got == want, "" if got == want else f"expected {want!r}, got {got!r}"))
    return result
