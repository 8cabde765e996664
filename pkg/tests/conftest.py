from __future__ import annotations

import json
import random
import re
from pathlib import Path
from typing import Callable, Optional, Sequence

import pytest

from kgqa.graph_store import graph_from_dict, load_graph
from kgqa.llm_gateway import ChatTurn, GenerationParams
from kgqa.replay import bundled_fixture
from kgqa.retrieval import build_index

SAMPLE_GRAPH = bundled_fixture("sample_graph")


@pytest.fixture
def sample_graph():
    return load_graph(SAMPLE_GRAPH)


@pytest.fixture
def sample_index(sample_graph):
    return build_index(sample_graph)


def random_graph_doc(rng: random.Random, max_nodes: int = 200, dup_rate: float = 0.0) -> dict:
    n = rng.randint(1, max_nodes)
    ids = [f"n{i}" for i in range(n)]
    labels = [f"rel-{k}" for k in range(rng.randint(1, 4))]
    nodes = {
        v: {"features": {"name": f"node {v}", "kind": rng.choice(["a", "b", "c"])}}
        for v in ids
    }
    edges: dict = {}
    for v in ids:
        for r in labels:
            if rng.random() < 0.5:
                targets = rng.sample(ids, rng.randint(0, min(6, n)))
                if targets and rng.random() < dup_rate:
                    targets.append(targets[0])
                edges.setdefault(v, {})[r] = targets
    return {"nodes": nodes, "edges": edges}


class RoleBackend:
    """Answers each prompt by looking at how it ends.

    ``step`` maps (role, step index) to a reply for the reasoning roles; ``judge`` and
    ``reflect`` produce replies for the judge and reflection prompts. Every call is recorded.
    """

    name = "role-backend"
    _CUE = re.compile(r"(Plan|Thought|Action) (\d+):$")

    def __init__(
        self,
        step: Callable[[str, int], str],
        judge: Callable[[int], str] = lambda i: "[yes]",
        reflect: Callable[[int], str] = lambda i: f"reflection {i}",
    ):
        self.step, self.judge_reply, self.reflect_reply = step, judge, reflect
        self.log: list[tuple[str, str]] = []
        self.judge_calls = 0
        self.reflect_calls = 0

    def complete(self, turns: Sequence[ChatTurn], params: GenerationParams) -> str:
        prompt = turns[-1].content
        if prompt.endswith("Proceed with explanation and judgment below:"):
            self.judge_calls += 1
            self.log.append(("judge", prompt))
            return self.judge_reply(self.judge_calls)
        if prompt.endswith("Reflection:"):
            self.reflect_calls += 1
            self.log.append(("reflection", prompt))
            return self.reflect_reply(self.reflect_calls)
        m = self._CUE.search(prompt)
        assert m, f"unrecognised prompt ending: {prompt[-80:]!r}"
        role = m.group(1).lower()
        self.log.append((role, prompt))
        return self.step(role, int(m.group(2)))

    def roles(self) -> list[str]:
        return [r for r, _ in self.log]


def write_json(path: Path, doc) -> Path:
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


# --- synthetic benchmark ----------------------------------------------------------

CITIES = ["Oslo", "Lima", "Perth", "Quito", "Accra", "Hanoi", "Porto"]


def synthetic_benchmark(n: int = 20):
    """A people->city graph, ``n`` questions over it, and deterministic backends.

    Record i behaves differently by i mod 4: correct first try, wrong then corrected
    after a reflection, never finishing, or a partly right multi-word answer.
    """
    from kgqa.evaluation import DomainEnv, QARecord
    from kgqa.orchestrator import Backends
    from kgqa.prompts import PromptCatalog

    people = {f"p{i:02d}": (f"Person Number{i}", CITIES[i % len(CITIES)]) for i in range(n)}
    doc = {
        "nodes": {pid: {"features": {"name": name, "city": city}} for pid, (name, city) in people.items()},
        "edges": {f"p{i:02d}": {"knows": [f"p{(i + 1) % n:02d}"]} for i in range(n)},
    }
    graph = graph_from_dict(doc)
    env = DomainEnv(graph, build_index(graph, ["name"]), PromptCatalog.default().with_graph(graph))
    domains = ["Healthcare", "Academic", "Literature"]
    difficulties = ["simple", "medium", "hard"]
    records = [
        QARecord(pid, f"Which city does {name} live in?", f"{city} city",
                 domains[i % 3], difficulties[(i // 3) % 3])
        for i, (pid, (name, city)) in enumerate(people.items())
    ]

    def backend_factory(record):
        i = int(record.question_id[1:])
        name, city = people[record.question_id]
        mode = i % 4

        def step(role, k):
            if role != "action":
                return f"{role} for {name} at {k}"
            if mode == 2 or k == 1:
                return f"Feature[Retrieve[{name}], city]"
            if mode == 3:
                return f"Finish[{city}]"
            return f"Finish[{city} city]"

        judge = (lambda j: "[no]" if j == 1 else "[yes]") if mode == 1 else (lambda j: "[yes]")
        return Backends(RoleBackend(step, judge=judge))

    envs = {d: env for d in domains}
    return records, envs, backend_factory


class ExactScoringJudge:
    """Scoring judge stand-in: [yes] iff the prediction equals the reference ignoring case."""

    name = "exact-judge"

    def complete(self, turns, params):
        text = turns[-1].content
        gold = re.search(r"Reference answer: (.*)", text).group(1)
        pred = re.search(r"Predicted answer: (.*)", text).group(1)
        return "[yes]" if gold.strip().lower() == pred.strip().lower() else "[no]"


def tick_clock():
    """Clock factory whose clocks advance by exactly 0.25 s per reading."""
    def factory():
        state = {"t": 0.0}

        def clock():
            state["t"] += 0.25
            return state["t"]
        return clock
    return factory


# --- acceptance summary -----------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, str]] = {}


def record_criterion(number: int, passed: Optional[bool], detail: str) -> None:
    status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    ACCEPTANCE[number] = (status, detail)
    print(f"criterion {number}: {status}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")
