"""Prompt catalog: reasoning, reflection, evaluation and scoring templates per domain."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

from .graph_store import KnowledgeGraph

REQUIRED_PLACEHOLDERS = {
    "reasoning": ("examples", "reflections", "graph_definition", "question", "scratchpad"),
    "reflection": ("graph_definition", "examples", "question", "scratchpad"),
    "evaluation": ("examples", "graph_definition", "question", "scratchpad"),
    "scoring": ("question", "gold", "predicted"),
}

REFLECTION_HEADER = (
    "You have attempted to answer following question before and failed. "
    "The following reflection(s) give a plan to avoid failing to answer the question "
    "in the same way you did previously. Use them to improve your strategy of correctly "
    "answering the given question.\nReflections:"
)

_PLACEHOLDER = re.compile(r"\{(\w+)\}")


class CatalogError(ValueError):
    pass


def fill(template: str, values: Mapping[str, str]) -> str:
    """Single-pass substitution; text inserted for one key is never rescanned."""
    return _PLACEHOLDER.sub(lambda m: values.get(m.group(1), m.group(0)), template)


def _builtin(name: str) -> str:
    return resources.files(__package__).joinpath("templates", f"{name}.txt").read_text("utf-8").rstrip("\n")


def describe_graph(g: KnowledgeGraph) -> str:
    feats = ", ".join(g.schema.feature_names) or "(none)"
    labels = ", ".join(g.schema.edge_labels) or "(none)"
    return (
        f"The graph has {len(g)} nodes. Nodes carry the features: {feats}. "
        f"Nodes are connected by edges of the types: {labels}. "
        "Use a feature name with Feature and an edge type with Neighbour or Degree."
    )


def reflections_block(reflections: list[str]) -> str:
    if not reflections:
        return ""
    return REFLECTION_HEADER + "\n" + "\n".join(f"- {r}" for r in reflections)


@dataclass(frozen=True)
class PromptCatalog:
    reasoning: str
    reflection: str
    evaluation: str
    scoring: str
    examples: str = ""
    graph_definition: str = ""

    def __post_init__(self) -> None:
        for kind, required in REQUIRED_PLACEHOLDERS.items():
            present = set(_PLACEHOLDER.findall(getattr(self, kind)))
            missing = [p for p in required if p not in present]
            if missing:
                raise CatalogError(f"{kind} template is missing placeholder(s): {', '.join(missing)}")

    @classmethod
    def default(cls, graph_definition: str = "", examples: str = "") -> "PromptCatalog":
        return cls(
            reasoning=_builtin("reasoning"),
            reflection=_builtin("reflection"),
            evaluation=_builtin("evaluation"),
            scoring=_builtin("scoring"),
            examples=examples,
            graph_definition=graph_definition,
        )

    @classmethod
    def load(cls, domain_dir: str | Path, graph: Optional[KnowledgeGraph] = None) -> "PromptCatalog":
        """Read a domain directory; absent files fall back to the built-in defaults.

        Without ``graph_definition.txt`` the definition is generated from ``graph``'s schema.
        """
        domain_dir = Path(domain_dir)
        if not domain_dir.is_dir():
            raise CatalogError(f"prompt catalog directory {domain_dir} does not exist")

        def read(name: str) -> Optional[str]:
            p = domain_dir / f"{name}.txt"
            return p.read_text("utf-8").rstrip("\n") if p.is_file() else None

        base = cls.default()
        definition = read("graph_definition")
        if definition is None:
            definition = describe_graph(graph) if graph is not None else ""
        return replace(
            base,
            reasoning=read("reasoning") or base.reasoning,
            reflection=read("reflection") or base.reflection,
            evaluation=read("evaluation") or base.evaluation,
            scoring=read("scoring") or base.scoring,
            examples=read("examples") or "",
            graph_definition=definition,
        )

    def with_graph(self, g: KnowledgeGraph) -> "PromptCatalog":
        if self.graph_definition:
            return self
        return replace(self, graph_definition=describe_graph(g))
