"""Read-only knowledge graph: identifier-keyed nodes with string features and labeled edges.

The canonical on-disk form is a single JSON document::

    {
      "nodes": {"1047566": {"features": {"title": "Hand in Glove", "category": "books"}}},
      "edges": {"203088": {"also-bought-item": ["203010"]}}
    }

Lookups never raise on missing data; they return a :class:`Miss` value instead so
the action layer can turn it into an advisory observation.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping, Union

logger = logging.getLogger(__name__)


class GraphLoadError(ValueError):
    """Raised when a graph file is malformed or violates the graph invariants."""


class Miss(enum.Enum):
    UNKNOWN_NODE = "unknown-node"
    UNKNOWN_FEATURE = "unknown-feature"


@dataclass(frozen=True)
class GraphSchema:
    feature_names: tuple[str, ...]
    edge_labels: tuple[str, ...]


@dataclass(frozen=True)
class KnowledgeGraph:
    nodes: Mapping[str, Mapping[str, str]]
    adjacency: Mapping[tuple[str, str], tuple[str, ...]]
    schema: GraphSchema
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.nodes

    @property
    def edge_count(self) -> int:
        return sum(len(v) for v in self.adjacency.values())


def get_feature(g: KnowledgeGraph, v: str, t: str) -> Union[str, Miss]:
    features = g.nodes.get(v)
    if features is None:
        return Miss.UNKNOWN_NODE
    value = features.get(t)
    if value is None:
        return Miss.UNKNOWN_FEATURE
    return value


def get_neighbours(g: KnowledgeGraph, v: str, r: str) -> Union[list[str], Miss]:
    if v not in g.nodes:
        return Miss.UNKNOWN_NODE
    return list(g.adjacency.get((v, r), ()))


def get_degree(g: KnowledgeGraph, v: str, r: str) -> Union[int, Miss]:
    if v not in g.nodes:
        return Miss.UNKNOWN_NODE
    return len(g.adjacency.get((v, r), ()))


def _require_str(value: Any, where: str) -> str:
    if not isinstance(value, str):
        raise GraphLoadError(f"{where}: expected a string, got {type(value).__name__}")
    return value


def graph_from_dict(doc: Any, source: str = "<graph>") -> KnowledgeGraph:
    """Validate a parsed canonical document and build an immutable graph."""
    if not isinstance(doc, dict):
        raise GraphLoadError(f"{source}: top level must be an object")
    unknown = set(doc) - {"nodes", "edges"}
    if unknown:
        raise GraphLoadError(f"{source}: unexpected top-level key(s) {sorted(unknown)}")
    raw_nodes = doc.get("nodes", {})
    raw_edges = doc.get("edges", {})
    if not isinstance(raw_nodes, dict):
        raise GraphLoadError(f"{source}: key 'nodes' must be an object")
    if not isinstance(raw_edges, dict):
        raise GraphLoadError(f"{source}: key 'edges' must be an object")

    feature_names: dict[str, None] = {}
    nodes: dict[str, Mapping[str, str]] = {}
    for node_id, body in raw_nodes.items():
        where = f"{source}: nodes[{node_id!r}]"
        if not node_id:
            raise GraphLoadError(f"{source}: empty node id")
        if not isinstance(body, dict):
            raise GraphLoadError(f"{where}: must be an object")
        features = body.get("features", {})
        if not isinstance(features, dict):
            raise GraphLoadError(f"{where}.features: must be an object")
        for name, value in features.items():
            _require_str(value, f"{where}.features[{name!r}]")
            feature_names.setdefault(name, None)
        nodes[node_id] = MappingProxyType(dict(features))

    edge_labels: dict[str, None] = {}
    adjacency: dict[tuple[str, str], tuple[str, ...]] = {}
    dangling: list[tuple[str, str, str]] = []
    warnings: list[str] = []
    for src, by_label in raw_edges.items():
        where = f"{source}: edges[{src!r}]"
        if not isinstance(by_label, dict):
            raise GraphLoadError(f"{where}: must be an object")
        if src not in nodes:
            dangling.append((src, "*", "*"))
            continue
        for label, targets in by_label.items():
            if not label:
                raise GraphLoadError(f"{where}: empty edge label")
            if not isinstance(targets, list):
                raise GraphLoadError(f"{where}[{label!r}]: must be a list of node ids")
            seen: dict[str, None] = {}
            for dst in targets:
                _require_str(dst, f"{where}[{label!r}]")
                if dst not in nodes:
                    dangling.append((src, label, dst))
                if dst in seen:
                    warnings.append(f"duplicate neighbour dropped: ({src}, {label}) -> {dst}")
                    continue
                seen[dst] = None
            edge_labels.setdefault(label, None)
            if seen:
                adjacency[(src, label)] = tuple(seen)

    if dangling:
        listed = ", ".join(f"({s}, {r}, {d})" for s, r, d in dangling[:20])
        more = f" and {len(dangling) - 20} more" if len(dangling) > 20 else ""
        raise GraphLoadError(f"{source}: dangling neighbour reference(s): {listed}{more}")
    for w in warnings:
        logger.warning("%s: %s", source, w)

    return KnowledgeGraph(
        nodes=MappingProxyType(nodes),
        adjacency=MappingProxyType(adjacency),
        schema=GraphSchema(tuple(feature_names), tuple(edge_labels)),
        warnings=tuple(warnings),
    )


def load_graph(path: str | Path) -> KnowledgeGraph:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise GraphLoadError(f"{path}: cannot read graph file ({exc})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphLoadError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return graph_from_dict(doc, source=str(path))


def convert_grbench(doc: Mapping[str, Any]) -> dict[str, Any]:
    """Map a GRBENCH-style ``graph.json`` into the canonical document.

    GRBENCH groups nodes by type (``{"paper_nodes": {id: {"features": ..., "neighbors": ...}}}``).
    Node types are folded away; every label keeps its direction as given.
    Feature values that are not strings are serialised with ``json.dumps``.
    """
    nodes: dict[str, Any] = {}
    edges: dict[str, Any] = {}
    for group in doc.values():
        if not isinstance(group, dict):
            continue
        for node_id, body in group.items():
            features = {
                k: v if isinstance(v, str) else json.dumps(v, ensure_ascii=False)
                for k, v in (body.get("features") or {}).items()
            }
            nodes[str(node_id)] = {"features": features}
            nbrs = {
                label: [str(x) for x in ids]
                for label, ids in (body.get("neighbors") or {}).items()
                if ids
            }
            if nbrs:
                edges[str(node_id)] = nbrs
    return {"nodes": nodes, "edges": edges}
