"""Bracketed graph-action language.

Grammar (whitespace around brackets and commas is insignificant)::

    actions  := expr ("," expr)*
    expr     := Retrieve[text] | Finish[text]
              | (Feature | Neighbour | Degree)[target, name]
    target   := Retrieve[text] | node-id

Retrieve and Finish take their bracket interior verbatim (trimmed), so queries may
contain commas, hyphens and balanced brackets. Only Retrieve may sit in the inner
position of a compound, which bounds nesting at two applications.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Optional, Union

from .graph_store import KnowledgeGraph, Miss, get_degree, get_feature, get_neighbours
from .retrieval import RetrievalIndex, retrieve_top1

RETRIEVE_TEMPLATE = "The ID of this retrieval target node is {id}."
FEATURE_TEMPLATE = "The {feature} feature of {id} are: {value}."
NEIGHBOUR_TEMPLATE = "The {label} neighbors of {id} are: {list}."
DEGREE_TEMPLATE = "The number of {label} neighbors of {id} is {count}."
MISS_MESSAGE = (
    "The node or feature name does not exist in the graph. "
    "This might because your given feature name is not correct. Please modify it."
)
NO_HIT_MESSAGE = "No node in the graph matches this keyword. Please try a different keyword."
INVALID_FUNCTION_MESSAGE = (
    "Invalid function name. Valid functions are Retrieve, Feature, Degree, Neighbour, Finish."
)

DEFAULT_NEIGHBOUR_CAP = 50


class ActionParseError(ValueError):
    """Malformed action text. ``str(err)`` is advice suitable as an observation."""


@dataclass(frozen=True)
class Retrieve:
    query: str


@dataclass(frozen=True)
class Feature:
    target: Union[Retrieve, str]
    feature: str


@dataclass(frozen=True)
class Neighbour:
    target: Union[Retrieve, str]
    label: str


@dataclass(frozen=True)
class Degree:
    target: Union[Retrieve, str]
    label: str


@dataclass(frozen=True)
class Finish:
    answer: str


ActionExpr = Union[Retrieve, Feature, Neighbour, Degree, Finish]

_NAMES = {
    "retrieve": Retrieve,
    "feature": Feature,
    "neighbour": Neighbour,
    "neighbor": Neighbour,
    "degree": Degree,
    "finish": Finish,
}
_CANONICAL = {Retrieve: "Retrieve", Feature: "Feature", Neighbour: "Neighbour",
              Degree: "Degree", Finish: "Finish"}
_CALL = re.compile(r"\s*([A-Za-z_]\w*)\s*\[", re.DOTALL)


class Outcome(enum.Enum):
    OK = "ok"
    ADVISORY = "advisory-error"


@dataclass(frozen=True)
class Observation:
    text: str
    outcome: Outcome = Outcome.OK

    @property
    def ok(self) -> bool:
        return self.outcome is Outcome.OK


# --- parsing -----------------------------------------------------------------

def _split_top_level(text: str) -> list[str]:
    """Split on commas at bracket depth zero. Raises on unbalanced brackets."""
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise ActionParseError(
                    "Unbalanced brackets: found ']' without a matching '['. Please check the action format."
                )
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    if depth:
        raise ActionParseError(
            "Unbalanced brackets: a '[' is never closed. Please check the action format."
        )
    parts.append(text[start:])
    return parts


def _match_call(text: str) -> Optional[tuple[str, str]]:
    """If ``text`` is exactly ``Name[ ... ]``, return (name, interior)."""
    m = _CALL.match(text)
    if not m:
        return None
    body = text[m.end():].rstrip()
    if not body.endswith("]"):
        return None
    # the opening bracket must close at the very end
    depth = 1
    for i, ch in enumerate(body):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                if i != len(body) - 1:
                    return None
                return m.group(1), body[:i]
    return None


def _looks_like_call(text: str) -> bool:
    call = _match_call(text)
    return call is not None and call[0].lower() in _NAMES


def _parse_expr(text: str, inner: bool) -> ActionExpr:
    call = _match_call(text)
    if call is None:
        stripped = text.strip()
        if not stripped:
            raise ActionParseError("Empty action. Please provide one of Retrieve, Feature, Degree, Neighbour, Finish.")
        raise ActionParseError(
            f"Invalid action format: {stripped!r}. Use the form Function[arguments], "
            "for example Feature[node, feature]."
        )
    name, interior = call
    kind = _NAMES.get(name.lower())
    if kind is None:
        raise ActionParseError(INVALID_FUNCTION_MESSAGE)

    if kind is Finish:
        if inner:
            raise ActionParseError("Finish cannot be combined with other functions. Use Finish[answer] on its own.")
        answer = interior.strip()
        if not answer:
            raise ActionParseError("Finish needs an answer inside the brackets, for example Finish[answer].")
        return Finish(answer)

    if inner and kind is not Retrieve:
        raise ActionParseError(
            f"Only Retrieve can be used inside another function; {_CANONICAL[kind]} cannot. "
            "No more than two functions can be combined."
        )

    if kind is Retrieve:
        query = interior.strip()
        if not query:
            raise ActionParseError("Retrieve needs a keyword inside the brackets, for example Retrieve[keyword].")
        if _looks_like_call(query):
            raise ActionParseError(
                "Retrieve takes a keyword, not another function. No more than two functions can be combined."
            )
        return Retrieve(query)

    args = _split_top_level(interior)
    if len(args) != 2:
        raise ActionParseError(
            f"{_CANONICAL[kind]} takes exactly two arguments, for example "
            f"{_CANONICAL[kind]}[node, {'feature' if kind is Feature else 'neighbor_type'}]."
        )
    raw_target, second = args[0].strip(), args[1].strip()
    if not raw_target or not second:
        raise ActionParseError(f"{_CANONICAL[kind]} has an empty argument. Please provide both arguments.")
    if "[" in second or "]" in second:
        raise ActionParseError(
            f"The second argument of {_CANONICAL[kind]} must be a plain name, not a function."
        )
    if _match_call(raw_target) is not None:
        target: Union[Retrieve, str] = _parse_expr(raw_target, inner=True)  # type: ignore[assignment]
    elif "[" in raw_target or "]" in raw_target:
        raise ActionParseError(f"Invalid node argument {raw_target!r}. Please check the action format.")
    else:
        target = raw_target
    return kind(target, second)


def parse_actions(raw: str) -> list[ActionExpr]:
    """Parse one action line into a list of parallel expressions."""
    if not raw.strip():
        raise ActionParseError("Empty action. Please provide one of Retrieve, Feature, Degree, Neighbour, Finish.")
    exprs = [_parse_expr(part, inner=False) for part in _split_top_level(raw)]
    if len(exprs) > 1 and any(isinstance(e, Finish) for e in exprs):
        raise ActionParseError("Finish cannot be combined with other actions. Use Finish[answer] on its own.")
    return exprs


# --- rendering ---------------------------------------------------------------

def render(a: Union[ActionExpr, str]) -> str:
    if isinstance(a, str):
        return a
    if isinstance(a, Retrieve):
        return f"Retrieve[{a.query}]"
    if isinstance(a, Finish):
        return f"Finish[{a.answer}]"
    second = a.feature if isinstance(a, Feature) else a.label
    return f"{_CANONICAL[type(a)]}[{render(a.target)}, {second}]"


def render_actions(actions: list[ActionExpr]) -> str:
    return ", ".join(render(a) for a in actions)


# --- evaluation --------------------------------------------------------------

def format_node_list(ids: list[str], cap: int = DEFAULT_NEIGHBOUR_CAP) -> str:
    if len(ids) <= cap:
        return str(ids)
    return f"{ids[:cap]} ... ({len(ids)} nodes total)"


def _resolve(g: KnowledgeGraph, idx: RetrievalIndex, target: Union[Retrieve, str]):
    """Return (node_id or None, prefix sentences, outcome)."""
    if isinstance(target, str):
        return target, [], Outcome.OK
    obs = _eval_retrieve(idx, target.query)
    if not obs[1]:
        return None, [obs[0]], Outcome.ADVISORY
    return obs[1], [obs[0]], Outcome.OK


def _eval_retrieve(idx: RetrievalIndex, query: str) -> tuple[str, Optional[str]]:
    try:
        hit = retrieve_top1(idx, query)
    except ValueError:
        return "Retrieve needs a non-empty keyword. Please modify it.", None
    if hit is None:
        return NO_HIT_MESSAGE, None
    return RETRIEVE_TEMPLATE.format(id=hit.node), hit.node


def eval_action(
    g: KnowledgeGraph,
    idx: RetrievalIndex,
    a: ActionExpr,
    neighbour_cap: int = DEFAULT_NEIGHBOUR_CAP,
) -> Observation:
    """Evaluate one non-Finish expression. Never raises."""
    try:
        if isinstance(a, Retrieve):
            text, node = _eval_retrieve(idx, a.query)
            return Observation(text, Outcome.OK if node else Outcome.ADVISORY)
        if isinstance(a, Finish):
            return Observation("Finish is not a graph function and cannot be evaluated here.", Outcome.ADVISORY)

        node, sentences, outcome = _resolve(g, idx, a.target)
        if node is None:
            return Observation(" ".join(sentences), outcome)
        if isinstance(a, Feature):
            value = get_feature(g, node, a.feature)
            result = value if isinstance(value, Miss) else FEATURE_TEMPLATE.format(
                feature=a.feature, id=node, value=value)
        elif isinstance(a, Neighbour):
            ids = get_neighbours(g, node, a.label)
            result = ids if isinstance(ids, Miss) else NEIGHBOUR_TEMPLATE.format(
                label=a.label, id=node, list=format_node_list(ids, neighbour_cap))
        elif isinstance(a, Degree):
            count = get_degree(g, node, a.label)
            result = count if isinstance(count, Miss) else DEGREE_TEMPLATE.format(
                label=a.label, id=node, count=count)
        else:
            return Observation(INVALID_FUNCTION_MESSAGE, Outcome.ADVISORY)
        if isinstance(result, Miss):
            return Observation(" ".join(sentences + [MISS_MESSAGE]), Outcome.ADVISORY)
        return Observation(" ".join(sentences + [result]), outcome)
    except Exception as exc:  # noqa: BLE001 - observations must never raise
        return Observation(f"The action could not be executed ({exc}). Please modify it.", Outcome.ADVISORY)


def eval_action_list(
    g: KnowledgeGraph,
    idx: RetrievalIndex,
    actions: list[ActionExpr],
    neighbour_cap: int = DEFAULT_NEIGHBOUR_CAP,
) -> Observation:
    observations = [eval_action(g, idx, a, neighbour_cap) for a in actions]
    outcome = Outcome.OK if all(o.ok for o in observations) else Outcome.ADVISORY
    return Observation(" ".join(o.text for o in observations), outcome)
