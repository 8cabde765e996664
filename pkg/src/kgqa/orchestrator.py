"""Plan -> Thought -> Action reasoning loop with a judge-gated reflection loop.

One backend plays the planning, thought and execution roles; the prompt's trailing
cue (``Plan 3:``, ``Thought 3:``, ``Action 3:``) selects which. After an attempt
finishes, the judge decides whether the answer stands. A failed attempt is reflected
on, the scratchpad is cleared, and the accumulated reflections are carried into the
next attempt's prompt.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Optional

from .action_lang import (
    DEFAULT_NEIGHBOUR_CAP,
    ActionParseError,
    Finish,
    Observation,
    Outcome,
    eval_action_list,
    parse_actions,
)
from .graph_store import KnowledgeGraph
from .llm_gateway import Backend, ChatTurn, GenerationParams
from .prompts import PromptCatalog, fill, reflections_block
from .retrieval import RetrievalIndex

logger = logging.getLogger(__name__)

RoleName = Literal["plan", "thought", "action"]
LABELS = {"plan": "Plan", "thought": "Thought", "action": "Action"}
EMPTY_GENERATION = "(no output)"
END_OF_REFLECTION = "(END OF REFLECTION)"

DEFAULT_MAX_STEPS = 10
DEFAULT_MAX_REFLECTIONS = 2

EventSink = Callable[[dict[str, Any]], None]


class ExtractionError(ValueError):
    pass


@dataclass
class ReasoningStep:
    index: int
    plan: str
    thought: Optional[str] = None
    action_raw: Optional[str] = None
    observation: Optional[Observation] = None
    answer: Optional[str] = None  # set on the Finish step only

    @property
    def complete(self) -> bool:
        return self.observation is not None or self.answer is not None

    def lines(self) -> list[str]:
        k = self.index
        out = [f"Plan {k}: {self.plan}"]
        if self.thought is not None:
            out.append(f"Thought {k}: {self.thought}")
        if self.action_raw is not None:
            out.append(f"Action {k}: {self.action_raw}")
        if self.answer is not None:
            out.append(f"Observation {k}: Answer is {self.answer}")
        elif self.observation is not None:
            out.append(f"Observation {k}: {self.observation.text}")
        return out


@dataclass
class ReasoningTrace:
    question: str
    steps: list[ReasoningStep] = field(default_factory=list)
    reflections: list[str] = field(default_factory=list)
    stop_reason: Optional[str] = None

    def scratchpad(self) -> str:
        return "\n".join(line for s in self.steps for line in s.lines())

    @property
    def answer(self) -> Optional[str]:
        if self.steps and self.steps[-1].answer is not None:
            return self.steps[-1].answer
        return None


@dataclass
class EpisodeState:
    trace: ReasoningTrace
    n: int = 0
    correct: bool = False
    final_answer: Optional[str] = None
    attempts: list[ReasoningTrace] = field(default_factory=list)
    judge_calls: int = 0
    reflect_calls: int = 0

    @property
    def attempts_used(self) -> int:
        return len(self.attempts)


@dataclass
class Backends:
    reasoning: Backend
    judge: Optional[Backend] = None
    reflection: Optional[Backend] = None

    def __post_init__(self) -> None:
        self.judge = self.judge or self.reasoning
        self.reflection = self.reflection or self.reasoning


@dataclass(frozen=True)
class AgentSettings:
    max_steps: int = DEFAULT_MAX_STEPS
    max_reflections: int = DEFAULT_MAX_REFLECTIONS
    reasoning_params: GenerationParams = GenerationParams(stop_sequences=("Observation",))
    judge_params: GenerationParams = GenerationParams()
    reflection_params: GenerationParams = GenerationParams()
    neighbour_cap: int = DEFAULT_NEIGHBOUR_CAP
    # characters of scratchpad per attempt; None disables the limit
    max_scratchpad_chars: Optional[int] = None

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise ValueError("max_steps (T) must be >= 1")
        if self.max_reflections < 0:
            raise ValueError("max_reflections (N) must be >= 0")


# --- state machine -------------------------------------------------------------

def next_role(trace: ReasoningTrace) -> RoleName:
    if not trace.steps or trace.steps[-1].complete:
        return "plan"
    last = trace.steps[-1]
    if last.thought is None:
        return "thought"
    return "action"


def cue(trace: ReasoningTrace, role: RoleName) -> str:
    if role == "plan":
        index = len(trace.steps) + 1
    else:
        index = trace.steps[-1].index
    return f"{LABELS[role]} {index}:"


def build_prompt(
    catalog: PromptCatalog, trace: ReasoningTrace, role: RoleName, max_steps: int = DEFAULT_MAX_STEPS
) -> list[ChatTurn]:
    pad = trace.scratchpad()
    pad = f"{pad}\n{cue(trace, role)}" if pad else cue(trace, role)
    text = fill(catalog.reasoning, {
        "examples": catalog.examples,
        "reflections": reflections_block(trace.reflections),
        "graph_definition": catalog.graph_definition,
        "question": trace.question,
        "scratchpad": pad,
        "max_steps": str(max_steps),
    })
    return [ChatTurn("user", text)]


_ANY_LABEL = re.compile(
    r"\b(?:Plan|Thought|Action|Observation)\s+\d+\s*:|(?:^|\n)[ \t*]*(?:Plan|Thought|Action|Observation)\s*:",
    re.IGNORECASE,
)


def clean_generation(text: str, role: RoleName) -> str:
    """Strip an echoed role label and cut at the next role label the model ran into."""
    text = text.strip()
    echo = re.match(rf"[ \t*]*{LABELS[role]}\s*\d*\s*\**\s*:", text, re.IGNORECASE)
    if echo:
        text = text[echo.end():]
    nxt = _ANY_LABEL.search(text)
    if nxt:
        text = text[: nxt.start()]
    text = text.strip()
    if role == "action":
        text = " ".join(line.strip() for line in text.splitlines() if line.strip())
    return text or EMPTY_GENERATION


def regularize(action_raw: str) -> str:
    """Bracket interior of the Finish action, trimmed."""
    m = re.search(r"finish\s*\[", action_raw, re.IGNORECASE)
    if not m:
        raise ExtractionError(f"no Finish action in {action_raw!r}")
    depth, start = 1, m.end()
    for i in range(start, len(action_raw)):
        ch = action_raw[i]
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                return action_raw[start:i].strip()
    raise ExtractionError(f"unterminated Finish action in {action_raw!r}")


def _emit(sink: Optional[EventSink], attempt: int, t: int, role: str, text: str) -> None:
    if sink is not None:
        sink({"attempt": attempt, "t": t, "role": role, "text": text})


def run_inner_loop(
    g: KnowledgeGraph,
    idx: RetrievalIndex,
    backend: Backend,
    catalog: PromptCatalog,
    q: str,
    T: int = DEFAULT_MAX_STEPS,
    *,
    reflections: Optional[list[str]] = None,
    settings: AgentSettings = AgentSettings(),
    on_event: Optional[EventSink] = None,
    attempt: int = 1,
) -> tuple[ReasoningTrace, Optional[str]]:
    if T < 1:
        raise ValueError("T must be >= 1")
    trace = ReasoningTrace(q, reflections=list(reflections or []))

    def generate(role: RoleName) -> str:
        turns = build_prompt(catalog, trace, role, T)
        text = clean_generation(backend.complete(turns, settings.reasoning_params), role)
        _emit(on_event, attempt, len(trace.steps) + (role == "plan"), role, text)
        return text

    for t in range(1, T + 1):
        step = ReasoningStep(t, generate("plan"))
        trace.steps.append(step)
        step.thought = generate("thought")
        step.action_raw = generate("action")

        try:
            actions = parse_actions(step.action_raw)
        except ActionParseError as exc:
            step.observation = Observation(str(exc), Outcome.ADVISORY)
        else:
            if isinstance(actions[0], Finish):
                step.answer = regularize(step.action_raw)
                trace.stop_reason = "finish"
                _emit(on_event, attempt, t, "answer", step.answer)
                return trace, step.answer
            step.observation = eval_action_list(g, idx, actions, settings.neighbour_cap)
        _emit(on_event, attempt, t, "observation", step.observation.text)

        if settings.max_scratchpad_chars is not None and len(trace.scratchpad()) > settings.max_scratchpad_chars:
            trace.stop_reason = "length_limit"
            return trace, None

    trace.stop_reason = "max_steps"
    return trace, None


_VERDICT = re.compile(r"\[\s*(yes|no)\s*\]", re.IGNORECASE)


def parse_judgment(reply: str) -> Optional[bool]:
    """Rightmost ``[yes]``/``[no]`` token wins; ``None`` when neither occurs."""
    found = _VERDICT.findall(reply)
    if not found:
        return None
    return found[-1].lower() == "yes"


def judge(
    backend_eval: Backend,
    catalog: PromptCatalog,
    q: str,
    trace: ReasoningTrace,
    answer: str,
    params: GenerationParams = GenerationParams(),
) -> tuple[bool, str]:
    """Ask the evaluation prompt whether ``answer`` stands. Returns (verdict, raw reply)."""
    text = fill(catalog.evaluation, {
        "examples": catalog.examples,
        "graph_definition": catalog.graph_definition,
        "question": q,
        "scratchpad": trace.scratchpad(),
        "answer": answer,
    })
    reply = backend_eval.complete([ChatTurn("user", text)], params)
    verdict = parse_judgment(reply)
    if verdict is None:
        logger.warning("judge reply has neither [yes] nor [no]; treating as incorrect: %r", reply[-200:])
        return False, reply
    return verdict, reply


def reflect(
    backend_reflect: Backend,
    catalog: PromptCatalog,
    q: str,
    trace: ReasoningTrace,
    params: GenerationParams = GenerationParams(),
    max_steps: int = DEFAULT_MAX_STEPS,
) -> str:
    text = fill(catalog.reflection, {
        "examples": catalog.examples,
        "graph_definition": catalog.graph_definition,
        "question": q,
        "scratchpad": trace.scratchpad(),
        "max_steps": str(max_steps),
    })
    reply = backend_reflect.complete([ChatTurn("user", text)], params)
    end = reply.upper().find(END_OF_REFLECTION)
    if end >= 0:
        reply = reply[:end]
    return reply.strip()


def run_episode(
    g: KnowledgeGraph,
    idx: RetrievalIndex,
    backends: Backends,
    catalog: PromptCatalog,
    q: str,
    T: Optional[int] = None,
    N: Optional[int] = None,
    *,
    settings: AgentSettings = AgentSettings(),
    on_event: Optional[EventSink] = None,
) -> EpisodeState:
    T = settings.max_steps if T is None else T
    N = settings.max_reflections if N is None else N
    if T < 1 or N < 0:
        raise ValueError("need T >= 1 and N >= 0")

    reflections: list[str] = []
    state = EpisodeState(trace=ReasoningTrace(q))
    while state.n <= N and not state.correct:
        attempt = len(state.attempts) + 1
        trace, answer = run_inner_loop(
            g, idx, backends.reasoning, catalog, q, T,
            reflections=reflections, settings=settings, on_event=on_event, attempt=attempt,
        )
        state.trace = trace
        state.attempts.append(trace)
        if answer is not None:
            state.final_answer = answer
            state.correct, reply = judge(backends.judge, catalog, q, trace, answer, settings.judge_params)
            state.judge_calls += 1
            _emit(on_event, attempt, len(trace.steps), "judge", reply)
        if state.correct or state.n >= N:
            break
        reflection = reflect(backends.reflection, catalog, q, trace, settings.reflection_params, T)
        state.reflect_calls += 1
        _emit(on_event, attempt, len(trace.steps), "reflection", reflection)
        reflections.append(reflection)
        state.n += 1
    return state
