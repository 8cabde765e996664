"""Scoring and the end-to-end benchmark harness.

Rouge-L here is recall against the reference: LCS(pred, ref) / |ref| over
lowercased, punctuation-stripped tokens. This is not the F-measure variant.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from threading import Lock
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

from .llm_gateway import Backend, ChatTurn, GatewayError, GenerationParams
from .orchestrator import AgentSettings, Backends, parse_judgment, run_episode
from .prompts import PromptCatalog, fill
from .retrieval import RetrievalIndex
from .graph_store import KnowledgeGraph
from .text import tokenize

logger = logging.getLogger(__name__)

DOMAINS = ("Academic", "E-commerce", "Literature", "Healthcare", "Legal", "other")
DIFFICULTIES = ("simple", "medium", "hard")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class QARecord:
    question_id: str
    question: str
    gold_answer: str
    domain: str = "other"
    difficulty: str = "simple"

    def __post_init__(self) -> None:
        if not self.question.strip() or not self.gold_answer.strip():
            raise DatasetError(f"record {self.question_id}: question and answer must be non-empty")
        if self.difficulty not in DIFFICULTIES:
            raise DatasetError(f"record {self.question_id}: unknown difficulty {self.difficulty!r}")


@dataclass
class ScoredResult:
    record: QARecord
    predicted: Optional[str]
    rouge_l: float
    judge_verdict: Optional[bool] = None
    wall_time_s: float = 0.0
    attempts_used: int = 0
    error: Optional[str] = None

    def to_json(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "question_id": self.record.question_id,
            "predicted": self.predicted,
            "rouge_l": self.rouge_l,
            "judge_verdict": self.judge_verdict,
            "wall_time_s": self.wall_time_s,
            "attempts_used": self.attempts_used,
        }
        if self.error is not None:
            row["error"] = self.error
        return row


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(pred: Optional[str], ref: str) -> float:
    if not ref or not ref.strip():
        raise ValueError("reference answer is empty")
    if not pred:
        return 0.0
    ref_tokens = tokenize(ref)
    if not ref_tokens:
        return 0.0
    score = lcs_length(tokenize(pred), ref_tokens) / len(ref_tokens)
    return min(1.0, max(0.0, score))


def llm_judge_score(
    backend: Backend,
    catalog: PromptCatalog,
    record: QARecord,
    predicted: Optional[str],
    params: GenerationParams = GenerationParams(temperature=0.0),
) -> Optional[bool]:
    """Verdict of the scoring judge; ``None`` when there is nothing to judge or the call fails."""
    if predicted is None:
        return None
    prompt = fill(catalog.scoring, {
        "question": record.question, "gold": record.gold_answer, "predicted": predicted,
    })
    try:
        reply = backend.complete([ChatTurn("user", prompt)], params)
    except GatewayError as exc:
        logger.warning("scoring judge failed for %s: %s", record.question_id, exc)
        return None
    verdict = parse_judgment(reply)
    return bool(verdict)


# --- aggregation -------------------------------------------------------------

@dataclass
class GroupStats:
    n: int = 0
    rouge_l: float = 0.0        # mean x 100
    judge_score: Optional[float] = None  # percent true over judged records
    judged: int = 0
    unjudged: int = 0
    failures: int = 0
    mean_wall_time_s: float = 0.0
    mean_attempts: float = 0.0

    def as_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def _group(results: Sequence[ScoredResult]) -> GroupStats:
    n = len(results)
    if not n:
        return GroupStats()
    judged = [r.judge_verdict for r in results if r.judge_verdict is not None]
    # fsum is exactly rounded, so the result does not depend on record order
    return GroupStats(
        n=n,
        rouge_l=100.0 * math.fsum(r.rouge_l for r in results) / n,
        judge_score=100.0 * sum(judged) / len(judged) if judged else None,
        judged=len(judged),
        unjudged=n - len(judged),
        failures=sum(r.error is not None for r in results),
        mean_wall_time_s=math.fsum(r.wall_time_s for r in results) / n,
        mean_attempts=sum(r.attempts_used for r in results) / n,
    )


@dataclass
class Report:
    overall: GroupStats
    by_domain: dict[str, GroupStats] = field(default_factory=dict)
    by_group: dict[tuple[str, str], GroupStats] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "overall": self.overall.as_dict(),
            "by_domain": {k: v.as_dict() for k, v in self.by_domain.items()},
            "by_domain_difficulty": [
                {"domain": d, "difficulty": diff, **v.as_dict()} for (d, diff), v in self.by_group.items()
            ],
        }


def _order(key: str, known: Sequence[str]) -> tuple[int, str]:
    return (known.index(key) if key in known else len(known), key)


def aggregate(results: Iterable[ScoredResult]) -> Report:
    results = list(results)
    domains: dict[str, list[ScoredResult]] = {}
    groups: dict[tuple[str, str], list[ScoredResult]] = {}
    for r in results:
        domains.setdefault(r.record.domain, []).append(r)
        groups.setdefault((r.record.domain, r.record.difficulty), []).append(r)
    return Report(
        overall=_group(results),
        by_domain={d: _group(domains[d]) for d in sorted(domains, key=lambda d: _order(d, DOMAINS))},
        by_group={
            k: _group(groups[k])
            for k in sorted(groups, key=lambda k: (_order(k[0], DOMAINS), _order(k[1], DIFFICULTIES)))
        },
    )


# --- files -------------------------------------------------------------------

def read_dataset(path: str | Path) -> list[QARecord]:
    records, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                rec = QARecord(
                    question_id=str(row["question_id"]),
                    question=row["question"],
                    gold_answer=str(row["answer"]),
                    domain=row.get("domain", "other"),
                    difficulty=row.get("difficulty", "simple"),
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad dataset record ({exc})") from exc
            except DatasetError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            if rec.question_id in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate question_id {rec.question_id}")
            seen.add(rec.question_id)
            records.append(rec)
    return records


def read_results(path: str | Path) -> list[dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def results_from_rows(rows: Iterable[Mapping[str, Any]], records: Mapping[str, QARecord]) -> list[ScoredResult]:
    return [
        ScoredResult(
            record=records[row["question_id"]],
            predicted=row["predicted"],
            rouge_l=row["rouge_l"],
            judge_verdict=row["judge_verdict"],
            wall_time_s=row["wall_time_s"],
            attempts_used=row["attempts_used"],
            error=row.get("error"),
        )
        for row in rows
    ]


def rescore(results_path: str | Path, dataset: Sequence[QARecord]) -> Report:
    """Recompute Rouge-L from persisted predictions and aggregate again."""
    by_id = {r.question_id: r for r in dataset}
    results = results_from_rows(read_results(results_path), by_id)
    for r in results:
        r.rouge_l = rouge_l(r.predicted, r.record.gold_answer)
    return aggregate(results)


# --- benchmark ---------------------------------------------------------------

@dataclass
class DomainEnv:
    graph: KnowledgeGraph
    index: RetrievalIndex
    catalog: PromptCatalog


@dataclass
class BenchmarkConfig:
    settings: AgentSettings = field(default_factory=AgentSettings)
    workers: int = 1
    score_with_judge: bool = True
    resume: bool = False
    # monotonic clock used for wall_time_s; one fresh clock per record
    clock_factory: Callable[[], Callable[[], float]] = lambda: time.perf_counter


BackendFactory = Callable[[QARecord], Backends]
ScoringJudgeFactory = Callable[[QARecord], Optional[Backend]]


class _OrderedWriter:
    """Append results in dataset order, flushing each record as soon as its prefix is complete."""

    def __init__(self, path: Optional[Path], order: Sequence[str]):
        self.path = path
        self.order = list(order)
        self.pending: dict[str, ScoredResult] = {}
        self.next = 0
        self.lock = Lock()

    def put(self, result: ScoredResult) -> None:
        with self.lock:
            self.pending[result.record.question_id] = result
            while self.next < len(self.order) and self.order[self.next] in self.pending:
                r = self.pending.pop(self.order[self.next])
                self.next += 1
                if self.path is not None:
                    with open(self.path, "a", encoding="utf-8") as fh:
                        fh.write(json.dumps(r.to_json(), ensure_ascii=False) + "\n")
                        fh.flush()


def run_record(
    record: QARecord,
    env: DomainEnv,
    backends: Backends,
    scoring_judge: Optional[Backend],
    config: BenchmarkConfig,
    on_event: Optional[Callable[[dict[str, Any]], None]] = None,
) -> ScoredResult:
    clock = config.clock_factory()
    start = clock()
    predicted, attempts, error = None, 0, None
    try:
        state = run_episode(
            env.graph, env.index, backends, env.catalog, record.question,
            settings=config.settings, on_event=on_event,
        )
        predicted, attempts = state.final_answer, state.attempts_used
    except Exception as exc:  # noqa: BLE001 - one bad record must not abort the run
        logger.exception("episode failed for %s", record.question_id)
        error = f"{type(exc).__name__}: {exc}"
    elapsed = clock() - start
    verdict = None
    if config.score_with_judge and scoring_judge is not None and predicted is not None:
        verdict = llm_judge_score(scoring_judge, env.catalog, record, predicted)
    return ScoredResult(
        record=record,
        predicted=predicted,
        rouge_l=rouge_l(predicted, record.gold_answer),
        judge_verdict=verdict,
        wall_time_s=max(0.0, float(elapsed)),
        attempts_used=attempts,
        error=error,
    )


def run_benchmark(
    dataset: Sequence[QARecord],
    envs: Mapping[str, DomainEnv],
    backend_factory: BackendFactory,
    config: BenchmarkConfig = BenchmarkConfig(),
    results_path: Optional[str | Path] = None,
    scoring_judge_factory: Optional[ScoringJudgeFactory] = None,
    log_path: Optional[str | Path] = None,
) -> tuple[list[ScoredResult], Report]:
    """Run every record, persist results in dataset order, and aggregate.

    With ``config.resume`` records already present in ``results_path`` are skipped and
    their persisted results are folded into the returned list and report.
    """
    missing = sorted({r.domain for r in dataset} - set(envs))
    if missing:
        raise DatasetError(f"no graph/prompt catalog loaded for domain(s): {', '.join(missing)}")
    results_path = Path(results_path) if results_path is not None else None
    by_id = {r.question_id: r for r in dataset}

    done: dict[str, ScoredResult] = {}
    if results_path is not None:
        if config.resume:
            rows = [row for row in read_results(results_path) if row["question_id"] in by_id]
            done = {r.record.question_id: r for r in results_from_rows(rows, by_id)}
        else:
            results_path.write_text("", encoding="utf-8")
    todo = [r for r in dataset if r.question_id not in done]

    log_lock = Lock()

    def sink_for(record: QARecord):
        if log_path is None:
            return None

        def sink(event: dict[str, Any]) -> None:
            with log_lock, open(log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"question_id": record.question_id, **event}, ensure_ascii=False) + "\n")
        return sink

    writer = _OrderedWriter(results_path, [r.question_id for r in todo])

    def work(record: QARecord) -> ScoredResult:
        try:
            backends = backend_factory(record)
            judge_backend = scoring_judge_factory(record) if scoring_judge_factory else None
            result = run_record(record, envs[record.domain], backends, judge_backend, config, sink_for(record))
        except Exception as exc:  # noqa: BLE001
            logger.exception("record %s failed before the episode started", record.question_id)
            result = ScoredResult(record, None, 0.0, error=f"{type(exc).__name__}: {exc}")
        writer.put(result)
        return result

    if config.workers <= 1:
        fresh = [work(r) for r in todo]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            fresh = list(pool.map(work, todo))
    new = {r.record.question_id: r for r in fresh}
    results = [done.get(r.question_id) or new[r.question_id] for r in dataset]
    return results, aggregate(results)
