"""Command-line entry points.

Exit codes: 0 success, 1 assertion or validation failure, 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .config import BackendSettings, ConfigError, RunConfig, load_config
from .evaluation import (
    BenchmarkConfig,
    DatasetError,
    DomainEnv,
    read_dataset,
    run_benchmark,
)
from .graph_store import GraphLoadError, convert_grbench, graph_from_dict, load_graph
from .llm_gateway import Backend, GatewayError, RemoteBackend, ScriptedBackend, ScriptEntry, ScriptError, with_retry
from .orchestrator import Backends, run_episode
from .prompts import CatalogError, PromptCatalog
from .replay import BUNDLED, replay
from .report import format_table, write_report
from .retrieval import RetrievalConfigError, build_index

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

logger = logging.getLogger("kgqa")


class UsageError(Exception):
    pass


# --- wiring ------------------------------------------------------------------

def _script_doc(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read script file {path}: {exc}") from exc


def _entries(raw: Sequence[dict]) -> list[ScriptEntry]:
    return [ScriptEntry(reply=e["reply"], match=e.get("match")) for e in raw]


def script_for(path: str, question_id: str, role: str = "reasoning") -> list[ScriptEntry]:
    """Pick the script for one episode.

    A script file is a JSON list of ``{"match", "reply"}`` entries, a replay fixture
    (``{"script": [...]}``), or a per-question map ``{"scripts": {qid: [...]},
    "scoring": {qid: [...]}}`` for benchmarks.
    """
    doc = _script_doc(path)
    if isinstance(doc, list):
        return _entries(doc)
    if role == "scoring" and "scoring" in doc:
        table = doc["scoring"]
    elif "scripts" in doc:
        table = doc["scripts"]
    else:
        return _entries(doc["script"])
    if question_id not in table:
        raise UsageError(f"script file {path} has no {role} script for question {question_id!r}")
    return _entries(table[question_id])


def make_backends(cfg: RunConfig, question_id: str) -> Backends:
    made: dict[BackendSettings, Backend] = {}

    def make(settings: BackendSettings, role: str) -> Backend:
        if settings in made:
            return made[settings]
        if settings.kind == "scripted":
            if not settings.script:
                raise UsageError(f"scripted {role} backend needs 'script' (path to a script file)")
            backend: Backend = ScriptedBackend(script_for(settings.script, question_id), name=f"scripted:{role}")
        else:
            if not settings.url or not settings.model:
                raise UsageError(
                    f"remote {role} backend needs a URL and model: set [backend] url/model in the config, "
                    "GC_LLM_URL/GC_LLM_MODEL, or --backend-url/--backend-model"
                )
            backend = with_retry(
                RemoteBackend(settings.url, settings.model, settings.key, settings.timeout), cfg.retry
            )
        made[settings] = backend
        return backend

    return Backends(
        reasoning=make(cfg.backend, "reasoning"),
        judge=make(cfg.backend_for("judge"), "judge"),
        reflection=make(cfg.backend_for("reflection"), "reflection"),
    )


def make_scoring_judge(cfg: RunConfig, question_id: str) -> Optional[Backend]:
    if not cfg.score_with_judge:
        return None
    settings = cfg.role_backends.get("scoring")
    if settings is None:
        return None
    if settings.kind == "scripted":
        return ScriptedBackend(script_for(settings.script or "", question_id, "scoring"), name="scripted:scoring")
    if not settings.url or not settings.model:
        raise UsageError("remote scoring backend needs a URL and model")
    return with_retry(RemoteBackend(settings.url, settings.model, settings.key, settings.timeout), cfg.retry)


def load_domain(cfg: RunConfig, domain: str) -> DomainEnv:
    if domain not in cfg.graphs:
        known = ", ".join(sorted(cfg.graphs)) or "none"
        raise UsageError(
            f"no graph configured for domain {domain!r} (configured: {known}). "
            f"Add it under [graphs] in the config file or pass --graph {domain}=PATH."
        )
    try:
        graph = load_graph(cfg.graphs[domain])
        index = build_index(graph, cfg.retrieval_fields.get(domain), scorer=cfg.scorer)
        if cfg.catalog_dir:
            catalog = PromptCatalog.load(Path(cfg.catalog_dir) / domain, graph)
        else:
            catalog = PromptCatalog.default().with_graph(graph)
    except (GraphLoadError, RetrievalConfigError, CatalogError) as exc:
        raise UsageError(f"domain {domain!r}: {exc}") from exc
    return DomainEnv(graph, index, catalog)


def _parse_graph_flags(values: Optional[list[str]]) -> Optional[dict[str, str]]:
    if not values:
        return None
    out = {}
    for item in values:
        domain, sep, path = item.partition("=")
        if not sep or not domain or not path:
            raise UsageError(f"--graph expects DOMAIN=PATH, got {item!r}")
        out[domain] = path
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    flags = {
        "t_max": getattr(args, "t_max", None),
        "n_reflect": getattr(args, "n_reflect", None),
        "workers": getattr(args, "workers", None),
        "out": getattr(args, "out", None),
        "seed": getattr(args, "seed", None),
        "backend.url": getattr(args, "backend_url", None),
        "backend.model": getattr(args, "backend_model", None),
        "backend.key": getattr(args, "backend_key", None),
    }
    cfg = load_config(args.config, flags)
    graphs = _parse_graph_flags(getattr(args, "graph", None))
    if graphs:
        cfg = replace(cfg, graphs={**cfg.graphs, **graphs})
    return cfg


# --- commands ----------------------------------------------------------------

def cmd_ask(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    env = load_domain(cfg, args.domain)
    backends = make_backends(cfg, args.question_id)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / f"episode-{args.question_id}.jsonl"
    log_path.write_text("", encoding="utf-8")

    def sink(event: dict[str, Any]) -> None:
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"question_id": args.question_id, **event}, ensure_ascii=False) + "\n")

    start = time.perf_counter()
    state = run_episode(env.graph, env.index, backends, env.catalog, args.question,
                        settings=cfg.agent_settings(), on_event=sink)
    elapsed = time.perf_counter() - start
    sink({"attempt": state.attempts_used, "t": len(state.trace.steps), "role": "summary",
          "text": json.dumps({"final_answer": state.final_answer, "correct": state.correct,
                              "attempts_used": state.attempts_used, "reflections": state.n,
                              "wall_time_s": round(elapsed, 3)})})
    answer = state.final_answer if state.final_answer is not None else "(no answer)"
    print(answer)
    print(f"attempts used: {state.attempts_used}  reflections: {state.n}  judged correct: {state.correct}",
          file=sys.stderr)
    print(f"episode log: {log_path}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    try:
        dataset = read_dataset(args.dataset)
    except (OSError, DatasetError) as exc:
        raise UsageError(f"cannot read dataset: {exc}") from exc
    envs = {d: load_domain(cfg, d) for d in sorted({r.domain for r in dataset})}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "episodes.jsonl"
    if not args.resume:
        log_path.write_text("", encoding="utf-8")

    bench_cfg = BenchmarkConfig(
        settings=cfg.agent_settings(),
        workers=cfg.workers,
        score_with_judge=cfg.score_with_judge,
        resume=args.resume,
    )
    results, report = run_benchmark(
        dataset, envs,
        backend_factory=lambda rec: make_backends(cfg, rec.question_id),
        config=bench_cfg,
        results_path=out / "results.jsonl",
        scoring_judge_factory=lambda rec: make_scoring_judge(cfg, rec.question_id),
        log_path=log_path,
    )
    paths = write_report(report, out, figure=not args.no_figure)
    print(format_table(report), end="")
    print(f"results: {out / 'results.jsonl'}", file=sys.stderr)
    for kind, p in paths.items():
        print(f"{kind}: {p}", file=sys.stderr)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    fixtures = args.fixtures or list(BUNDLED)
    status = EXIT_OK
    for fx in fixtures:
        try:
            result = replay(fx)
        except (OSError, json.JSONDecodeError, KeyError, GraphLoadError) as exc:
            raise UsageError(f"cannot load fixture {fx}: {exc}") from exc
        for check in result.checks:
            print(f"{'PASS' if check.passed else 'FAIL'}  {result.fixture}: {check.name}")
            if not check.passed:
                print("      " + check.detail.replace("\n", "\n      "))
        if result.passed:
            answer = result.state.final_answer if result.state else None
            print(f"PASS  {result.fixture}: final answer {answer!r}")
        else:
            status = EXIT_FAIL
    return status


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        if args.grbench:
            doc = json.loads(Path(args.graph).read_text(encoding="utf-8"))
            canonical = convert_grbench(doc)
            graph = graph_from_dict(canonical, source=args.graph)
            if args.write_canonical:
                Path(args.write_canonical).write_text(json.dumps(canonical, ensure_ascii=False), encoding="utf-8")
        else:
            graph = load_graph(args.graph)
    except (GraphLoadError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid graph: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"nodes: {len(graph)}")
    print(f"edges: {graph.edge_count}")
    print(f"edge labels: {len(graph.schema.edge_labels)} ({', '.join(graph.schema.edge_labels)})")
    print(f"feature names: {len(graph.schema.feature_names)} ({', '.join(graph.schema.feature_names)})")
    for w in graph.warnings:
        print(f"warning: {w}")
    return EXIT_OK


def cmd_config_show(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    print(json.dumps(cfg.describe(), indent=2, sort_keys=True))
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgqa", description="Answer questions over a knowledge graph with a reflective plan/thought/action agent.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--graph", action="append", metavar="DOMAIN=PATH", help="add or override a domain graph")
        p.add_argument("--t-max", type=int, help="maximum steps per attempt (T)")
        p.add_argument("--n-reflect", type=int, help="maximum reflections (N)")
        p.add_argument("--workers", type=int, help="parallel episodes for bench")
        p.add_argument("--backend-url", help="chat-completions endpoint (env GC_LLM_URL)")
        p.add_argument("--backend-model", help="model name (env GC_LLM_MODEL)")
        p.add_argument("--backend-key", help="API key (env GC_LLM_KEY)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="reserved; accepted and ignored")

    p = sub.add_parser("ask", help="answer one question")
    run_flags(p)
    p.add_argument("--domain", required=True)
    p.add_argument("--question-id", default="ask")
    p.add_argument("question")
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("bench", help="run a benchmark dataset")
    run_flags(p)
    p.add_argument("dataset", help="newline-delimited JSON dataset")
    p.add_argument("--resume", action="store_true", help="skip question ids already in results.jsonl")
    p.add_argument("--no-figure", action="store_true", help="skip the PNG report figure")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", help="replay golden transcript fixtures")
    p.add_argument("fixtures", nargs="*", help=f"fixture paths or bundled names ({', '.join(BUNDLED)})")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("validate", help="load a graph file and print diagnostics")
    p.add_argument("graph")
    p.add_argument("--grbench", action="store_true", help="input is a GRBENCH-style graph.json")
    p.add_argument("--write-canonical", metavar="PATH", help="with --grbench, write the converted graph")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("config-show", help="print the effective configuration")
    run_flags(p)
    p.set_defaults(func=cmd_config_show)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GatewayError, ScriptError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
