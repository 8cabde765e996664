"""Graph question answering with a plan/thought/action loop and judge-gated self-reflection."""

from .action_lang import Observation, parse_actions, render, render_actions
from .graph_store import KnowledgeGraph, Miss, get_degree, get_feature, get_neighbours, load_graph
from .llm_gateway import ChatTurn, GenerationParams, RemoteBackend, RetryPolicy, ScriptedBackend, with_retry
from .orchestrator import AgentSettings, Backends, EpisodeState, run_episode
from .prompts import PromptCatalog
from .retrieval import build_index, retrieve_top1

__version__ = "0.1.0"

__all__ = [
    "AgentSettings",
    "Backends",
    "ChatTurn",
    "EpisodeState",
    "GenerationParams",
    "KnowledgeGraph",
    "Miss",
    "Observation",
    "PromptCatalog",
    "RemoteBackend",
    "RetryPolicy",
    "ScriptedBackend",
    "build_index",
    "get_degree",
    "get_feature",
    "get_neighbours",
    "load_graph",
    "parse_actions",
    "render",
    "render_actions",
    "retrieve_top1",
    "run_episode",
    "with_retry",
]
