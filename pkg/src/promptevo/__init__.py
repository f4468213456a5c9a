"""Memory-guided evolutionary optimisation of component-structured prompts."""
from .evolution import EvolutionConfig, EvolutionRun, RunResult, run, seed_streams
from .gateway import ChatRequest, ChatResponse, Gateway, OpenAICompatibleBackend
from .genome import ComponentType, Genome, PromptTemplate, Registry, ScoredPrompt, parse, render
from .harness import Evaluator, Example, TaskAdapter, build_task_prompt, extract_answer
from .memory import ComponentMemory, PromptMemory
from .mock import MockBackend, mock_policy

__all__ = [
    "ChatRequest", "ChatResponse", "ComponentMemory", "ComponentType", "Evaluator",
    "EvolutionConfig", "EvolutionRun", "Example", "Gateway", "Genome", "MockBackend",
    "OpenAICompatibleBackend", "PromptMemory", "PromptTemplate", "Registry", "RunResult",
    "ScoredPrompt", "TaskAdapter", "build_task_prompt", "extract_answer", "mock_policy",
    "parse", "render", "run", "seed_streams",
]
