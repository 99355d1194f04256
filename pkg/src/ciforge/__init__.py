"""Contextual-integrity case forge.

Turns a hierarchical privacy statute into a norm graph, synthesizes and
filters grounded legal cases through a chat-model gateway, ingests real
court decisions, assembles balanced instruction-tuning datasets, and scores
model judgments.  See the README for the CLI walkthrough.
"""

from ciforge.cases import Applicability, Case, CaseSet, Provenance
from ciforge.errors import CiForgeError, ConfigError
from ciforge.evalkit import (
    EvalReport,
    InstructionExample,
    Judgment,
    Mode,
    Task,
    compare_reports,
    compile_example,
    parse_judgment,
    render_prompt,
    score,
)
from ciforge.flows import (
    FlowFeatures,
    FlowVerdict,
    InformationFlow,
    NormPredicate,
    aggregate_verdicts,
    check_flow,
)
from ciforge.gateway import Cassette, ChatRequest, ChatResponse, Gateway, GatewayMode
from ciforge.ids import NormId
from ciforge.rouge import kernel_in_use, rouge_l
from ciforge.statute import Norm, NormType, StatuteGraph, extract_norms, parse_statute
from ciforge.synthesis import SynthesisConfig, diversity_select, run_synthesis

__version__ = "0.1.0"

__all__ = [
    "Applicability",
    "Case",
    "CaseSet",
    "Cassette",
    "ChatRequest",
    "ChatResponse",
    "CiForgeError",
    "ConfigError",
    "EvalReport",
    "FlowFeatures",
    "FlowVerdict",
    "Gateway",
    "GatewayMode",
    "InformationFlow",
    "InstructionExample",
    "Judgment",
    "Mode",
    "Norm",
    "NormId",
    "NormPredicate",
    "NormType",
    "Provenance",
    "StatuteGraph",
    "SynthesisConfig",
    "Task",
    "aggregate_verdicts",
    "check_flow",
    "compare_reports",
    "compile_example",
    "diversity_select",
    "extract_norms",
    "kernel_in_use",
    "parse_judgment",
    "parse_statute",
    "render_prompt",
    "rouge_l",
    "run_synthesis",
    "score",
    "__version__",
]
