"""Instruction-example compilation, transcript parsing, and metrics.

Training examples follow the instruction/input/response template pair; the
two judgment tasks each come in a vanilla form (bare label) and a multi-step
form (features, then for compliance the retrieved norm, then the label).
parse_judgment is total: any transcript maps to a Judgment, with Unknown
standing in for text that names no label.

All metric math runs at full precision; percentages are rounded half-up to
two decimals only when formatted.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path

from ciforge import prompts
from ciforge.cases import Case, features_from_section
from ciforge.errors import LengthMismatch, MissingNorm, TaskMismatch
from ciforge.flows import FlowFeatures, FlowVerdict
from ciforge.ids import NormId, scan_ids
from ciforge.parsing import NAME_BY_ATTR, first_label
from ciforge.statute import Norm


class Task(str, Enum):
    APPLICABILITY = "applicability"
    COMPLIANCE = "compliance"
    RECITATION = "recitation"


class Mode(str, Enum):
    VANILLA = "vanilla"
    MULTI_STEP = "multi-step"


UNKNOWN = "Unknown"

TASK_LABELS = {
    Task.APPLICABILITY: ("Applicable", "Not Applicable"),
    Task.COMPLIANCE: ("Permit", "Forbid"),
}

# Label text as it appears in rendered responses.
_RESPONSE_TEXT = {
    "Applicable": "Applicable",
    "Not Applicable": "Not applicable",
    "Permit": "Permit",
    "Forbid": "Forbid",
}

_LABEL_PATTERNS = {
    Task.APPLICABILITY: {
        r"\bnot\s+applicable\b": "Not Applicable",
        r"\bapplicable\b": "Applicable",
    },
    Task.COMPLIANCE: {
        r"\bpermit": "Permit",
        r"\bforbid": "Forbid",
    },
}

_APPLICABILITY_FEATURES = FlowFeatures.VITAL
_COMPLIANCE_FEATURES = tuple(NAME_BY_ATTR)


@dataclass(frozen=True)
class InstructionExample:
    instruction: str
    input: str
    response: str
    task: Task
    mode: Mode
    case_id: str | None = None

    def to_json_obj(self) -> dict:
        return {
            "instruction": self.instruction,
            "input": self.input,
            "output": self.response,
        }


@dataclass(frozen=True)
class Judgment:
    conclusion: str = UNKNOWN
    features: FlowFeatures | None = None
    norm_ids: tuple[NormId, ...] = ()


def _feature_text(features: FlowFeatures, attrs: tuple[str, ...]) -> str:
    parts = []
    for attr in attrs:
        value = getattr(features, attr)
        if attr == "consented_by" and value is not None:
            value = ", ".join(value)
        if value is None or not str(value).strip():
            value = "None"
        parts.append(f"{NAME_BY_ATTR[attr]}: {value}")
    return ", ".join(parts)


def effective_norm_id(case: Case) -> NormId | None:
    """The norm a case answers for: its seed if synthetic, else the first
    norm it cites."""
    if case.seed_norm_id is not None:
        return case.seed_norm_id
    if case.cited_norm_ids:
        return case.cited_norm_ids[0]
    return None


def _gold_label(case: Case, task: Task) -> str:
    if task is Task.APPLICABILITY:
        if case.appl_conclusion is None:
            raise TaskMismatch(f"case {case.case_id} has no applicability label")
        return case.appl_conclusion.value
    if task is Task.COMPLIANCE:
        if case.comp_conclusion not in (FlowVerdict.PERMIT, FlowVerdict.FORBID):
            raise TaskMismatch(f"case {case.case_id} has no compliance label")
        return case.comp_conclusion.value
    raise TaskMismatch("recitation examples compile from norms, not cases")


def compile_example(
    case: Case,
    task: Task,
    mode: Mode,
    norm_lookup: dict[str, Norm] | None = None,
) -> InstructionExample:
    """Render one case into an instruction-tuning example."""
    label = _gold_label(case, task)
    response_label = _RESPONSE_TEXT[label]
    case_input = prompts.CASE_INPUT_TEMPLATE.replace("{background}", case.background)

    if task is Task.APPLICABILITY:
        if mode is Mode.VANILLA:
            instruction = prompts.APPLICABILITY_VANILLA_INSTRUCTION
            response = response_label
        else:
            instruction = prompts.APPLICABILITY_MULTI_STEP_INSTRUCTION
            response = (
                f"Step 1: {_feature_text(case.features, _APPLICABILITY_FEATURES)}\n"
                f"Step 2: {response_label}"
            )
    else:
        if mode is Mode.VANILLA:
            instruction = prompts.COMPLIANCE_VANILLA_INSTRUCTION
            response = response_label
        else:
            norm_id = effective_norm_id(case)
            if norm_id is None:
                raise MissingNorm(f"case {case.case_id} names no norm")
            norm = (norm_lookup or {}).get(norm_id.canonical())
            if norm is None:
                raise MissingNorm(f"norm {norm_id.canonical()} not in lookup")
            instruction = prompts.COMPLIANCE_MULTI_STEP_INSTRUCTION
            response = (
                f"Step 1: {_feature_text(case.features, _COMPLIANCE_FEATURES)}\n"
                f"Step 2: {norm_id.canonical()}, {norm.full_text}\n"
                f"Step 3: {response_label}"
            )

    return InstructionExample(
        instruction=instruction,
        input=case_input,
        response=response,
        task=task,
        mode=mode,
        case_id=case.case_id,
    )


def compile_recitation(norm: Norm) -> InstructionExample:
    return InstructionExample(
        instruction=prompts.RECITATION_INSTRUCTION.replace(
            "{norm_id}", norm.leaf_id.canonical()
        ),
        input="",
        response=norm.full_text,
        task=Task.RECITATION,
        mode=Mode.VANILLA,
    )


def render_prompt(example: InstructionExample) -> str:
    """Fill the shared template; the input-free variant drops the Input
    section entirely."""
    if example.input.strip():
        return prompts.PROMPT_TEMPLATE_WITH_INPUT.replace(
            "{instruction}", example.instruction
        ).replace("{input}", example.input)
    return prompts.PROMPT_TEMPLATE_NO_INPUT.replace(
        "{instruction}", example.instruction
    )


def export_training_file(examples: list[InstructionExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(json.dumps(example.to_json_obj(), ensure_ascii=False) + "\n")


# --- transcript parsing -----------------------------------------------------

_STEP_RE = re.compile(r"^[ \t]*step\s*(\d+)\s*[:.)]", re.IGNORECASE | re.MULTILINE)


def _step_sections(text: str) -> list[tuple[int, str]]:
    matches = list(_STEP_RE.finditer(text))
    sections = []
    for i, match in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        sections.append((int(match.group(1)), text[match.end() : end]))
    return sections


def parse_judgment(transcript: str, task: Task, mode: Mode) -> Judgment:
    """Read a model transcript into a Judgment.  Never raises; transcripts
    that name no label come back as Unknown.

    Multi-step transcripts are split on "Step N:" markers: the last step
    section carries the label, the first step-1 section the features, and
    (compliance only) the first step-2 section the norm ids.  A multi-step
    transcript without any step markers falls back to a whole-text label
    scan, as vanilla transcripts always use.
    """
    patterns = _LABEL_PATTERNS.get(task)
    if patterns is None:
        return Judgment()

    features = None
    norm_ids: tuple[NormId, ...] = ()
    label = None

    sections = _step_sections(transcript) if mode is Mode.MULTI_STEP else []
    if sections:
        label = first_label(sections[-1][1], patterns)
        for number, body in sections:
            if number == 1 and features is None:
                parsed = features_from_section(body)
                if parsed != FlowFeatures():
                    features = parsed
            elif number == 2 and task is Task.COMPLIANCE and not norm_ids:
                norm_ids = tuple(scan_ids(body))
    else:
        label = first_label(transcript, patterns)

    return Judgment(
        conclusion=label or UNKNOWN,
        features=features,
        norm_ids=norm_ids,
    )


# --- scoring ----------------------------------------------------------------


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float

    def to_json_obj(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass
class EvalReport:
    task: Task
    per_class: dict[str, ClassMetrics]
    accuracy: float
    macro_f1: float
    confusion: dict[tuple[str, str], int]
    total: int
    norm_retrieval_accuracy: float | None = None

    def to_json_obj(self) -> dict:
        nested: dict[str, dict[str, int]] = {}
        for (gold, pred), count in sorted(self.confusion.items()):
            nested.setdefault(gold, {})[pred] = count
        return {
            "task": self.task.value,
            "total": self.total,
            "per_class": {
                label: metrics.to_json_obj()
                for label, metrics in self.per_class.items()
            },
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "norm_retrieval_accuracy": self.norm_retrieval_accuracy,
            "confusion": nested,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> EvalReport:
        confusion = {
            (gold, pred): count
            for gold, row in obj.get("confusion", {}).items()
            for pred, count in row.items()
        }
        return cls(
            task=Task(obj["task"]),
            per_class={
                label: ClassMetrics(**metrics)
                for label, metrics in obj["per_class"].items()
            },
            accuracy=obj["accuracy"],
            macro_f1=obj["macro_f1"],
            confusion=confusion,
            total=obj.get("total", sum(confusion.values())),
            norm_retrieval_accuracy=obj.get("norm_retrieval_accuracy"),
        )

    def text_table(self) -> str:
        lines = [f"Task: {self.task.value}  (n={self.total})"]
        lines.append(f"{'Class':<16}{'Prec':>8}{'Rec':>8}{'F1':>8}")
        for label, metrics in self.per_class.items():
            lines.append(
                f"{label:<16}{fmt_percent(metrics.precision):>8}"
                f"{fmt_percent(metrics.recall):>8}{fmt_percent(metrics.f1):>8}"
            )
        lines.append(f"{'Accuracy':<16}{fmt_percent(self.accuracy):>8}")
        lines.append(f"{'Macro-F1':<16}{fmt_percent(self.macro_f1):>8}")
        if self.norm_retrieval_accuracy is not None:
            lines.append(
                f"{'Norm retrieval':<16}"
                f"{fmt_percent(self.norm_retrieval_accuracy):>8}"
            )
        return "\n".join(lines)


def fmt_percent(value: float) -> str:
    """Half-up two-decimal presentation; all internal math stays exact."""
    return str(Decimal(str(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def macro_from_f1s(f1_values: list[float]) -> float:
    """Mean of per-class F1 values, averaged in decimal so that quoted
    two-decimal inputs round the way their exact mean does."""
    if not f1_values:
        return 0.0
    total = sum(Decimal(str(v)) for v in f1_values)
    return float(total / len(f1_values))


def _prf(tp: int, fp: int, fn: int) -> ClassMetrics:
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassMetrics(precision=precision, recall=recall, f1=f1)


def report_from_confusion(
    task: Task, confusion: dict[tuple[str, str], int]
) -> EvalReport:
    """Derive the full metric suite from (gold, predicted) counts.

    Unknown predictions add no false positives to either class; they only
    cost the gold class recall and the run accuracy.
    """
    labels = TASK_LABELS[task]
    total = sum(confusion.values())
    correct = sum(confusion.get((label, label), 0) for label in labels)
    per_class = {}
    for label in labels:
        tp = confusion.get((label, label), 0)
        fp = sum(
            count
            for (gold, pred), count in confusion.items()
            if pred == label and gold != label
        )
        fn = sum(
            count
            for (gold, pred), count in confusion.items()
            if gold == label and pred != label
        )
        per_class[label] = _prf(tp, fp, fn)
    return EvalReport(
        task=task,
        per_class=per_class,
        accuracy=100.0 * correct / total if total else 0.0,
        macro_f1=macro_from_f1s([per_class[label].f1 for label in labels]),
        confusion=dict(confusion),
        total=total,
    )


def norm_retrieval_accuracy(
    preds: list[Judgment], golds: list[Case], *, variant: str = "containment"
) -> float | None:
    """Fraction of cases whose gold norm the prediction retrieved.

    containment: the gold leaf id appears among the predicted ids.
    exact-set: the predicted ids are exactly the gold leaf id.
    prefix-credit: any predicted id is the gold leaf or one of its ancestors.
    Returns None when no prediction carries norm ids (vanilla transcripts).
    """
    if not any(pred.norm_ids for pred in preds):
        return None
    hits = 0
    total = 0
    for pred, gold in zip(preds, golds):
        gold_id = effective_norm_id(gold)
        if gold_id is None:
            continue
        total += 1
        predicted = set(pred.norm_ids)
        if variant == "exact-set":
            hit = predicted == {gold_id}
        elif variant == "prefix-credit":
            hit = any(p.is_ancestor_of(gold_id) for p in predicted)
        else:
            hit = gold_id in predicted
        hits += hit
    return 100.0 * hits / total if total else None


def score(
    preds: list[Judgment],
    golds: list[Case],
    task: Task,
    *,
    retrieval_variant: str = "containment",
) -> EvalReport:
    """Score aligned predictions against gold cases."""
    if len(preds) != len(golds):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(golds)} gold cases")
    labels = TASK_LABELS[task]
    confusion: dict[tuple[str, str], int] = {}
    for pred, gold in zip(preds, golds):
        gold_label = _gold_label(gold, task)
        pred_label = pred.conclusion if pred.conclusion in labels else UNKNOWN
        key = (gold_label, pred_label)
        confusion[key] = confusion.get(key, 0) + 1
    report = report_from_confusion(task, confusion)
    if task is Task.COMPLIANCE:
        report.norm_retrieval_accuracy = norm_retrieval_accuracy(
            preds, golds, variant=retrieval_variant
        )
    return report


# --- report comparison ------------------------------------------------------

COMPARE_FULL = "full"
COMPARE_ROUNDED = "rounded"


def _metric_map(report: EvalReport) -> dict[str, float]:
    metrics = {}
    for label, cm in report.per_class.items():
        metrics[f"{label}/precision"] = cm.precision
        metrics[f"{label}/recall"] = cm.recall
        metrics[f"{label}/f1"] = cm.f1
    metrics["accuracy"] = report.accuracy
    metrics["macro_f1"] = report.macro_f1
    if report.norm_retrieval_accuracy is not None:
        metrics["norm_retrieval_accuracy"] = report.norm_retrieval_accuracy
    return metrics


def compare_reports(
    a: EvalReport, b: EvalReport, *, mode: str = COMPARE_FULL
) -> dict[str, float]:
    """Signed per-metric differences a - b.

    The default differs the full-precision values; "rounded" differs the
    two-decimal presentations instead, reproducing deltas quoted from
    already-rounded tables.  Metrics present in only one report are skipped.
    """
    if a.task is not b.task:
        raise TaskMismatch(f"{a.task.value} vs {b.task.value}")
    metrics_a = _metric_map(a)
    metrics_b = _metric_map(b)
    deltas = {}
    for name in metrics_a:
        if name not in metrics_b:
            continue
        if mode == COMPARE_ROUNDED:
            delta = Decimal(fmt_percent(metrics_a[name])) - Decimal(
                fmt_percent(metrics_b[name])
            )
            deltas[name] = float(delta)
        else:
            deltas[name] = metrics_a[name] - metrics_b[name]
    return deltas


def delta_table(deltas: dict[str, float]) -> str:
    width = max((len(name) for name in deltas), default=8) + 2
    lines = [f"{name:<{width}}{fmt_percent(value):>8}" for name, value in deltas.items()]
    return "\n".join(lines)


def load_transcripts(path: str | Path) -> dict[str, str]:
    """Read {case_id, transcript} JSONL into an id-keyed map."""
    transcripts = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            row = json.loads(line)
            transcripts[str(row["case_id"])] = str(row["transcript"])
    return transcripts
