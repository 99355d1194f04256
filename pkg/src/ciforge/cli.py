"""Command-line pipeline driver.

Each subcommand reads and writes plain files (JSON/JSONL), so runs are easy
to chain, diff, and reproduce.  Every run writes a manifest next to its
primary output recording the resolved configuration, its hash, and stage
counts; manifests carry no timestamps, so identical inputs give identical
bytes.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from ciforge import classify, corpus, evalkit, statute, synthesis
from ciforge.cases import Case, load_cases, save_cases
from ciforge.errors import CiForgeError, ConfigError
from ciforge.evalkit import Mode, Task
from ciforge.gateway import Cassette, Gateway, GatewayMode
from ciforge.synthesis import SynthesisConfig

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    """Resolved knobs for the gateway-backed stages."""

    mode: str = GatewayMode.REPLAY.value
    cassette: str | None = None
    model: str = "gpt-4"
    max_parallel: int = 4
    random_seed: int = 0

    def validate(self) -> None:
        if self.mode not in (m.value for m in GatewayMode):
            raise ConfigError(f"unknown gateway mode: {self.mode}")
        if self.mode in (GatewayMode.REPLAY.value, GatewayMode.RECORD.value):
            if not self.cassette:
                raise ConfigError(f"{self.mode} mode requires --cassette")
            if self.mode == GatewayMode.REPLAY.value and not Path(self.cassette).exists():
                raise ConfigError(f"cassette not found: {self.cassette}")

    def build_gateway(self) -> Gateway:
        self.validate()
        cassette = Cassette(self.cassette) if self.cassette else None
        return Gateway(
            GatewayMode(self.mode),
            model=self.model,
            cassette=cassette,
            max_parallel=self.max_parallel,
        )


def _config_hash(config: dict) -> str:
    encoded = json.dumps(config, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(encoded.encode("utf-8")).hexdigest()


def _resolved_config(args: argparse.Namespace) -> dict:
    config = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func", "config"):
            continue
        config[key] = str(value) if isinstance(value, Path) else value
    return config


def _write_manifest(
    args: argparse.Namespace, out: str | Path, counts: dict, **extra
) -> None:
    out = Path(out)
    path = out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")
    config = _resolved_config(args)
    manifest = {
        "command": args.command,
        "config": config,
        "config_hash": _config_hash(config),
        "counts": counts,
    }
    manifest.update(extra)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")


def _gateway_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--mode",
        choices=[m.value for m in GatewayMode],
        default=GatewayMode.REPLAY.value,
        help="gateway mode (default: replay)",
    )
    parser.add_argument("--cassette", help="request/response cassette path (JSONL)")
    parser.add_argument("--model", default="gpt-4", help="remote model name")
    parser.add_argument("--max-parallel", type=int, default=4)


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    return PipelineConfig(
        mode=args.mode,
        cassette=args.cassette,
        model=args.model,
        max_parallel=args.max_parallel,
        random_seed=getattr(args, "seed", 0),
    )


# --- subcommands ------------------------------------------------------------


def cmd_ingest_statute(args: argparse.Namespace) -> int:
    if args.url:
        doc = statute.fetch_document(args.url, args.law_name)
    else:
        snapshot = Path(args.snapshot) if args.snapshot else statute.bundled_snapshot_path()
        doc = statute.load_document(snapshot)
    graph = statute.parse_statute(doc)
    graph.validate()
    with open(args.out, "w", encoding="utf-8") as handle:
        json.dump(graph.to_json_obj(), handle, indent=2, ensure_ascii=False)
        handle.write("\n")
    counts = {
        "nodes": len(graph.nodes),
        "refer_edges": len(graph.refer_edges),
        "dangling_refer_targets": len(graph.dangling_refer_targets),
        "leaves": len(graph.leaves()),
    }
    _write_manifest(args, args.out, counts)
    print(f"statute graph: {counts['nodes']} nodes -> {args.out}")
    return 0


def cmd_extract_norms(args: argparse.Namespace) -> int:
    with open(args.graph, encoding="utf-8") as handle:
        graph = statute.StatuteGraph.from_json_obj(json.load(handle))
    norms = statute.extract_norms(graph)
    statute.save_norms(norms, args.out)
    _write_manifest(args, args.out, {"norms": len(norms)})
    print(f"norms: {len(norms)} -> {args.out}")
    return 0


def cmd_classify_norms(args: argparse.Namespace) -> int:
    norms = statute.load_norms(args.norms)
    gateway = _pipeline_config(args).build_gateway()
    classified = classify.classify_norms(
        norms,
        gateway,
        resample_budget=args.resample_budget,
        max_tokens=args.max_tokens,
    )
    statute.save_norms(classified, args.out)
    type_counts: dict[str, int] = {}
    for norm in classified:
        for norm_type in norm.types:
            type_counts[norm_type.value] = type_counts.get(norm_type.value, 0) + 1
    seeds = classify.seed_norms(classified)
    counts = {
        "norms": len(classified),
        "flagged": sum(norm.flagged for norm in classified),
        "seeds": len(seeds),
        "types": dict(sorted(type_counts.items())),
    }
    _write_manifest(args, args.out, counts)
    print(f"classified {counts['norms']} norms ({counts['seeds']} seeds) -> {args.out}")
    return 0


def cmd_synthesize(args: argparse.Namespace) -> int:
    norms = statute.load_norms(args.norms)
    seeds = classify.seed_norms(norms)
    gateway = _pipeline_config(args).build_gateway()
    config = SynthesisConfig(
        samples_per_norm=args.samples_per_norm,
        temperature=args.temperature,
        max_tokens=args.max_tokens,
        feature_filter_on=not args.no_feature_filter,
        norm_filter_on=not args.no_norm_filter,
        conclusion_filter_on=not args.no_conclusion_filter,
        diversity_rank=not args.no_diversity_rank,
        selection=args.selection,
        random_seed=args.seed,
    )
    result = synthesis.run_synthesis(seeds, gateway, config)
    result.case_set.save(args.out)
    _write_manifest(
        args,
        args.out,
        {"seeds": len(seeds), "cases": len(result.case_set.cases)},
        run=result.manifest,
    )
    print(f"cases: {len(result.case_set.cases)} of {len(seeds)} seeds -> {args.out}")
    return 0


def cmd_ingest_cap(args: argparse.Namespace) -> int:
    client = None
    if args.base_url:
        client = corpus.CaselawClient(args.base_url, api_key=args.api_key)
    records = corpus.fetch_cases(
        args.keyword,
        client=client,
        snapshot=args.snapshot,
        limits=corpus.FetchLimits(max_results=args.max_results),
    )
    fetched = len(records)
    records = corpus.length_filter(records, args.min_words, args.max_words)
    corpus.save_snapshot(records, args.out)
    counts = {"fetched": fetched, "after_length_filter": len(records)}

    if args.cases_out:
        gateway = _pipeline_config(args).build_gateway()
        cases: list[Case] = []
        annotations = []
        for record in records:
            case, flags = corpus.extract_real_case(record, gateway, max_tokens=args.max_tokens)
            cases.append(case)
            if flags.any():
                row = {"case_id": case.case_id, "source_id": record.source_id}
                row.update(flags.to_json_obj())
                annotations.append(row)
        save_cases(cases, args.cases_out)
        counts["extracted"] = len(cases)
        counts["flagged"] = len(annotations)
        if args.annotations_out:
            with open(args.annotations_out, "w", encoding="utf-8") as handle:
                for row in annotations:
                    handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    _write_manifest(args, args.out, counts)
    print(f"records: {counts['after_length_filter']} of {fetched} -> {args.out}")
    return 0


def cmd_assemble(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = corpus.assemble(
        load_cases(args.synthetic),
        load_cases(args.real_applicable),
        load_cases(args.real_irrelevant),
        corpus.AssembleConfig(
            oversample=args.oversample,
            negative_sampling=args.negative_sampling,
            random_seed=args.seed,
        ),
    )
    bundle.save(out_dir)
    counts = {name: len(split) for name, split in bundle.splits().items()}
    _write_manifest(args, out_dir, counts, split_manifest=bundle.split_manifest)
    print(f"bundle -> {out_dir} ({counts})")
    return 0


def cmd_compile(args: argparse.Namespace) -> int:
    task = Task(args.task)
    mode = Mode(args.mode)
    if task is Task.RECITATION:
        if not args.norms:
            raise ConfigError("recitation compiles from --norms")
        norms = statute.load_norms(args.norms)
        examples = [evalkit.compile_recitation(norm) for norm in norms]
    else:
        if not args.cases:
            raise ConfigError(f"{task.value} compiles from --cases")
        cases = load_cases(args.cases)
        lookup = None
        if args.norms:
            lookup = {
                norm.leaf_id.canonical(): norm
                for norm in statute.load_norms(args.norms)
            }
        examples = [
            evalkit.compile_example(case, task, mode, lookup) for case in cases
        ]
    evalkit.export_training_file(examples, args.out)
    _write_manifest(args, args.out, {"examples": len(examples)})
    print(f"examples: {len(examples)} -> {args.out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    task = Task(args.task)
    mode = Mode(args.mode)
    golds = load_cases(args.gold)
    transcripts = evalkit.load_transcripts(args.pred)
    judgments = []
    missing = 0
    for case in golds:
        transcript = transcripts.get(case.case_id)
        if transcript is None:
            missing += 1
            judgments.append(evalkit.Judgment())
        else:
            judgments.append(evalkit.parse_judgment(transcript, task, mode))
    if missing:
        log.warning("%d gold cases had no transcript; scored as Unknown", missing)
    report = evalkit.score(
        judgments, golds, task, retrieval_variant=args.retrieval_variant
    )
    with open(args.out, "w", encoding="utf-8") as handle:
        json.dump(report.to_json_obj(), handle, indent=2, sort_keys=True)
        handle.write("\n")
    table = report.text_table()
    with open(Path(args.out).with_suffix(".txt"), "w", encoding="utf-8") as handle:
        handle.write(table + "\n")
    _write_manifest(
        args, args.out, {"gold": len(golds), "missing_transcripts": missing}
    )
    print(table)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    with open(args.report_a, encoding="utf-8") as handle:
        report_a = evalkit.EvalReport.from_json_obj(json.load(handle))
    with open(args.report_b, encoding="utf-8") as handle:
        report_b = evalkit.EvalReport.from_json_obj(json.load(handle))
    mode = evalkit.COMPARE_ROUNDED if args.rounded else evalkit.COMPARE_FULL
    deltas = evalkit.compare_reports(report_a, report_b, mode=mode)
    with open(args.out, "w", encoding="utf-8") as handle:
        json.dump(deltas, handle, indent=2, sort_keys=True)
        handle.write("\n")
    _write_manifest(args, args.out, {"metrics": len(deltas)})
    print(evalkit.delta_table(deltas))
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ciforge",
        description="Statute-grounded case synthesis and evaluation pipeline.",
    )
    parser.add_argument("--config", help="JSON file with default values for flags")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("ingest-statute", help="parse a statute into a norm graph")
    p.add_argument("--snapshot", help="statute source document (JSON)")
    p.add_argument("--url", help="federal-regulations API URL to fetch")
    p.add_argument("--law-name", default="HIPAA")
    p.add_argument("--out", required=True, help="graph JSON output")
    p.set_defaults(func=cmd_ingest_statute)

    p = commands.add_parser("extract-norms", help="flatten graph leaves into norms")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True, help="norms JSONL output")
    p.set_defaults(func=cmd_extract_norms)

    p = commands.add_parser("classify-norms", help="type each norm via the gateway")
    p.add_argument("--norms", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resample-budget", type=int, default=classify.DEFAULT_RESAMPLE_BUDGET)
    p.add_argument("--max-tokens", type=int, default=1024)
    _gateway_args(p)
    p.set_defaults(func=cmd_classify_norms)

    p = commands.add_parser("synthesize", help="generate, filter, and rank cases")
    p.add_argument("--norms", required=True, help="classified norms JSONL")
    p.add_argument("--out", required=True, help="case set JSONL output")
    p.add_argument("--samples-per-norm", type=int, default=5)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-tokens", type=int, default=2048)
    p.add_argument("--no-feature-filter", action="store_true")
    p.add_argument("--no-norm-filter", action="store_true")
    p.add_argument("--no-conclusion-filter", action="store_true")
    p.add_argument("--no-diversity-rank", action="store_true")
    p.add_argument(
        "--selection",
        choices=[synthesis.SELECTION_MIN_MAX, synthesis.SELECTION_HIGHEST_ROUGE],
        default=synthesis.SELECTION_MIN_MAX,
    )
    p.add_argument("--seed", type=int, default=0)
    _gateway_args(p)
    p.set_defaults(func=cmd_synthesize)

    p = commands.add_parser("ingest-cap", help="fetch and filter court cases")
    p.add_argument("--keyword", default="HIPAA")
    p.add_argument("--snapshot", help="local records JSONL")
    p.add_argument("--base-url", help="caselaw API base URL")
    p.add_argument("--api-key")
    p.add_argument("--max-results", type=int)
    p.add_argument("--min-words", type=int, default=corpus.MIN_WORDS)
    p.add_argument("--max-words", type=int, default=corpus.MAX_WORDS)
    p.add_argument("--out", required=True, help="filtered records JSONL")
    p.add_argument("--cases-out", help="also extract flows into cases JSONL")
    p.add_argument("--annotations-out", help="flagged-case review queue JSONL")
    p.add_argument("--max-tokens", type=int, default=2048)
    _gateway_args(p)
    p.set_defaults(func=cmd_ingest_cap)

    p = commands.add_parser("assemble", help="balance the four dataset splits")
    p.add_argument("--synthetic", required=True)
    p.add_argument("--real-applicable", required=True)
    p.add_argument("--real-irrelevant", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--oversample", action="store_true")
    p.add_argument(
        "--negative-sampling", choices=["relevance", "random"], default="relevance"
    )
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_assemble)

    p = commands.add_parser("compile", help="render instruction-tuning examples")
    p.add_argument("--cases", help="case JSONL (judgment tasks)")
    p.add_argument("--norms", help="norms JSONL (compliance lookup / recitation)")
    p.add_argument("--task", choices=[t.value for t in Task], required=True)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.VANILLA.value)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compile)

    p = commands.add_parser("evaluate", help="score transcripts against gold cases")
    p.add_argument("--task", choices=[Task.APPLICABILITY.value, Task.COMPLIANCE.value], required=True)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.MULTI_STEP.value)
    p.add_argument("--gold", required=True, help="gold case JSONL")
    p.add_argument("--pred", required=True, help="transcript JSONL {case_id, transcript}")
    p.add_argument(
        "--retrieval-variant",
        choices=["containment", "exact-set", "prefix-credit"],
        default="containment",
    )
    p.add_argument("--out", required=True, help="report JSON output")
    p.set_defaults(func=cmd_evaluate)

    p = commands.add_parser("compare", help="difference two evaluation reports")
    p.add_argument("--report-a", required=True)
    p.add_argument("--report-b", required=True)
    p.add_argument("--rounded", action="store_true", help="difference the 2-decimal presentations")
    p.add_argument("--out", required=True, help="delta JSON output")
    p.set_defaults(func=cmd_compare)

    return parser


def _all_parsers(parser: argparse.ArgumentParser):
    yield parser
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            yield from dict.fromkeys(action.choices.values())


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    if "--config" not in argv:
        return
    index = argv.index("--config")
    if index + 1 >= len(argv):
        return
    path = Path(argv[index + 1])
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as handle:
        config = json.load(handle)
    if not isinstance(config, dict):
        raise ConfigError("config file must hold a JSON object")
    defaults = {key.replace("-", "_"): value for key, value in config.items()}
    # Defaults must land on the parser that owns the flag; subcommand parsers
    # re-apply their own defaults over anything set on the root parser.
    matched: set[str] = set()
    for target in _all_parsers(parser):
        known = {action.dest for action in target._actions}
        scoped = {key: value for key, value in defaults.items() if key in known}
        if scoped:
            target.set_defaults(**scoped)
            matched.update(scoped)
    unknown = set(defaults) - matched
    if unknown:
        raise ConfigError(f"config keys match no flags: {sorted(unknown)}")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CiForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
