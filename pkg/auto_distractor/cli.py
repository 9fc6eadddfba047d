import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar

from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.markup import escape

from auto_distractor.common.rich_logger import RichLogger, build_table, configure_logging
from auto_distractor.config import DEFAULT_NLI_MODEL, BackendParameters
from auto_distractor.factories.backend_factory import BackendFactory
from auto_distractor.models.cli_models import CliConfig, Command
from auto_distractor.models.dataset_models import InputMode, PrefillMode
from auto_distractor.models.generation_models import AveragingType, DecodingStrategy
from auto_distractor.models.selection_models import EliminationEntry
from auto_distractor.pipeline import DistractorPipeline, render_cloze
from auto_distractor.services.backend_service import BackendServiceError
from auto_distractor.services.data_service import DataServiceError, load_cloth, parse_pair, prepare_context, read_jsonl_lines
from auto_distractor.services.metrics_service import evaluate_dataset, render_report_table, report_to_json

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARTIAL = 2

T = TypeVar("T")
R = TypeVar("R")


def build_parser() -> argparse.ArgumentParser:
    options = argparse.ArgumentParser(add_help=False)
    options.add_argument("input_path", help="Input file (JSON-lines pairs, CLOTH json file or directory, or a stored result)")
    options.add_argument("--model", dest="model_id", help="Masked LM checkpoint id, or mock:<path> for JSON mock tables")
    options.add_argument("--nli-model", dest="nli_model_id", default=DEFAULT_NLI_MODEL, help="NLI checkpoint id, or mock:<path>")
    options.add_argument("--strategy", choices=[s.value for s in DecodingStrategy], default=DecodingStrategy.CTL.value)
    options.add_argument("--avg", choices=[a.value for a in AveragingType], default=AveragingType.GEOMETRIC.value)
    options.add_argument("--n-mask", type=int, default=0, help="Mask tokens per answer; 0 matches the answer token count")
    options.add_argument("--dispersion", type=int, default=1)
    options.add_argument("--top-k", dest="k", type=int, default=3, help="Number of distractors")
    options.add_argument("--search-multiplier", dest="m_s", type=int, default=None,
                         help="Search multiplier m_s (default: 10 for a single mask, else 7)")
    options.add_argument("--seed", type=int, default=0)
    options.add_argument("--input-mode", choices=[m.value for m in InputMode], default=InputMode.PASSAGE.value)
    options.add_argument("--prefill", dest="prefill_mode", choices=[m.value for m in PrefillMode], default=PrefillMode.MODEL.value)
    options.add_argument("--preset", choices=["cloth"], default=None, help="Apply the CLOTH evaluation hyperparameters")
    options.add_argument("--limit", type=int, default=None, help="Evaluate only the first N passages")
    options.add_argument("--jobs", type=int, default=1, help="Items processed concurrently")
    options.add_argument("--output", dest="output_path", default=None, help="Output file (default: stdout)")
    options.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="auto-distractor",
        description="Auto Distractor - distractor generation for extractive cloze questions",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser(Command.GENERATE.value, parents=[options], help="Generate distractors for context/answer pairs")
    subparsers.add_parser(Command.EVALUATE.value, parents=[options], help="Evaluate against CLOTH gold distractors")
    subparsers.add_parser(Command.TRACE.value, parents=[options], help="Show the elimination trace of stored results")
    return parser


def _map_jobs(function: Callable[[T], R], items: Iterable[T], jobs: int) -> Iterable[R]:
    """Ordered map, concurrent when jobs > 1."""
    if jobs <= 1:
        return map(function, items)
    executor = ThreadPoolExecutor(max_workers=jobs)
    try:
        return list(executor.map(function, items))
    finally:
        executor.shutdown()


def _write_output(lines: Sequence[str], output_path: Optional[str]) -> None:
    text = "".join(f"{line}\n" for line in lines)
    if output_path:
        Path(output_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _create_pipeline(config: CliConfig, rich_logger: RichLogger) -> Optional[DistractorPipeline]:
    if not config.model_id:
        rich_logger.print_error("--model is required (use mock:<path> to run on JSON mock tables)")
        return None
    params = BackendParameters()
    try:
        mlm = BackendFactory.create_mlm(config.model_id, params)
        nli = BackendFactory.create_nli(config.nli_model_id, params)
    except BackendServiceError as e:
        rich_logger.print_error(f"Backend error: {e}")
        return None
    rich_logger.print_info(f"Using {mlm} for candidates and {nli} for entailment")
    return DistractorPipeline(mlm, nli)


def run_generate(config: CliConfig, rich_logger: Optional[RichLogger] = None) -> int:
    rich_logger = rich_logger or RichLogger()
    try:
        lines = read_jsonl_lines(config.input_path)
    except DataServiceError as e:
        rich_logger.print_error(str(e))
        return EXIT_FAILURE
    pipeline = _create_pipeline(config, rich_logger)
    if pipeline is None:
        return EXIT_FAILURE
    generation_config = config.generation_config()

    def process(numbered: Tuple[int, str]) -> Dict[str, Any]:
        number, line = numbered
        item_id = str(number)
        try:
            record = json.loads(line)
            if isinstance(record, dict):
                item_id = str(record.get("id", item_id))
            pair = parse_pair(record, default_id=item_id)
            result = pipeline.generate(pair.context, pair.answer_span, generation_config)
            payload: Dict[str, Any] = {"id": pair.id, **result.to_json_dict()}
            if result.distractor_set.distractors:
                cloze = render_cloze(pair.context, pair.answer_span, result.distractor_set, generation_config.seed)
                payload["cloze"] = cloze.model_dump()
        except Exception as e:
            logger.error(f"Item {item_id} failed: {e}")
            return {"id": item_id, "error": {"type": type(e).__name__, "message": str(e)}}
        return payload

    outputs = list(_map_jobs(process, enumerate(lines, start=1), config.jobs))
    _write_output([json.dumps(output, ensure_ascii=False) for output in outputs], config.output_path)

    failures = sum(1 for output in outputs if "error" in output)
    if failures:
        rich_logger.print_warning(f"{failures} of {len(outputs)} items failed")
        return EXIT_PARTIAL
    rich_logger.print_success(f"Generated distractors for {len(outputs)} items")
    return EXIT_OK


def run_evaluate(config: CliConfig, rich_logger: Optional[RichLogger] = None) -> int:
    rich_logger = rich_logger or RichLogger()
    try:
        passages = load_cloth(config.input_path)
    except DataServiceError as e:
        rich_logger.print_error(str(e))
        return EXIT_FAILURE
    if config.limit:
        passages = passages[:config.limit]
    pipeline = _create_pipeline(config, rich_logger)
    if pipeline is None:
        return EXIT_FAILURE
    generation_config = config.generation_config()
    items = [(passage, index) for passage in passages for index in range(len(passage.questions))]
    if not items:
        rich_logger.print_error("No questions to evaluate")
        return EXIT_FAILURE

    def process(item) -> Tuple[List[str], Optional[str]]:
        passage, index = item
        try:
            prepared = prepare_context(passage, index, config.input_mode, config.prefill_mode, pipeline.mlm_backend)
            result = pipeline.generate(prepared.context, prepared.answer_span, generation_config)
        except Exception as e:
            logger.error(f"{passage.id}[{index}] failed: {e}")
            return [], f"{type(e).__name__}: {e}"
        return result.distractor_set.distractors, None

    outcomes: List[Tuple[List[str], Optional[str]]] = []
    with rich_logger.create_progress("Evaluating", total=len(items)) as (progress, task_id):
        for outcome in _map_jobs(process, items, config.jobs):
            outcomes.append(outcome)
            progress.advance(task_id)

    item_ids = [f"{passage.id}-{index}" for passage, index in items]
    failures = [(item_id, error) for item_id, (_, error) in zip(item_ids, outcomes) if error is not None]
    report = evaluate_dataset(
        [(distractors, passage.questions[index].distractors) for (distractors, _), (passage, index) in zip(outcomes, items)],
        item_ids=item_ids,
        failed_items=[item_id for item_id, _ in failures],
    )
    rich_logger.console.print(render_report_table(report, title=f"Automated metrics on {len(passages)} passages"))
    _write_output([report_to_json(report)], config.output_path)
    if failures:
        rich_logger.print_table("Failed items", ["Item", "Error"], [(item_id, escape(error)) for item_id, error in failures])
        rich_logger.print_warning(f"{len(failures)} of {len(items)} items failed and were scored with no distractors")
        return EXIT_PARTIAL
    return EXIT_OK


def _load_results(path: str) -> List[Dict[str, Any]]:
    content = Path(path).read_text(encoding="utf-8")
    try:
        loaded = json.loads(content)
        records = loaded if isinstance(loaded, list) else [loaded]
    except json.JSONDecodeError:
        records = [json.loads(line) for line in content.splitlines() if line.strip()]
    if not all(isinstance(record, dict) for record in records):
        raise ValueError("every stored result must be a JSON object")
    return records


def run_trace(config: CliConfig, rich_logger: Optional[RichLogger] = None) -> int:
    rich_logger = rich_logger or RichLogger()
    output = Console()
    try:
        records = _load_results(config.input_path)
        traces = []
        for number, record in enumerate(records, start=1):
            if "error" in record:
                rich_logger.print_warning(f"Item {record.get('id', number)} has no trace: {record['error']}")
                continue
            entries = record.get("trace")
            if not isinstance(entries, list):
                raise ValueError(f"item {record.get('id', number)} has no 'trace' list")
            traces.append((record.get("id", str(number)), [EliminationEntry.model_validate(entry) for entry in entries]))
    except (OSError, ValueError) as e:
        rich_logger.print_error(f"Malformed result file {config.input_path}: {e}")
        return EXIT_FAILURE

    for item_id, entries in traces:
        if not entries:
            output.print(f"{item_id}: no eliminations")
            continue
        rows = [
            (entry.candidate, entry.stage.value, entry.counterpart, " / ".join(label.value for label in entry.verdicts))
            for entry in entries
        ]
        output.print(build_table(f"Elimination trace ({item_id})", ["Candidate", "Stage", "Counterpart", "Verdicts"], rows))
    return EXIT_OK


HANDLERS = {
    Command.GENERATE: run_generate,
    Command.EVALUATE: run_evaluate,
    Command.TRACE: run_trace,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    rich_logger = RichLogger()
    rich_logger.print_title("Auto Distractor", "Distractor generation for cloze questions")

    try:
        config = CliConfig(**vars(args))
    except ValidationError as e:
        rich_logger.print_error(f"Invalid options: {e}")
        return EXIT_FAILURE

    try:
        return HANDLERS[config.command](config, rich_logger)
    except Exception as e:
        rich_logger.print_error(f"Error: {str(e)}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
