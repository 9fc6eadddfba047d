"""
Dataset ingestion and context preparation.

CLOTH passages use the public schema: an "article" with "_" blanks, an
"options" array of four-way option groups and an "answers" array of letters.
Context/answer pairs are JSON lines carrying either explicit character
offsets or the answer text.
"""
import json
import re
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

from loguru import logger
from pydantic import ValidationError

from auto_distractor.common.errors import SpanError
from auto_distractor.models.dataset_models import (
    BLANK_MARKER,
    ClozePassage,
    ClozeQuestion,
    ContextAnswerPair,
    InputMode,
    PrefillMode,
    PreparedContext,
    Span,
)
from auto_distractor.models.generation_models import MaskedContext
from auto_distractor.services.backend_service import MaskedLMBackend
from auto_distractor.services.csg_service import fit_to_length

OPTION_LETTERS = "ABCD"

# Lowercased words that end with a period without ending the sentence.
ABBREVIATIONS = frozenset({
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "vs", "etc", "e.g", "i.e", "no",
    "inc", "ltd", "co", "corp", "dept", "fig", "gen", "gov", "sen", "rep", "capt", "col", "lt",
    "u.s", "u.k", "a.m", "p.m", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept",
    "oct", "nov", "dec",
})
_TERMINATOR = re.compile(r"[.!?]+[\"'”’)\]]*(?=\s|$)")


class SentenceExtract(NamedTuple):
    sentence: str
    span: Span
    # the span crosses a detected sentence boundary
    straddled: bool = False


def _is_abbreviation(text: str, match: "re.Match[str]") -> bool:
    if not match.group().startswith("."):
        return False
    words = text[:match.start()].split()
    if not words:
        return False
    word = words[-1].lstrip("(\"'“‘")
    return word.lower() in ABBREVIATIONS or (len(word) == 1 and word.isupper())


def sentence_spans(text: str) -> List[Span]:
    """Character spans of the sentences in text, whitespace trimmed."""
    raw: List[Span] = []
    start = 0
    for match in _TERMINATOR.finditer(text):
        if _is_abbreviation(text, match):
            continue
        raw.append((start, match.end()))
        start = match.end()
    if start < len(text):
        raw.append((start, len(text)))
    spans: List[Span] = []
    for begin, end in raw:
        while begin < end and text[begin].isspace():
            begin += 1
        while end > begin and text[end - 1].isspace():
            end -= 1
        if begin < end:
            spans.append((begin, end))
    return spans


def extract_sentence(text: str, span: Span) -> SentenceExtract:
    start, end = span
    if not 0 <= start <= end <= len(text):
        raise SpanError(f"span {span} is outside a text of length {len(text)}")
    segments = sentence_spans(text) or [(0, len(text))]
    overlapping = [segment for segment in segments if segment[0] < end and segment[1] > start]
    if not overlapping:
        overlapping = [segment for segment in segments if segment[0] <= start <= segment[1]] or [(0, len(text))]
    sentence_start = min(overlapping[0][0], start)
    sentence_end = max(overlapping[-1][1], end)
    straddled = len(overlapping) > 1
    if straddled:
        logger.warning(f"Span {span} crosses a sentence boundary; using {len(overlapping)} joined segments")
    return SentenceExtract(
        sentence=text[sentence_start:sentence_end],
        span=(start - sentence_start, end - sentence_start),
        straddled=straddled,
    )


def parse_cloth_passage(record: Dict[str, Any], passage_id: str) -> ClozePassage:
    if not isinstance(record, dict):
        raise ParseError(f"{passage_id}: a CLOTH passage must be a JSON object")
    article = record.get("article")
    if not isinstance(article, str):
        raise ParseError(f"{passage_id}: 'article' must be a string")
    options = record.get("options")
    answers = record.get("answers")
    if not isinstance(options, list):
        raise ParseError(f"{passage_id}: 'options' must be a list of option groups")
    if not isinstance(answers, list):
        raise ParseError(f"{passage_id}: 'answers' must be a list of letters")
    if len(options) != len(answers):
        raise ParseError(f"{passage_id}: 'options' has {len(options)} groups but 'answers' has {len(answers)} letters")

    questions: List[ClozeQuestion] = []
    for index, (group, letter) in enumerate(zip(options, answers)):
        if not isinstance(group, list) or len(group) != len(OPTION_LETTERS) or not all(isinstance(o, str) for o in group):
            raise ParseError(f"{passage_id}: 'options[{index}]' must hold {len(OPTION_LETTERS)} strings")
        if not isinstance(letter, str) or letter.upper() not in OPTION_LETTERS:
            raise ParseError(f"{passage_id}: 'answers[{index}]' must be one of {list(OPTION_LETTERS)}, got {letter!r}")
        answer_index = OPTION_LETTERS.index(letter.upper())
        questions.append(ClozeQuestion(
            answer=group[answer_index],
            distractors=[option for position, option in enumerate(group) if position != answer_index],
            options=list(group),
        ))
    try:
        return ClozePassage(
            id=passage_id,
            text_with_blanks=article,
            questions=questions,
            source=str(record.get("source", "")),
        )
    except ValidationError as e:
        raise ParseError(f"{passage_id}: 'article' blank count does not match 'answers': {e.errors()[0]['msg']}") from e


def load_cloth(path: str) -> List[ClozePassage]:
    """Load one CLOTH file, or every *.json file of a split directory in name order."""
    root = Path(path)
    files = sorted(root.glob("*.json")) if root.is_dir() else [root]
    if not files:
        raise ParseError(f"No CLOTH json files found under {path}")
    passages = []
    for file in files:
        try:
            record = json.loads(file.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ParseError(f"{file}: cannot read CLOTH json: {e}") from e
        passages.append(parse_cloth_passage(record, file.stem))
    logger.info(f"Loaded {len(passages)} CLOTH passages from {path}")
    return passages


def passage_stats(passages: Sequence[ClozePassage]) -> Tuple[int, float]:
    """(passage count, mean questions per passage)."""
    if not passages:
        return 0, 0.0
    return len(passages), sum(len(passage.questions) for passage in passages) / len(passages)


def _model_prefill(passage: ClozePassage, target: int, backend: MaskedLMBackend) -> Dict[int, str]:
    """Fill every non-target blank with the backend's top-1 token, left to right."""
    fills: Dict[int, str] = {}
    text = passage.text_with_blanks
    blanks = passage.blank_spans()
    for index in range(len(blanks)):
        if index == target:
            continue
        pieces, cursor, mask_ordinal, unresolved = [], 0, 0, 0
        for other, (start, end) in enumerate(blanks):
            pieces.append(text[cursor:start])
            if other in fills:
                pieces.append(fills[other])
            else:
                if other == index:
                    mask_ordinal = unresolved
                unresolved += 1
                # padded so blanks touching punctuation still tokenize to a bare mask
                pieces.append(f" {backend.mask_token} ")
            cursor = end
        pieces.append(text[cursor:])
        tokens = backend.tokenize("".join(pieces))
        mask_positions = [position for position, token in enumerate(tokens) if token == backend.mask_token]
        position = mask_positions[mask_ordinal]
        masked = fit_to_length(
            MaskedContext(tokens=tokens, mask_positions=[position], answer_text="",
                          original_tokens=tokens, mask_token=backend.mask_token),
            backend.info.max_sequence_length,
        )
        predictions = backend.fill_mask(masked.tokens, masked.mask_positions[0], 1)
        if predictions:
            fills[index] = backend.detokenize([predictions[0].token]).strip()
        else:
            logger.warning(f"No prediction for blank {index} of {passage.id}; using its gold answer")
            fills[index] = passage.questions[index].answer
        logger.debug(f"Prefilled blank {index} of {passage.id} with '{fills[index]}'")
    return fills


def prepare_context(passage: ClozePassage, question_index: int, input_mode: InputMode = InputMode.PASSAGE,
                    prefill_mode: PrefillMode = PrefillMode.MODEL,
                    mlm_backend: Optional[MaskedLMBackend] = None) -> PreparedContext:
    """Build the generation context for one blank of a passage.

    The target blank holds its gold answer, whose span is the one to mask;
    the other blanks are resolved per prefill_mode. Sentence inputs always
    resolve blanks with gold answers.
    """
    if not 0 <= question_index < len(passage.questions):
        raise DataConfigError(f"{passage.id} has no question {question_index}")
    effective_mode = PrefillMode.GOLD if input_mode == InputMode.SENTENCE else prefill_mode
    if effective_mode == PrefillMode.MODEL and mlm_backend is None:
        raise DataConfigError("model prefill requires a masked LM backend")
    if effective_mode == PrefillMode.GOLD:
        fills = {index: question.answer for index, question in enumerate(passage.questions) if index != question_index}
    elif effective_mode == PrefillMode.MODEL:
        fills = _model_prefill(passage, question_index, mlm_backend)
    else:
        fills = {}

    text = passage.text_with_blanks
    pieces: List[str] = []
    cursor, length, answer_span = 0, 0, (0, 0)
    for index, (start, end) in enumerate(passage.blank_spans()):
        pieces.append(text[cursor:start])
        length += start - cursor
        if index == question_index:
            answer = passage.questions[index].answer
            answer_span = (length, length + len(answer))
            piece = answer
        else:
            piece = fills.get(index, BLANK_MARKER)
        pieces.append(piece)
        length += len(piece)
        cursor = end
    pieces.append(text[cursor:])
    context = "".join(pieces)

    if input_mode == InputMode.SENTENCE:
        context, answer_span, _ = extract_sentence(context, answer_span)
    return PreparedContext(
        context=context,
        answer_span=answer_span,
        input_mode=input_mode,
        prefill_mode=effective_mode,
    )


def parse_pair(record: Dict[str, Any], default_id: str = "") -> ContextAnswerPair:
    if not isinstance(record, dict):
        raise ParseError("a pair record must be a JSON object")
    context = record.get("context")
    if not isinstance(context, str) or not context.strip():
        raise ParseError("'context' must be a nonempty string")
    pair_id = str(record.get("id", default_id))

    if "answer_start" in record and "answer_end" in record:
        try:
            start, end = int(record["answer_start"]), int(record["answer_end"])
        except (TypeError, ValueError) as e:
            raise ParseError(f"{pair_id}: 'answer_start'/'answer_end' must be integers") from e
        if not 0 <= start < end <= len(context) or not context[start:end].strip():
            raise SpanError(f"{pair_id}: span ({start}, {end}) is empty or outside a context of length {len(context)}")
        return ContextAnswerPair(id=pair_id, context=context, answer_span=(start, end))

    answer_text = record.get("answer_text")
    if not isinstance(answer_text, str) or not answer_text.strip():
        raise ParseError(f"{pair_id}: needs 'answer_start' and 'answer_end', or a nonempty 'answer_text'")
    start = context.find(answer_text)
    if start < 0:
        raise AnswerResolveError(f"{pair_id}: answer '{answer_text}' does not occur in the context")
    if context.count(answer_text) > 1:
        logger.warning(f"{pair_id}: answer '{answer_text}' occurs more than once; using the first occurrence")
    return ContextAnswerPair(id=pair_id, context=context, answer_span=(start, start + len(answer_text)))


def read_jsonl_lines(path: str) -> List[str]:
    """Nonempty lines of a UTF-8 JSON-lines file."""
    try:
        content = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"Cannot read {path}: {e}") from e
    return [line for line in content.splitlines() if line.strip()]


def load_pairs(path: str) -> List[ContextAnswerPair]:
    pairs = []
    for number, line in enumerate(read_jsonl_lines(path), start=1):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}:{number}: invalid JSON: {e}") from e
        pairs.append(parse_pair(record, default_id=str(number)))
    logger.info(f"Loaded {len(pairs)} context/answer pairs from {path}")
    return pairs


class DataServiceError(Exception):
    """Base class for dataset errors"""
    pass


class ParseError(DataServiceError):
    """Raised when a record does not follow its schema; the message names the field"""
    pass


class AnswerResolveError(DataServiceError):
    """Raised when an answer text cannot be located in its context"""
    pass


class DataConfigError(DataServiceError):
    """Raised when a preparation mode is requested without what it needs"""
    pass
