import re
from enum import Enum
from typing import List, Tuple

from pydantic import BaseModel, Field, model_validator

# CLOTH marks each blank with a standalone underscore, e.g. "he _ the door".
BLANK_MARKER = "_"
BLANK_PATTERN = re.compile(r"(?<![\w])_(?![\w])")

Span = Tuple[int, int]


class InputMode(str, Enum):
    PASSAGE = "passage"
    SENTENCE = "sentence"


class PrefillMode(str, Enum):
    MODEL = "model"
    GOLD = "gold"
    NONE = "none"


class ClozeQuestion(BaseModel):
    answer: str
    distractors: List[str] = Field(min_length=3, max_length=3)
    # Options in their original order, kept for the lossless round trip.
    options: List[str]


class ClozePassage(BaseModel):
    id: str
    text_with_blanks: str
    questions: List[ClozeQuestion]
    source: str = ""

    @model_validator(mode="after")
    def check_blank_count(self) -> "ClozePassage":
        blanks = len(BLANK_PATTERN.findall(self.text_with_blanks))
        if blanks != len(self.questions):
            raise ValueError(f"passage {self.id} has {blanks} blanks but {len(self.questions)} questions")
        return self

    def blank_spans(self) -> List[Span]:
        return [match.span() for match in BLANK_PATTERN.finditer(self.text_with_blanks)]

    def to_cloth_dict(self) -> dict:
        letters = "ABCDEFGH"
        return {
            "article": self.text_with_blanks,
            "options": [question.options for question in self.questions],
            "answers": [letters[question.options.index(question.answer)] for question in self.questions],
            "source": self.source,
        }


class ContextAnswerPair(BaseModel):
    id: str
    context: str
    answer_span: Span

    @property
    def answer_text(self) -> str:
        start, end = self.answer_span
        return self.context[start:end]


class PreparedContext(BaseModel):
    context: str
    answer_span: Span
    input_mode: InputMode
    prefill_mode: PrefillMode

    @property
    def answer_text(self) -> str:
        start, end = self.answer_span
        return self.context[start:end]
