from typing import Dict, List

from pydantic import BaseModel, Field

METRIC_NAMES = ("p_at_1", "f1_at_3", "mrr_at_10", "ndcg_at_10")
METRIC_LABELS = {
    "p_at_1": "P@1",
    "f1_at_3": "F1@3",
    "mrr_at_10": "MRR@10",
    "ndcg_at_10": "NDCG@10",
}


class EvalItemResult(BaseModel):
    item_id: str
    p_at_1: float = Field(ge=0.0, le=1.0)
    f1_at_3: float = Field(ge=0.0, le=1.0)
    mrr_at_10: float = Field(ge=0.0, le=1.0)
    ndcg_at_10: float = Field(ge=0.0, le=1.0)
    # zero-based ranks of the generated items that matched a gold distractor
    matched_ranks: List[int] = Field(default_factory=list)


class EvalReport(BaseModel):
    per_item: List[EvalItemResult]
    # percentages, e.g. 14.0 for a mean P@1 of 0.14
    averages: Dict[str, float]
    item_count: int
    # items whose generation raised; they are scored with no distractors
    failed_items: List[str] = Field(default_factory=list)
