"""Ranking metrics of generated distractors against gold distractors.

Relevance is binary: a generated item is relevant when it matches a gold
distractor after lowercasing and whitespace collapsing.
"""
import json
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from rich.table import Table

from auto_distractor.common.rich_logger import render_plain
from auto_distractor.common.text_utils import normalize_text
from auto_distractor.models.eval_models import METRIC_LABELS, METRIC_NAMES, EvalItemResult, EvalReport


def match(candidate: str, gold: str) -> bool:
    return normalize_text(candidate) == normalize_text(gold)


def _dedupe(items: Sequence[str]) -> List[str]:
    seen = set()
    unique = []
    for item in items:
        key = normalize_text(item)
        if key not in seen:
            seen.add(key)
            unique.append(key)
    return unique


def dcg_at_k(relevance: Sequence[float], k: int) -> float:
    gains = np.asarray(relevance, dtype=float)[:k]
    return float(np.sum(gains / np.log2(np.arange(2, gains.size + 2))))


def compute_item(generated: Sequence[str], gold: Sequence[str], item_id: str = "") -> EvalItemResult:
    """P@1, F1@3, MRR@10 and NDCG@10 of one ranked list."""
    ranked = _dedupe(generated)
    gold_keys = set(_dedupe(gold))
    if not ranked or not gold_keys:
        return EvalItemResult(item_id=item_id, p_at_1=0.0, f1_at_3=0.0, mrr_at_10=0.0, ndcg_at_10=0.0)

    relevance = np.array([1.0 if item in gold_keys else 0.0 for item in ranked])
    top_10 = relevance[:10]
    hits = np.flatnonzero(top_10)

    top_3 = relevance[:3]
    hits_at_3 = float(top_3.sum())
    if hits_at_3:
        precision = hits_at_3 / top_3.size
        recall = hits_at_3 / len(gold_keys)
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0

    ideal = dcg_at_k(np.ones(len(gold_keys)), 10)
    return EvalItemResult(
        item_id=item_id,
        p_at_1=float(relevance[0]),
        f1_at_3=float(f1),
        mrr_at_10=float(1.0 / (hits[0] + 1)) if hits.size else 0.0,
        ndcg_at_10=min(1.0, dcg_at_k(top_10, 10) / ideal),
        matched_ranks=[int(rank) for rank in hits],
    )


def evaluate_dataset(results: Sequence[Tuple[Sequence[str], Sequence[str]]],
                     item_ids: Optional[Sequence[str]] = None,
                     failed_items: Sequence[str] = ()) -> EvalReport:
    """Per-item metrics plus their means as percentages."""
    if not results:
        raise ValueError("cannot evaluate an empty result list")
    ids = list(item_ids) if item_ids is not None else [str(index) for index in range(len(results))]
    per_item = [compute_item(generated, gold, item_id) for item_id, (generated, gold) in zip(ids, results)]
    averages: Dict[str, float] = {
        name: float(np.mean([getattr(item, name) for item in per_item])) * 100.0
        for name in METRIC_NAMES
    }
    return EvalReport(per_item=per_item, averages=averages, item_count=len(per_item), failed_items=list(failed_items))


def render_report_table(report: EvalReport, title: str = "Automated metrics", method: str = "auto-distractor") -> Table:
    table = Table(title=title)
    table.add_column("Method")
    for name in METRIC_NAMES:
        table.add_column(METRIC_LABELS[name], justify="right")
    table.add_row(method, *(f"{report.averages[name]:.2f}" for name in METRIC_NAMES))
    return table


def report_to_text(report: EvalReport, title: str = "Automated metrics", method: str = "auto-distractor") -> str:
    return render_plain(render_report_table(report, title, method))


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report.model_dump(), ensure_ascii=False, indent=2)
