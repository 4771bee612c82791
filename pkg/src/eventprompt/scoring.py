"""Span-level micro precision/recall/F1 for triggers and arguments.

Matching is exact and one-to-one: a predicted trigger is correct iff its
grounded document span and subtype both equal an unmatched gold trigger; a
predicted argument is correct iff document span, role, and event subtype all
equal an unmatched gold argument. No head-word or overlap relaxation.
Ungrounded predictions (span None) count as predicted but never correct.
Counts are pooled over the whole corpus before computing P/R/F1.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import EventMention

ERROR_CATEGORIES = (
    "shallow_heuristics",
    "ambiguous_expression",
    "coreference_or_head",
    "other1",
    "other2",
)


def micro_prf(gold: int, predicted: int, correct: int) -> tuple[float, float, float]:
    """P = correct/predicted, R = correct/gold, F1 = 2PR/(P+R); zero denominators
    yield zero by convention."""
    p = correct / predicted if predicted else 0.0
    r = correct / gold if gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


@dataclass(frozen=True)
class TaskScore:
    p: float
    r: float
    f1: float
    gold: int
    predicted: int
    correct: int

    @classmethod
    def from_counts(cls, gold: int, predicted: int, correct: int) -> "TaskScore":
        p, r, f1 = micro_prf(gold, predicted, correct)
        return cls(p=p, r=r, f1=f1, gold=gold, predicted=predicted, correct=correct)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "r": self.r,
            "f1": self.f1,
            "gold": self.gold,
            "pred": self.predicted,
            "correct": self.correct,
        }


@dataclass(frozen=True)
class ScoreReport:
    trig_c: TaskScore
    arg_c: TaskScore

    def to_dict(self) -> dict:
        return {"trig_c": self.trig_c.to_dict(), "arg_c": self.arg_c.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _trigger_items_gold(gold: Sequence[EventMention]) -> list[tuple]:
    return [(m.doc_id, m.trigger_span, m.subtype) for m in gold]


def _trigger_items_pred(pred: Sequence) -> list[tuple]:
    return [
        (p.doc_id, p.trigger_span, p.subtype) if p.trigger_span is not None else None
        for p in pred
    ]


def _argument_items_gold(gold: Sequence[EventMention]) -> list[tuple]:
    return [(m.doc_id, m.subtype, a.role, a.span) for m in gold for a in m.arguments]


def _argument_items_pred(pred: Sequence) -> list[tuple]:
    items = []
    for p in pred:
        for a in p.arguments:
            items.append((p.doc_id, p.subtype, a.role, a.span) if a.span is not None else None)
    return items


def _match(gold_items: list, pred_items: list) -> tuple[int, list[bool]]:
    """Count one-to-one exact matches; also flag which predictions matched.

    With exact-equality matching, greedy consumption per equivalence class is
    a maximum matching.
    """
    remaining = Counter(item for item in gold_items)
    matched_flags = []
    correct = 0
    for item in pred_items:
        if item is not None and remaining[item] > 0:
            remaining[item] -= 1
            correct += 1
            matched_flags.append(True)
        else:
            matched_flags.append(False)
    return correct, matched_flags


def score_triggers(gold: Sequence[EventMention], pred: Sequence) -> tuple[float, float, float]:
    gold_items = _trigger_items_gold(gold)
    pred_items = _trigger_items_pred(pred)
    correct, _ = _match(gold_items, pred_items)
    return micro_prf(len(gold_items), len(pred_items), correct)


def score_arguments(gold: Sequence[EventMention], pred: Sequence) -> tuple[float, float, float]:
    gold_items = _argument_items_gold(gold)
    pred_items = _argument_items_pred(pred)
    correct, _ = _match(gold_items, pred_items)
    return micro_prf(len(gold_items), len(pred_items), correct)


def score_report(gold: Sequence[EventMention], pred: Sequence) -> ScoreReport:
    tg = _trigger_items_gold(gold)
    tp = _trigger_items_pred(pred)
    ag = _argument_items_gold(gold)
    ap = _argument_items_pred(pred)
    t_correct, _ = _match(tg, tp)
    a_correct, _ = _match(ag, ap)
    return ScoreReport(
        trig_c=TaskScore.from_counts(len(tg), len(tp), t_correct),
        arg_c=TaskScore.from_counts(len(ag), len(ap), a_correct),
    )


def export_errors(
    gold: Sequence[EventMention],
    pred: Sequence,
    sample_n: int,
    seed: int,
    path: str | Path | None = None,
) -> list[dict]:
    """Sample wrong predictions for manual error categorization.

    A wrong prediction is an unmatched predicted trigger or argument (false
    positive, including ungrounded ones). Records carry the prediction, the
    same-document gold annotations for context, and an empty ``category``
    field restricted to the five analysis labels when filled in by hand.
    """
    gold_by_doc: dict[str, list[EventMention]] = {}
    for m in gold:
        gold_by_doc.setdefault(m.doc_id, []).append(m)

    wrong: list[dict] = []
    _, trig_flags = _match(_trigger_items_gold(gold), _trigger_items_pred(pred))
    for p, ok in zip(pred, trig_flags):
        if ok:
            continue
        wrong.append(
            {
                "task": "trigger",
                "doc_id": p.doc_id,
                "predicted": {
                    "span": list(p.trigger_span) if p.trigger_span else None,
                    "surface": p.trigger_surface,
                    "subtype": p.subtype,
                },
                "gold_context": _gold_context(gold_by_doc.get(p.doc_id, ())),
                "category": "",
            }
        )
    arg_gold = _argument_items_gold(gold)
    flat_pred = [(p, a) for p in pred for a in p.arguments]
    _, arg_flags = _match(arg_gold, _argument_items_pred(pred))
    for (p, a), ok in zip(flat_pred, arg_flags):
        if ok:
            continue
        wrong.append(
            {
                "task": "argument",
                "doc_id": p.doc_id,
                "predicted": {
                    "subtype": p.subtype,
                    "role": a.role,
                    "span": list(a.span) if a.span else None,
                    "surface": a.surface,
                },
                "gold_context": _gold_context(gold_by_doc.get(p.doc_id, ())),
                "category": "",
            }
        )

    if len(wrong) > sample_n:
        wrong = random.Random(seed).sample(wrong, sample_n)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in wrong:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return wrong


def _gold_context(mentions: Sequence[EventMention]) -> list[dict]:
    return [
        {
            "subtype": m.subtype,
            "trigger": list(m.trigger_span),
            "arguments": [
                {"role": a.role, "span": list(a.span), "surface": a.surface}
                for a in m.arguments
            ],
        }
        for m in mentions
    ]


def read_error_records(path: str | Path) -> list[dict]:
    """Load an error file, validating filled-in categories."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            record = json.loads(line)
            category = record.get("category", "")
            if category and category not in ERROR_CATEGORIES:
                raise ValueError(
                    f"{path}:{lineno}: category {category!r} not in {ERROR_CATEGORIES}"
                )
            records.append(record)
    return records
