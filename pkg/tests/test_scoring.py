from __future__ import annotations

import random

import pytest

from eventprompt.corpus import Argument, EventMention
from eventprompt.pipeline import EventPrediction, PredictedArgument
from eventprompt.scoring import (
    ERROR_CATEGORIES,
    export_errors,
    micro_prf,
    read_error_records,
    score_arguments,
    score_report,
    score_triggers,
)


def gold_mention(doc="d0", span=(0, 4), subtype="Convict", args=()):
    return EventMention(
        doc_id=doc,
        sentence_index=0,
        subtype=subtype,
        trigger_span=span,
        arguments=tuple(Argument(role=r, span=s, surface="x") for r, s in args),
    )


def prediction(doc="d0", span=(0, 4), subtype="Convict", args=(), surface="x"):
    return EventPrediction(
        doc_id=doc,
        trigger_span=span,
        trigger_surface=surface,
        main_type="Justice",
        subtype=subtype,
        arguments=tuple(PredictedArgument(role=r, span=s, surface="x") for r, s in args),
    )


def as_predictions(mentions):
    return [
        EventPrediction(
            doc_id=m.doc_id,
            trigger_span=m.trigger_span,
            trigger_surface="x",
            main_type="",
            subtype=m.subtype,
            arguments=tuple(
                PredictedArgument(role=a.role, span=a.span, surface=a.surface)
                for a in m.arguments
            ),
        )
        for m in mentions
    ]


def brute_force_max_matching(gold_items, pred_items):
    """Independent oracle: maximum bipartite matching over exact-equality edges."""
    matched_gold = [False] * len(gold_items)
    match_of_pred = [None] * len(pred_items)

    def augment(g, visited):
        for p, pred in enumerate(pred_items):
            if pred is None or pred != gold_items[g] or p in visited:
                continue
            visited.add(p)
            if match_of_pred[p] is None or augment(match_of_pred[p], visited):
                match_of_pred[p] = g
                return True
        return False

    count = 0
    for g in range(len(gold_items)):
        if augment(g, set()):
            count += 1
    return count


class TestScoreTriggers:
    def test_identity_scores_one(self, mentions):
        p, r, f1 = score_triggers(mentions, as_predictions(mentions))
        assert (p, r, f1) == (1.0, 1.0, 1.0)

    def test_worked_example_two_of_three_against_four(self):
        gold = [gold_mention(span=(i, i + 2)) for i in range(0, 8, 2)]
        pred = [
            prediction(span=(0, 2)),
            prediction(span=(2, 4)),
            prediction(span=(50, 52)),
        ]
        p, r, f1 = score_triggers(gold, pred)
        assert abs(p - 2 / 3) < 1e-9
        assert abs(r - 1 / 2) < 1e-9
        assert abs(f1 - 4 / 7) < 1e-9
        assert round(f1, 4) == 0.5714

    def test_empty_predictions_score_zero(self):
        assert score_triggers([gold_mention()], []) == (0.0, 0.0, 0.0)

    def test_empty_gold_and_empty_pred(self):
        assert score_triggers([], []) == (0.0, 0.0, 0.0)

    def test_subtype_must_match(self):
        gold = [gold_mention(subtype="Convict")]
        pred = [prediction(subtype="Sentence")]
        assert score_triggers(gold, pred)[2] == 0.0

    def test_ungrounded_prediction_counts_against_precision(self):
        gold = [gold_mention()]
        pred = [prediction(), prediction(span=None)]
        p, r, _ = score_triggers(gold, pred)
        assert p == 0.5 and r == 1.0

    def test_duplicate_gold_needs_duplicate_predictions(self):
        gold = [gold_mention(), gold_mention()]
        pred = as_predictions(gold)
        assert score_triggers(gold, pred) == (1.0, 1.0, 1.0)
        assert score_triggers(gold, pred[:1]) == (1.0, 0.5, 2 / 3)


class TestScoreArguments:
    def test_identity_scores_one(self, mentions):
        p, r, f1 = score_arguments(mentions, as_predictions(mentions))
        assert (p, r, f1) == (1.0, 1.0, 1.0)

    def test_wrong_event_subtype_is_incorrect(self):
        gold = [gold_mention(subtype="Convict", args=[("Defendant", (5, 8))])]
        pred = [prediction(subtype="Sentence", args=[("Defendant", (5, 8))])]
        assert score_arguments(gold, pred)[2] == 0.0

    def test_wrong_role_is_incorrect(self):
        gold = [gold_mention(args=[("Defendant", (5, 8))])]
        pred = [prediction(args=[("Adjudicator", (5, 8))])]
        assert score_arguments(gold, pred)[2] == 0.0

    def test_argument_matching_ignores_trigger_span(self):
        # Same subtype and argument with a different trigger span: Arg-C is
        # scored on (subtype, role, span), trigger correctness is Trig-C's job.
        gold = [gold_mention(span=(0, 4), args=[("Defendant", (5, 8))])]
        pred = [prediction(span=(9, 12), args=[("Defendant", (5, 8))])]
        assert score_arguments(gold, pred)[2] == 1.0
        assert score_triggers(gold, pred)[2] == 0.0


class TestAgainstBruteForce:
    def test_randomized_small_sets(self):
        rng = random.Random(11)
        subtypes = ["Convict", "Sentence", "Buy"]
        for _ in range(100):
            gold = [
                gold_mention(
                    doc=f"d{rng.randint(0, 1)}",
                    span=(rng.randint(0, 3), rng.randint(4, 6)),
                    subtype=rng.choice(subtypes),
                    args=[("Defendant", (rng.randint(0, 2), rng.randint(3, 4)))]
                    if rng.random() < 0.7
                    else [],
                )
                for _ in range(rng.randint(0, 6))
            ]
            pred = [
                prediction(
                    doc=f"d{rng.randint(0, 1)}",
                    span=(rng.randint(0, 3), rng.randint(4, 6)) if rng.random() < 0.9 else None,
                    subtype=rng.choice(subtypes),
                    args=[("Defendant", (rng.randint(0, 2), rng.randint(3, 4)))]
                    if rng.random() < 0.7
                    else [],
                )
                for _ in range(rng.randint(0, 6))
            ]
            gold_items = [(m.doc_id, m.trigger_span, m.subtype) for m in gold]
            pred_items = [
                (p.doc_id, p.trigger_span, p.subtype) if p.trigger_span else None for p in pred
            ]
            expected = brute_force_max_matching(gold_items, pred_items)
            p, r, f1 = score_triggers(gold, pred)
            assert (p, r, f1) == micro_prf(len(gold_items), len(pred_items), expected)


class TestMonotonicity:
    def test_adding_incorrect_prediction_never_raises_p_or_f1(self):
        gold = [gold_mention(span=(0, 4)), gold_mention(span=(6, 9))]
        pred = [prediction(span=(0, 4))]
        p0, _, f0 = score_triggers(gold, pred)
        pred_plus = pred + [prediction(span=(40, 44))]
        p1, r1, f1 = score_triggers(gold, pred_plus)
        assert p1 <= p0 and f1 <= f0

    def test_adding_correct_prediction_never_lowers_r(self):
        gold = [gold_mention(span=(0, 4)), gold_mention(span=(6, 9))]
        pred = [prediction(span=(0, 4))]
        _, r0, _ = score_triggers(gold, pred)
        _, r1, _ = score_triggers(gold, pred + [prediction(span=(6, 9))])
        assert r1 >= r0


class TestScoreReport:
    def test_counts_and_convention(self, mentions):
        report = score_report(mentions, [])
        assert report.trig_c.gold == len(mentions)
        assert report.trig_c.predicted == 0
        assert (report.trig_c.p, report.trig_c.r, report.trig_c.f1) == (0.0, 0.0, 0.0)
        data = report.to_dict()
        assert set(data) == {"trig_c", "arg_c"}
        assert set(data["trig_c"]) == {"p", "r", "f1", "gold", "pred", "correct"}


class TestExportErrors:
    def _wrong_predictions(self, n):
        return [prediction(doc=f"d{i}", span=(i, i + 2), subtype="Convict") for i in range(n)]

    def test_sample_of_requested_size(self, tmp_path):
        gold = [gold_mention(doc="g", span=(0, 2))]
        records = export_errors(gold, self._wrong_predictions(200), 50, seed=3)
        assert len(records) == 50
        assert all(r["category"] == "" for r in records)

    def test_fewer_wrong_than_requested_exports_all(self):
        gold = [gold_mention(doc="g", span=(0, 2))]
        assert len(export_errors(gold, self._wrong_predictions(10), 50, seed=3)) == 10

    def test_zero_wrong_gives_empty_file(self, tmp_path, mentions):
        path = tmp_path / "errors.jsonl"
        records = export_errors(mentions, as_predictions(mentions), 50, seed=3, path=path)
        assert records == []
        assert path.read_text() == ""

    def test_argument_errors_included(self):
        gold = [gold_mention(args=[("Defendant", (5, 8))])]
        pred = [prediction(args=[("Defendant", (6, 9))])]
        records = export_errors(gold, pred, 10, seed=0)
        tasks = {r["task"] for r in records}
        assert "argument" in tasks

    def test_category_vocabulary_enforced_on_read(self, tmp_path):
        path = tmp_path / "errors.jsonl"
        gold = [gold_mention(doc="g", span=(0, 2))]
        export_errors(gold, self._wrong_predictions(3), 3, seed=0, path=path)
        records = read_error_records(path)
        assert len(records) == 3
        # Fill a category in and re-validate.
        import json

        records[0]["category"] = ERROR_CATEGORIES[0]
        path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
        assert read_error_records(path)[0]["category"] == "shallow_heuristics"
        records[0]["category"] = "made_up"
        path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
        with pytest.raises(ValueError, match="category"):
            read_error_records(path)
