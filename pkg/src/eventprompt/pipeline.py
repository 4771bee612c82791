"""End-to-end orchestration: build prompts, train stages, predict, score.

Detection runs in two stages (coarse triggers per main type, then subtype
classification per detected trigger); argument extraction asks one masked
role question per (event, role). Training composes external+internal
instances for the coarse trigger stage and single+joint instances for the
argument stage; inference uses only the external and single families plus
subtype classification. Given fixed seeds every artifact this module writes
is byte-reproducible.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from .corpus import (
    Document,
    EventMention,
    Passage,
    assign_splits,
    ingest,
    make_passage,
    merge_adjoining,
    trigger_surface,
)
from .errors import ConfigError, InstanceRejected, PromptError
from .generation import (
    MockBackend,
    Seq2SeqBackend,
    TrainConfig,
    build_constraint,
    candidate_constraint,
    constrained_greedy_decode,
    ground_answers,
    train,
)
from .prompting import (
    PromptInstance,
    build_external_trigger_prompt,
    build_internal_trigger_prompt,
    build_joint_argument_prompt,
    build_single_argument_prompts,
    build_subtype_prompt,
    write_instances,
)
from .schema import Schema, load_schema, main_type_of
from .scoring import ScoreReport, score_report

logger = logging.getLogger(__name__)

REGIMES = ("end_to_end", "gold_trigger")
FAMILY_ORDER = (
    "external_trigger",
    "internal_trigger",
    "subtype",
    "single_argument",
    "joint_argument",
)


@dataclass(frozen=True)
class PipelineConfig:
    schema_path: str
    corpus_path: str
    output_dir: str
    backend: str = "mock"
    regime: str = "end_to_end"
    external_window: int = 100
    internal_window: int = 120
    max_gap_sentences: int = 3
    decode_max_len: int = 64
    seed: int = 42
    splits: dict = field(default_factory=dict)
    trigger_config: TrainConfig = field(
        default_factory=lambda: TrainConfig.for_stage("trigger_coarse")
    )
    subtype_config: TrainConfig = field(
        default_factory=lambda: TrainConfig.for_stage("trigger_subtype")
    )
    argument_config: TrainConfig = field(
        default_factory=lambda: TrainConfig.for_stage("argument")
    )

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}, got {self.regime!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        stages = data.pop("stages", {})
        kwargs = {}
        for stage_key, attr in (
            ("trigger_coarse", "trigger_config"),
            ("trigger_subtype", "subtype_config"),
            ("argument", "argument_config"),
        ):
            base = TrainConfig.for_stage(stage_key, seed=int(data.get("seed", 42)))
            overrides = stages.get(stage_key, {})
            kwargs[attr] = replace(base, **overrides)
        known = {
            "schema_path",
            "corpus_path",
            "output_dir",
            "backend",
            "regime",
            "external_window",
            "internal_window",
            "max_gap_sentences",
            "decode_max_len",
            "seed",
            "splits",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data, **kwargs)
        except TypeError as exc:
            raise ConfigError(f"incomplete config: {exc}") from exc

    @classmethod
    def from_json_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc


@dataclass
class StageBackends:
    trigger: Seq2SeqBackend
    subtype: Seq2SeqBackend
    argument: Seq2SeqBackend


@dataclass(frozen=True)
class DetectedEvent:
    """Stage-1+2 output: one classified trigger."""

    doc_id: str
    sentence_index: int
    trigger_span: tuple[int, int]
    trigger_surface: str
    main_type: str
    subtype: str


@dataclass(frozen=True)
class PredictedArgument:
    role: str
    span: tuple[int, int] | None
    surface: str


@dataclass(frozen=True)
class EventPrediction:
    doc_id: str
    trigger_span: tuple[int, int] | None
    trigger_surface: str
    main_type: str
    subtype: str
    arguments: tuple[PredictedArgument, ...] = ()


def backend_factory_for(name: str) -> Callable[[Sequence[str]], Seq2SeqBackend]:
    """Resolve a backend name to a factory taking the corpus vocabulary."""
    if name == "mock":
        return lambda vocab: MockBackend(sorted(vocab))
    if name.startswith("hf:"):
        from .hf_adapter import load_hf_backend

        model_name = name.split(":", 1)[1]
        return lambda vocab: load_hf_backend(model_name)
    raise ConfigError(f"unknown backend {name!r} (expected 'mock' or 'hf:<model>')")


def build_training_instances(
    docs: Sequence[Document],
    mentions: Sequence[EventMention],
    schema: Schema,
    config: PipelineConfig,
    event_sentences_only: bool = False,
) -> dict[str, list[PromptInstance]]:
    """All five instance families over the given documents and gold mentions.

    ``event_sentences_only`` restricts external instances to sentences that
    carry at least one of the given mentions (used by few-shot training,
    where the mention list is a sample).
    """
    families: dict[str, list[PromptInstance]] = {name: [] for name in FAMILY_ORDER}
    by_doc: dict[str, list[EventMention]] = {}
    for m in mentions:
        by_doc.setdefault(m.doc_id, []).append(m)
    joint_counter = 0
    for doc in docs:
        doc_mentions = sorted(
            by_doc.get(doc.doc_id, []), key=lambda m: (m.sentence_index, m.trigger_span)
        )
        by_sentence: dict[int, list[EventMention]] = {}
        for m in doc_mentions:
            by_sentence.setdefault(m.sentence_index, []).append(m)

        for i in range(len(doc.sentences)):
            sent_mentions = by_sentence.get(i, [])
            if event_sentences_only and not sent_mentions:
                continue
            passage = make_passage(doc, (i, i), config.external_window)
            families["external_trigger"].append(
                build_external_trigger_prompt(passage, schema, gold=sent_mentions)
            )
            for m in sent_mentions:
                families["subtype"].append(
                    build_subtype_prompt(
                        passage,
                        trigger_surface(doc, m),
                        main_type_of(schema, m.subtype),
                        schema,
                        gold_subtype=m.subtype,
                    )
                )
                families["single_argument"].extend(
                    build_single_argument_prompts(passage, m, schema)
                )
            if sent_mentions and any(m.arguments for m in sent_mentions):
                try:
                    families["joint_argument"].append(
                        build_joint_argument_prompt(
                            passage, sent_mentions, schema, seed=config.seed + joint_counter
                        )
                    )
                except InstanceRejected as exc:
                    logger.warning(
                        "%s sentence %d: joint instance skipped (%s)", doc.doc_id, i, exc
                    )
                joint_counter += 1

        for sent_range in merge_adjoining(doc, doc_mentions, config.max_gap_sentences):
            range_mentions = [
                m for m in doc_mentions if sent_range[0] <= m.sentence_index <= sent_range[1]
            ]
            passage = make_passage(doc, sent_range, config.internal_window)
            try:
                families["internal_trigger"].append(
                    build_internal_trigger_prompt(passage, range_mentions, schema)
                )
            except InstanceRejected as exc:
                logger.warning("%s range %s: internal instance skipped (%s)", doc.doc_id, sent_range, exc)
    return families


def pipeline_vocabulary(
    docs: Sequence[Document],
    mentions: Sequence[EventMention],
    schema: Schema,
    config: PipelineConfig,
) -> set[str]:
    """Whitespace tokens of every instance the pipeline could construct.

    Renders all families over all documents with gold, plus a schema-wide
    probe sweep: inference can ask about any subtype or role the model
    happens to predict, including ones absent from the gold corpus, so every
    schema-derived prompt section must be in the vocabulary of a
    table-driven backend.
    """
    tokens: set[str] = {"</s>", "None", "|"}
    families = build_training_instances(docs, mentions, schema, config)
    for instances in families.values():
        for inst in instances:
            tokens.update(inst.input_text.split())
            tokens.update(inst.target_text.split())
    probe = Document(doc_id="_probe", text=".", sentences=((0, 1),))
    passage = make_passage(probe, (0, 0), config.external_window)
    tokens.update(
        build_external_trigger_prompt(passage, schema, gold=None).input_text.split()
    )
    for mt in schema.main_types:
        if schema.subtypes_of(mt):
            tokens.update(build_subtype_prompt(passage, ".", mt, schema).input_text.split())
    for st in schema.subtypes:
        pseudo = EventMention(
            doc_id="_probe", sentence_index=0, subtype=st.name, trigger_span=(0, 1)
        )
        for inst in build_single_argument_prompts(passage, pseudo, schema, with_gold=False):
            tokens.update(inst.input_text.split())
    return tokens


@dataclass
class GenerationRecord:
    origin: tuple[str, tuple[int, int]]
    family: str
    result_answer_map: dict
    result_grounded: dict
    malformed: bool

    def to_dict(self) -> dict:
        return {
            "instance_origin": {
                "doc_id": self.origin[0],
                "sentence_range": list(self.origin[1]),
            },
            "family": self.family,
            "answer_map": self.result_answer_map,
            "grounded": self.result_grounded,
            "malformed": self.malformed,
        }


def _record(instance: PromptInstance, result) -> GenerationRecord:
    grounded = {}
    for index, spans in (result.grounded or {}).items():
        grounded[str(index)] = [
            list(g.doc_span) if g is not None and g.doc_span is not None else None
            for g in spans
        ]
    answer_map = {str(k): list(v) for k, v in result.answer_map.entries.items()}
    return GenerationRecord(
        origin=instance.origin or ("?", (0, 0)),
        family=instance.family,
        result_answer_map=answer_map,
        result_grounded=grounded,
        malformed=result.answer_map.malformed,
    )


def detect_events(
    backends: StageBackends,
    doc: Document,
    schema: Schema,
    config: PipelineConfig,
    records: list[GenerationRecord] | None = None,
) -> list[DetectedEvent]:
    """Stage 1: coarse triggers per sentence. Stage 2: subtype per trigger.

    "None" answers and triggers that cannot be grounded inside the focus
    sentence produce no event; stage-2 answers outside the candidate subtype
    names drop the trigger. Diagnostics go to the module logger.
    """
    detected: list[DetectedEvent] = []
    for i in range(len(doc.sentences)):
        passage = make_passage(doc, (i, i), config.external_window)
        instance = build_external_trigger_prompt(passage, schema, gold=None)
        result = constrained_greedy_decode(
            backends.trigger,
            instance.input_text,
            build_constraint(backends.trigger, instance.input_text),
            config.decode_max_len,
        )
        result = ground_answers(result, passage)
        if records is not None:
            records.append(_record(instance, result))

        candidates: list[tuple[tuple[int, int], str, str]] = []
        seen: set[tuple[tuple[int, int], str]] = set()
        for slot in instance.slots:
            main_type = slot.bind["main_type"]
            answers = result.answer_map.entries.get(slot.sentinel, ())
            grounds = (result.grounded or {}).get(slot.sentinel, ())
            for answer, grounded in zip(answers, grounds):
                if grounded is None or grounded.doc_span is None:
                    logger.warning(
                        "%s sentence %d: trigger %r (%s) dropped, cannot ground",
                        doc.doc_id, i, answer, main_type,
                    )
                    continue
                if not grounded.in_focus:
                    logger.warning(
                        "%s sentence %d: trigger %r (%s) dropped, grounded outside focus",
                        doc.doc_id, i, answer, main_type,
                    )
                    continue
                key = (grounded.doc_span, main_type)
                if key in seen:
                    continue
                seen.add(key)
                candidates.append((grounded.doc_span, answer, main_type))

        for span, surface, main_type in candidates:
            sub_instance = build_subtype_prompt(passage, surface, main_type, schema)
            names = sub_instance.meta["candidates"]
            sub_result = constrained_greedy_decode(
                backends.subtype,
                sub_instance.input_text,
                candidate_constraint(backends.subtype, names),
                config.decode_max_len,
            )
            if records is not None:
                records.append(_record(sub_instance, sub_result))
            answers = sub_result.answer_map.entries.get(0, ())
            subtype = answers[0] if answers else None
            if subtype not in names:
                logger.warning(
                    "%s sentence %d: trigger %r dropped, subtype answer %r not a candidate",
                    doc.doc_id, i, surface, subtype,
                )
                continue
            detected.append(
                DetectedEvent(
                    doc_id=doc.doc_id,
                    sentence_index=i,
                    trigger_span=span,
                    trigger_surface=surface,
                    main_type=main_type,
                    subtype=subtype,
                )
            )
    return detected


def gold_detected(doc: Document, mentions: Sequence[EventMention], schema: Schema) -> list[DetectedEvent]:
    """Gold-trigger regime: feed gold trigger spans and subtypes to stage 3."""
    return [
        DetectedEvent(
            doc_id=doc.doc_id,
            sentence_index=m.sentence_index,
            trigger_span=m.trigger_span,
            trigger_surface=trigger_surface(doc, m),
            main_type=main_type_of(schema, m.subtype),
            subtype=m.subtype,
        )
        for m in sorted(mentions, key=lambda m: (m.sentence_index, m.trigger_span))
        if m.doc_id == doc.doc_id
    ]


def extract_arguments(
    backend: Seq2SeqBackend,
    doc: Document,
    detected: Sequence[DetectedEvent],
    schema: Schema,
    config: PipelineConfig,
    records: list[GenerationRecord] | None = None,
) -> list[EventPrediction]:
    """One single-argument inference prompt per (event, role).

    Answers are split on the separator and grounded; duplicates within one
    role collapse; "None" leaves the role unfilled; ungrounded answers stay
    surface-only with a null span.
    """
    predictions: list[EventPrediction] = []
    for event in detected:
        if main_type_of(schema, event.subtype) != event.main_type:
            raise PromptError(
                f"detected event subtype {event.subtype!r} does not belong to {event.main_type!r}"
            )
        passage = make_passage(doc, (event.sentence_index, event.sentence_index), config.external_window)
        pseudo = EventMention(
            doc_id=doc.doc_id,
            sentence_index=event.sentence_index,
            subtype=event.subtype,
            trigger_span=event.trigger_span,
            arguments=(),
        )
        instances = build_single_argument_prompts(passage, pseudo, schema, with_gold=False)
        arguments: list[PredictedArgument] = []
        for instance in instances:
            result = constrained_greedy_decode(
                backend,
                instance.input_text,
                build_constraint(backend, instance.input_text),
                config.decode_max_len,
            )
            result = ground_answers(result, instance.passage)
            if records is not None:
                records.append(_record(instance, result))
            role = instance.slots[0].bind["role"]
            answers = result.answer_map.entries.get(0, ())
            grounds = (result.grounded or {}).get(0, ())
            seen: set[tuple] = set()
            for answer, grounded in zip(answers, grounds):
                span = grounded.doc_span if grounded is not None else None
                key = (role, span, answer)
                if key in seen:
                    continue
                seen.add(key)
                arguments.append(PredictedArgument(role=role, span=span, surface=answer))
        predictions.append(
            EventPrediction(
                doc_id=event.doc_id,
                trigger_span=event.trigger_span,
                trigger_surface=event.trigger_surface,
                main_type=event.main_type,
                subtype=event.subtype,
                arguments=tuple(arguments),
            )
        )
    return predictions


def _split_docs(
    docs: Sequence[Document], splits: dict
) -> tuple[list[Document], list[Document], list[Document]]:
    by_id = {d.doc_id: d for d in docs}
    if not splits:
        raise ConfigError("config.splits is empty; provide lists or counts")
    if "counts" in splits:
        assignment = assign_splits(list(docs), splits)
        return (
            [d for d in docs if assignment.get(d.doc_id) == "train"],
            [d for d in docs if assignment.get(d.doc_id) == "dev"],
            [d for d in docs if assignment.get(d.doc_id) == "test"],
        )
    # Explicit lists may overlap on purpose (memorization runs train=test);
    # use assign_splits when a disjoint partition must be enforced.
    out = []
    for name in ("train", "dev", "test"):
        ids = splits.get(name, [])
        unknown = [i for i in ids if i not in by_id]
        if unknown:
            raise ConfigError(f"split {name!r} names unknown documents: {unknown[:5]}")
        out.append([by_id[i] for i in ids])
    return out[0], out[1], out[2]


@dataclass
class RunResult:
    report: ScoreReport
    predictions: list[EventPrediction]
    output_dir: Path
    predictions_path: Path
    generations_path: Path
    score_path: Path


def prediction_to_dict(p: EventPrediction) -> dict:
    return {
        "doc_id": p.doc_id,
        "trigger_span": list(p.trigger_span) if p.trigger_span else None,
        "trigger_surface": p.trigger_surface,
        "main_type": p.main_type,
        "subtype": p.subtype,
        "arguments": [
            {"role": a.role, "span": list(a.span) if a.span else None, "surface": a.surface}
            for a in p.arguments
        ],
    }


def prediction_from_dict(record: dict) -> EventPrediction:
    return EventPrediction(
        doc_id=record["doc_id"],
        trigger_span=tuple(record["trigger_span"]) if record["trigger_span"] else None,
        trigger_surface=record.get("trigger_surface", ""),
        main_type=record["main_type"],
        subtype=record["subtype"],
        arguments=tuple(
            PredictedArgument(
                role=a["role"],
                span=tuple(a["span"]) if a["span"] else None,
                surface=a["surface"],
            )
            for a in record["arguments"]
        ),
    )


def write_predictions(predictions: Sequence[EventPrediction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(json.dumps(prediction_to_dict(p), ensure_ascii=False) + "\n")


def read_predictions(path: str | Path) -> list[EventPrediction]:
    predictions = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                predictions.append(prediction_from_dict(json.loads(line)))
    return predictions


def _write_loss_curve(curve, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "step", "loss"])
        for point in curve:
            writer.writerow([point.epoch, point.step, f"{point.loss:.12g}"])


def train_stages(
    backends: StageBackends,
    families: dict[str, list[PromptInstance]],
    config: PipelineConfig,
    output_dir: Path | None = None,
) -> dict[str, list]:
    """Train the three stages on their instance families; returns loss curves.

    Stages with no training instances are skipped with a warning (the few-shot
    k=0 smoke path evaluates untrained backends).
    """
    stage_plan = [
        ("trigger_coarse", backends.trigger,
         families["external_trigger"] + families["internal_trigger"], config.trigger_config),
        ("trigger_subtype", backends.subtype, families["subtype"], config.subtype_config),
        ("argument", backends.argument,
         families["single_argument"] + families["joint_argument"], config.argument_config),
    ]
    curves: dict[str, list] = {}
    for name, backend, instances, train_config in stage_plan:
        if not instances:
            logger.warning("stage %s has no training instances; backend left untrained", name)
            curves[name] = []
            continue
        _, curve = train(backend, instances, train_config)
        curves[name] = curve
        if output_dir is not None:
            _write_loss_curve(curve, output_dir / f"loss_{name}.csv")
            if isinstance(backend, MockBackend):
                with open(output_dir / f"stage_{name}.json", "w", encoding="utf-8") as fh:
                    json.dump(backend.state_dict(), fh)
    return curves


def predict_documents(
    backends: StageBackends,
    docs: Sequence[Document],
    gold_mentions: Sequence[EventMention],
    schema: Schema,
    config: PipelineConfig,
    records: list[GenerationRecord] | None = None,
) -> list[EventPrediction]:
    predictions: list[EventPrediction] = []
    for doc in docs:
        if config.regime == "gold_trigger":
            detected = gold_detected(doc, gold_mentions, schema)
        else:
            detected = detect_events(backends, doc, schema, config, records=records)
        predictions.extend(
            extract_arguments(backends.argument, doc, detected, schema, config, records=records)
        )
    return predictions


def run_pipeline(
    docs: Sequence[Document],
    mentions: Sequence[EventMention],
    schema: Schema,
    config: PipelineConfig,
    backend_factory: Callable[[Sequence[str]], Seq2SeqBackend] | None = None,
    train_mentions: Sequence[EventMention] | None = None,
    output_dir: Path | None = None,
) -> tuple[list[EventPrediction], ScoreReport, list[GenerationRecord]]:
    """In-memory pipeline core shared by run_end_to_end and the few-shot driver."""
    factory = backend_factory or backend_factory_for(config.backend)
    train_docs, _, test_docs = _split_docs(docs, config.splits)
    train_ids = {d.doc_id for d in train_docs}
    test_ids = {d.doc_id for d in test_docs}

    if train_mentions is None:
        train_mentions = [m for m in mentions if m.doc_id in train_ids]
        event_sentences_only = False
    else:
        event_sentences_only = True
    test_mentions = [m for m in mentions if m.doc_id in test_ids]

    vocab = sorted(pipeline_vocabulary(docs, mentions, schema, config))
    backends = StageBackends(trigger=factory(vocab), subtype=factory(vocab), argument=factory(vocab))

    families = build_training_instances(
        train_docs, train_mentions, schema, config, event_sentences_only=event_sentences_only
    )
    if output_dir is not None:
        for family in FAMILY_ORDER:
            write_instances(families[family], output_dir / f"instances_{family}.jsonl")
    train_stages(backends, families, config, output_dir=output_dir)

    records: list[GenerationRecord] = []
    predictions = predict_documents(backends, test_docs, test_mentions, schema, config, records)
    report = score_report(test_mentions, predictions)
    return predictions, report, records


def run_end_to_end(
    config: PipelineConfig,
    backend_factory: Callable[[Sequence[str]], Seq2SeqBackend] | None = None,
) -> RunResult:
    """File-level entry point: ingest, train, predict, score, write artifacts.

    Writes instance files, per-stage loss curves and checkpoints, raw
    generation records, event-level predictions, and the score report into
    ``config.output_dir``. Reruns with identical inputs and seeds produce
    byte-identical files.
    """
    schema = load_schema(config.schema_path)
    docs, mentions = ingest(config.corpus_path, schema)
    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    predictions, report, records = run_pipeline(
        docs, mentions, schema, config, backend_factory=backend_factory, output_dir=output_dir
    )

    generations_path = output_dir / "generations.jsonl"
    with open(generations_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
    predictions_path = output_dir / "predictions.jsonl"
    write_predictions(predictions, predictions_path)
    score_path = output_dir / "score.json"
    with open(score_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    return RunResult(
        report=report,
        predictions=predictions,
        output_dir=output_dir,
        predictions_path=predictions_path,
        generations_path=generations_path,
        score_path=score_path,
    )
