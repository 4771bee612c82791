"""Prompt construction for trigger detection and argument extraction.

Five instance families share one serialization contract:

  external_trigger   questions appended after the passage, one per main type,
                     each holding a sentinel mask (the inference form).
  internal_trigger   trigger words masked inside the passage, informative
                     lines appended (interaction-training form).
  subtype            classification of one detected trigger among the
                     candidate subtypes of its main type.
  single_argument    one masked role-description question per role
                     (the inference form).
  joint_argument     argument words masked inside the passage, shuffled
                     role descriptions appended (interaction-training form).

Targets follow the span-infilling convention of the backend: answers joined
by sentinel tokens, ``<extra_id_0> answer0 <extra_id_1> answer1 <extra_id_2>``
plus the ``</s>`` end marker. Several entities answering one slot are joined
with `` | ``; an absent answer is the literal string ``None``.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import EventMention, Passage
from .errors import InstanceRejected, PromptError
from .schema import MASK_SLOT, Schema, main_type_of, roles_for

END_MARKER = "</s>"
NA_ANSWER = "None"
ANSWER_SEP = "|"
BRIDGE = "In the passage above ,"

# Backend mask-token budget: <extra_id_0> .. <extra_id_99>.
MAX_SENTINELS = 100

# Questions for the coarse trigger stage are generated per main type from this
# pattern; the schema file format carries templates only at subtype and role
# granularity.
MAIN_TYPE_QUESTION = "the trigger word for the {main_type} event is [MASK_SLOT] ."

_SENTINEL_RE = re.compile(r"<extra_id_(\d+)>")

FAMILIES = (
    "external_trigger",
    "internal_trigger",
    "subtype",
    "single_argument",
    "joint_argument",
)


def sentinel(k: int) -> str:
    if not 0 <= k < MAX_SENTINELS:
        raise PromptError(f"sentinel index {k} outside backend budget 0..{MAX_SENTINELS - 1}")
    return f"<extra_id_{k}>"


def trigger_open(k: int) -> str:
    return f"<t{k}>"


def trigger_close(k: int) -> str:
    return f"</t{k}>"


@dataclass(frozen=True)
class Slot:
    """One answer slot: which sentinel it fills and what it asks for.

    ``bind`` names the request: {"main_type": ...}, {"subtype": ...} or
    {"subtype": ..., "role": ...}. Two slots may share a sentinel when one
    masked position answers several (event, role) questions.
    """

    sentinel: int
    gold: tuple[str, ...]
    bind: dict

    def __post_init__(self):
        if any(not g.strip() for g in self.gold):
            raise PromptError("gold answers must be non-empty strings")


@dataclass(frozen=True)
class PromptInstance:
    family: str
    input_text: str
    target_text: str
    slots: tuple[Slot, ...]
    passage: Passage | None
    meta: dict = field(default_factory=dict)

    @property
    def origin(self) -> tuple[str, tuple[int, int]] | None:
        if self.passage is not None:
            return self.passage.origin
        if "origin" in self.meta:
            doc_id, rng = self.meta["origin"]
            return (doc_id, tuple(rng))
        return None


@dataclass(frozen=True)
class AnswerMap:
    """Parsed generation output: sentinel index -> answer strings."""

    entries: dict[int, tuple[str, ...]]
    malformed: bool = False


def serialize_target(answers: Sequence[str]) -> str:
    """Join answers with sentinel tokens and terminate with the end marker.

    n answers produce n+1 sentinels: each answer sits between sentinel k and
    sentinel k+1, and the trailing sentinel is immediately followed by </s>.
    """
    if not answers:
        raise PromptError("cannot serialize an empty answer list")
    if len(answers) + 1 > MAX_SENTINELS:
        raise InstanceRejected(f"{len(answers)} answers exceed the sentinel budget")
    parts = []
    for k, answer in enumerate(answers):
        if not answer.strip():
            raise PromptError(f"answer {k} is empty")
        parts.append(sentinel(k))
        parts.append(answer)
    parts.append(sentinel(len(answers)))
    parts.append(END_MARKER)
    return " ".join(parts)


def parse_generation(output: str) -> AnswerMap:
    """Best-effort parse of a generated sequence back into an answer map.

    Tolerates malformed output (missing trailing sentinel, missing end
    marker, out-of-order sentinels); deviations from the canonical form set
    the ``malformed`` flag. ``None`` answers map to an empty tuple.
    """
    malformed = False
    text = output
    if END_MARKER in text:
        text, _, tail = text.partition(END_MARKER)
        if tail.strip():
            malformed = True
    else:
        malformed = True

    matches = list(_SENTINEL_RE.finditer(text))
    if not matches:
        return AnswerMap(entries={}, malformed=True)
    if text[: matches[0].start()].strip():
        malformed = True

    indices = [int(m.group(1)) for m in matches]
    if indices != list(range(len(indices))):
        malformed = True

    entries: dict[int, tuple[str, ...]] = {}
    for pos, match in enumerate(matches):
        start = match.end()
        end = matches[pos + 1].start() if pos + 1 < len(matches) else len(text)
        content = text[start:end].strip()
        is_last = pos == len(matches) - 1
        if not content:
            if not is_last:
                malformed = True
            continue
        if is_last:
            malformed = True  # canonical output ends with an empty sentinel
        answers = tuple(
            a.strip()
            for a in content.split(ANSWER_SEP)
            if a.strip() and a.strip() != NA_ANSWER
        )
        index = int(match.group(1))
        if index in entries:
            malformed = True
        entries[index] = answers
    return AnswerMap(entries=entries, malformed=malformed)


def _require_markers(passage: Passage) -> None:
    if "<e>" not in passage.text or "</e>" not in passage.text:
        raise PromptError("passage lacks <e>/</e> boundary markers")


def _render(template: str, replacement: str) -> str:
    """Fill the template's mask slot and collapse whitespace."""
    if template.count(MASK_SLOT) != 1:
        raise PromptError(f"template must contain exactly one mask slot: {template!r}")
    return " ".join(template.replace(MASK_SLOT, replacement).split())


def _render_informative(template: str) -> str:
    """Drop the mask slot: informative statement form, not a question."""
    return " ".join(template.replace(MASK_SLOT, " ").split())


def _splice(passage: Passage, edits: list[tuple[int, int, str]]) -> Passage:
    """Replace passage-coordinate spans with new text (offsets become None).

    Edits must be non-overlapping, sorted, and lie within the focus region;
    zero-width edits insert. The focus span grows or shrinks by the net size
    change.
    """
    fs, fe = passage.focus_span
    chars: list[str] = []
    offsets: list[int | None] = []
    cursor = 0
    for start, end, replacement in edits:
        assert fs <= start <= end <= fe, "edits must stay inside the focus region"
        chars.append(passage.text[cursor:start])
        offsets.extend(passage.offset_map[cursor:start])
        chars.append(replacement)
        offsets.extend([None] * len(replacement))
        cursor = end
    chars.append(passage.text[cursor:])
    offsets.extend(passage.offset_map[cursor:])
    delta = sum(len(r) - (e - s) for s, e, r in edits)
    return Passage(
        text="".join(chars),
        focus_span=(fs, fe + delta),
        origin=passage.origin,
        offset_map=tuple(offsets),
    )


def _passage_span(passage: Passage, doc_span: tuple[int, int]) -> tuple[int, int]:
    if not passage.contains_doc_span(doc_span):
        raise PromptError(f"document span {doc_span} outside passage focus")
    start = passage.doc_pos_to_passage(doc_span[0])
    return (start, start + (doc_span[1] - doc_span[0]))


def _surface(passage: Passage, doc_span: tuple[int, int]) -> str:
    start, end = _passage_span(passage, doc_span)
    return passage.text[start:end]


def _check_budget(n_input_sentinels: int) -> None:
    # Targets append one trailing sentinel beyond the answer slots.
    if n_input_sentinels + 1 > MAX_SENTINELS:
        raise InstanceRejected(
            f"instance needs {n_input_sentinels + 1} sentinels, budget is {MAX_SENTINELS}"
        )


def _join_gold(golds: Sequence[str]) -> str:
    return f" {ANSWER_SEP} ".join(golds)


def build_external_trigger_prompt(
    passage: Passage,
    schema: Schema,
    gold: Sequence[EventMention] | None,
    question_pattern: str = MAIN_TYPE_QUESTION,
) -> PromptInstance:
    """One masked question per main type, appended after the passage.

    With ``gold``, each slot's answers are the trigger surfaces of that main
    type inside the focus sentence, in sentence order, or "None" when the
    type does not occur. Without ``gold`` the target is empty (inference).
    """
    _require_markers(passage)
    _check_budget(len(schema.main_types))
    questions = []
    slots = []
    for k, mt in enumerate(schema.main_types):
        questions.append(_render(question_pattern.format(main_type=mt), sentinel(k)))
        if gold is None:
            answers: tuple[str, ...] = ()
        else:
            triggers = sorted(
                (
                    m
                    for m in gold
                    if main_type_of(schema, m.subtype) == mt
                    and passage.contains_doc_span(m.trigger_span)
                ),
                key=lambda m: m.trigger_span,
            )
            answers = tuple(_surface(passage, m.trigger_span) for m in triggers) or (NA_ANSWER,)
        slots.append(Slot(sentinel=k, gold=answers, bind={"main_type": mt}))
    input_text = " ".join([passage.text, BRIDGE, *questions])
    target = serialize_target([_join_gold(s.gold) for s in slots]) if gold is not None else ""
    return PromptInstance(
        family="external_trigger",
        input_text=input_text,
        target_text=target,
        slots=tuple(slots),
        passage=passage,
    )


def build_internal_trigger_prompt(
    passage: Passage, mentions: Sequence[EventMention], schema: Schema
) -> PromptInstance:
    """Mask gold triggers inside the passage; append event-type information.

    Each trigger occurrence becomes a distinct sentinel in document order.
    The appended line for mask k states the event's main type plus the
    subtype's statement template with its mask slot elided, so no trigger
    surface leaks into the prompt section.
    """
    _require_markers(passage)
    if not mentions:
        raise PromptError("internal trigger prompt needs at least one mention")
    ordered = sorted(mentions, key=lambda m: m.trigger_span)
    prev_end = -1
    for m in ordered:
        if m.trigger_span[0] < prev_end:
            raise InstanceRejected("overlapping trigger spans")
        prev_end = m.trigger_span[1]
    _check_budget(len(ordered))

    edits = []
    lines = []
    slots = []
    for k, m in enumerate(ordered):
        span = _passage_span(passage, m.trigger_span)  # raises if outside focus
        surface = passage.text[span[0] : span[1]]
        edits.append((span[0], span[1], sentinel(k)))
        st = schema.subtype(m.subtype)
        lines.append(
            f"mask {k} is a {st.parent} event : "
            + _render_informative(st.trigger_question_template)
        )
        slots.append(Slot(sentinel=k, gold=(surface,), bind={"subtype": m.subtype}))
    masked = _splice(passage, edits)
    input_text = " ".join([masked.text, *lines])
    target = serialize_target([_join_gold(s.gold) for s in slots])
    return PromptInstance(
        family="internal_trigger",
        input_text=input_text,
        target_text=target,
        slots=tuple(slots),
        passage=masked,
    )


def build_subtype_prompt(
    passage: Passage,
    trigger_surface: str,
    main_type: str,
    schema: Schema,
    gold_subtype: str | None = None,
) -> PromptInstance:
    """Classify one trigger among the candidate subtypes of its main type."""
    _require_markers(passage)
    candidates = schema.subtypes_of(main_type)  # raises on unknown main type
    if not candidates:
        raise PromptError(f"main type {main_type!r} declares no subtypes")
    names = [st.name for st in candidates]
    if gold_subtype is not None and gold_subtype not in names:
        raise PromptError(f"gold subtype {gold_subtype!r} is not a subtype of {main_type!r}")
    input_text = " ".join(
        [
            passage.text,
            BRIDGE,
            f"the word {trigger_surface} is the trigger word for a {main_type} event .",
            "candidates : " + " , ".join(names) + " .",
            f"the subtype is {sentinel(0)} .",
        ]
    )
    gold = (gold_subtype,) if gold_subtype is not None else ()
    slot = Slot(sentinel=0, gold=gold, bind={"main_type": main_type})
    target = serialize_target([gold_subtype]) if gold_subtype is not None else ""
    return PromptInstance(
        family="subtype",
        input_text=input_text,
        target_text=target,
        slots=(slot,),
        passage=passage,
        meta={"trigger_surface": trigger_surface, "candidates": names},
    )


def _event_statement(k: int, subtype: str, surface: str) -> str:
    return (
        f"this is a {subtype} event and its trigger word is "
        f"{trigger_open(k)} {surface} {trigger_close(k)} ."
    )


def build_single_argument_prompts(
    passage: Passage, event: EventMention, schema: Schema, with_gold: bool = True
) -> list[PromptInstance]:
    """One instance per role of the event: masked role description questions.

    The trigger is wrapped with <t0>/</t0> both inside the passage and in the
    appended event statement. Gold answers join the role's argument surfaces
    with `` | `` in sentence order, or "None" when the role is unfilled.
    """
    _require_markers(passage)
    span = _passage_span(passage, event.trigger_span)  # raises if outside focus
    surface = passage.text[span[0] : span[1]]
    wrapped = _splice(
        passage,
        [(span[0], span[0], trigger_open(0) + " "), (span[1], span[1], " " + trigger_close(0))],
    )
    statement = _event_statement(0, event.subtype, surface)
    instances = []
    for role in roles_for(schema, event.subtype):
        fillers = sorted((a for a in event.arguments if a.role == role.name), key=lambda a: a.span)
        gold = tuple(a.surface for a in fillers) or (NA_ANSWER,)
        slot = Slot(
            sentinel=0,
            gold=gold if with_gold else (),
            bind={"subtype": event.subtype, "role": role.name},
        )
        input_text = " ".join(
            [wrapped.text, _render(role.description_template, sentinel(0)), statement]
        )
        target = serialize_target([_join_gold(gold)]) if with_gold else ""
        instances.append(
            PromptInstance(
                family="single_argument",
                input_text=input_text,
                target_text=target,
                slots=(slot,),
                passage=wrapped,
                meta={"trigger_surface": surface},
            )
        )
    return instances


def build_joint_argument_prompt(
    passage: Passage, events: Sequence[EventMention], schema: Schema, seed: int
) -> PromptInstance:
    """Mask every argument occurrence; append shuffled role descriptions.

    Arguments sharing an identical span share one sentinel (and produce one
    slot per (event, role) question); partially overlapping spans reject the
    instance. Role descriptions are informative (mask slot elided), name
    their event and role, and are shuffled deterministically by ``seed`` so
    the model cannot rely on prompt order. Event statements with <tk>-indexed
    trigger words follow the descriptions.
    """
    _require_markers(passage)
    if not events:
        raise PromptError("joint argument prompt needs at least one event")
    ordered = sorted(events, key=lambda m: m.trigger_span)

    records = []  # (event_idx, role, span, surface)
    for k, ev in enumerate(ordered):
        _passage_span(passage, ev.trigger_span)  # trigger must sit in focus
        role_names = {r.name for r in roles_for(schema, ev.subtype)}
        for arg in ev.arguments:
            if arg.role not in role_names:
                raise PromptError(f"role {arg.role!r} not declared for subtype {ev.subtype!r}")
            if not passage.contains_doc_span(arg.span):
                raise InstanceRejected(f"argument span {arg.span} outside focus")
            records.append((k, arg.role, arg.span, arg.surface))
    if not records:
        raise PromptError("joint argument prompt needs at least one argument")

    unique_spans = sorted({span for _, _, span, _ in records})
    prev_end = -1
    for span in unique_spans:
        if span[0] < prev_end:
            raise InstanceRejected("partially overlapping argument spans")
        prev_end = span[1]
    _check_budget(len(unique_spans))
    sentinel_of = {span: k for k, span in enumerate(unique_spans)}

    edits = []
    answers = []
    for k, span in enumerate(unique_spans):
        pspan = _passage_span(passage, span)
        answers.append(passage.text[pspan[0] : pspan[1]])
        edits.append((pspan[0], pspan[1], sentinel(k)))
    masked = _splice(passage, edits)

    descriptions = []
    slots = []
    role_templates = {
        (r.event_subtype, r.name): r.description_template for r in schema.roles
    }
    for event_idx, role, span, _ in records:
        subtype = ordered[event_idx].subtype
        descriptions.append(
            f"event {event_idx} {role} : "
            + _render_informative(role_templates[(subtype, role)])
        )
        slots.append(
            Slot(
                sentinel=sentinel_of[span],
                gold=(answers[sentinel_of[span]],),
                bind={"subtype": subtype, "role": role},
            )
        )
    random.Random(seed).shuffle(descriptions)

    statements = [
        _event_statement(k, ev.subtype, _surface(passage, ev.trigger_span))
        for k, ev in enumerate(ordered)
    ]
    input_text = " ".join([masked.text, *descriptions, *statements])
    target = serialize_target(answers)
    return PromptInstance(
        family="joint_argument",
        input_text=input_text,
        target_text=target,
        slots=tuple(slots),
        passage=masked,
    )


def instance_to_dict(instance: PromptInstance) -> dict:
    origin = instance.origin
    record = {
        "family": instance.family,
        "input_text": instance.input_text,
        "target_text": instance.target_text,
        "slots": [
            {"sentinel": s.sentinel, "gold": list(s.gold), "bind": s.bind}
            for s in instance.slots
        ],
        "origin": None
        if origin is None
        else {"doc_id": origin[0], "sentence_range": list(origin[1])},
    }
    if instance.passage is not None:
        record["passage"] = {
            "text": instance.passage.text,
            "focus_span": list(instance.passage.focus_span),
            "offset_map": list(instance.passage.offset_map),
        }
    extra = {k: v for k, v in instance.meta.items() if k != "origin"}
    if extra:
        record["meta"] = extra
    return record


def instance_from_dict(record: dict) -> PromptInstance:
    """Rebuild an instance from its JSONL form."""
    meta = dict(record.get("meta", {}))
    origin = record.get("origin")
    if origin:
        meta["origin"] = (origin["doc_id"], tuple(origin["sentence_range"]))
    passage = None
    if "passage" in record and origin:
        p = record["passage"]
        passage = Passage(
            text=p["text"],
            focus_span=tuple(p["focus_span"]),
            origin=(origin["doc_id"], tuple(origin["sentence_range"])),
            offset_map=tuple(p["offset_map"]),
        )
    return PromptInstance(
        family=record["family"],
        input_text=record["input_text"],
        target_text=record["target_text"],
        slots=tuple(
            Slot(sentinel=s["sentinel"], gold=tuple(s["gold"]), bind=dict(s["bind"]))
            for s in record["slots"]
        ),
        passage=passage,
        meta=meta,
    )


def write_instances(instances: Sequence[PromptInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_to_dict(inst), ensure_ascii=False) + "\n")


def read_instances(path: str | Path) -> list[PromptInstance]:
    instances = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                instances.append(instance_from_dict(json.loads(line)))
    return instances
