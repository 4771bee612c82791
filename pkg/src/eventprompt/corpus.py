"""Documents, event annotations, context-window passages, splits, sampling.

Offsets everywhere are 0-based, end-exclusive character positions into the
document text. "Words" are whitespace-delimited tokens of the raw text; no
tokenizer dependency. All functions here are pure over immutable inputs and
safe to run in parallel across documents.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import CorpusError
from .schema import Schema, roles_for

FOCUS_OPEN = "<e>"
FOCUS_CLOSE = "</e>"

# Marker and sentinel text must never occur in raw corpus text, otherwise
# passages and mask-filling become ambiguous.
RESERVED_PATTERN = re.compile(r"</?e>|</?t\d+>|<extra_id_\d+>|</s>")

_WORD = re.compile(r"\S+")


@dataclass(frozen=True)
class Document:
    """Source text with pre-segmented sentence spans."""

    doc_id: str
    text: str
    sentences: tuple[tuple[int, int], ...]

    def __post_init__(self):
        prev_end = 0
        for start, end in self.sentences:
            if not (0 <= start < end <= len(self.text)):
                raise CorpusError(f"{self.doc_id}: sentence span ({start},{end}) out of bounds")
            if start < prev_end:
                raise CorpusError(f"{self.doc_id}: sentence spans overlap or are out of order")
            prev_end = end

    def sentence_text(self, index: int) -> str:
        start, end = self.sentences[index]
        return self.text[start:end]


@dataclass(frozen=True)
class Argument:
    role: str
    span: tuple[int, int]
    surface: str


@dataclass(frozen=True)
class EventMention:
    """One annotated event: subtype, trigger span, and role-labelled arguments."""

    doc_id: str
    sentence_index: int
    subtype: str
    trigger_span: tuple[int, int]
    arguments: tuple[Argument, ...] = ()


@dataclass(frozen=True)
class Passage:
    """A context window around focus sentences, with exact offset grounding.

    ``text`` contains exactly one <e> ... </e> pair wrapping the focus
    region. ``offset_map[i]`` gives the document offset of passage character
    i, or None for inserted marker/separator characters. ``focus_span`` is the
    passage-coordinate span of the focus region (markers excluded).
    """

    text: str
    focus_span: tuple[int, int]
    origin: tuple[str, tuple[int, int]]
    offset_map: tuple[int | None, ...]

    @property
    def focus_text(self) -> str:
        return self.text[self.focus_span[0] : self.focus_span[1]]

    def doc_pos_to_passage(self, doc_pos: int) -> int:
        """Map a document offset inside the focus region to a passage offset."""
        focus_start_doc = self.offset_map[self.focus_span[0]]
        assert focus_start_doc is not None
        offset = doc_pos - focus_start_doc
        if not 0 <= offset <= self.focus_span[1] - self.focus_span[0]:
            raise CorpusError(f"document offset {doc_pos} outside passage focus")
        return self.focus_span[0] + offset

    def passage_span_to_doc(self, span: tuple[int, int]) -> tuple[int, int] | None:
        """Map a passage span back to document offsets; None if it covers inserted text."""
        start, end = span
        if start >= end or end > len(self.text):
            return None
        doc_start = self.offset_map[start]
        doc_end = self.offset_map[end - 1]
        if doc_start is None or doc_end is None:
            return None
        return (doc_start, doc_end + 1)

    def contains_doc_span(self, span: tuple[int, int]) -> bool:
        focus_start_doc = self.offset_map[self.focus_span[0]]
        focus_len = self.focus_span[1] - self.focus_span[0]
        if focus_start_doc is None:
            return False
        return focus_start_doc <= span[0] and span[1] <= focus_start_doc + focus_len


def trigger_surface(doc: Document, mention: EventMention) -> str:
    start, end = mention.trigger_span
    return doc.text[start:end]


def _word_spans(text: str) -> list[tuple[int, int]]:
    return [m.span() for m in _WORD.finditer(text)]


def make_passage(doc: Document, sentence_range: tuple[int, int], window_words: int) -> Passage:
    """Wrap focus sentences in <e>/</e> and pad with context words.

    ``sentence_range`` is an inclusive (first, last) pair of sentence indices.
    The context budget is ``window_words`` minus the focus word count, split
    as evenly as possible between the two sides; when one side runs out of
    document, the remainder moves to the other side. With an odd leftover the
    right side receives the extra word.
    """
    first, last = sentence_range
    if window_words < 0:
        raise CorpusError(f"window_words must be >= 0, got {window_words}")
    if not (0 <= first <= last < len(doc.sentences)):
        raise CorpusError(f"{doc.doc_id}: invalid sentence range ({first},{last})")

    focus_start = doc.sentences[first][0]
    focus_end = doc.sentences[last][1]
    focus = doc.text[focus_start:focus_end]

    budget = max(0, window_words - len(focus.split()))
    left_words = _word_spans(doc.text[:focus_start])
    right_words = [
        (focus_end + s, focus_end + e) for s, e in _word_spans(doc.text[focus_end:])
    ]

    left_take = min(len(left_words), budget // 2)
    right_take = min(len(right_words), budget - left_take)
    left_take = min(len(left_words), budget - right_take)

    pieces: list[tuple[str, int | None]] = []  # (text, doc offset of first char or None)
    if left_take:
        start = left_words[-left_take][0]
        pieces.append((doc.text[start : left_words[-1][1]], start))
    pieces.append((FOCUS_OPEN, None))
    pieces.append((focus, focus_start))
    pieces.append((FOCUS_CLOSE, None))
    if right_take:
        end = right_words[right_take - 1][1]
        pieces.append((doc.text[right_words[0][0] : end], right_words[0][0]))

    chars: list[str] = []
    offsets: list[int | None] = []
    focus_span = (0, 0)
    for i, (piece, doc_offset) in enumerate(pieces):
        if i > 0:
            chars.append(" ")
            offsets.append(None)
        if piece == focus and doc_offset == focus_start:
            focus_span = (len(chars), len(chars) + len(piece))
        for j, ch in enumerate(piece):
            chars.append(ch)
            offsets.append(None if doc_offset is None else doc_offset + j)

    return Passage(
        text="".join(chars),
        focus_span=focus_span,
        origin=(doc.doc_id, (first, last)),
        offset_map=tuple(offsets),
    )


def merge_adjoining(
    doc: Document, mentions: list[EventMention], max_gap_sentences: int = 3
) -> list[tuple[int, int]]:
    """Maximal sentence ranges whose event-bearing sentences sit close together.

    Consecutive event-bearing sentences at most ``max_gap_sentences`` apart
    fall into one range; range endpoints are always event-bearing. Sentences
    without events never start or end a range.
    """
    event_sents = sorted({m.sentence_index for m in mentions if m.doc_id == doc.doc_id})
    ranges: list[tuple[int, int]] = []
    for idx in event_sents:
        if ranges and idx - ranges[-1][1] <= max_gap_sentences:
            ranges[-1] = (ranges[-1][0], idx)
        else:
            ranges.append((idx, idx))
    return ranges


def assign_splits(documents: list[Document], config: dict) -> dict[str, str]:
    """Partition documents into train/dev/test.

    Two config forms:
      explicit lists:  {"train": [ids], "dev": [ids], "test": [ids]}
        must be disjoint and cover every document.
      seeded counts:   {"counts": {"train": n, "dev": n, "test": n}, "seed": s}
        deterministic shuffle; documents beyond the requested counts are left
        unassigned.
    """
    names = ("train", "dev", "test")
    all_ids = [d.doc_id for d in documents]
    if "counts" in config:
        counts = {k: int(config["counts"].get(k, 0)) for k in names}
        total = sum(counts.values())
        if total > len(documents):
            raise CorpusError(f"split counts sum to {total} but corpus has {len(documents)} documents")
        order = sorted(all_ids)
        random.Random(config.get("seed", 0)).shuffle(order)
        assignment = {}
        pos = 0
        for name in names:
            for doc_id in order[pos : pos + counts[name]]:
                assignment[doc_id] = name
            pos += counts[name]
        return assignment
    assignment = {}
    known = set(all_ids)
    for name in names:
        for doc_id in config.get(name, []):
            if doc_id not in known:
                raise CorpusError(f"split {name!r} names unknown document {doc_id!r}")
            if doc_id in assignment:
                raise CorpusError(f"document {doc_id!r} assigned to both {assignment[doc_id]!r} and {name!r}")
            assignment[doc_id] = name
    missing = known - set(assignment)
    if missing:
        raise CorpusError(f"documents not covered by any split: {sorted(missing)[:5]}")
    return assignment


def fewshot_sample(mentions: list[EventMention], k: int, seed: int) -> list[EventMention]:
    """k-shot sample: per subtype, min(k, available) mentions without replacement.

    Deterministic per seed; output keeps the input order of selected mentions.
    Subtypes with fewer than k mentions contribute everything they have.
    """
    if k < 0:
        raise CorpusError(f"k must be >= 0, got {k}")
    by_subtype: dict[str, list[int]] = {}
    for i, m in enumerate(mentions):
        by_subtype.setdefault(m.subtype, []).append(i)
    rng = random.Random(seed)
    chosen: set[int] = set()
    for subtype in sorted(by_subtype):
        pool = by_subtype[subtype]
        chosen.update(rng.sample(pool, min(k, len(pool))))
    return [mentions[i] for i in sorted(chosen)]


def _check_reserved(doc_id: str, text: str) -> None:
    hit = RESERVED_PATTERN.search(text)
    if hit:
        raise CorpusError(f"{doc_id}: text contains reserved marker {hit.group()!r}")


def ingest(path: str | Path, schema: Schema) -> tuple[list[Document], list[EventMention]]:
    """Read and validate a corpus JSONL file against a schema.

    One JSON object per line:
      {"doc_id", "text", "sentences": [[s,e],...],
       "events": [{"sentence_index", "subtype", "trigger": [s,e],
                   "arguments": [{"role", "span": [s,e], "surface"}]}]}
    """
    docs: list[Document] = []
    mentions: list[EventMention] = []
    role_index: dict[str, set[str]] = {
        st.name: {r.name for r in roles_for(schema, st.name)} for st in schema.subtypes
    }
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                doc = Document(
                    doc_id=str(record["doc_id"]),
                    text=str(record["text"]),
                    sentences=tuple((int(s), int(e)) for s, e in record["sentences"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: malformed document record: {exc}") from exc
            _check_reserved(doc.doc_id, doc.text)
            docs.append(doc)
            for ev in record.get("events", []):
                mentions.append(_parse_mention(doc, ev, role_index, f"{path}:{lineno}"))
    return docs, mentions


def _parse_mention(
    doc: Document, ev: dict, role_index: dict[str, set[str]], where: str
) -> EventMention:
    try:
        sentence_index = int(ev["sentence_index"])
        subtype = str(ev["subtype"])
        trig = (int(ev["trigger"][0]), int(ev["trigger"][1]))
        raw_args = ev.get("arguments", [])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CorpusError(f"{where}: malformed event record: {exc}") from exc
    if subtype not in role_index:
        raise CorpusError(f"{where}: unknown subtype {subtype!r}")
    if not 0 <= sentence_index < len(doc.sentences):
        raise CorpusError(f"{where}: sentence_index {sentence_index} out of range")
    sent_start, sent_end = doc.sentences[sentence_index]
    if not (sent_start <= trig[0] < trig[1] <= sent_end):
        raise CorpusError(f"{where}: trigger span {trig} outside sentence span")
    args = []
    for a in raw_args:
        try:
            role = str(a["role"])
            span = (int(a["span"][0]), int(a["span"][1]))
            surface = str(a["surface"])
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise CorpusError(f"{where}: malformed argument record: {exc}") from exc
        if role not in role_index[subtype]:
            raise CorpusError(f"{where}: role {role!r} not declared for subtype {subtype!r}")
        if not 0 <= span[0] < span[1] <= len(doc.text):
            raise CorpusError(f"{where}: argument span {span} out of bounds")
        if doc.text[span[0] : span[1]] != surface:
            raise CorpusError(
                f"{where}: argument surface {surface!r} does not match text "
                f"{doc.text[span[0]:span[1]]!r} at {span}"
            )
        args.append(Argument(role=role, span=span, surface=surface))
    return EventMention(
        doc_id=doc.doc_id,
        sentence_index=sentence_index,
        subtype=subtype,
        trigger_span=trig,
        arguments=tuple(args),
    )


def corpus_records(docs: list[Document], mentions: list[EventMention]) -> list[dict]:
    by_doc: dict[str, list[EventMention]] = {}
    for m in mentions:
        by_doc.setdefault(m.doc_id, []).append(m)
    records = []
    for doc in docs:
        records.append(
            {
                "doc_id": doc.doc_id,
                "text": doc.text,
                "sentences": [list(s) for s in doc.sentences],
                "events": [
                    {
                        "sentence_index": m.sentence_index,
                        "subtype": m.subtype,
                        "trigger": list(m.trigger_span),
                        "arguments": [
                            {"role": a.role, "span": list(a.span), "surface": a.surface}
                            for a in m.arguments
                        ],
                    }
                    for m in by_doc.get(doc.doc_id, [])
                ],
            }
        )
    return records


def write_corpus(docs: list[Document], mentions: list[EventMention], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in corpus_records(docs, mentions):
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
