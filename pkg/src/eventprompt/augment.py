"""Data augmentation baselines over single-argument instances.

Word-level augmentation (replacement, insertion, swap, deletion) and
round-trip translation both rewrite only the passage portion of an instance;
sentinels, <e>/<t> markers, the trigger, every gold answer surface, and the
whole prompt section are protected, so targets stay valid. Document offsets
survive for untouched words and are dropped (None) for words an operation
created or moved.
"""

from __future__ import annotations

import inspect
import logging
import random
import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import Passage
from .errors import PromptError
from .prompting import NA_ANSWER, PromptInstance

logger = logging.getLogger(__name__)

EDA_OPERATIONS = ("replace", "insert", "swap", "delete")

_MARKER = re.compile(r"^(</?e>|</?t\d+>)$")


class Lexicon:
    """Synonym source for replacement and insertion. Subclass or wrap a dict."""

    def synonyms(self, word: str) -> Sequence[str]:
        raise NotImplementedError


class DictLexicon(Lexicon):
    def __init__(self, table: dict[str, Sequence[str]]):
        self._table = {k: list(v) for k, v in table.items()}

    def synonyms(self, word: str) -> Sequence[str]:
        return self._table.get(word, [])


class EmptyLexicon(Lexicon):
    def synonyms(self, word: str) -> Sequence[str]:
        return []


@dataclass
class _Word:
    text: str
    doc_offset: int | None  # offset of the first character, None for synthetic words


def _split_instance(instance: PromptInstance) -> tuple[Passage, str]:
    if instance.family != "single_argument":
        raise PromptError(
            f"augmentation operates on single_argument instances, got {instance.family!r}"
        )
    passage = instance.passage
    if passage is None:
        raise PromptError("instance carries no passage; augmentation needs one")
    prefix = passage.text + " "
    if not instance.input_text.startswith(prefix):
        raise PromptError("instance input does not start with its passage text")
    return passage, instance.input_text[len(prefix) :]


def _words_of(passage: Passage) -> list[_Word]:
    words = []
    for match in re.finditer(r"\S+", passage.text):
        words.append(_Word(text=match.group(), doc_offset=passage.offset_map[match.start()]))
    return words


def _protected_surfaces(instance: PromptInstance) -> list[list[str]]:
    surfaces = []
    for slot in instance.slots:
        for gold in slot.gold:
            if gold != NA_ANSWER:
                surfaces.append(gold.split())
    trigger = instance.meta.get("trigger_surface")
    if trigger:
        surfaces.append(trigger.split())
    return surfaces


def _protected_runs(words: list[_Word], surfaces: list[list[str]]) -> set[int]:
    """Indices of words that belong to a marker or any protected surface run."""
    protected = {i for i, w in enumerate(words) if _MARKER.match(w.text)}
    texts = [w.text for w in words]
    for surface in surfaces:
        n = len(surface)
        if n == 0:
            continue
        for start in range(0, len(texts) - n + 1):
            if texts[start : start + n] == surface:
                protected.update(range(start, start + n))
    return protected


def _run_gaps(words: list[_Word], surfaces: list[list[str]]) -> set[int]:
    """Insertion gaps (before word i) that would split a multi-word protected run."""
    blocked = set()
    texts = [w.text for w in words]
    for surface in surfaces:
        n = len(surface)
        if n < 2:
            continue
        for start in range(0, len(texts) - n + 1):
            if texts[start : start + n] == surface:
                blocked.update(range(start + 1, start + n))
    return blocked


def _rebuild_passage(words: list[_Word], template: Passage) -> Passage:
    chars: list[str] = []
    offsets: list[int | None] = []
    open_end = None
    close_start = None
    for i, word in enumerate(words):
        if i > 0:
            chars.append(" ")
            offsets.append(None)
        if word.text == "</e>":
            close_start = len(chars) - 1  # the joining space before </e>
        start = len(chars)
        for j, ch in enumerate(word.text):
            chars.append(ch)
            offsets.append(None if word.doc_offset is None else word.doc_offset + j)
        if word.text == "<e>":
            open_end = len(chars) + 1  # skip the joining space after <e>
    if open_end is None or close_start is None or open_end > close_start:
        raise PromptError("augmented passage lost its <e>/</e> markers")
    return Passage(
        text="".join(chars),
        focus_span=(open_end, close_start),
        origin=template.origin,
        offset_map=tuple(offsets),
    )


def _reassemble(instance: PromptInstance, passage: Passage, prompt_section: str) -> PromptInstance:
    return PromptInstance(
        family=instance.family,
        input_text=passage.text + " " + prompt_section,
        target_text=instance.target_text,
        slots=instance.slots,
        passage=passage,
        meta=instance.meta,
    )


def augment_eda(
    instances: Sequence[PromptInstance],
    seed: int,
    ops_per_instance: int = 1,
    lexicon: Lexicon | None = None,
    operations: Sequence[str] = EDA_OPERATIONS,
) -> list[PromptInstance]:
    """One augmented copy per instance, applying ``ops_per_instance`` random
    word-level operations to the unprotected passage words.

    Operations that cannot apply safely (no synonym available, would corrupt
    a protected token, or would delete the last free word) are skipped.
    """
    unknown = set(operations) - set(EDA_OPERATIONS)
    if unknown:
        raise PromptError(f"unknown EDA operations: {sorted(unknown)}")
    lexicon = lexicon or EmptyLexicon()
    rng = random.Random(seed)
    augmented = []
    for instance in instances:
        passage, prompt_section = _split_instance(instance)
        words = _words_of(passage)
        surfaces = _protected_surfaces(instance)
        for _ in range(ops_per_instance):
            protected = _protected_runs(words, surfaces)
            free = [i for i in range(len(words)) if i not in protected]
            op = rng.choice(list(operations))
            if op == "replace":
                candidates = [i for i in free if lexicon.synonyms(words[i].text)]
                if not candidates:
                    continue
                i = rng.choice(candidates)
                words[i] = _Word(text=rng.choice(list(lexicon.synonyms(words[i].text))), doc_offset=None)
            elif op == "insert":
                candidates = [i for i in free if lexicon.synonyms(words[i].text)]
                if not candidates:
                    continue
                source = rng.choice(candidates)
                blocked = _run_gaps(words, surfaces)
                gaps = [g for g in range(len(words) + 1) if g not in blocked]
                gap = rng.choice(gaps)
                words.insert(
                    gap,
                    _Word(text=rng.choice(list(lexicon.synonyms(words[source].text))), doc_offset=None),
                )
            elif op == "swap":
                if len(free) < 2:
                    continue
                i, j = rng.sample(free, 2)
                words[i], words[j] = (
                    _Word(text=words[j].text, doc_offset=None),
                    _Word(text=words[i].text, doc_offset=None),
                )
            elif op == "delete":
                if len(free) <= 1:
                    continue  # never empty the unprotected passage
                del words[rng.choice(free)]
        augmented.append(_reassemble(instance, _rebuild_passage(words, passage), prompt_section))
    return augmented


def expand_with_eda(
    instances: Sequence[PromptInstance],
    target_count: int,
    seed: int,
    ops_per_instance: int = 1,
    lexicon: Lexicon | None = None,
    operations: Sequence[str] = EDA_OPERATIONS,
) -> list[PromptInstance]:
    """Originals plus augmentation rounds until ``target_count`` instances."""
    out = list(instances)[:target_count]
    round_index = 0
    while len(out) < target_count:
        fresh = augment_eda(
            instances,
            seed=seed + round_index,
            ops_per_instance=ops_per_instance,
            lexicon=lexicon,
            operations=operations,
        )
        out.extend(fresh[: target_count - len(out)])
        round_index += 1
    return out


Translator = Callable[[str], str]


def identity_translator(text: str) -> str:
    return text


_SEGMENT_SPLIT = re.compile(r"(</?e>|</?t\d+>)")


def augment_backtranslate(
    instances: Sequence[PromptInstance],
    translator: Translator,
    seed: int,
) -> list[PromptInstance]:
    """Round-trip the passage text through a translator, re-grounding answers.

    Text segments between markers are translated independently so the marker
    structure survives; the <t0>-wrapped trigger segment is kept verbatim.
    Instances whose gold answers (or trigger) vanish from the round-tripped
    text are dropped with a diagnostic, as are translator failures. ``seed``
    is forwarded to translators that accept a ``seed`` keyword argument.
    """
    accepts_seed = False
    try:
        accepts_seed = "seed" in inspect.signature(translator).parameters
    except (TypeError, ValueError):
        pass

    def run_translator(segment: str) -> str:
        return translator(segment, seed=seed) if accepts_seed else translator(segment)

    kept = []
    for instance in instances:
        passage, prompt_section = _split_instance(instance)
        parts = _SEGMENT_SPLIT.split(passage.text)
        try:
            inside_trigger = False
            new_parts = []
            for part in parts:
                if _SEGMENT_SPLIT.fullmatch(part):
                    if part.startswith("<t"):
                        inside_trigger = True
                    elif part.startswith("</t"):
                        inside_trigger = False
                    new_parts.append(part)
                elif inside_trigger or not part.strip():
                    new_parts.append(part)
                else:
                    translated = run_translator(part.strip())
                    if translated == part.strip():
                        new_parts.append(part)
                    else:
                        lead = part[: len(part) - len(part.lstrip())]
                        trail = part[len(part.rstrip()) :]
                        new_parts.append(lead + translated + trail)
        except Exception as exc:  # translator failures drop the instance
            logger.warning("instance dropped, translator failed: %s", exc)
            continue
        new_text = "".join(new_parts)
        if new_text == passage.text:
            kept.append(instance)
            continue
        rebuilt = _rebuild_from_text(new_text, passage)
        missing = _missing_surfaces(instance, rebuilt)
        if missing:
            logger.warning("instance dropped, answers lost in round-trip: %r", missing)
            continue
        kept.append(_reassemble(instance, rebuilt, prompt_section))
    return kept


def _rebuild_from_text(text: str, template: Passage) -> Passage:
    open_pos = text.find("<e>")
    close_pos = text.find("</e>")
    if open_pos < 0 or close_pos < 0 or close_pos < open_pos:
        raise PromptError("translated passage lost its <e>/</e> markers")
    # Translated passages no longer ground to the source document.
    return Passage(
        text=text,
        focus_span=(open_pos + len("<e> "), close_pos - 1),
        origin=template.origin,
        offset_map=tuple(None for _ in text),
    )


def _missing_surfaces(instance: PromptInstance, passage: Passage) -> list[str]:
    missing = []
    for surface in _protected_surfaces(instance):
        pattern = re.compile(
            r"(?<!\S)" + r"\s+".join(re.escape(t) for t in surface) + r"(?!\S)"
        )
        if not pattern.search(passage.text):
            missing.append(" ".join(surface))
    return missing
