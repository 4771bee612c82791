"""Sequence-to-sequence backend contract, constrained decoding, training.

Decoding is greedy and vocabulary-constrained: at every step the logits of
tokens outside the allowed set are forced to -inf before the argmax, so the
model can only copy tokens of the input plus the structural tokens
(sentinels, end marker, "None", the answer separator). Ties break toward the
lowest token id for cross-platform determinism.

All core logic runs against MockBackend, a deterministic table-driven model
small enough to hand-verify; real models plug in through the same interface
(see hf_adapter).
"""

from __future__ import annotations

import dataclasses
import random
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import Passage
from .errors import GenerationError
from .prompting import (
    ANSWER_SEP,
    END_MARKER,
    MAX_SENTINELS,
    NA_ANSWER,
    AnswerMap,
    PromptInstance,
    parse_generation,
    sentinel,
)

STRUCTURAL_TOKENS = tuple(
    [sentinel(k) for k in range(MAX_SENTINELS)] + [END_MARKER, NA_ANSWER, ANSWER_SEP]
)

MOCK_VOCAB_LIMIT = 64


class Seq2SeqBackend(ABC):
    """Minimal encoder-decoder contract the pipeline needs.

    Implementations must be deterministic in inference mode: identical
    (input, prefix) pairs yield identical logits. Training mutates backend
    state and must not run concurrently with decoding on the same instance.
    """

    @abstractmethod
    def tokenize(self, text: str) -> list[int]: ...

    @abstractmethod
    def detokenize(self, ids: Sequence[int]) -> str: ...

    @abstractmethod
    def token_id(self, token: str) -> int | None:
        """Id of a single token, or None when the token is unknown."""

    @abstractmethod
    def next_logits(self, encoder_ids: Sequence[int], prefix_ids: Sequence[int]) -> np.ndarray:
        """Logits over the full vocabulary for the next decoder position."""

    @abstractmethod
    def train_step(self, batch: Sequence[tuple[list[int], list[int]]], learning_rate: float) -> float:
        """One update on a batch of (input ids, target ids); returns the loss
        (mean token-level cross entropy over the vocabulary, computed before
        the update)."""


class MockBackend(Seq2SeqBackend):
    """Deterministic table-driven backend over a tiny whitespace vocabulary.

    Logits live in a table keyed by (encoder ids, decoder prefix); missing
    entries read as all-zero logits. Training adds ``learning_rate`` to the
    gold token's logit at each target position, so any positive rate
    memorizes the training pairs exactly while the cross-entropy loss
    decreases monotonically.
    """

    def __init__(self, vocab: Sequence[str]):
        tokens = list(vocab)
        if len(set(tokens)) != len(tokens):
            raise GenerationError("mock vocabulary contains duplicates")
        if any((not t) or re.search(r"\s", t) for t in tokens):
            raise GenerationError("mock vocabulary tokens must be non-empty and whitespace-free")
        if len(tokens) > MOCK_VOCAB_LIMIT:
            raise GenerationError(
                f"mock vocabulary holds {len(tokens)} tokens, limit is {MOCK_VOCAB_LIMIT}"
            )
        self._tokens = tokens
        self._ids = {t: i for i, t in enumerate(tokens)}
        self._table: dict[tuple[tuple[int, ...], tuple[int, ...]], np.ndarray] = {}

    @property
    def vocab_size(self) -> int:
        return len(self._tokens)

    @property
    def vocab(self) -> tuple[str, ...]:
        return tuple(self._tokens)

    def tokenize(self, text: str) -> list[int]:
        ids = []
        for token in text.split():
            if token not in self._ids:
                raise GenerationError(f"token {token!r} not in mock vocabulary")
            ids.append(self._ids[token])
        return ids

    def detokenize(self, ids: Sequence[int]) -> str:
        return " ".join(self._tokens[i] for i in ids)

    def token_id(self, token: str) -> int | None:
        return self._ids.get(token)

    def set_logits(self, encoder_ids: Sequence[int], prefix_ids: Sequence[int], logits) -> None:
        """Rig the table directly (test fixtures)."""
        arr = np.asarray(logits, dtype=float)
        if arr.shape != (self.vocab_size,):
            raise GenerationError(f"logit vector must have shape ({self.vocab_size},)")
        self._table[(tuple(encoder_ids), tuple(prefix_ids))] = arr.copy()

    def next_logits(self, encoder_ids: Sequence[int], prefix_ids: Sequence[int]) -> np.ndarray:
        key = (tuple(encoder_ids), tuple(prefix_ids))
        entry = self._table.get(key)
        if entry is None:
            return np.zeros(self.vocab_size)
        return entry.copy()

    def train_step(self, batch, learning_rate: float) -> float:
        if learning_rate <= 0:
            raise GenerationError("learning rate must be positive")
        total, count = 0.0, 0
        for encoder_ids, target_ids in batch:
            enc = tuple(encoder_ids)
            for i, gold in enumerate(target_ids):
                key = (enc, tuple(target_ids[:i]))
                logits = self._table.setdefault(key, np.zeros(self.vocab_size))
                total += cross_entropy(logits, gold)
                count += 1
                logits[gold] += learning_rate
        if count == 0:
            raise GenerationError("train_step received an empty batch")
        return total / count

    def state_dict(self) -> dict:
        return {
            "vocab": list(self._tokens),
            "table": [
                [list(enc), list(prefix), logits.tolist()]
                for (enc, prefix), logits in sorted(self._table.items())
            ],
        }

    @classmethod
    def from_state_dict(cls, state: dict) -> "MockBackend":
        backend = cls(state["vocab"])
        for enc, prefix, logits in state["table"]:
            backend.set_logits(enc, prefix, logits)
        return backend


def cross_entropy(logits: np.ndarray, gold_id: int) -> float:
    """-log softmax(logits)[gold_id], computed stably."""
    shifted = logits - np.max(logits)
    return float(np.log(np.sum(np.exp(shifted))) - shifted[gold_id])


@dataclass(frozen=True)
class ConstraintSet:
    """Token ids the decoder may emit."""

    allowed_ids: frozenset[int]


def _structural_ids(backend: Seq2SeqBackend) -> set[int]:
    ids = set()
    for token in STRUCTURAL_TOKENS:
        token_id = backend.token_id(token)
        if token_id is not None:
            ids.add(token_id)
    return ids


def build_constraint(backend: Seq2SeqBackend, input_text: str) -> ConstraintSet:
    """Allow exactly the input's tokens plus the structural tokens."""
    return ConstraintSet(frozenset(set(backend.tokenize(input_text)) | _structural_ids(backend)))


def candidate_constraint(backend: Seq2SeqBackend, candidates: Iterable[str]) -> ConstraintSet:
    """Restrict answers to candidate strings (plus structural tokens).

    Used for subtype classification, where the answer space is the candidate
    subtype names rather than the whole input.
    """
    ids = _structural_ids(backend)
    for name in candidates:
        ids.update(backend.tokenize(name))
    return ConstraintSet(frozenset(ids))


@dataclass(frozen=True)
class GroundedSpan:
    passage_span: tuple[int, int]
    doc_span: tuple[int, int] | None
    in_focus: bool


@dataclass(frozen=True)
class GenerationResult:
    token_ids: tuple[int, ...]
    text: str
    answer_map: AnswerMap
    grounded: dict[int, tuple[GroundedSpan | None, ...]] | None = None


def constrained_greedy_decode(
    backend: Seq2SeqBackend,
    input_text: str,
    constraint: ConstraintSet,
    max_len: int,
) -> GenerationResult:
    """Greedy left-to-right decode with out-of-set logits forced to -inf.

    Stops at the end marker or after ``max_len`` tokens. Ties break toward
    the lowest token id (np.argmax picks the first maximum).
    """
    if max_len < 1:
        raise GenerationError(f"max_len must be >= 1, got {max_len}")
    if not constraint.allowed_ids:
        raise GenerationError("empty constraint set: nothing can be generated")
    encoder_ids = backend.tokenize(input_text)
    allowed = sorted(constraint.allowed_ids)
    end_id = backend.token_id(END_MARKER)
    generated: list[int] = []
    while len(generated) < max_len:
        logits = np.asarray(backend.next_logits(encoder_ids, generated), dtype=float)
        masked = np.full(logits.shape, -np.inf)
        masked[allowed] = logits[allowed]
        if not np.any(np.isfinite(masked)):
            raise GenerationError("all allowed tokens have -inf logits")
        token = int(np.argmax(masked))
        generated.append(token)
        if end_id is not None and token == end_id:
            break
    assert all(t in constraint.allowed_ids for t in generated), "constraint violated"
    text = backend.detokenize(generated)
    return GenerationResult(
        token_ids=tuple(generated), text=text, answer_map=parse_generation(text)
    )


def _normalized_pattern(answer: str) -> re.Pattern | None:
    tokens = answer.split()
    if not tokens:
        return None
    # Whitespace-normalized, word-bounded (no-adjacent-non-space) match.
    return re.compile(r"(?<!\S)" + r"\s+".join(re.escape(t) for t in tokens) + r"(?!\S)")


def _locate(answer: str, passage: Passage) -> GroundedSpan | None:
    pattern = _normalized_pattern(answer)
    if pattern is None:
        return None
    fs, fe = passage.focus_span
    match = pattern.search(passage.text, fs, fe)
    in_focus = match is not None
    if match is None:
        match = pattern.search(passage.text)
    if match is None:
        return None
    span = (match.start(), match.end())
    return GroundedSpan(
        passage_span=span, doc_span=passage.passage_span_to_doc(span), in_focus=in_focus
    )


def ground_answers(result: GenerationResult, passage: Passage) -> GenerationResult:
    """Locate each answer as a span: focus region first, then the whole
    passage; first occurrence wins; unlocatable answers become None."""
    grounded: dict[int, tuple[GroundedSpan | None, ...]] = {}
    for index, answers in result.answer_map.entries.items():
        grounded[index] = tuple(_locate(a, passage) for a in answers)
    return dataclasses.replace(result, grounded=grounded)


STAGES = ("trigger_coarse", "trigger_subtype", "argument")


@dataclass(frozen=True)
class TrainConfig:
    """Stage hyperparameters. Defaults per stage mirror the reference setup:
    coarse trigger lr=1e-4 epochs=6, subtype lr=5e-4 batch=8 epochs=3,
    argument lr=1e-3 batch=64; seed 42 everywhere."""

    learning_rate: float
    epochs: int
    batch_size: int
    seed: int = 42
    optimizer: str = "AdamW"
    stage: str | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise GenerationError("learning_rate must be positive")
        if self.epochs < 0:
            raise GenerationError("epochs must be >= 0")
        if self.batch_size <= 0:
            raise GenerationError("batch_size must be positive")

    @classmethod
    def for_stage(cls, stage: str, seed: int = 42) -> "TrainConfig":
        defaults = {
            "trigger_coarse": dict(learning_rate=1e-4, epochs=6, batch_size=8),
            "trigger_subtype": dict(learning_rate=5e-4, epochs=3, batch_size=8),
            "argument": dict(learning_rate=1e-3, epochs=3, batch_size=64),
        }
        if stage not in defaults:
            raise GenerationError(f"unknown stage {stage!r}, expected one of {STAGES}")
        return cls(stage=stage, seed=seed, **defaults[stage])


@dataclass(frozen=True)
class LossPoint:
    epoch: int
    step: int
    loss: float


def train(
    backend: Seq2SeqBackend,
    instances: Sequence[PromptInstance],
    config: TrainConfig,
) -> tuple[Seq2SeqBackend, list[LossPoint]]:
    """Run ``config.epochs`` shuffled passes over the instances.

    Instance order is reshuffled each epoch from one seeded generator, so the
    whole run is a pure function of (backend state, instances, config).
    epochs=0 returns the backend untouched with an empty curve.
    """
    if not instances:
        raise GenerationError("cannot train on an empty instance list")
    for inst in instances:
        if not inst.target_text:
            raise GenerationError("training instance has an empty target")
    pairs = [
        (backend.tokenize(inst.input_text), backend.tokenize(inst.target_text))
        for inst in instances
    ]
    rng = random.Random(config.seed)
    curve: list[LossPoint] = []
    for epoch in range(config.epochs):
        order = list(range(len(pairs)))
        rng.shuffle(order)
        for step, start in enumerate(range(0, len(order), config.batch_size)):
            batch = [pairs[i] for i in order[start : start + config.batch_size]]
            loss = backend.train_step(batch, config.learning_rate)
            curve.append(LossPoint(epoch=epoch, step=step, loss=loss))
    return backend, curve
