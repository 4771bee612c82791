"""Few-shot experiment driver: sample k mentions per subtype, retrain, score.

Each k trains fresh backends from the same initial state (no warm starting
across ks) on instances built only from the sentences that carry sampled
mentions, then evaluates on the full test split.
"""

from __future__ import annotations

import logging
from typing import Callable, Sequence

from .corpus import Document, EventMention, fewshot_sample
from .generation import Seq2SeqBackend
from .pipeline import PipelineConfig, _split_docs, run_pipeline
from .schema import Schema
from .scoring import ScoreReport

logger = logging.getLogger(__name__)


def fewshot_driver(
    docs: Sequence[Document],
    mentions: Sequence[EventMention],
    schema: Schema,
    config: PipelineConfig,
    ks: Sequence[int],
    seed: int,
    backend_factory: Callable[[Sequence[str]], Seq2SeqBackend] | None = None,
) -> dict[int, ScoreReport]:
    """One ScoreReport per k. Sampling pools the train and dev splits."""
    if not ks:
        raise ValueError("ks must be non-empty")
    train_docs, dev_docs, _ = _split_docs(docs, config.splits)
    pool_ids = {d.doc_id for d in train_docs} | {d.doc_id for d in dev_docs}
    pool = [m for m in mentions if m.doc_id in pool_ids]
    reports: dict[int, ScoreReport] = {}
    for k in ks:
        sampled = fewshot_sample(pool, k, seed)
        logger.info("k=%d: sampled %d mentions from a pool of %d", k, len(sampled), len(pool))
        _, report, _ = run_pipeline(
            docs,
            mentions,
            schema,
            config,
            backend_factory=backend_factory,
            train_mentions=sampled,
        )
        reports[k] = report
    return reports
