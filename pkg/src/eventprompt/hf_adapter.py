"""Adapter wrapping a Hugging Face encoder-decoder model as a Seq2SeqBackend.

The core pipeline and its tests run entirely on MockBackend; this adapter
exists so the same code drives a real pretrained model (e.g. t5-base) for
full-scale runs. It takes model and tokenizer objects directly, so tests can
inject small fakes and deployments can configure loading however they like.
Requires the ``hf`` extra (transformers + torch) only when actually loading
a named model.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import GenerationError
from .generation import Seq2SeqBackend


class HFSeq2SeqBackend(Seq2SeqBackend):
    def __init__(self, model, tokenizer, learning_rate_scale: float = 1.0):
        self.model = model
        self.tokenizer = tokenizer
        self._optimizer = None
        self._optimizer_lr = None
        self._lr_scale = learning_rate_scale

    def tokenize(self, text: str) -> list[int]:
        return list(self.tokenizer(text, add_special_tokens=False)["input_ids"])

    def detokenize(self, ids: Sequence[int]) -> str:
        return self.tokenizer.decode(list(ids), skip_special_tokens=False)

    def token_id(self, token: str) -> int | None:
        vocab = self.tokenizer.get_vocab()
        if token in vocab:
            return vocab[token]
        ids = self.tokenizer(token, add_special_tokens=False)["input_ids"]
        return ids[0] if len(ids) == 1 else None

    def next_logits(self, encoder_ids: Sequence[int], prefix_ids: Sequence[int]) -> np.ndarray:
        import torch

        self.model.eval()
        decoder_start = getattr(self.model.config, "decoder_start_token_id", 0) or 0
        with torch.no_grad():
            out = self.model(
                input_ids=torch.tensor([list(encoder_ids)]),
                decoder_input_ids=torch.tensor([[decoder_start, *prefix_ids]]),
            )
        return out.logits[0, -1, :].detach().cpu().numpy()

    def train_step(self, batch, learning_rate: float) -> float:
        import torch

        if not batch:
            raise GenerationError("train_step received an empty batch")
        if self._optimizer is None or self._optimizer_lr != learning_rate:
            self._optimizer = torch.optim.AdamW(
                self.model.parameters(), lr=learning_rate * self._lr_scale
            )
            self._optimizer_lr = learning_rate
        self.model.train()
        pad = self.tokenizer.pad_token_id or 0
        max_in = max(len(ids) for ids, _ in batch)
        max_out = max(len(ids) for _, ids in batch)
        input_ids = torch.full((len(batch), max_in), pad, dtype=torch.long)
        attention = torch.zeros((len(batch), max_in), dtype=torch.long)
        labels = torch.full((len(batch), max_out), -100, dtype=torch.long)
        for row, (enc, tgt) in enumerate(batch):
            input_ids[row, : len(enc)] = torch.tensor(enc)
            attention[row, : len(enc)] = 1
            labels[row, : len(tgt)] = torch.tensor(tgt)
        out = self.model(input_ids=input_ids, attention_mask=attention, labels=labels)
        self._optimizer.zero_grad()
        out.loss.backward()
        self._optimizer.step()
        return float(out.loss.detach())


def load_hf_backend(model_name: str) -> HFSeq2SeqBackend:
    """Download/load a named seq2seq model. Needs the ``hf`` extra installed."""
    try:
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
    except ImportError as exc:
        raise GenerationError(
            "hf backend requested but transformers is not installed; "
            "pip install 'eventprompt[hf]'"
        ) from exc
    tokenizer = AutoTokenizer.from_pretrained(model_name)
    model = AutoModelForSeq2SeqLM.from_pretrained(model_name)
    return HFSeq2SeqBackend(model, tokenizer)
