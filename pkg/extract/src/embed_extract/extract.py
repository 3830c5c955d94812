"""TSV to embedding-record extraction.

Reads tweets (``id <tab> text <tab> label`` with an optional fourth
``lang`` column and an optional header row), preprocesses the text,
encodes the surviving rows in batches, and writes the canonical
JSON-lines record format: one ``{"_meta": ...}`` header line recording
the model and pooling strategy, then one record object per tweet.

The encoder is pluggable: anything with ``encode(texts) -> (n, dim)``
works, which keeps the tool testable without downloading a checkpoint.
The real encoder wraps a transformers checkpoint with mean (or CLS)
pooling over the final hidden states.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .preprocess import preprocess

__all__ = ["RawTweet", "TransformerEncoder", "read_tweets", "extract"]

log = logging.getLogger("embed_extract")

DEFAULT_MODEL = "castorini/afriberta_large"

LABELS = {"negative": 0, "neutral": 1, "positive": 2}


@dataclass(frozen=True)
class RawTweet:
    id: str
    text: str
    label: str
    language: str


class ExtractionError(Exception):
    pass


def _encode_label(text: str) -> int:
    key = text.strip().lower()
    if key.isdigit() and int(key) in (0, 1, 2):
        return int(key)
    if key not in LABELS:
        raise ExtractionError(f"unknown label {text!r}; expected one of {sorted(LABELS)}")
    return LABELS[key]


def read_tweets(tsv_path, lang: str | None = None) -> list[RawTweet]:
    """Parse the TSV; a header row naming id/tweet/label is skipped."""
    tweets = []
    with open(tsv_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if lineno == 1 and parts[0].strip().lower() in ("id", "tweet_id"):
                continue
            if len(parts) == 3:
                if lang is None:
                    raise ExtractionError(
                        f"{tsv_path}: line {lineno}: no language column; pass --lang"
                    )
                rec_id, text, label = parts
                language = lang
            elif len(parts) == 4:
                rec_id, text, label, language = parts
            else:
                raise ExtractionError(
                    f"{tsv_path}: line {lineno}: expected 3 or 4 tab-separated fields, got {len(parts)}"
                )
            tweets.append(RawTweet(id=rec_id, text=text, label=label, language=language))
    return tweets


class TransformerEncoder:
    """Sentence embeddings from a transformers checkpoint.

    ``pooling`` is "mean" (attention-mask-weighted mean over final hidden
    states) or "cls" (first token). Inference only; the checkpoint is
    never fine-tuned here.
    """

    def __init__(self, model_id: str = DEFAULT_MODEL, pooling: str = "mean"):
        if pooling not in ("mean", "cls"):
            raise ExtractionError(f"pooling must be 'mean' or 'cls', got {pooling!r}")
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise ExtractionError(
                "the transformers/torch stack is required for real extraction; "
                "install with: pip install 'embed-extract[model]'"
            ) from exc
        self._torch = torch
        self.pooling = pooling
        self.model_id = model_id
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as exc:
            raise ExtractionError(
                f"could not load checkpoint {model_id!r}: {exc}. "
                "Check the model id, network access, or HF_HOME cache."
            ) from exc
        self.model.eval()

    def encode(self, texts: list[str]) -> np.ndarray:
        torch = self._torch
        tokens = self.tokenizer(
            texts, padding=True, truncation=True, max_length=128, return_tensors="pt"
        )
        with torch.no_grad():
            hidden = self.model(**tokens).last_hidden_state
        if self.pooling == "cls":
            pooled = hidden[:, 0]
        else:
            mask = tokens["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
        return pooled.numpy().astype(np.float64)


def extract(
    tsv_path,
    out_path,
    encoder,
    lang: str | None = None,
    batch_size: int = 32,
    meta: dict | None = None,
) -> dict:
    """Run the pipeline; returns counts {kept, dropped, dimension}.

    Writes the canonical record format the classification engine reads:
    a ``_meta`` header line, then one JSON object per kept tweet.
    """
    if batch_size < 1:
        raise ExtractionError(f"batch size must be >= 1, got {batch_size}")
    tweets = read_tweets(tsv_path, lang=lang)
    kept: list[tuple[RawTweet, str, int]] = []
    dropped = 0
    for tweet in tweets:
        cleaned = preprocess(tweet.text)
        if not cleaned:
            dropped += 1
            log.info("dropping %s: empty after preprocessing", tweet.id)
            continue
        kept.append((tweet, cleaned, _encode_label(tweet.label)))

    vectors = []
    for start in range(0, len(kept), batch_size):
        batch = [cleaned for _, cleaned, _ in kept[start : start + batch_size]]
        encoded = np.asarray(encoder.encode(batch), dtype=np.float64)
        if encoded.ndim != 2 or encoded.shape[0] != len(batch):
            raise ExtractionError(
                f"encoder returned shape {encoded.shape} for a batch of {len(batch)}"
            )
        vectors.append(encoded)
    matrix = np.vstack(vectors) if vectors else np.zeros((0, 0))

    header = {"_meta": dict(meta or {}, records=len(kept), dropped=dropped)}
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for (tweet, _, label), vec in zip(kept, matrix):
            row = {
                "id": tweet.id,
                "lang": tweet.language,
                "label": label,
                "vec": [float(v) for v in vec.astype(np.float32)],
            }
            fh.write(json.dumps(row) + "\n")
    return {"kept": len(kept), "dropped": dropped, "dimension": int(matrix.shape[1])}
