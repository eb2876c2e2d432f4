"""Contextual encoders: a deterministic miniature model for tests and a
lazy adapter for pretrained bidirectional transformers.

An encoder consumes a token window plus the target's position and returns
one float32 vector: the dimension-wise sum of its hidden-layer activations
at that position. Targets the underlying tokenizer splits into sub-tokens
are averaged over the sub-token positions.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np


class Encoder(Protocol):
    hidden_size: int

    def encode(self, window: list[str], position: int) -> np.ndarray: ...


def combine_subtokens(vectors: np.ndarray) -> np.ndarray:
    """Mean over the sub-token rows of one word occurrence."""
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise ValueError(f"expected a stack of sub-token vectors, got shape {vectors.shape}")
    return vectors.mean(axis=0)


class ToyOneHotEncoder:
    """One-hot embeddings through ``n_layers`` identity layers.

    Every layer reproduces its input, so the layer sum at the target
    position is ``n_layers`` times the one-hot vector of the target token:
    trivially hand-computable, which is the point.
    """

    def __init__(self, vocabulary: list[str], n_layers: int = 1):
        if n_layers < 1:
            raise ValueError("need at least one layer")
        self.vocabulary = sorted(set(vocabulary))
        self.index = {token: i for i, token in enumerate(self.vocabulary)}
        self.n_layers = n_layers
        self.hidden_size = len(self.vocabulary)

    def layer_activations(self, window: list[str]) -> np.ndarray:
        """(n_layers, n_tokens, hidden) activation stack."""
        embeddings = np.zeros((len(window), self.hidden_size), dtype=np.float32)
        for pos, token in enumerate(window):
            if token in self.index:  # out-of-vocabulary tokens embed to zero
                embeddings[pos, self.index[token]] = 1.0
        return np.repeat(embeddings[None, :, :], self.n_layers, axis=0)

    def encode(self, window: list[str], position: int) -> np.ndarray:
        if not 0 <= position < len(window):
            raise ValueError(f"position {position} outside window of {len(window)} tokens")
        return self.layer_activations(window)[:, position, :].sum(axis=0)


class BagOfWindowEncoder(ToyOneHotEncoder):
    """Context-sensitive miniature model, still hand-computable.

    Each layer maps position ``i`` to its one-hot embedding plus the mean
    one-hot over the window (identity plus uniform attention), so the layer
    sum at the target is ``n_layers * (onehot(target) + window_mean)``.
    Unlike the pure identity toy, occurrences in different contexts get
    different vectors, which makes it useful for pipeline demos.
    """

    def layer_activations(self, window: list[str]) -> np.ndarray:
        embeddings = np.zeros((len(window), self.hidden_size), dtype=np.float32)
        for pos, token in enumerate(window):
            if token in self.index:
                embeddings[pos, self.index[token]] = 1.0
        mixed = embeddings + embeddings.mean(axis=0, keepdims=True)
        return np.repeat(mixed[None, :, :], self.n_layers, axis=0)


class TransformerEncoder:
    """Pretrained bidirectional transformer adapter (torch + transformers).

    Sums the transformer block outputs (the embedding output is excluded)
    at the target word's sub-token positions, averaged over sub-tokens.
    The model runs in eval mode with gradients off, so repeated calls are
    deterministic.
    """

    def __init__(self, model_name: str):
        import torch
        from transformers import AutoModel, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_name, use_fast=True)
        self.model = AutoModel.from_pretrained(model_name, output_hidden_states=True)
        self.model.eval()
        self.hidden_size = int(self.model.config.hidden_size)

    def encode(self, window: list[str], position: int) -> np.ndarray:
        encoding = self.tokenizer(
            window,
            is_split_into_words=True,
            return_tensors="pt",
            truncation=True,
        )
        word_ids = encoding.word_ids(0)
        positions = [i for i, w in enumerate(word_ids) if w == position]
        if not positions:
            raise ValueError(f"target position {position} was truncated away")
        with self._torch.no_grad():
            out = self.model(**encoding)
        stack = self._torch.stack(out.hidden_states[1:])  # layers only
        summed = stack.sum(dim=0)[0]  # (tokens, hidden)
        return combine_subtokens(summed[positions].cpu().numpy())


def build_encoder(model: str, vocabulary: list[str]) -> Encoder:
    """``"toy[:N]"`` for the identity miniature model, ``"toy-context[:N]"``
    for the context-mixing one, ``"hf:NAME"`` for a pretrained transformer."""
    name, _, layers = model.partition(":")
    if name == "toy":
        return ToyOneHotEncoder(vocabulary, n_layers=int(layers) if layers else 1)
    if name == "toy-context":
        return BagOfWindowEncoder(vocabulary, n_layers=int(layers) if layers else 1)
    if name == "hf":
        if not layers:
            raise ValueError("'hf:' needs a model name, e.g. 'hf:bert-base-uncased'")
        return TransformerEncoder(layers)
    raise ValueError(
        f"unknown model {model!r}; expected 'toy[:N]', 'toy-context[:N]' or 'hf:NAME'"
    )
