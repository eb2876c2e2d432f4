"""Extract contextualised usage vectors from a year-labelled corpus into
usage bundles: one vector per target-word occurrence, formed by summing a
bidirectional language model's hidden layers at the target position."""

__version__ = "0.1.0"

from .corpus import CorpusSpec, read_corpus_dir, tokenize, window_around
from .encoders import (
    BagOfWindowEncoder,
    ToyOneHotEncoder,
    TransformerEncoder,
    build_encoder,
    combine_subtokens,
)
from .extract import extract, validate_bundle_against_spec

__all__ = [
    "__version__",
    "CorpusSpec",
    "read_corpus_dir",
    "tokenize",
    "window_around",
    "ToyOneHotEncoder",
    "BagOfWindowEncoder",
    "TransformerEncoder",
    "build_encoder",
    "combine_subtokens",
    "extract",
    "validate_bundle_against_spec",
]
