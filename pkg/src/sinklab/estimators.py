"""scikit-learn style wrappers over the functional API."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_documents, check_positive_int
from .kvcache import CachePolicy
from .numerics import perplexity_from_bits
from .rtllint import RULES, lint_source, rule_counts
from .score import score_pair
from .transformer import ModelConfig, generate, train_char_lm
from .transformer.generation import streaming_nll_bits
from .transformer.training import TrainingLog
from .vlex import tokenize


def _policy(policy) -> CachePolicy:
    return policy if isinstance(policy, CachePolicy) else CachePolicy.parse(policy)


class CharLM(BaseEstimator):
    """Byte-level toy LM. ``fit`` trains on the concatenated documents,
    ``predict`` greedily continues each prompt."""

    def __init__(self, n_layers=2, n_heads=2, d_model=64, d_ff=128, context_len=64,
                 steps=2000, learning_rate=1.0, batch_size=16, seed=0,
                 policy="dense", max_new=64):
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.d_model = d_model
        self.d_ff = d_ff
        self.context_len = context_len
        self.steps = steps
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.policy = policy
        self.max_new = max_new

    def fit(self, X, y=None):
        corpus = b"\n".join(as_documents(X))
        config = ModelConfig(self.n_layers, self.n_heads, self.d_model, self.d_ff, 256,
                             check_positive_int(self.context_len, "context_len"))
        self.history_ = TrainingLog()
        self.model_ = train_char_lm(corpus, config, steps=check_positive_int(self.steps, "steps"),
                                    seed=self.seed, learning_rate=self.learning_rate,
                                    batch_size=check_positive_int(self.batch_size, "batch_size"),
                                    history=self.history_)
        return self

    def predict(self, X) -> list[bytes]:
        check_is_fitted(self, "model_")
        policy = _policy(self.policy)
        max_new = check_positive_int(self.max_new, "max_new", minimum=0)
        return [bytes(generate(self.model_, list(doc), max_new, policy)) for doc in as_documents(X)]

    def _bits(self, X, policy) -> np.ndarray:
        check_is_fitted(self, "model_")
        policy = _policy(self.policy if policy is None else policy)
        return np.concatenate([streaming_nll_bits(self.model_, list(d), policy)
                               for d in as_documents(X)])

    def perplexity(self, X, policy=None) -> float:
        """Streaming perplexity over all documents under ``policy`` (default: ``self.policy``)."""
        return perplexity_from_bits(self._bits(X, policy))

    def score(self, X, y=None) -> float:
        """Negative mean bits per byte (higher is better)."""
        return -float(np.mean(self._bits(X, None)))


class VerilogTokenizer(TransformerMixin, BaseEstimator):
    """Maps sources to token lists: ``(kind, lexeme)`` keys or bare lexemes."""

    def __init__(self, output="keys"):
        self.output = output

    def fit(self, X, y=None):
        if self.output not in ("keys", "lexemes"):
            raise ValueError(f"output must be 'keys' or 'lexemes', got {self.output!r}")
        self.n_documents_ = len(as_documents(X))
        return self

    def transform(self, X) -> list[list]:
        check_is_fitted(self, "n_documents_")
        streams = [tokenize(d) for d in as_documents(X)]
        if self.output == "keys":
            return [s.keys() for s in streams]
        return [s.lexemes() for s in streams]


class RtlLinter(TransformerMixin, BaseEstimator):
    """Turns each source into a vector of finding counts, one column per rule."""

    def fit(self, X, y=None):
        as_documents(X)
        self.n_features_out_ = len(RULES)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_out_")
        docs = as_documents(X)
        out = np.zeros((len(docs), len(RULES)), dtype=np.int64)
        for i, d in enumerate(docs):
            out[i] = list(rule_counts(lint_source(d)).values())
        return out

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        return np.array(list(RULES), dtype=object)


def token_success_score(y_true, y_pred) -> float:
    """Mean success percentage of generated sources against references."""
    refs, gens = as_documents(y_true, "y_true"), as_documents(y_pred, "y_pred")
    if len(refs) != len(gens):
        raise ValueError(f"y_true has {len(refs)} sources but y_pred has {len(gens)}")
    return float(np.mean([score_pair(r, g).success_pct for r, g in zip(refs, gens)]))
