"""Model assembly: hyperparameters, the parameter dict, and a segmenter
facade tying embeddings, encoder and CRF together.

Parameters live in one ordered dict mapping name -> float64 ndarray:

    emb.uni                      character embedding table
    emb.bi                       bigram table (only with bigrams on)
    enc{L}.{fwd|bwd}.attn.*      attention weights per layer/direction
    enc{L}.{fwd|bwd}.cell.*      gate block per layer/direction
    out.wf, out.wb, out.b        per-tag output projection
    crf.trans                    (K+2, K+2) transition scores

Insertion order is the canonical order for flattening and for the
serialized binary layout.
"""

from dataclasses import dataclass, asdict

import numpy as np

from . import crf, encoder, tagging
from .corpus import (
    Vocab, build_bigram_vocab, featurize, preprocess, random_embeddings,
    sentence_bigrams, window_ids,
)
from .tagging import NUM_TAGS, decode_tags


@dataclass
class TrainConfig:
    batch_size: int = 50
    learning_rate: float = 0.1
    adagrad_epsilon: float = 1e-6
    dropout: float = 0.2
    epochs: int = 30
    seed: int = 42
    hidden: int = 150
    emb_dim: int = 100
    attn_dim: int = None
    extra_layers: int = 0
    window: int = 3
    bigrams: bool = False
    memory_span: int = None
    clip_norm: float = None
    dev_fraction: float = 0.1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.hidden < 1 or self.emb_dim < 1:
            raise ValueError("hidden and emb_dim must be >= 1")
        if self.attn_dim is not None and self.attn_dim < 1:
            raise ValueError(f"attn_dim must be >= 1, got {self.attn_dim}")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 1, got {self.window}")
        if self.extra_layers not in (0, 1, 2):
            raise ValueError(f"extra_layers must be 0, 1 or 2, got {self.extra_layers}")
        if self.memory_span is not None and self.memory_span < 1:
            raise ValueError(f"memory_span must be >= 1, got {self.memory_span}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError(f"clip_norm must be > 0, got {self.clip_norm}")
        if not 0.0 < self.dev_fraction < 1.0:
            raise ValueError(
                f"dev_fraction must be in (0, 1), got {self.dev_fraction}"
            )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)


def pack_params(params):
    """Flatten all parameters into one float64 vector, canonical order."""
    return np.concatenate([params[name].ravel() for name in params])


def unpack_params(vector, params):
    """Inverse of pack_params against a template dict (shapes and order)."""
    vector = np.asarray(vector, dtype=np.float64)
    total = sum(p.size for p in params.values())
    if vector.shape != (total,):
        raise ValueError(f"expected a flat vector of {total} values, got {vector.shape}")
    out = {}
    offset = 0
    for name, p in params.items():
        out[name] = vector[offset:offset + p.size].reshape(p.shape).copy()
        offset += p.size
    return out


class Segmenter:
    """A trained (or trainable) segmentation model.

    Holds the vocabularies, the parameter dict and the configuration;
    exposes per-sentence loss/gradients for training and masked Viterbi
    decoding for inference.
    """

    def __init__(self, config, vocab, params, bigram_vocab=None, lexicon=None):
        if config.bigrams != (bigram_vocab is not None):
            raise ValueError("bigram vocab must be present iff config.bigrams")
        expected = (len(vocab), config.emb_dim)
        if params["emb.uni"].shape != expected:
            raise ValueError(
                f"embedding table {params['emb.uni'].shape} does not match "
                f"vocab/config {expected}"
            )
        self.config = config
        self.vocab = vocab
        self.bigram_vocab = bigram_vocab
        self.params = params
        self.lexicon = lexicon

    @property
    def input_dim(self):
        d = self.config.window * self.config.emb_dim
        if self.config.bigrams:
            d += self.config.emb_dim
        return d

    @property
    def encoder_config(self):
        c = self.config
        return encoder.EncoderConfig(
            input_dim=self.input_dim,
            hidden_dim=c.hidden,
            attn_dim=c.attn_dim if c.attn_dim is not None else c.hidden,
            num_tags=NUM_TAGS,
            extra_layers=c.extra_layers,
            memory_span=c.memory_span,
        )

    @classmethod
    def build(cls, train_corpus, config, embeddings=None, lexicon=None):
        """Fresh model over the training corpus's vocabulary.

        All random draws come from one generator seeded with config.seed,
        in a fixed order (embeddings, bigram embeddings, encoder), so a
        (corpus, config) pair always yields identical initial parameters.
        """
        vocab = Vocab.build(sent.tokens for sent in train_corpus)
        rng = np.random.default_rng(config.seed)
        if embeddings is None:
            emb = random_embeddings(len(vocab), config.emb_dim, rng)
        else:
            emb = np.array(embeddings, dtype=np.float64)
            if emb.shape != (len(vocab), config.emb_dim):
                raise ValueError(
                    f"embeddings {emb.shape} do not match vocab/config "
                    f"{(len(vocab), config.emb_dim)}"
                )
        params = {"emb.uni": emb}
        bigram_vocab = None
        if config.bigrams:
            bigram_vocab = build_bigram_vocab(train_corpus)
            params["emb.bi"] = random_embeddings(
                len(bigram_vocab), config.emb_dim, rng
            )
        enc_cfg = encoder.EncoderConfig(
            input_dim=config.window * config.emb_dim
            + (config.emb_dim if config.bigrams else 0),
            hidden_dim=config.hidden,
            attn_dim=config.attn_dim if config.attn_dim is not None else config.hidden,
            extra_layers=config.extra_layers,
            memory_span=config.memory_span,
        )
        params.update(encoder.init_params(enc_cfg, rng))
        params["crf.trans"] = np.zeros((NUM_TAGS + 2, NUM_TAGS + 2))
        return cls(config, vocab, params, bigram_vocab, lexicon)

    def _encode_tokens(self, tokens):
        ids = self.vocab.encode(tokens)
        if self.bigram_vocab is not None:
            return ids, self.bigram_vocab.encode(sentence_bigrams(tokens))
        return ids, None

    def _features(self, ids, bigram_ids):
        if bigram_ids is not None:
            return featurize(
                ids, self.params["emb.uni"], self.config.window,
                bigram_ids, self.params["emb.bi"],
            )
        return featurize(ids, self.params["emb.uni"], self.config.window)

    def emissions(self, tokens, dropout=0.0, rng=None):
        """Per-tag scores (n, 4) for one token sequence, plus the caches
        needed to push gradients back (ids, bigram ids, encoder cache)."""
        ids, bigram_ids = self._encode_tokens(tokens)
        x = self._features(ids, bigram_ids)
        scores, cache = encoder.forward(
            self.params, self.encoder_config, x, dropout=dropout, rng=rng
        )
        return scores, (ids, bigram_ids, cache)

    def loss_and_grads(self, sentence, dropout=0.0, rng=None, mask=None):
        """NLL of the gold tags and gradients for every parameter.

        The returned dict has exactly the keys of self.params; embedding
        gradients are dense tables with nonzero rows only where looked up.
        """
        scores, (ids, bigram_ids, cache) = self.emissions(
            sentence.tokens, dropout=dropout, rng=rng
        )
        loss, d_scores, d_trans = crf.nll_and_grads(
            scores, self.params["crf.trans"], sentence.tags, mask=mask
        )
        enc_grads, d_inputs = encoder.backward(
            self.params, self.encoder_config, cache, d_scores
        )
        grads = {"emb.uni": np.zeros_like(self.params["emb.uni"])}
        if self.config.bigrams:
            grads["emb.bi"] = np.zeros_like(self.params["emb.bi"])
        d = self.config.emb_dim
        wids = window_ids(ids, self.config.window)
        for j in range(self.config.window):
            np.add.at(grads["emb.uni"], wids[:, j], d_inputs[:, j * d:(j + 1) * d])
        if bigram_ids is not None:
            start = self.config.window * d
            np.add.at(grads["emb.bi"], np.asarray(bigram_ids, dtype=np.intp),
                      d_inputs[:, start:])
        for name in self.params:
            if name in enc_grads:
                grads[name] = enc_grads[name]
        grads["crf.trans"] = d_trans
        return loss, grads

    def nll(self, sentence, mask=None):
        """Loss only, skipping all gradient work (finite-difference
        probes call this thousands of times)."""
        scores, _ = self.emissions(sentence.tokens)
        trans = self.params["crf.trans"]
        return crf.log_partition(scores, trans, mask=mask) \
            - crf.sequence_score(scores, trans, sentence.tags)

    def decode(self, tokens, masked=True):
        """Most likely tag sequence for a token sequence (grammar mask on
        by default, so output is always a valid BMES string)."""
        scores, _ = self.emissions(tokens)
        mask = tagging.transition_mask() if masked else None
        path, _ = crf.viterbi(scores, self.params["crf.trans"], mask=mask)
        return path

    def segment(self, line):
        """Raw text line -> list of words (preprocessed token spelling)."""
        tokens = preprocess(line.strip(), self.lexicon)
        if not tokens:
            return []
        tags = self.decode(tokens)
        return decode_tags(tokens, tags)
