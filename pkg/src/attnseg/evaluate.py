"""Word-level precision/recall/F1 via exact span matching.

A segmentation is a set of half-open (start, end) character intervals.
A predicted word counts as correct only when the identical interval is
in the gold set.  Corpus scores are micro-averaged: correct/predicted/
gold counts are summed over sentences before the ratios, matching how
segmentation bakeoffs score whole test sets.  0/0 is defined as 0.
"""

from .tagging import word_lengths


def tags_to_spans(tags):
    """Word intervals of a tag sequence; invalid sequences get the same
    repair the decoder applies, so this never raises."""
    spans = set()
    pos = 0
    for length in word_lengths(tags):
        spans.add((pos, pos + length))
        pos += length
    return spans


def _covered(spans):
    return max((end for _, end in spans), default=0)


def prf1(gold, pred):
    """Precision, recall and F1 of one sentence's span sets."""
    gold = set(gold)
    pred = set(pred)
    n_gold = _covered(gold)
    n_pred = _covered(pred)
    if n_gold != n_pred:
        raise ValueError(
            f"span sets cover different lengths: gold {n_gold}, pred {n_pred}"
        )
    correct = len(gold & pred)
    precision = correct / len(pred) if pred else 0.0
    recall = correct / len(gold) if gold else 0.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def score_counts(gold, pred):
    """(correct, predicted, gold) word counts for micro-averaging."""
    gold = set(gold)
    pred = set(pred)
    return len(gold & pred), len(pred), len(gold)


def _ratios(correct, n_pred, n_gold):
    precision = correct / n_pred if n_pred else 0.0
    recall = correct / n_gold if n_gold else 0.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def evaluate_corpus(model, corpus):
    """Micro-averaged (P, R, F1) of masked decoding against gold tags."""
    if len(corpus) == 0:
        raise ValueError("cannot evaluate an empty corpus")
    correct = 0
    n_pred = 0
    n_gold = 0
    for sent in corpus:
        path = model.decode(sent.tokens)
        c, p, g = score_counts(tags_to_spans(sent.tags), tags_to_spans(path))
        correct += c
        n_pred += p
        n_gold += g
    return _ratios(correct, n_pred, n_gold)


def score_segmentations(gold_corpus, pred_corpus):
    """Micro-averaged (P, R, F1) of one corpus's segmentation against
    another's, sentence by sentence (both over the same text)."""
    if len(gold_corpus) != len(pred_corpus):
        raise ValueError(
            f"corpora differ in size: gold {len(gold_corpus)} sentences, "
            f"predicted {len(pred_corpus)}"
        )
    correct = 0
    n_pred = 0
    n_gold = 0
    for i, (gold, pred) in enumerate(zip(gold_corpus, pred_corpus)):
        if len(gold.tokens) != len(pred.tokens):
            raise ValueError(
                f"sentence {i + 1}: gold has {len(gold.tokens)} characters "
                f"but prediction has {len(pred.tokens)}"
            )
        c, p, g = score_counts(
            tags_to_spans(gold.tags), tags_to_spans(pred.tags)
        )
        correct += c
        n_pred += p
        n_gold += g
    return _ratios(correct, n_pred, n_gold)
