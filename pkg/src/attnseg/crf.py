"""Linear-chain CRF over per-position emission scores.

The transition matrix A is (K+2, K+2) for K tags plus two pseudo-tags,
START at index K and END at index K+1.  A sequence y over n positions
scores

    A[START, y_1] + sum_t A[y_t, y_{t+1}] + A[y_n, END] + sum_t P[t, y_t]

emissions contributing at real positions only.  All dynamic programming
runs in log space.  An optional boolean constraint mask of the same shape
as A excludes transitions outright (they contribute -inf); decoding with
the BMES grammar mask can then never emit an invalid sequence.
"""

import numpy as np

from .numerics import ShapeError, logsumexp


def start_index(num_tags):
    return num_tags


def end_index(num_tags):
    return num_tags + 1


def _check(emissions, transitions, mask=None):
    emissions = np.asarray(emissions, dtype=np.float64)
    transitions = np.asarray(transitions, dtype=np.float64)
    if emissions.ndim != 2 or emissions.shape[0] < 1:
        raise ShapeError(f"emissions must be (n >= 1, K), got {emissions.shape}")
    k = emissions.shape[1]
    if transitions.shape != (k + 2, k + 2):
        raise ShapeError(
            f"transitions must be {(k + 2, k + 2)} for {k} tags, "
            f"got {transitions.shape}"
        )
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != transitions.shape:
            raise ShapeError(
                f"mask shape {mask.shape} != transitions shape {transitions.shape}"
            )
        transitions = np.where(mask, transitions, -np.inf)
    return emissions, transitions, k


def sequence_score(emissions, transitions, tags):
    """Score of one tag sequence.

    Accumulated strictly left to right (start transition, then per
    position the incoming transition followed by the emission, then the
    end transition) so that degenerate single-path instances agree
    bit-for-bit with the forward recursion.
    """
    emissions, trans, k = _check(emissions, transitions)
    if len(tags) != emissions.shape[0]:
        raise ValueError(f"{len(tags)} tags for {emissions.shape[0]} positions")
    return float(_masked_sequence_score(emissions, trans, tags, k))


def _forward_table(emissions, trans, k):
    """alpha[t, j]: log-sum score of prefixes ending in tag j at t
    (emissions included through t, start transition included)."""
    n = emissions.shape[0]
    start = start_index(k)
    alpha = np.empty((n, k))
    alpha[0] = trans[start, :k] + emissions[0]
    for t in range(1, n):
        for j in range(k):
            alpha[t, j] = emissions[t, j] + logsumexp(alpha[t - 1] + trans[:k, j])
    return alpha


def _backward_table(emissions, trans, k):
    """beta[t, j]: log-sum score of completing the sequence from tag j at
    position t (emissions after t and the end transition included)."""
    n = emissions.shape[0]
    end = end_index(k)
    beta = np.empty((n, k))
    beta[n - 1] = trans[:k, end]
    for t in range(n - 2, -1, -1):
        for j in range(k):
            beta[t, j] = logsumexp(trans[j, :k] + emissions[t + 1] + beta[t + 1])
    return beta


def log_partition(emissions, transitions, mask=None):
    """log of the summed exponentiated scores over all tag sequences.

    With a constraint mask, excluded transitions contribute nothing; if
    every path is masked out the partition is empty, which is an error.
    """
    emissions, trans, k = _check(emissions, transitions, mask)
    alpha = _forward_table(emissions, trans, k)
    end = end_index(k)
    log_z = logsumexp(alpha[-1] + trans[:k, end])
    if log_z == -np.inf:
        raise ValueError("all tag sequences are masked out")
    return float(log_z)


def _assert_path_allowed(trans, tags, k):
    start, end = start_index(k), end_index(k)
    path = [start] + list(tags) + [end]
    for a, b in zip(path, path[1:]):
        if trans[a, b] == -np.inf:
            raise ValueError(f"gold transition {a} -> {b} is masked out")


def nll_and_grads(emissions, transitions, gold, mask=None):
    """Negative log-likelihood of the gold sequence and its gradients.

    Returns (loss, d_emissions, d_transitions):
      loss = log_partition - sequence_score(gold), always >= 0;
      d_emissions[t, j] = p(y_t = j | x) - 1{gold_t = j};
      d_transitions holds pairwise marginals minus gold counts, including
      the START row and END column.
    """
    emissions, trans, k = _check(emissions, transitions, mask)
    n = emissions.shape[0]
    if len(gold) != n:
        raise ValueError(f"{len(gold)} gold tags for {n} positions")
    if mask is not None:
        _assert_path_allowed(trans, gold, k)
    start, end = start_index(k), end_index(k)

    alpha = _forward_table(emissions, trans, k)
    beta = _backward_table(emissions, trans, k)
    log_z = logsumexp(alpha[-1] + trans[:k, end])
    if log_z == -np.inf:
        raise ValueError("all tag sequences are masked out")

    gold_score = _masked_sequence_score(emissions, trans, gold, k)
    loss = log_z - gold_score

    unary = np.exp(alpha + beta - log_z)

    d_emissions = unary.copy()
    d_emissions[np.arange(n), gold] -= 1.0

    d_trans = np.zeros_like(trans)
    d_trans[start, :k] = unary[0]
    d_trans[start, gold[0]] -= 1.0
    d_trans[:k, end] = unary[-1]
    d_trans[gold[-1], end] -= 1.0
    for t in range(n - 1):
        pair = np.exp(
            alpha[t][:, None] + trans[:k, :k] + emissions[t + 1][None, :]
            + beta[t + 1][None, :] - log_z
        )
        d_trans[:k, :k] += pair
        d_trans[gold[t], gold[t + 1]] -= 1.0
    return float(loss), d_emissions, d_trans


def _masked_sequence_score(emissions, trans, tags, k):
    # Same accumulation order as sequence_score but on the (possibly
    # masked) effective transition matrix.
    n = emissions.shape[0]
    start, end = start_index(k), end_index(k)
    score = trans[start, tags[0]] + emissions[0, tags[0]]
    for t in range(1, n):
        score = score + trans[tags[t - 1], tags[t]]
        score = score + emissions[t, tags[t]]
    return score + trans[tags[n - 1], end]


def viterbi(emissions, transitions, mask=None):
    """Highest-scoring tag sequence and its score.

    Ties break toward the lowest tag id at each backtracking step.  With
    the grammar mask active the result is always grammar-valid; if no
    path is feasible at all, raises.
    """
    emissions, trans, k = _check(emissions, transitions, mask)
    n = emissions.shape[0]
    start, end = start_index(k), end_index(k)
    delta = trans[start, :k] + emissions[0]
    back = np.zeros((n, k), dtype=np.intp)
    for t in range(1, n):
        cand = delta[:, None] + trans[:k, :k]
        back[t] = np.argmax(cand, axis=0)
        delta = emissions[t] + cand[back[t], np.arange(k)]
    final = delta + trans[:k, end]
    best_last = int(np.argmax(final))
    best_score = final[best_last]
    if best_score == -np.inf:
        raise ValueError("all tag sequences are masked out")
    path = [best_last]
    for t in range(n - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return path, float(best_score)
