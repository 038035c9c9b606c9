"""Pure-numpy kernels. Reference path and fallback when numba is disabled."""

import numpy as np

NEG_INF = -np.inf


def emission_scores(weights, feats, offsets):
    n = offsets.shape[0] - 1
    out = np.zeros((n, weights.shape[1]), dtype=np.float64)
    if n == 0 or feats.shape[0] == 0:
        return out
    starts = offsets[:-1]
    nonempty = offsets[1:] > starts
    # reduceat on axis 0 accumulates rows in order, matching the jit loop.
    summed = np.add.reduceat(weights[feats], np.minimum(starts, feats.shape[0] - 1), axis=0)
    out[nonempty] = summed[nonempty]
    return out


def viterbi(emissions, transitions, allowed, allowed_start):
    n, t = emissions.shape
    trans = np.where(allowed, transitions, NEG_INF)
    delta = np.where(allowed_start, emissions[0], NEG_INF)
    back = np.zeros((n, t), dtype=np.int64)
    for i in range(1, n):
        cand = delta[:, None] + trans
        # argmax returns the first maximum: lowest previous tag wins ties.
        back[i] = np.argmax(cand, axis=0)
        delta = cand[back[i], np.arange(t)] + emissions[i]
    path = np.zeros(n, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    best = delta[path[-1]]
    for i in range(n - 1, 0, -1):
        path[i - 1] = back[i, path[i]]
    return path, float(best)


def path_score(emissions, transitions, path):
    n = path.shape[0]
    terms = np.concatenate([emissions[np.arange(n), path], transitions[path[:-1], path[1:]]])
    # cumsum is sequential, so rounding matches the jit loop exactly
    return float(np.cumsum(terms)[-1]) if terms.shape[0] else 0.0


def perceptron_update(weights, acc, feats, offsets, gold, pred, step, count):
    """Move emission weights toward gold and away from pred on mismatched tokens.

    ``acc`` receives ``count * delta`` for lazy weight averaging.
    """
    wrong = np.flatnonzero(gold != pred)
    if wrong.shape[0] == 0:
        return
    lengths = offsets[wrong + 1] - offsets[wrong]
    rows = np.concatenate([feats[offsets[i]:offsets[i + 1]] for i in wrong])
    g = np.repeat(gold[wrong], lengths)
    p = np.repeat(pred[wrong], lengths)
    np.add.at(weights, (rows, g), step)
    np.add.at(weights, (rows, p), -step)
    np.add.at(acc, (rows, g), count * step)
    np.add.at(acc, (rows, p), -count * step)


def transition_update(transitions, acc, gold, pred, step, count):
    if gold.shape[0] < 2:
        return
    np.add.at(transitions, (gold[:-1], gold[1:]), step)
    np.add.at(transitions, (pred[:-1], pred[1:]), -step)
    np.add.at(acc, (gold[:-1], gold[1:]), count * step)
    np.add.at(acc, (pred[:-1], pred[1:]), -count * step)
