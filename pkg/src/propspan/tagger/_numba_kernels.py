"""numba-compiled twins of ``_numpy_kernels``; same signatures, same results."""

import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True)
def emission_scores(weights, feats, offsets):
    n = offsets.shape[0] - 1
    t = weights.shape[1]
    out = np.zeros((n, t), dtype=np.float64)
    for i in range(n):
        for k in range(offsets[i], offsets[i + 1]):
            f = feats[k]
            for j in range(t):
                out[i, j] += weights[f, j]
    return out


@njit(cache=True)
def _viterbi(emissions, transitions, allowed, allowed_start):
    n, t = emissions.shape
    delta = np.empty(t, dtype=np.float64)
    nxt = np.empty(t, dtype=np.float64)
    back = np.zeros((n, t), dtype=np.int64)
    for j in range(t):
        delta[j] = emissions[0, j] if allowed_start[j] else NEG_INF
    for i in range(1, n):
        for cur in range(t):
            best = NEG_INF
            arg = 0
            first = True
            for prev in range(t):
                s = delta[prev] + transitions[prev, cur] if allowed[prev, cur] else NEG_INF
                # strict comparison keeps the lowest previous tag on ties
                if first or s > best:
                    best = s
                    arg = prev
                    first = False
            back[i, cur] = arg
            nxt[cur] = best + emissions[i, cur]
        delta[:] = nxt
    path = np.zeros(n, dtype=np.int64)
    last = 0
    for j in range(1, t):
        if delta[j] > delta[last]:
            last = j
    path[n - 1] = last
    for i in range(n - 1, 0, -1):
        path[i - 1] = back[i, path[i]]
    return path, delta[last]


def viterbi(emissions, transitions, allowed, allowed_start):
    path, best = _viterbi(emissions, transitions, allowed, allowed_start)
    return path, float(best)


@njit(cache=True)
def path_score(emissions, transitions, path):
    n = path.shape[0]
    score = 0.0
    for i in range(n):
        score += emissions[i, path[i]]
    for i in range(1, n):
        score += transitions[path[i - 1], path[i]]
    return score


@njit(cache=True)
def perceptron_update(weights, acc, feats, offsets, gold, pred, step, count):
    for i in range(gold.shape[0]):
        g = gold[i]
        p = pred[i]
        if g == p:
            continue
        for k in range(offsets[i], offsets[i + 1]):
            f = feats[k]
            weights[f, g] += step
            weights[f, p] -= step
            acc[f, g] += count * step
            acc[f, p] -= count * step


@njit(cache=True)
def transition_update(transitions, acc, gold, pred, step, count):
    for i in range(1, gold.shape[0]):
        transitions[gold[i - 1], gold[i]] += step
        transitions[pred[i - 1], pred[i]] -= step
        acc[gold[i - 1], gold[i]] += count * step
        acc[pred[i - 1], pred[i]] -= count * step
