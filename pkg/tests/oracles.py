"""Independent pure-Python re-evaluations of the defense formulas.

Each check draws 100 random small instances and returns the number of
instances whose library value disagrees with the brute-force value by more
than 1e-9 relative error.
"""
import math
import random

import numpy as np

from darcs import detection as det
from darcs.aggregation import WeightedUpdate, ch_step, weighted_mean
from darcs.reliability import (ReliabilityMetrics, ReliabilityWeights, anomaly_record,
                               contribution_frequency, historical_accuracy, reliability_score)

INSTANCES = 100
REL = 1e-9


def close(a, b) -> bool:
    return math.isclose(a, b, rel_tol=REL, abs_tol=1e-12)


def _vec(r, d):
    return [r.uniform(-5, 5) for _ in range(d)]


def _dot(a, b):
    return math.fsum(x * y for x, y in zip(a, b))


def _cos(a, b):
    return _dot(a, b) / (math.sqrt(_dot(a, a)) * math.sqrt(_dot(b, b)))


def zscore_norms(r):
    norms = [r.uniform(0, 10) for _ in range(r.randint(2, 12))]
    n = len(norms)
    mean = math.fsum(norms) / n
    std = math.sqrt(math.fsum((x - mean) ** 2 for x in norms) / n)
    got = det.zscores(norms)
    return all(close(got[k], (norms[k] - mean) / std) for k in range(n))


def member_cosine(r):
    d = r.randint(2, 8)
    us = [_vec(r, d) for _ in range(r.randint(1, 8))]
    mean = [math.fsum(u[j] for u in us) / len(us) for j in range(d)]
    lib_mean = det.mean_gradient([np.array(u) for u in us])
    return (all(close(lib_mean[j], mean[j]) for j in range(d))
            and all(close(det.cosine(np.array(u), lib_mean).value, _cos(u, mean)) for u in us))


def ch_temporal_cosine(r):
    d = r.randint(2, 8)
    g_prev, ch_prev, ch_now = _vec(r, d), _vec(r, d), _vec(r, d)
    a = [x - y for x, y in zip(ch_now, g_prev)]
    b = [x - y for x, y in zip(ch_prev, g_prev)]
    got = det.cosine(np.array(ch_now) - np.array(g_prev), np.array(ch_prev) - np.array(g_prev)).value
    return close(got, _cos(a, b))


def cross_cluster(r):
    d, c = r.randint(2, 6), r.randint(2, 7)
    deltas = [_vec(r, d) for _ in range(c)]
    sims = det.pairwise_cosines([np.array(x) for x in deltas])
    ok = all(close(sims[p, q], _cos(deltas[p], deltas[q])) for p in range(c) for q in range(c) if p != q)
    for p in range(c):
        avg = math.fsum(_cos(deltas[p], deltas[q]) for q in range(c) if q != p) / (c - 1)
        ok &= close(det.avg_cross_cluster(sims, p), avg)
    return ok


def _random_metrics(r):
    i = r.randint(1, 40)
    accs = [r.random() for _ in range(r.randint(0, i))]
    m = ReliabilityMetrics(rounds_elapsed=i)
    for a in accs:
        m.record_contribution(a)
    m.total_anomalies = r.randint(0, i)
    return m, accs, i


def reliability_metrics(r):
    m, accs, i = _random_metrics(r)
    return (close(historical_accuracy(m), math.fsum(accs) / i)
            and close(contribution_frequency(m), len(accs) / i)
            and close(anomaly_record(m), m.total_anomalies / i))


def reliability_score_eq(r):
    m, accs, i = _random_metrics(r)
    w = ReliabilityWeights(r.uniform(0, 2), r.uniform(0, 2), r.uniform(0.01, 2))
    expected = (w.accuracy_weight * math.fsum(accs) / i + w.frequency_weight * len(accs) / i
                - w.anomaly_weight * m.total_anomalies / i)
    return close(reliability_score(m, w), expected)


def adaptive_tighten(r):
    value, floor, step, trigger = r.uniform(0.3, 1), r.uniform(0, 0.3), r.uniform(0.01, 0.2), r.uniform(0.5, 1)
    acc = r.random()
    expected = max(floor, value - step) if (acc >= trigger and value > floor) else value
    got = det.tighten(det.AdaptiveThreshold(value, floor, step, trigger), acc).value
    return close(got, expected)


def weighted_average(r):
    d, n = r.randint(1, 6), r.randint(1, 8)
    us = [_vec(r, d) for _ in range(n)]
    ws = [r.uniform(0.01, 3) for _ in range(n)]
    got = weighted_mean([WeightedUpdate(np.array(u), w) for u, w in zip(us, ws)])
    total = math.fsum(ws)
    expected = [math.fsum(w * u[j] for u, w in zip(us, ws)) / total for j in range(d)]
    theta, eta = _vec(r, d), r.uniform(0.1, 2)
    stepped = ch_step(np.array(theta), got, eta)
    return (all(close(got[j], expected[j]) for j in range(d))
            and all(close(stepped[j], theta[j] - eta * expected[j]) for j in range(d)))


CHECKS = {
    "norm z-score": zscore_norms,
    "member cosine vs cohort mean": member_cosine,
    "head temporal cosine": ch_temporal_cosine,
    "cross-cluster cosine and average": cross_cluster,
    "reliability metrics": reliability_metrics,
    "reliability score": reliability_score_eq,
    "adaptive threshold": adaptive_tighten,
    "weighted averages and head step": weighted_average,
}


def run_check(fn, seed: int = 0) -> int:
    r = random.Random(seed)
    return sum(not fn(r) for _ in range(INSTANCES))
