"""Independent reference computations used to check the implementation."""
import json

import numpy as np

from fedopenmax.classifier import activations_batch
from fedopenmax.federation import SERVER_ID, MessageType

GRID = np.round(np.arange(0.1, 10.0 + 1e-9, 0.01), 10)


def weibull_sample(k, lam, n, seed):
    u = np.random.default_rng(seed).random(n)
    return lam * (-np.log(u)) ** (1.0 / k)


def grid_log_likelihood_max(d, ks=GRID, lams=GRID):
    """Max of the Weibull log-likelihood over a (k, lambda) grid, by direct evaluation."""
    d = np.asarray(d, dtype=np.float64)
    n = d.size
    sum_log = np.log(d).sum()
    log_lams = np.log(lams)
    best = -np.inf
    for k in ks:
        s = np.sum(d**k)
        ll = n * np.log(k) - n * k * log_lams + (k - 1) * sum_log - s * np.exp(-k * log_lams)
        best = max(best, ll.max())
    return best


def rank_formula(v, mavs, weibulls, alpha, dist):
    """Brute-force OpenMax revision written from the definition, one class at a time."""
    K = len(v)
    order = sorted(range(K), key=lambda i: (-v[i], i))
    omega = [1.0] * K
    for j in range(1, alpha + 1):
        c = order[j - 1]
        shape, scale = weibulls[c]
        d = dist(v, mavs[c])
        w_cdf = 0.0 if d <= 0 else 1.0 - np.exp(-((d / scale) ** shape))
        omega[c] = 1.0 - ((alpha - j + 1) / alpha) * w_cdf
    revised = [v[i] * omega[i] for i in range(K)]
    unknown = sum(v[i] * (1.0 - omega[i]) for i in range(K))
    return revised, unknown, omega


def tally_macro_f1(truths, preds):
    labels = sorted(set(truths) | set(preds))
    scores = []
    for c in labels:
        tp = sum(1 for t, p in zip(truths, preds) if t == c and p == c)
        fp = sum(1 for t, p in zip(truths, preds) if t != c and p == c)
        fn = sum(1 for t, p in zip(truths, preds) if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return sum(scores) / len(scores)


def _numbers(obj):
    if isinstance(obj, dict):
        for v in obj.values():
            yield from _numbers(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _numbers(v)
    elif isinstance(obj, float):
        yield obj


def scan_message_log(log, client_data, model):
    """Assert that nothing sent by a client carries per-sample data."""
    raw = set()
    for d in client_data:
        raw.update(map(float, np.ravel(d.X)))
        raw.update(map(float, np.ravel(activations_batch(model, d.X))))
    for sender, _, frame in log:
        if sender == SERVER_ID:
            continue
        body = json.loads(frame)
        if body["type"] == MessageType.CALIBRATION_UPLOAD.value:
            payload = body["payload"]
            assert set(payload) == {"client_id", "classes"}
            for entry in payload["classes"]:
                assert set(entry) == {"class_id", "mav", "distances"}
            leaked = raw.intersection(_numbers(payload))
            assert not leaked, f"client {sender} uploaded raw values {sorted(leaked)[:3]}"
        else:
            assert body["type"] in {MessageType.CLIENT_UPDATE.value, MessageType.ACK.value}
