"""Finite-difference verification of every analytic gradient.

Central differences with h = 1e-6 against random instances whose
probabilities stay at least 1e-3 away from zero. Used both by the test
suite and the `mcel gradcheck` CLI command.
"""

import numpy as np

from .lda import SimilarityMatrix
from .losses import (
    MatrixMixing,
    PenaltyWeights,
    gmcel_loss,
    gmcel_soft_loss,
    logit_gradient,
    mcel_loss,
    sg_mcel_loss,
    sg_mcel_soft_loss,
    softmax,
)

FD_STEP = 1e-6
REL_TOL = 1e-5


def central_diff(fn, x, h=FD_STEP):
    """Central finite differences of a scalar function, one entry at a time."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xflat = x.reshape(-1)
    for i in range(xflat.size):
        orig = xflat[i]
        xflat[i] = orig + h
        hi = fn(x)
        xflat[i] = orig - h
        lo = fn(x)
        xflat[i] = orig
        flat[i] = (hi - lo) / (2.0 * h)
    return grad


def max_rel_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom))


def random_probs(rng, k, floor=1e-3):
    p = rng.random(k) + floor * k
    p = p / p.sum()
    return np.maximum(p, floor) / np.maximum(p, floor).sum()


def random_similarity(rng, k):
    a = rng.random((k, k)) + 0.1
    np.fill_diagonal(a, 0.0)
    a = a / a.sum(axis=1, keepdims=True)
    return SimilarityMatrix(k, a)


def random_matrix_mixing(rng, k):
    diag = rng.uniform(0.5, 0.8, size=k)
    e = np.empty((k, k))
    for i in range(k):
        off = rng.random(k - 1) + 0.05
        off = off / off.sum() * (1.0 - diag[i])
        row = np.empty(k)
        row[:i] = off[:i]
        row[i] = diag[i]
        row[i + 1:] = off[i:]
        e[i] = row
    margins = np.array(
        [(e[i, i] - np.max(np.delete(e[i], i))) / 2.0 for i in range(k)]
    )
    return MatrixMixing(e, margins)


def check_mcel(k, trials, seed, corrupt=0.0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        sim = random_similarity(rng, k)
        probs = random_probs(rng, k)
        y = int(rng.integers(k))
        eps = float(rng.uniform(0.05, 0.45))
        res = mcel_loss(probs, y, sim, eps)
        num = central_diff(lambda p: mcel_loss(p, y, sim, eps).value, probs)
        worst = max(worst, max_rel_error(res.grad_probs + corrupt, num))
    return worst


def check_sg_mcel(k, trials, seed, corrupt=0.0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        sim = random_similarity(rng, k)
        probs = random_probs(rng, k)
        y = int(rng.integers(k))
        eps = rng.uniform(0.05, 0.45, size=k)
        res = sg_mcel_loss(probs, y, sim, eps)
        num = central_diff(lambda p: sg_mcel_loss(p, y, sim, eps).value, probs)
        worst = max(worst, max_rel_error(res.grad_probs + corrupt, num))
    return worst


def check_gmcel(k, trials, seed, corrupt=0.0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        spec = random_matrix_mixing(rng, k)
        probs = random_probs(rng, k)
        y = int(rng.integers(k))
        res = gmcel_loss(probs, y, spec)
        num = central_diff(lambda p: gmcel_loss(p, y, spec).value, probs)
        worst = max(worst, max_rel_error(res.grad_probs + corrupt, num))
    return worst


def check_sg_soft(k, trials, seed, corrupt=0.0, batch_size=4):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        sim = random_similarity(rng, k)
        batch = [
            (random_probs(rng, k), int(rng.integers(k))) for _ in range(batch_size)
        ]
        eps = rng.uniform(0.05, 0.45, size=k)
        w = PenaltyWeights(
            alpha=float(rng.uniform(0, 2)),
            beta=float(rng.uniform(0, 2)),
            gamma=float(rng.uniform(0, 2)),
            p=2.0,
        )
        res = sg_mcel_soft_loss(batch, sim, eps, w)
        num_eps = central_diff(
            lambda e: sg_mcel_soft_loss(batch, sim, e, w).value, eps
        )
        worst = max(worst, max_rel_error(res.grad_mixing + corrupt, num_eps))
        for row, (probs, y) in enumerate(batch):
            def value_of(p, _row=row):
                probe = list(batch)
                probe[_row] = (p, probe[_row][1])
                return sg_mcel_soft_loss(probe, sim, eps, w).value

            num_p = central_diff(value_of, probs)
            worst = max(worst, max_rel_error(res.grad_probs[row] + corrupt, num_p))
    return worst


def check_gmcel_soft(k, trials, seed, corrupt=0.0, batch_size=4):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        spec = random_matrix_mixing(rng, k)
        batch = [
            (random_probs(rng, k), int(rng.integers(k))) for _ in range(batch_size)
        ]
        w = PenaltyWeights(
            alpha=float(rng.uniform(0, 2)),
            beta=float(rng.uniform(0, 2)),
            gamma=float(rng.uniform(0, 2)),
            eta=float(rng.uniform(0, 2)),
            p=2.0,
        )
        res = gmcel_soft_loss(batch, spec.e_matrix, spec.margins, w)
        num_e = central_diff(
            lambda e: gmcel_soft_loss(batch, e, spec.margins, w).value,
            spec.e_matrix.copy(),
        )
        worst = max(worst, max_rel_error(res.grad_mixing + corrupt, num_e))
        for row, (probs, y) in enumerate(batch):
            def value_of(p, _row=row):
                probe = list(batch)
                probe[_row] = (p, probe[_row][1])
                return gmcel_soft_loss(probe, spec.e_matrix, spec.margins, w).value

            num_p = central_diff(value_of, probs)
            worst = max(worst, max_rel_error(res.grad_probs[row] + corrupt, num_p))
    return worst


def check_logit(k, trials, seed, corrupt=0.0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        logits = rng.normal(0, 2, size=k)
        target = random_probs(rng, k)

        def value_of(lg):
            p = np.maximum(softmax(lg), 1e-300)
            return -float(np.dot(target, np.log(p)))

        grad = logit_gradient(logits, target)
        num = central_diff(value_of, logits)
        worst = max(worst, max_rel_error(grad + corrupt, num))
    return worst


def run_all(k=5, trials=50, seed=0, corrupt=0.0):
    """Max relative finite-difference error per loss variant."""
    return {
        "mcel": check_mcel(k, trials, seed, corrupt),
        "sg_mcel": check_sg_mcel(k, trials, seed + 1, corrupt),
        "gmcel": check_gmcel(k, trials, seed + 2, corrupt),
        "sg_mcel_soft": check_sg_soft(k, max(1, trials // 5), seed + 3, corrupt),
        "gmcel_soft": check_gmcel_soft(k, max(1, trials // 5), seed + 4, corrupt),
        "logit": check_logit(k, trials, seed + 5, corrupt),
    }
