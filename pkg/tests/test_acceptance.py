"""Acceptance suite: one test (and one printed pass/fail line) per criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines inline;
under plain pytest they appear in the captured-output section on failure.
"""

import time

import numpy as np

from mcel.data import gen_blobs, split, standardize
from mcel.gradcheck import random_probs, random_similarity, run_all
from mcel.harness import dumps_report, run_noise_experiment, run_training, similarity_from_dataset
from mcel.lda import LdaModel, build_similarity_matrix, fit_lda, scatter_matrices, uniform_similarity
from mcel.losses import (
    PenaltyWeights,
    PerClassMixing,
    SimpleMixing,
    gmcel_loss,
    gmcel_soft_loss,
    mcel_loss,
    mixing_from_simple,
    sg_mcel_loss,
    sg_mcel_soft_loss,
    target_matrix,
)
from mcel.net import TrainConfig, backprop, forward_batch, init_model


def report(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_reduction_suite():
    """Every richer loss collapses to its simpler base within 1e-12."""
    started = time.monotonic()
    zero = PenaltyWeights()
    worst = 0.0
    for k in (2, 5, 10):
        rng = np.random.default_rng(k)
        for _ in range(1000):
            probs = random_probs(rng, k)
            y = int(rng.integers(k))
            sim = random_similarity(rng, k)
            eps = float(rng.uniform(0.05, 0.45))

            base = mcel_loss(probs, y, sim, eps)
            plain = -float(np.log(probs[y]))
            zero_eps = mcel_loss(probs, y, sim, 0.0)
            worst = max(worst, abs(zero_eps.value - plain))

            sg = sg_mcel_loss(probs, y, sim, np.full(k, eps))
            worst = max(worst, abs(sg.value - base.value),
                        float(np.max(np.abs(sg.grad_probs - base.grad_probs))))

            mix = mixing_from_simple(sim, eps)
            gm = gmcel_loss(probs, y, mix)
            worst = max(worst, abs(gm.value - base.value),
                        float(np.max(np.abs(gm.grad_probs - base.grad_probs))))

            soft = sg_mcel_soft_loss([(probs, y)], sim, np.full(k, eps), zero)
            worst = max(worst, abs(soft.value - sg.value),
                        float(np.max(np.abs(soft.grad_probs[0] - sg.grad_probs))))

            gsoft = gmcel_soft_loss([(probs, y)], mix.e_matrix, mix.margins, zero)
            worst = max(worst, abs(gsoft.value - gm.value),
                        float(np.max(np.abs(gsoft.grad_probs[0] - gm.grad_probs))))
    elapsed = time.monotonic() - started
    report(
        "reduction suite",
        worst <= 1e-12 and elapsed < 5.0,
        f"max deviation {worst:.3e} (tol 1e-12), {elapsed:.2f}s (budget 5s)",
    )


def test_gradient_suite():
    """All analytic gradients match central finite differences within 1e-5."""
    started = time.monotonic()
    results = run_all(k=5, trials=200, seed=0)
    elapsed = time.monotonic() - started
    worst = max(results.values())
    report(
        "gradient suite",
        worst <= 1e-5 and elapsed < 10.0,
        f"max relative error {worst:.3e} over {sorted(results)} "
        f"(tol 1e-5), {elapsed:.2f}s (budget 10s)",
    )


def test_similarity_matrix_suite():
    """Structural invariants plus the closed-form Fisher direction check."""
    started = time.monotonic()
    ok = True
    details = []
    for k in (3, 10):
        data = gen_blobs(k, 80, 5, seed=100 + k)
        model = fit_lda(data)
        sim = build_similarity_matrix(model)
        off = sim.a[~np.eye(k, dtype=bool)]
        ok = ok and np.all(np.diag(sim.a) == 0.0) and np.all(off > 0.0)
        row_err = float(np.max(np.abs(sim.a.sum(axis=1) - 1.0)))
        ok = ok and row_err <= 1e-12

        flip = np.where(np.arange(model.num_components) % 2 == 0, 1.0, -1.0)
        flipped = LdaModel(
            projection=model.projection * flip[:, None],
            eigenvalues=model.eigenvalues,
            class_means=tuple(v * flip for v in model.class_means),
            num_components=model.num_components,
            num_classes=model.num_classes,
        )
        flip_err = float(np.max(np.abs(build_similarity_matrix(flipped).a - sim.a)))
        ok = ok and flip_err <= 1e-10

        rng = np.random.default_rng(k)
        perm = rng.permutation(k)
        permuted = LdaModel(
            projection=model.projection,
            eigenvalues=model.eigenvalues,
            class_means=tuple(model.class_means[i] for i in np.argsort(perm)),
            num_components=model.num_components,
            num_classes=model.num_classes,
        )
        sim_p = build_similarity_matrix(permuted)
        perm_err = max(
            abs(sim_p.a[perm[i], perm[j]] - sim.a[i, j])
            for i in range(k)
            for j in range(k)
        )
        ok = ok and perm_err <= 1e-12
        details.append(
            f"k={k}: rows {row_err:.1e}, flip {flip_err:.1e}, perm {perm_err:.1e}"
        )

    two = gen_blobs(2, 300, 2, centers=np.array([[0.0, 0.0], [3.0, 1.0]]),
                    spread=0.7, seed=1)
    sw, _, means = scatter_matrices(two)
    fisher = np.linalg.solve(sw, means[1] - means[0])
    direction = fit_lda(two).projection[0]
    cosine = abs(np.dot(direction, fisher)) / (
        np.linalg.norm(direction) * np.linalg.norm(fisher)
    )
    ok = ok and cosine >= 0.999
    elapsed = time.monotonic() - started
    report(
        "similarity-matrix suite",
        ok and elapsed < 10.0,
        "; ".join(details) + f"; fisher |cos| {cosine:.6f}, "
        f"{elapsed:.2f}s (budget 10s)",
    )


def test_label_smoothing_equivalence():
    """Uniform similarity makes the mixed target a label-smoothing target."""
    worst = 0.0
    for k in (3, 5, 10):
        sim = uniform_similarity(k)
        for eps in (0.1, 0.3):
            h = target_matrix(sim, SimpleMixing(eps))
            eps_ls = eps * k / (k - 1)
            ls = (1.0 - eps_ls) * np.eye(k) + eps_ls / k * np.ones((k, k))
            worst = max(worst, float(np.max(np.abs(h - ls))))
    report(
        "label-smoothing equivalence",
        worst <= 1e-12,
        f"max deviation {worst:.3e} (tol 1e-12) over k in (3,5,10), "
        "eps in (0.1,0.3)",
    )


def _flatten(model):
    return np.concatenate([a.ravel() for a in model.weights + model.biases])


def _set_params(model, flat):
    pos = 0
    for arr in model.weights + model.biases:
        arr[...] = flat[pos:pos + arr.size].reshape(arr.shape)
        pos += arr.size


def _param_gradient_error(targets_for):
    """Max FD relative error of model-parameter gradients on a 2-3-3 net."""
    model = init_model((2, 3, 3), seed=7)
    rng = np.random.default_rng(11)
    x = rng.standard_normal((4, 2))
    ys = rng.integers(3, size=4)

    def total_loss(flat):
        _set_params(model, flat)
        probs, _ = forward_batch(model, x)
        return -float(np.sum(targets_for(ys) * np.log(probs)))

    theta = _flatten(model)
    probs, acts = forward_batch(model, x)
    grads_w, grads_b = backprop(model, acts, probs - targets_for(ys))
    analytic = np.concatenate([g.ravel() for g in grads_w + grads_b])
    numeric = np.empty_like(analytic)
    h = 1e-6
    for i in range(theta.size):
        bump = theta.copy()
        bump[i] += h
        up = total_loss(bump)
        bump[i] -= 2 * h
        down = total_loss(bump)
        numeric[i] = (up - down) / (2 * h)
    _set_params(model, theta)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom))


def test_end_to_end_training():
    """Both plain CE and the mixed loss solve well-separated 4-class blobs,
    and whole-network gradients match finite differences for every variant."""
    started = time.monotonic()
    centers = np.array([[3.0, 3.0], [3.0, -3.0], [-3.0, 3.0], [-3.0, -3.0]])
    dataset = gen_blobs(4, 500, 2, centers=centers, spread=1.0, seed=0)
    train, val, test = split(dataset, (0.7, 0.15, 0.15), seed=0)
    train, val, test, _, _ = standardize(train, val, test)
    sim = similarity_from_dataset(train)
    base = TrainConfig(learning_rate=0.1, momentum=0.1, weight_decay=1e-3,
                       epochs=200, batch_size=32, seed=0)
    ce = run_training(train, val, test, base, (16,), None, topk=2)
    from dataclasses import replace
    mixed_cfg = replace(base, mixing=SimpleMixing(0.2))
    mixed = run_training(train, val, test, mixed_cfg, (16,), sim, topk=2)

    k = 3
    sim3 = random_similarity(np.random.default_rng(5), k)
    eps_vec = np.array([0.1, 0.25, 0.4])
    mix3 = mixing_from_simple(sim3, 0.3)
    variants = {
        "ce": lambda ys: np.eye(k)[ys],
        "simple": lambda ys: target_matrix(sim3, SimpleMixing(0.2))[ys],
        "per-class": lambda ys: target_matrix(sim3, PerClassMixing(eps_vec))[ys],
        "matrix": lambda ys: target_matrix(sim3, mix3)[ys],
    }
    grad_errs = {name: _param_gradient_error(fn) for name, fn in variants.items()}
    worst_grad = max(grad_errs.values())
    elapsed = time.monotonic() - started
    ok = (
        ce.report["test_top1"] >= 0.95
        and mixed.report["test_top1"] >= 0.95
        and worst_grad <= 1e-5
        and elapsed < 60.0
    )
    report(
        "end-to-end training",
        ok,
        f"test top-1 ce {ce.report['test_top1']:.4f}, mixed "
        f"{mixed.report['test_top1']:.4f} (need >= 0.95); backprop FD error "
        f"{worst_grad:.3e} (tol 1e-5) across {sorted(grad_errs)}; "
        f"{elapsed:.1f}s (budget 60s)",
    )


def test_noise_robustness():
    """With pairwise label swaps on the train split, the similarity-guided
    loss matches or beats plain CE across the fixed seed set."""
    started = time.monotonic()
    gap = 1.2
    centers = []
    for angle in (0.0, 2 * np.pi / 3, 4 * np.pi / 3):
        cx, cy = 5.0 * np.cos(angle), 5.0 * np.sin(angle)
        centers.append([cx - gap / 2, cy])
        centers.append([cx + gap / 2, cy])
    dataset = gen_blobs(6, 200, 2, centers=np.array(centers), spread=0.7, seed=0)
    base = TrainConfig(learning_rate=0.1, momentum=0.1, weight_decay=1e-3,
                       epochs=120, batch_size=32, seed=0)
    result = run_noise_experiment(
        dataset,
        pairs=((0, 1), (2, 3), (4, 5)),
        fractions=(0.3,),
        seeds=(0, 1, 2, 3, 4),
        base_cfg=base,
        hidden_sizes=(8,),
        epsilon_candidates=(0.2, 0.3, 0.4),
        split_fractions=(0.5, 0.25, 0.25),
        topk=2,
    )
    ce = [r["test_top1"] for r in result["rows"] if r["variant"] == "ce"]
    mixed = [r["test_top1"] for r in result["rows"] if r["variant"] == "mcel"]
    wins = sum(m > c for m, c in zip(mixed, ce))
    elapsed = time.monotonic() - started
    ok = (
        float(np.median(mixed)) >= float(np.median(ce))
        and wins >= 3
        and elapsed < 300.0
    )
    report(
        "noise robustness",
        ok,
        f"median mixed {np.median(mixed):.4f} vs ce {np.median(ce):.4f}, "
        f"wins {wins}/5 (need >= 3), {elapsed:.1f}s (budget 300s)",
    )


def test_determinism():
    """Identical seeds give byte-identical serialized reports."""
    dataset = gen_blobs(3, 80, 2, spread=0.8, seed=2)
    cfg = TrainConfig(learning_rate=0.1, momentum=0.1, weight_decay=1e-3,
                      epochs=15, batch_size=16, seed=3,
                      mixing=SimpleMixing(0.2))
    payloads = []
    for _ in range(2):
        train, val, test = split(dataset, (0.7, 0.15, 0.15), seed=3)
        train, val, test, _, _ = standardize(train, val, test)
        sim = similarity_from_dataset(train)
        result = run_training(train, val, test, cfg, (8,), sim, topk=2)
        payloads.append(dumps_report(result.report).encode())
    ok = payloads[0] == payloads[1]
    report(
        "determinism",
        ok,
        f"rerun payloads identical: {ok} ({len(payloads[0])} bytes)",
    )
