"""Experiment drivers shared by the CLI: single training runs, the epsilon
grid search, and the pairwise label-noise comparison.

Every driver returns a plain-dict report that serializes deterministically
(sorted keys, repr floats); wall-clock timing lives outside the payload so
reruns with identical seeds are byte-identical.
"""

import hashlib
import io
import json
import time
from dataclasses import dataclass

import numpy as np

from . import data as datamod
from . import lda as ldamod
from .losses import MatrixMixing, PerClassMixing, SimpleMixing
from .net import Trainer, evaluate, init_model

DEFAULT_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.45)


def dumps_report(payload):
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def similarity_checksum(sim):
    buf = io.StringIO()
    buf.write(f"{sim.k}\n")
    for row in sim.a:
        buf.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    return hashlib.sha256(buf.getvalue().encode()).hexdigest()


def _mixing_echo(mixing):
    if mixing is None:
        return {"variant": "ce"}
    if isinstance(mixing, SimpleMixing):
        return {"variant": "simple", "epsilon": mixing.epsilon}
    if isinstance(mixing, PerClassMixing):
        return {"variant": "per_class", "epsilons": [float(e) for e in mixing.epsilons]}
    return {
        "variant": "matrix",
        "e_matrix": [[float(v) for v in row] for row in mixing.e_matrix],
        "margins": [float(c) for c in mixing.margins],
    }


def config_echo(cfg, hidden_sizes, topk):
    return {
        "learning_rate": cfg.learning_rate,
        "momentum": cfg.momentum,
        "weight_decay": cfg.weight_decay,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "lr_decay": cfg.lr_decay,
        "seed": cfg.seed,
        "mixing": _mixing_echo(cfg.mixing),
        "trainable_mixing": cfg.trainable_mixing,
        "penalties": {
            "alpha": cfg.penalties.alpha,
            "beta": cfg.penalties.beta,
            "gamma": cfg.penalties.gamma,
            "eta": cfg.penalties.eta,
            "p": cfg.penalties.p,
        },
        "hidden_sizes": list(hidden_sizes),
        "topk": topk,
    }


@dataclass
class RunResult:
    report: dict
    model: object
    wall_seconds: float


def run_training(train, val, test, cfg, hidden_sizes, sim=None, topk=5,
                 epoch_callback=None):
    """Train, keep the best-validation snapshot, evaluate it on test."""
    started = time.monotonic()
    model = init_model((train.dim, *hidden_sizes, train.k), cfg.seed)
    trainer = Trainer(model, cfg, sim)
    records = []
    best = {"epoch": -1, "val_acc": -1.0, "snapshot": None}
    for epoch in range(cfg.epochs):
        metrics = trainer.train_epoch(train)
        val_top1, _, _ = evaluate(model, val, topk)
        record = {
            "epoch": epoch,
            "train_loss": metrics["mean_loss"],
            "train_acc": metrics["accuracy"],
            "val_acc": val_top1,
        }
        records.append(record)
        if val_top1 > best["val_acc"]:
            best = {"epoch": epoch, "val_acc": val_top1, "snapshot": model.copy()}
        if epoch_callback is not None:
            epoch_callback(record)
    best_model = best["snapshot"]
    test_top1, test_topk, _ = evaluate(best_model, test, topk)
    report = {
        "config": config_echo(cfg, hidden_sizes, topk),
        "epochs": records,
        "best_epoch": best["epoch"],
        "best_val_acc": best["val_acc"],
        "test_top1": test_top1,
        "test_topk": test_topk,
        "topk": min(topk, train.k),
        "similarity_checksum": similarity_checksum(sim) if sim is not None else None,
    }
    if cfg.trainable_mixing:
        params = trainer.mixing_params
        report["learned_mixing"] = (
            [[float(v) for v in row] for row in params]
            if params.ndim == 2
            else [float(v) for v in params]
        )
    return RunResult(report, best_model, time.monotonic() - started)


def similarity_from_dataset(train, num_components=None, ridge=None):
    model = ldamod.fit_lda(train, num_components=num_components, ridge=ridge)
    return ldamod.build_similarity_matrix(model)


def run_grid_search(make_splits, base_cfg, hidden_sizes, epsilons=DEFAULT_GRID,
                    seeds=(0,), topk=5, run_callback=None):
    """One training run per (epsilon, seed); epsilon 0 runs plain CE.

    make_splits(seed) must return (train, val, test, sim). Selection is the
    highest mean best-validation accuracy, ties toward smaller epsilon.
    """
    for eps in epsilons:
        if not 0.0 <= eps < 0.5:
            raise ValueError(f"grid epsilon {eps} outside [0, 0.5)")
    rows = []
    curve = []
    for eps in epsilons:
        accs = []
        for seed in seeds:
            train, val, test, sim = make_splits(seed)
            from dataclasses import replace

            cfg = replace(
                base_cfg,
                seed=seed,
                mixing=None if eps == 0.0 else SimpleMixing(eps),
                trainable_mixing=False,
            )
            result = run_training(
                train, val, test, cfg, hidden_sizes,
                sim if eps > 0.0 else None, topk,
            )
            accs.append(result.report["best_val_acc"])
            rows.append(
                {"epsilon": eps, "seed": seed, "val_acc": result.report["best_val_acc"],
                 "test_top1": result.report["test_top1"]}
            )
            if run_callback is not None:
                run_callback(eps, seed, result)
        curve.append(
            {
                "epsilon": eps,
                "mean_val_acc": float(np.mean(accs)),
                "std_val_acc": float(np.std(accs)),
            }
        )
    best = max(curve, key=lambda c: (c["mean_val_acc"], -c["epsilon"]))
    return {"grid": curve, "runs": rows, "selected_epsilon": best["epsilon"]}


def run_noise_experiment(dataset, pairs, fractions, seeds, base_cfg, hidden_sizes,
                         epsilon_candidates=(0.2,), split_fractions=(0.7, 0.15, 0.15),
                         topk=5, lda_components=None, run_callback=None):
    """CE vs MCEL at each noise fraction; noise touches the train split only.

    For each seed the MCEL epsilon comes from the candidate list by clean
    validation accuracy (evaluated on the untouched validation split).
    Returns comparison rows plus the per-run noise masks (train-split row
    indices that were flipped).
    """
    from dataclasses import replace

    rows = []
    masks = {}
    for fraction in fractions:
        if not 0.0 <= fraction <= 1.0:
            raise ValueError(f"noise fraction {fraction} outside [0, 1]")
        for seed in seeds:
            train, val, test = datamod.split(dataset, split_fractions, seed)
            spec = datamod.NoiseSpec(pairs, fraction, seed)
            noisy_train, mask = datamod.inject_pairwise_noise(train, spec)
            masks[(fraction, seed)] = np.flatnonzero(mask)
            sim = similarity_from_dataset(noisy_train, lda_components)

            ce_cfg = replace(base_cfg, seed=seed, mixing=None, trainable_mixing=False)
            ce_run = run_training(noisy_train, val, test, ce_cfg, hidden_sizes, None, topk)
            rows.append(
                {"fraction": fraction, "seed": seed, "variant": "ce",
                 "epsilon": 0.0, "test_top1": ce_run.report["test_top1"]}
            )

            best = None
            for eps in epsilon_candidates:
                cfg = replace(
                    base_cfg, seed=seed, mixing=SimpleMixing(eps), trainable_mixing=False
                )
                run = run_training(noisy_train, val, test, cfg, hidden_sizes, sim, topk)
                key = (run.report["best_val_acc"], -eps)
                if best is None or key > best[0]:
                    best = (key, eps, run)
            _, eps, run = best
            rows.append(
                {"fraction": fraction, "seed": seed, "variant": "mcel",
                 "epsilon": eps, "test_top1": run.report["test_top1"]}
            )
            if run_callback is not None:
                run_callback(fraction, seed, rows[-2], rows[-1])
    return {"rows": rows, "masks": masks}
