"""Domain-adversarial SGD training, trial-wise prediction and ten-fold cross-subject evaluation."""
from __future__ import annotations

import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import TrainConfig, parse_config
from .dal import class_loss, domain_loss
from .datapipe import LABELS, Recording, atomic_write, tenfold_split, window_subject
from .engine import NonFiniteError
from .metrics import evaluate
from .model import Model, apply_variant

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
SOURCE_DOMAIN, TARGET_DOMAIN = 0, 1


class NumericError(RuntimeError):
    """Training produced a non-finite value."""


@dataclass
class LabeledSample:
    subject_id: str
    windows: np.ndarray  # [T, V, len]
    label: int

    def unlabeled(self):
        return UnlabeledSample(self.subject_id, self.windows)


@dataclass
class UnlabeledSample:
    """A target-domain subject; carries no class label by construction."""

    subject_id: str
    windows: np.ndarray


def prepare_sample(rec, n_windows):
    return LabeledSample(rec.subject_id, window_subject(rec.samples, n_windows), rec.label_index)


@dataclass
class History:
    epochs: list = field(default_factory=list)

    def add(self, epoch, loss_c, loss_d, train_acc):
        self.epochs.append({"epoch": epoch, "loss_c": loss_c, "loss_d": loss_d, "train_acc": train_acc})

    def to_csv(self):
        rows = ["epoch,loss_c,loss_d,train_acc"]
        rows += [f"{e['epoch']},{e['loss_c']:.8g},{e['loss_d']:.8g},{e['train_acc']:.6g}" for e in self.epochs]
        return "\n".join(rows) + "\n"


class FoldTrainer:
    """One fold's training state: model, generator, target cursor, epoch counter and history.

    Each epoch visits every source subject once in a shuffled order; each
    step pairs ``B/2`` source subjects with the next ``B/2`` target subjects
    (cycled) and applies plain SGD to loss_c + loss_d, where the gradient
    reversal turns the trunk update into d(loss_c) - coefficient * d(loss_d).
    """

    def __init__(self, config, source, target, adjacency=None, seed=None):
        if not source:
            raise ValueError("training needs at least one source subject")
        if not target:
            raise ValueError("domain-adversarial training needs at least one target subject")
        if any(isinstance(s, LabeledSample) for s in target):
            target = [s.unlabeled() for s in target]
        self.config = config
        self.source = list(source)
        self.target = list(target)
        t, v, length = self.source[0].windows.shape
        if t != config.n_windows:
            raise ValueError(f"samples have {t} windows, config expects {config.n_windows}")
        self.seed = config.seed if seed is None else seed
        self.model = Model(config, v, length, adjacency, seed=self.seed)
        self.rng = np.random.default_rng(self.seed + 1)
        self.target_cursor = 0
        self.epoch = 0
        self.history = History()

    def _step(self, src, tgt):
        model, cfg = self.model, self.config
        windows = np.stack([s.windows for s in src] + [s.windows for s in tgt])
        out = model.forward(windows, training=True, rng=self.rng, domain=True)
        half = len(src)
        probs = out["probs"]
        loss_c = class_loss(probs[:half], [s.label for s in src])
        loss_d = domain_loss(out["domain_probs"], [SOURCE_DOMAIN] * half + [TARGET_DOMAIN] * len(tgt))
        total = loss_c + loss_d
        model.zero_grad()
        total.backward()
        lr = cfg.learning_rate
        for p in model.params.values():
            if p.grad is not None:
                p.data -= p.data.dtype.type(lr) * p.grad
        hits = int(np.sum(np.argmax(probs.data[:half], axis=1) == np.array([s.label for s in src])))
        return float(loss_c.data), float(loss_d.data), hits

    def run_epoch(self):
        half = self.config.batch_size // 2
        order = self.rng.permutation(len(self.source))
        lc, ld, hits, steps = 0.0, 0.0, 0, 0
        for start in range(0, len(order), half):
            src = [self.source[i] for i in order[start:start + half]]
            tgt = []
            for _ in range(half):
                tgt.append(self.target[self.target_cursor % len(self.target)])
                self.target_cursor += 1
            try:
                c, d, h = self._step(src, tgt)
            except NonFiniteError as exc:
                ids = [s.subject_id for s in src + tgt]
                raise NumericError(f"non-finite value at epoch {self.epoch + 1}, step {steps + 1}, "
                                   f"subjects {ids}: {exc}") from exc
            if not (np.isfinite(c) and np.isfinite(d)):
                raise NumericError(f"non-finite loss at epoch {self.epoch + 1}, step {steps + 1}")
            lc, ld, hits, steps = lc + c, ld + d, hits + h, steps + 1
        self.epoch += 1
        self.history.add(self.epoch, lc / steps, ld / steps, hits / len(self.source))
        log.info("epoch %d loss_c=%.4f loss_d=%.4f train_acc=%.3f", self.epoch, lc / steps, ld / steps,
                 hits / len(self.source))

    def run(self, until=None):
        until = self.config.epochs if until is None else min(until, self.config.epochs)
        while self.epoch < until:
            self.run_epoch()
        return self

    # -- checkpoints --------------------------------------------------------
    def save(self, path):
        meta = {
            "version": CHECKPOINT_VERSION,
            "code_version": __version__,
            "epoch": self.epoch,
            "seed": self.seed,
            "target_cursor": self.target_cursor,
            "rng_state": self.rng.bit_generator.state,
            "config": self.config.to_dict(),
            "n_channels": self.model.n_channels,
            "window_len": self.model.window_len,
            "history": self.history.epochs,
        }
        save_checkpoint(path, self.model, meta)

    @classmethod
    def resume(cls, path, source, target):
        model, meta = load_checkpoint(path)
        trainer = cls(model.config, source, target, model.adjacency, seed=meta["seed"])
        trainer.model = model
        trainer.epoch = meta["epoch"]
        trainer.target_cursor = meta["target_cursor"]
        trainer.rng.bit_generator.state = meta["rng_state"]
        trainer.history = History(list(meta["history"]))
        return trainer


def save_checkpoint(path, model, meta):
    arrays = dict(model.state_arrays())
    if model.adjacency is not None:
        arrays["adjacency"] = model.adjacency
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)

    def write(fh):
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        fh.write(buf.getvalue())

    atomic_write(path, write)


def load_checkpoint(path):
    """Rebuild a model from a checkpoint. Returns (model, metadata dict)."""
    with np.load(path, allow_pickle=False) as z:
        arrays = {k: z[k] for k in z.files}
    meta = json.loads(arrays.pop("meta").tobytes().decode())
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
    config = parse_config(meta["config"])
    model = Model(config, meta["n_channels"], meta["window_len"], arrays.get("adjacency"), seed=meta.get("seed"))
    model.load_state_arrays(arrays)
    return model, meta


def train_fold(config, source, target, adjacency=None, seed=None):
    """Train one fold from scratch. Returns (model, history)."""
    trainer = FoldTrainer(config, source, target, adjacency, seed).run()
    return trainer.model, trainer.history


# -- prediction -----------------------------------------------------------
def predict_batch(model, samples):
    """Inference-mode class probabilities [N, 2] and labels; ties go to class 0 (control)."""
    windows = np.stack([s.windows for s in samples])
    probs = model.predict_proba(windows)
    return np.argmax(probs, axis=1), probs


def predict_subject(model, sample):
    """One trial-wise prediction from a subject's full windowed recording."""
    if isinstance(sample, Recording):
        if sample.n_samples < model.config.n_windows:
            raise ValueError(f"recording {sample.subject_id} is shorter than {model.config.n_windows} samples")
        sample = prepare_sample(sample, model.config.n_windows)
    labels, probs = predict_batch(model, [sample])
    return int(labels[0]), probs[0]


# -- cross-validation -----------------------------------------------------
@dataclass
class RunReport:
    folds: list
    metrics: object
    config: dict

    @property
    def predictions(self):
        return [p for f in self.folds for p in f["predictions"]]

    def metrics_json(self):
        return self.metrics.to_json() + "\n"

    def to_dict(self):
        return {"config": self.config, "folds": self.folds, "metrics": self.metrics.to_dict()}


def fold_seed(seed, fold):
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def run_fold(config, samples, fold, source_ids, target_ids, adjacency):
    """Train on the source groups and predict every target subject of one fold."""
    by_id = {s.subject_id: s for s in samples}
    source = [by_id[i] for i in source_ids]
    target = [by_id[i].unlabeled() for i in target_ids]
    try:
        model, history = train_fold(config, source, target, adjacency, seed=fold_seed(config.seed, fold))
    except Exception as exc:
        raise RuntimeError(f"fold {fold} failed: {exc}") from exc
    labels, probs = predict_batch(model, target)
    preds = [
        {"subject_id": t.subject_id, "true": int(by_id[t.subject_id].label), "pred": int(lab),
         "prob_depressed": float(p[1])}
        for t, lab, p in zip(target, labels, probs)
    ]
    return {"fold": fold, "source": list(source_ids), "target": list(target_ids),
            "predictions": preds, "history": history.epochs}


def _run_fold_job(args):
    return run_fold(*args)


def run_cv(config, recordings, adjacency=None, parallel=1, folds=None):
    """Ten-fold cross-subject evaluation with metrics over the pooled predictions.

    Each fold's seed derives from (config.seed, fold index) only, so folds
    can run in any order or in parallel without changing the outcome.
    """
    samples = [prepare_sample(r, config.n_windows) for r in recordings]
    plan = tenfold_split([s.subject_id for s in samples], config.seed)
    jobs = [(config, samples, k, src, tgt, adjacency) for k, src, tgt in plan.folds()]
    if folds is not None:
        jobs = [j for j in jobs if j[2] in set(folds)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_run_fold_job, jobs))
    else:
        results = [_run_fold_job(j) for j in jobs]
    results.sort(key=lambda r: r["fold"])
    pooled = [p for r in results for p in r["predictions"]]
    metrics = evaluate([p["true"] for p in pooled], [p["pred"] for p in pooled],
                       [p["prob_depressed"] for p in pooled])
    return RunReport(results, metrics, config.to_dict())


def label_name(index):
    return LABELS[index]


__all__ = [
    "FoldTrainer",
    "History",
    "LabeledSample",
    "NumericError",
    "RunReport",
    "TrainConfig",
    "UnlabeledSample",
    "apply_variant",
    "load_checkpoint",
    "predict_batch",
    "predict_subject",
    "prepare_sample",
    "run_cv",
    "run_fold",
    "save_checkpoint",
    "train_fold",
]
