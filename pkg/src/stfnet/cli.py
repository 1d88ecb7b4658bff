"""Command-line entry point: ``stfnet <command> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cfe import feature_dims
from .config import ABLATIONS, ConfigError, parse_config
from .datapipe import (
    DataError,
    SynthSpec,
    atomic_write,
    build_distance_adjacency,
    load_layout,
    load_manifest,
    synth_dataset,
    tenfold_split,
)
from .engine import NonFiniteError
from .trainer import (
    FoldTrainer,
    NumericError,
    load_checkpoint,
    predict_batch,
    prepare_sample,
    run_cv,
)
from .metrics import evaluate

log = logging.getLogger("stfnet")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_INVARIANT = 0, 2, 3, 4, 5


class InvariantError(RuntimeError):
    """A post-run consistency check failed."""


# -- helpers --------------------------------------------------------------
def write_text(path, text):
    atomic_write(path, lambda fh: fh.write(text.encode()))


def write_json(path, obj):
    write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_config(args):
    cfg = parse_config(args.config) if getattr(args, "config", None) else parse_config()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "ablate", None):
        changes["ablations"] = [a.strip() for a in args.ablate.split(",") if a.strip()]
    if getattr(args, "domain_feature", None):
        changes["domain_feature"] = args.domain_feature
    if getattr(args, "out", None):
        changes["out"] = args.out
    return cfg.replace(**changes) if changes else cfg


def resolve_adjacency(cfg, n_channels):
    if cfg.adjacency:
        adj = build_distance_adjacency(rule="from_file", path=cfg.adjacency)
    elif cfg.layout:
        adj = build_distance_adjacency(load_layout(cfg.layout), cfg.adjacency_rule, tau=cfg.adjacency_tau,
                                       k=cfg.adjacency_k)
    elif cfg.dataset and (Path(cfg.dataset) / "adjacency.csv").exists():
        adj = build_distance_adjacency(rule="from_file", path=Path(cfg.dataset) / "adjacency.csv")
    else:
        return None
    if adj.shape != (n_channels, n_channels):
        raise DataError(f"adjacency is {adj.shape[0]}x{adj.shape[1]} but the dataset has {n_channels} channels")
    return adj


def load_data(cfg):
    if not cfg.dataset:
        raise ConfigError("config.dataset: a dataset directory is required for this command")
    recs = load_manifest(cfg.dataset)
    if not recs:
        raise DataError(f"{cfg.dataset}: manifest lists no subjects")
    return recs, resolve_adjacency(cfg, recs[0].n_channels)


def out_dir(cfg):
    if not cfg.out:
        raise ConfigError("config.out: an output directory is required (--out)")
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_provenance(path, cfg, command):
    write_json(path / "config.json", cfg.to_dict())
    write_json(path / "run.json", {"command": command, "seed": cfg.seed, "code_version": __version__})


# -- commands -------------------------------------------------------------
def cmd_synth(args):
    spec = SynthSpec(n_subjects=args.n_subjects, n_channels=args.channels, sample_rate=args.sample_rate,
                     duration_s=args.duration, class_separation=args.separation, seed=args.seed or 0)
    manifest = synth_dataset(args.out, spec)
    print(manifest)
    return [str(manifest)]


def cmd_dims(args):
    cfg = load_config(args)
    if args.ts is not None:
        cfg = cfg.replace(ts=args.ts)
    length = args.len or cfg.window_len
    if length is None:
        if not cfg.dataset:
            raise ConfigError("dims needs --len, config.window_len or config.dataset")
        length = load_manifest(cfg.dataset)[0].n_samples // cfg.n_windows
    ts = 0 if "tis" in cfg.ablations else cfg.ts
    dims = feature_dims(length, cfg.dwcs(), ts)
    fls = " ".join(f"fl{i + 1}={v}" for i, v in enumerate(dims[:-1]))
    print(f"len={length} kd={cfg.kd} ts={ts} {fls} FE={dims[-1]}")
    return []


def cmd_train(args):
    cfg = load_config(args)
    recs, adj = load_data(cfg)
    samples = {r.subject_id: prepare_sample(r, cfg.n_windows) for r in recs}
    plan = tenfold_split(list(samples), cfg.seed)
    if not 0 <= args.fold < len(plan.groups):
        raise ConfigError(f"--fold must lie in [0, {len(plan.groups) - 1}]")
    _, src_ids, tgt_ids = list(plan.folds())[args.fold]
    out = out_dir(cfg)
    write_provenance(out, cfg, "train")
    source = [samples[i] for i in src_ids]
    target = [samples[i].unlabeled() for i in tgt_ids]
    ckpt = out / "checkpoint.npz"
    if args.resume:
        trainer = FoldTrainer.resume(args.resume, source, target)
    else:
        trainer = FoldTrainer(cfg, source, target, adj)
    trainer.run()
    trainer.save(ckpt)
    write_text(out / "history.csv", trainer.history.to_csv())
    labels, probs = predict_batch(trainer.model, target)
    truth = [samples[i].label for i in tgt_ids]
    metrics = evaluate(truth, labels, probs[:, 1])
    write_text(out / "metrics.json", metrics.to_json() + "\n")
    return [str(ckpt), str(out / "history.csv"), str(out / "metrics.json")]


def _cv(cfg, parallel, command):
    recs, adj = load_data(cfg)
    out = out_dir(cfg)
    write_provenance(out, cfg, command)
    report = run_cv(cfg, recs, adj, parallel=parallel)
    ids = sorted(p["subject_id"] for p in report.predictions)
    if ids != sorted(r.subject_id for r in recs):
        raise InvariantError("every subject must be tested exactly once across folds")
    for f in report.folds:
        hist = ["epoch,loss_c,loss_d,train_acc"] + [
            f"{e['epoch']},{e['loss_c']:.8g},{e['loss_d']:.8g},{e['train_acc']:.6g}" for e in f["history"]]
        write_text(out / f"history_fold{f['fold']}.csv", "\n".join(hist) + "\n")
    write_json(out / "report.json", report.to_dict())
    write_text(out / "metrics.json", report.metrics_json())
    print(report.metrics_json(), end="")
    return [str(out / "metrics.json"), str(out / "report.json")]


def cmd_cv(args):
    return _cv(load_config(args), args.parallel, "cv")


def cmd_ablate(args):
    if not args.ablate:
        raise ConfigError(f"ablate needs --ablate NAME[,NAME] from {ABLATIONS}")
    return _cv(load_config(args), args.parallel, "ablate")


def cmd_eval(args):
    cfg = load_config(args)
    model, _ = load_checkpoint(args.checkpoint)
    recs = load_manifest(cfg.dataset) if cfg.dataset else None
    if recs is None:
        raise ConfigError("config.dataset: a dataset directory is required for eval")
    samples = [prepare_sample(r, model.config.n_windows) for r in recs]
    labels, probs = predict_batch(model, samples)
    metrics = evaluate([s.label for s in samples], labels, probs[:, 1])
    out = out_dir(cfg)
    write_text(out / "metrics.json", metrics.to_json() + "\n")
    write_json(out / "predictions.json", [
        {"subject_id": s.subject_id, "true": s.label, "pred": int(lab), "prob_depressed": float(p[1])}
        for s, lab, p in zip(samples, labels, probs)])
    print(metrics.to_json())
    return [str(out / "metrics.json")]


def export_features(model, samples, out):
    """Per-subject A_FC / A matrices per window (CSV), f_SpS (npy) and f_TeS (CSV)."""
    cfg, topo = model.config, model.topology
    written = []
    shapes = {
        "A_FC": [cfg.n_windows, model.n_channels, model.n_channels],
        "A": [cfg.n_windows, model.n_channels, model.n_channels],
        "f_SpS": [cfg.n_windows, model.n_channels, cfg.fs],
        "f_TeS": [model.n_channels, topo.temporal_dim],
    }
    for s in samples:
        o = model.forward(s.windows[None], training=False)
        d = out / s.subject_id
        d.mkdir(parents=True, exist_ok=True)
        for key in ("A_FC", "A", "f_SpS", "f_TeS"):
            got = list(o[key].shape[1:])
            if got != shapes[key]:
                raise InvariantError(f"{key} has shape {got}, expected {shapes[key]}")
        for t in range(cfg.n_windows):
            for key in ("A_FC", "A"):
                path = d / f"{key}_t{t + 1:02d}.csv"
                np.savetxt(path, o[key].data[0, t], delimiter=",", fmt="%.8g")
        np.save(d / "f_SpS.npy", o["f_SpS"].data[0])
        np.savetxt(d / "f_TeS.csv", o["f_TeS"].data[0], delimiter=",", fmt="%.8g")
        written.append(str(d))
    write_json(out / "shapes.json", shapes)
    return written


def cmd_export(args):
    cfg = load_config(args)
    model, _ = load_checkpoint(args.checkpoint)
    if not cfg.dataset:
        raise ConfigError("config.dataset: a dataset directory is required for export-features")
    samples = [prepare_sample(r, model.config.n_windows) for r in load_manifest(cfg.dataset)]
    return export_features(model, samples, out_dir(cfg))


# -- parser ---------------------------------------------------------------
def build_parser():
    parser = argparse.ArgumentParser(prog="stfnet", description=__doc__)
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override config seed")
        if out:
            p.add_argument("--out", help="output directory")
        p.add_argument("--ablate", help="comma-separated ablations: " + ",".join(ABLATIONS))
        p.add_argument("--domain-feature", choices=("spatial", "common"))

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-subjects", type=int, default=12)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--sample-rate", type=float, default=250.0)
    p.add_argument("--duration", type=float, default=16.0)
    p.add_argument("--separation", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("dims", help="print per-scale feature lengths and the common feature width")
    common(p, out=False)
    p.add_argument("--len", type=int, help="window length in samples")
    p.add_argument("--ts", type=int, help="interval length override")
    p.set_defaults(func=cmd_dims)

    p = sub.add_parser("train", help="train a single cross-validation fold")
    common(p)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cv", help="ten-fold cross-subject evaluation")
    common(p)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("ablate", help="cross-validate with components removed")
    common(p)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-features", help="dump A_FC, A, f_SpS and f_TeS per subject")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def dispatch(argv=None):
    """Run one command; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s level=%(levelname)s logger=%(name)s msg=%(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except (NumericError, NonFiniteError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except InvariantError as exc:
        log.error("invariant violation: %s", exc)
        return EXIT_INVARIANT
    except ValueError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    return EXIT_OK


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
