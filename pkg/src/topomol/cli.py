"""Command-line orchestration of the fingerprinting, pre-training, probing,
and analysis pipeline. Exit codes: 0 success, 2 configuration/validation
error, 3 numeric failure.

Every run writes a manifest (config snapshot, seed, input content hashes)
sufficient to reproduce its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import multiprocessing
import os
import sys

import numpy as np

from .config import (
    encoder_from_config,
    file_sha256,
    filters_from_config,
    load_config_file,
    resolve_config,
    run_manifest,
    train_from_config,
)
from .encoder import load_params, save_params
from .errors import ConfigError, NonFiniteLoss, TopomolError
from .evalprobe import (
    alignment_histograms,
    covariance_singular_values,
    histograms_to_csv,
    pearson_distance_correlation,
)
from .molio import load_dataset, random_stratified_split
from .trainer import finetune_or_probe, graph_embeddings, pretrain
from .vectorize import emit_fingerprints_csv, fingerprint_corpus

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _load_cfg(args) -> dict:
    if args.config:
        cfg = load_config_file(args.config)
    else:
        cfg = resolve_config({})
    if getattr(args, "data", None):
        cfg["dataset"]["path"] = args.data
    if getattr(args, "format", None):
        cfg["dataset"]["format"] = args.format
    if getattr(args, "filters", None):
        cfg["filters"] = args.filters
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "out", None):
        cfg["out_dir"] = args.out
    if getattr(args, "loss", None):
        cfg["loss"]["mode"] = args.loss
    if getattr(args, "lam", None) is not None:
        cfg["loss"]["lambda"] = args.lam
    if getattr(args, "epochs", None) is not None:
        cfg["train"]["epochs"] = args.epochs
    return cfg


def _require_dataset(cfg):
    path = cfg["dataset"]["path"]
    if not path:
        raise ConfigError("$.dataset.path: required")
    if not os.path.exists(path):
        raise ConfigError(f"$.dataset.path: no such file {path!r}")
    return load_dataset(path, cfg["dataset"]["format"])


def _out_dir(cfg):
    out = cfg["out_dir"] or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_manifest(out, command, cfg, inputs):
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(run_manifest(command, cfg, inputs), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _mol_ids(dataset):
    return [g.name or str(i) for i, g in enumerate(dataset.graphs())]


def _corpus_fingerprints(dataset, cfg, jobs=1):
    filters = filters_from_config(cfg)
    graphs = dataset.graphs()
    if jobs > 1:
        with multiprocessing.get_context("fork").Pool(jobs) as pool:
            fps, configs = fingerprint_corpus(
                graphs, filters, resolution=cfg["pi"]["resolution"], sigma=cfg["pi"]["sigma"],
                map_fn=pool.map,
            )
    else:
        fps, configs = fingerprint_corpus(
            graphs, filters, resolution=cfg["pi"]["resolution"], sigma=cfg["pi"]["sigma"]
        )
    return fps


def cmd_fingerprint(args):
    cfg = _load_cfg(args)
    dataset = _require_dataset(cfg)
    if dataset.report and dataset.report.skipped:
        print(f"warning: {dataset.report.summary()}", file=sys.stderr)
    fps = _corpus_fingerprints(dataset, cfg, jobs=args.jobs)
    out = _out_dir(cfg)
    path = os.path.join(out, "fingerprints.csv")
    emit_fingerprints_csv(path, _mol_ids(dataset), fps)
    _write_manifest(out, "fingerprint", cfg, [cfg["dataset"]["path"]])
    print(f"wrote {path} ({len(fps)} rows, width {len(fps[0]) if fps else 0})")


def cmd_pretrain(args):
    cfg = _load_cfg(args)
    dataset = _require_dataset(cfg)
    fps = _corpus_fingerprints(dataset, cfg, jobs=args.jobs)
    out = _out_dir(cfg)
    result = pretrain(
        dataset.graphs(), fps, encoder_from_config(cfg), train_from_config(cfg), out_dir=out
    )
    save_params(os.path.join(out, "checkpoint.bin"), result.params)
    save_params(os.path.join(out, "checkpoint_best.bin"), result.best_params)
    with open(os.path.join(out, "loss_curve.csv"), "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, v in enumerate(result.loss_curve):
            fh.write(f"{i},{v:.17g}\n")
    _write_manifest(out, "pretrain", cfg, [cfg["dataset"]["path"]])
    print(f"pretrained {cfg['train']['epochs']} epochs; best epoch {result.best_epoch}")


def _splits(dataset, cfg):
    return random_stratified_split(dataset, tuple(cfg["split"]["fractions"]), cfg["seed"])


def _first_task_labels(dataset):
    labels, keep = [], []
    for i, (_, ls) in enumerate(dataset.records):
        if ls and ls[0] is not None:
            labels.append(ls[0])
            keep.append(i)
    return keep, labels


def _probe_common(args, mode):
    cfg = _load_cfg(args)
    dataset = _require_dataset(cfg)
    if args.checkpoint is None or not os.path.exists(args.checkpoint):
        raise ConfigError("$.checkpoint: required and must exist")
    params = load_params(args.checkpoint)
    keep, labels = _first_task_labels(dataset)
    if not labels:
        raise ConfigError("$.dataset: no labels for task 0")
    graphs = [dataset.records[i][0] for i in keep]
    labels = np.array(labels)
    classification = set(np.unique(labels)) <= {0.0, 1.0}
    sub = type(dataset)(
        records=[(g, [float(l)]) for g, l in zip(graphs, labels)], task_count=1
    )
    splits = _splits(sub, cfg)
    metrics = finetune_or_probe(
        params, graphs, labels, splits, mode,
        encoder_from_config(cfg), train_from_config(cfg), classification=classification,
    )
    out = _out_dir(cfg)
    with open(os.path.join(out, "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write("mode,metric,valid,test,best_epoch\n")
        fh.write(
            f"{metrics['mode']},{metrics['metric']},{metrics['valid']:.17g},"
            f"{metrics['test']:.17g},{metrics['best_epoch']}\n"
        )
    _write_manifest(out, mode, cfg, [cfg["dataset"]["path"], args.checkpoint])
    print(f"{metrics['metric']}: test {metrics['test']:.6f} (valid {metrics['valid']:.6f})")


def cmd_probe(args):
    mode = {"linear": "linear-probe", "mlp": "mlp-probe"}[args.mode]
    _probe_common(args, mode)


def cmd_finetune(args):
    _probe_common(args, "full")


def _frozen_embeddings(args, cfg, dataset):
    if args.checkpoint is None or not os.path.exists(args.checkpoint):
        raise ConfigError("$.checkpoint: required and must exist")
    params = load_params(args.checkpoint)
    return graph_embeddings(dataset.graphs(), encoder_from_config(cfg), params)


def cmd_distances(args):
    cfg = _load_cfg(args)
    dataset = _require_dataset(cfg)
    Z = _frozen_embeddings(args, cfg, dataset)
    fps = _corpus_fingerprints(dataset, cfg, jobs=args.jobs)
    I = np.stack([fp.values for fp in fps])
    r = pearson_distance_correlation(Z, I, sample_pairs=args.pairs, seed=cfg["seed"])
    out = _out_dir(cfg)
    with open(os.path.join(out, "distances.csv"), "w", encoding="utf-8") as fh:
        fh.write("pearson_r\n")
        fh.write(f"{r:.17g}\n")
    _write_manifest(out, "distances", cfg, [cfg["dataset"]["path"], args.checkpoint])
    print(f"pearson r = {r:.6f}")


def cmd_spectra(args):
    cfg = _load_cfg(args)
    dataset = _require_dataset(cfg)
    Z = _frozen_embeddings(args, cfg, dataset)
    values, logs, collapsed = covariance_singular_values(Z)
    out = _out_dir(cfg)
    with open(os.path.join(out, "spectra.csv"), "w", encoding="utf-8") as fh:
        fh.write("rank,singular_value,log_value,collapsed\n")
        for i, (v, lg, c) in enumerate(zip(values, logs, collapsed)):
            fh.write(f"{i},{v:.17g},{lg:.17g},{int(c)}\n")
    _write_manifest(out, "spectra", cfg, [cfg["dataset"]["path"], args.checkpoint])
    print(f"{int((~collapsed).sum())} non-collapsed of {len(values)} singular values")


def cmd_hist(args):
    cfg = _load_cfg(args)
    dataset = _require_dataset(cfg)
    Z = _frozen_embeddings(args, cfg, dataset)
    keep, labels = _first_task_labels(dataset)
    if not labels:
        raise ConfigError("$.dataset: labels required for alignment histograms")
    edges, pos, neg = alignment_histograms(
        Z[keep], np.array(labels), pairs=args.pairs, bins=args.bins, seed=cfg["seed"]
    )
    out = _out_dir(cfg)
    with open(os.path.join(out, "hist.csv"), "w", encoding="utf-8") as fh:
        fh.write(histograms_to_csv(edges, pos, neg))
    _write_manifest(out, "hist", cfg, [cfg["dataset"]["path"], args.checkpoint])
    print(f"wrote {out}/hist.csv")


def cmd_serve(args):
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def build_parser():
    parser = argparse.ArgumentParser(prog="topomol")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False):
        p.add_argument("--config", help="run-config JSON path")
        p.add_argument("--data", help="dataset path (overrides config)")
        p.add_argument("--format", choices=["csv-smiles", "jsonl"])
        p.add_argument("--filters", help="filter preset: atom | hks | degree | ahd")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        p.add_argument("--out", help="output directory")
        if checkpoint:
            p.add_argument("--checkpoint", required=False)

    p = sub.add_parser("fingerprint", help="emit a fingerprint CSV for a dataset")
    common(p)
    p.set_defaults(fn=cmd_fingerprint)

    p = sub.add_parser("pretrain", help="self-supervised pre-training")
    common(p)
    p.add_argument("--loss", choices=["tdl", "tdl-views", "tae", "ntxent", "combined"])
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--epochs", type=int)
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("probe", help="frozen-backbone probing")
    common(p, checkpoint=True)
    p.add_argument("--mode", choices=["linear", "mlp"], default="linear")
    p.add_argument("--epochs", type=int)
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("finetune", help="full fine-tuning")
    common(p, checkpoint=True)
    p.add_argument("--epochs", type=int)
    p.set_defaults(fn=cmd_finetune)

    p = sub.add_parser("distances", help="embedding/fingerprint distance correlation")
    common(p, checkpoint=True)
    p.add_argument("--pairs", type=int, default=10000)
    p.set_defaults(fn=cmd_distances)

    p = sub.add_parser("spectra", help="covariance singular values of embeddings")
    common(p, checkpoint=True)
    p.set_defaults(fn=cmd_spectra)

    p = sub.add_parser("hist", help="alignment histograms of embedding distances")
    common(p, checkpoint=True)
    p.add_argument("--pairs", type=int, default=10000)
    p.add_argument("--bins", type=int, default=20)
    p.set_defaults(fn=cmd_hist)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteLoss as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except TopomolError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
