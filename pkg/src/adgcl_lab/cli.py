"""Command-line driver: ``adgcl-lab <command> [--config run.json] [--section.field value ...]``.

Commands: gen-data, train, eval, sweep, export-embeddings, compare.

The run configuration is one JSON document (see ``DEFAULTS``).  Any scalar
field can be overridden with a flag named by its dotted path, for example
``--train.lambda_reg 2.0`` or ``--dataset.spec.feature_mode=degree``.  Relative
output directories are resolved against ``$ADGCL_LAB_OUT`` when it is set.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import Protocol, run_comparison
from .datasets import MotifSpec, RegressionSpec, generate_planted_motif, generate_regression_degree_target
from .evaluation import (
    ProbeError,
    embed_dataset,
    kfold_indices,
    labels_of,
    probe_split,
    resolve_probe,
    write_metrics_csv,
)
from .graphs import GraphError, load_jsonl, save_jsonl, split_dataset
from .params import AugmenterParams, EncoderParams, HeadParams, ParamError, extract, load_checkpoint, save_checkpoint
from .tensor import TensorError
from .training import (
    LAMBDA_GRID,
    TrainConfig,
    TrainingAborted,
    init_models,
    sweep_lambda,
    train,
    write_sweep_csv,
)

log = logging.getLogger("adgcl_lab")

ENV_OUTPUT_ROOT = "ADGCL_LAB_OUT"

DEFAULTS: dict = {
    "dataset": {
        "kind": "motif",
        "path": None,
        "n_graphs": 200,
        "seed": 0,
        "spec": {},
    },
    "split": {"ratios": [0.8, 0.1, 0.1], "seed": 0},
    "train": {f.name: f.default for f in fields(TrainConfig)},
    "eval": {"probe": "auto", "kfold": False, "folds": 10, "standardize": None},
    "sweep": {"lambdas": list(LAMBDA_GRID), "workers": 1, "plot": None},
    "compare": {
        "methods": ["ru", "infomax", "adgcl-fix", "nadgcl:0.1", "nadgcl:0.9"],
        "seeds": [0, 1, 2, 3, 4],
        "protocol": "split",
    },
    "output_dir": "run",
    "history_time": True,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


def merge(base: dict, update: dict, where: str = "") -> dict:
    """Recursive merge; unknown keys are rejected except inside ``dataset.spec``."""
    out = copy.deepcopy(base)
    for key, value in update.items():
        path = f"{where}.{key}" if where else key
        if key not in out and where != "dataset.spec":
            raise ConfigError(f"unknown config field {path!r}")
        if isinstance(out.get(key), dict) and isinstance(value, dict):
            out[key] = merge(out[key], value, path)
        else:
            out[key] = value
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(config: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = config
    for i, part in enumerate(parts[:-1]):
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"unknown config field {'.'.join(parts[: i + 1])!r}")
        node = node[part]
    leaf = parts[-1]
    inside_spec = parts[:-1] == ["dataset", "spec"]
    if leaf not in node and not inside_spec:
        raise ConfigError(f"unknown config field {dotted!r}")
    if isinstance(node.get(leaf), dict):
        raise ConfigError(f"{dotted!r} is a section; override its fields instead")
    node[leaf] = value


def parse_overrides(tokens: list[str]) -> list[tuple[str, object]]:
    out = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        name = tok[2:]
        if "=" in name:
            name, raw = name.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"missing value for {tok}")
            raw = tokens[i + 1]
            i += 2
        out.append((name.replace("-", "_") if "." not in name else name, _parse_value(raw)))
    return out


def load_config(path: str | None, overrides: list[tuple[str, object]]) -> dict:
    config = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be an object")
        config = merge(config, user)
    for name, value in overrides:
        apply_override(config, name, value)
    return config


def train_config(config: dict) -> TrainConfig:
    try:
        cfg = TrainConfig(**config["train"])
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"train: {exc}") from None
    return cfg


def output_dir(config: dict) -> Path:
    out = Path(config["output_dir"])
    root = os.environ.get(ENV_OUTPUT_ROOT)
    if root and not out.is_absolute():
        out = Path(root) / out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def dataset_spec(config: dict):
    ds = config["dataset"]
    spec = dict(ds.get("spec") or {})
    try:
        if ds["kind"] == "motif":
            if "class_motifs" in spec:
                spec["class_motifs"] = tuple(spec["class_motifs"])
            return MotifSpec(**spec)
        if ds["kind"] == "regression":
            if "edge_p" in spec:
                spec["edge_p"] = tuple(spec["edge_p"])
            return RegressionSpec(**spec)
    except TypeError as exc:
        raise ConfigError(f"dataset.spec: {exc}") from None
    raise ConfigError(f"dataset.kind must be 'motif', 'regression' or 'file', got {ds['kind']!r}")


def load_dataset(config: dict):
    ds = config["dataset"]
    if ds["kind"] == "file" or ds.get("path"):
        if not ds.get("path"):
            raise ConfigError("dataset.path is required when dataset.kind is 'file'")
        path = Path(ds["path"])
        if not path.exists():
            raise ConfigError(f"dataset file not found: {path}")
        return load_jsonl(path)
    spec = dataset_spec(config)
    gen = generate_planted_motif if isinstance(spec, MotifSpec) else generate_regression_degree_target
    return gen(int(ds["n_graphs"]), int(ds["seed"]), spec)


def make_split(config: dict, n: int):
    sp = config["split"]
    return split_dataset(n, tuple(sp["ratios"]), int(sp["seed"]))


def _write_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- commands


def cmd_gen_data(config: dict, args) -> list[Path]:
    if config["dataset"]["kind"] == "file":
        raise ConfigError("gen-data needs a generator dataset kind ('motif' or 'regression')")
    spec = dataset_spec(config)
    spec.validate()
    graphs = load_dataset(config)
    out = output_dir(config)
    path = Path(args.output) if args.output else out / "dataset.jsonl"
    save_jsonl(graphs, path)
    labels = [g.label for g in graphs]
    meta = {
        "kind": config["dataset"]["kind"],
        "seed": int(config["dataset"]["seed"]),
        "spec": spec.to_dict(),
        "counts": {
            "graphs": len(graphs),
            "nodes": int(sum(g.num_nodes for g in graphs)),
            "undirected_edges": int(sum(g.num_undirected_edges for g in graphs)),
        },
    }
    if isinstance(spec, MotifSpec):
        meta["counts"]["per_class"] = {str(c): labels.count(c) for c in sorted(set(labels))}
    meta_path = path.with_suffix(".meta.json")
    _write_json(meta, meta_path)
    return [path, meta_path]


def cmd_train(config: dict, args) -> list[Path]:
    cfg = train_config(config)
    graphs = load_dataset(config)
    out = output_dir(config)
    res = train(graphs, cfg)
    enc, head, aug, history = res.encoder, res.head, res.augmenter, res.history
    written = [
        save_checkpoint(out / "encoder.npz", encoder=enc),
        save_checkpoint(out / "head.npz", head=head),
    ]
    if aug is not None:
        written.append(save_checkpoint(out / "augmenter.npz", augmenter=aug))
    hist = out / "history.csv"
    history.write_csv(hist, with_time=bool(config["history_time"]))
    written.append(hist)
    cfg_path = out / "config.json"
    _write_json(config, cfg_path)
    written.append(cfg_path)
    if args.plot:
        from .plotting import plot_history

        written.append(plot_history(history, out / args.plot))
    log.info("final drop ratio %.4f", history.final_drop_ratio)
    return written


def _load_encoder(config: dict, checkpoint: str | None, graphs) -> EncoderParams:
    if checkpoint is None:
        # randomly initialized, untrained encoder
        return init_models(graphs, train_config(config))[0]
    path = Path(checkpoint)
    if path.is_dir():
        path = path / "encoder.npz"
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    enc = extract(load_checkpoint(path), "encoder", EncoderParams)
    enc.validate()
    if enc.in_dim != graphs[0].feat_dim:
        raise ConfigError(
            f"checkpoint expects {enc.in_dim}-dim node features, dataset has {graphs[0].feat_dim}"
        )
    return enc


def cmd_eval(config: dict, args) -> list[Path]:
    graphs = load_dataset(config)
    enc = _load_encoder(config, args.checkpoint, graphs)
    X, y = embed_dataset(enc, graphs), labels_of(graphs)
    ev = config["eval"]
    probe = resolve_probe(ev["probe"], y)
    seed = int(config["split"]["seed"])
    if ev["kfold"]:
        splits = [(k, s) for k, s in enumerate(kfold_indices(len(graphs), int(ev["folds"]), seed))]
    else:
        splits = [("", make_split(config, len(graphs)))]
    rows = []
    for fold, split in splits:
        res = probe_split(X, y, split, probe, standardize=ev["standardize"])
        rows.extend(res.rows(seed=seed, fold=fold))
    out = output_dir(config)
    path = out / (args.output or "metrics.csv")
    write_metrics_csv(rows, path)
    return [path]


def cmd_sweep(config: dict, args) -> list[Path]:
    cfg = train_config(config)
    sw = config["sweep"]
    lambdas = [float(x) for x in sw["lambdas"]]
    if not lambdas:
        raise ConfigError("sweep.lambdas must be non-empty")
    unique = list(dict.fromkeys(lambdas))
    if len(unique) != len(lambdas):
        log.warning("duplicate lambda values removed: %s -> %s", lambdas, unique)
    graphs = load_dataset(config)
    split = make_split(config, len(graphs))
    rows = sweep_lambda(graphs, unique, cfg, split, config["eval"]["probe"], int(sw["workers"]))
    out = output_dir(config)
    path = out / "sweep.csv"
    write_sweep_csv(rows, path)
    written = [path]
    plot = args.plot or sw.get("plot")
    if plot:
        from .plotting import plot_sweep

        written.append(plot_sweep(rows, out / plot))
    return written


def cmd_export_embeddings(config: dict, args) -> list[Path]:
    graphs = load_dataset(config)
    enc = _load_encoder(config, args.checkpoint, graphs)
    out = output_dir(config)
    path = out / (args.output or "embeddings.npz")
    with open(path, "wb") as fh:
        np.savez(fh, embeddings=embed_dataset(enc, graphs), labels=labels_of(graphs))
    return [path]


def cmd_compare(config: dict, args) -> list[Path]:
    cfg = train_config(config)
    graphs = load_dataset(config)
    cmp_cfg, ev = config["compare"], config["eval"]
    protocol = Protocol(
        kind=cmp_cfg["protocol"],
        split_ratios=tuple(config["split"]["ratios"]),
        folds=int(ev["folds"]),
        probe=ev["probe"],
    )
    meta = {"dataset": config["dataset"]}
    report = run_comparison(graphs, cmp_cfg["methods"], cmp_cfg["seeds"], cfg, protocol, meta)
    out = output_dir(config)
    runs, summary, table, meta_path = (
        out / "comparison.csv",
        out / "comparison_summary.csv",
        out / "comparison.txt",
        out / "comparison.meta.json",
    )
    report.write_csv(runs)
    report.write_summary_csv(summary)
    table.write_text(report.text_table() + "\n", encoding="utf-8")
    _write_json(report.metadata, meta_path)
    print(report.text_table())
    return [runs, summary, table, meta_path]


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "export-embeddings": cmd_export_embeddings,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adgcl-lab",
        description="Adversarial edge-dropping graph contrastive learning experiments.",
        epilog="Any config field may be overridden as --section.field VALUE (VALUE parsed as JSON).",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--output-dir", help="override output_dir")
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("eval", "export-embeddings"):
            p.add_argument("--checkpoint", help="encoder checkpoint file or run directory; omit for an untrained encoder")
        if name in ("gen-data", "eval", "export-embeddings"):
            p.add_argument("--output", help="output file name")
        if name in ("train", "sweep"):
            p.add_argument("--plot", help="also write a figure (.png or .svg) into the output directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        overrides = parse_overrides(rest)
        config = load_config(args.config, overrides)
        if args.output_dir:
            config["output_dir"] = args.output_dir
        written = COMMANDS[args.command](config, args)
    except (ConfigError, GraphError, ParamError, ProbeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TensorError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
