"""Command line pipeline for link prediction on follower graphs.

Subcommands mirror the pipeline stages: ingest, split, features, embed,
train, eval, plus run for the whole chain. Stages communicate only through
text artifacts in --out-dir, each stamped with the seed and config hash
that produced it; a stage refuses inputs whose hash differs from the
active config. Node ids in artifacts are the dataset's original ids.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from linkpred import __version__
from linkpred.config import PipelineConfig, config_hash, load_config
from linkpred.embeddings import (
    EmbeddingMatrix,
    generate_walks,
    load_embeddings,
    save_embeddings,
    train_skipgram,
)
from linkpred.graph import DiGraph, build_graph, parse_edge_list
from linkpred.heuristics import (
    FEATURE_NAMES,
    featurize_dataset,
    precompute_artifacts,
)
from linkpred.model import (
    Standardizer,
    evaluate,
    load_model,
    metrics_to_text,
    save_model,
    train,
)
from linkpred.sampling import LabeledEdge, assemble_dataset, load_labeled_edges, save_labeled_edges

FILES = {
    "graph": "graph.txt",
    "train_graph": "train_graph.txt",
    "train_edges": "train_edges.txt",
    "test_edges": "test_edges.txt",
    "features_train": "features_train.csv",
    "features_test": "features_test.csv",
    "embeddings": "embeddings.txt",
    "embeddings_meta": "embeddings_meta.txt",
    "model": "model.txt",
    "metrics": "metrics.txt",
    "run_meta": "run_meta.txt",
}


class StageError(RuntimeError):
    """A pipeline stage failed; the message already names the cause."""


# -- artifact helpers --------------------------------------------------------------


def _meta_line(meta: dict) -> str:
    return "# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n"


def _parse_meta(line: str) -> dict:
    meta = {}
    for tok in line.lstrip("#").split():
        if "=" in tok:
            k, _, v = tok.partition("=")
            meta[k] = v
    return meta


def _read_meta(path: Path) -> dict:
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise StageError(f"{path.name} is missing its provenance header")
    return _parse_meta(first)


def _base_meta(cfg: PipelineConfig) -> dict:
    return {"config_hash": config_hash(cfg), "seed": cfg.seed}


def _check_meta(meta: dict, cfg: PipelineConfig, path: Path) -> None:
    want = config_hash(cfg)
    got = meta.get("config_hash")
    if got != want:
        raise StageError(
            f"{path.name} was produced by config hash {got}, current config "
            f"hashes to {want}; refusing to mix artifacts across configs")


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise StageError(f"missing artifact {path.name}; run the {producer} stage first")
    return path


def _save_graph(path: Path, g: DiGraph, meta: dict) -> None:
    raw_edges = g.raw_ids[g.edges()]
    with open(path, "w") as fh:
        fh.write(_meta_line({**meta, "directed": int(g.directed),
                             "nodes": g.node_count, "edges": len(raw_edges)}))
        for u, v in raw_edges:
            fh.write(f"{u} {v}\n")


def _load_graph(path: Path, cfg: PipelineConfig) -> DiGraph:
    meta = _read_meta(path)
    _check_meta(meta, cfg, path)
    directed = meta.get("directed", "1") == "1"
    with open(path) as fh:
        fh.readline()
        raw = parse_edge_list(fh, directed=directed)
    g = build_graph(raw)
    if g.node_count != int(meta.get("nodes", g.node_count)):
        raise StageError(f"{path.name} header claims {meta['nodes']} nodes, "
                         f"file contains {g.node_count}")
    return g


def _load_train_graph(path: Path, full: DiGraph, cfg: PipelineConfig) -> DiGraph:
    """Training graph over the full node set, aligned to the full graph's ids."""
    meta = _read_meta(path)
    _check_meta(meta, cfg, path)
    arcs = []
    with open(path) as fh:
        fh.readline()
        for line in fh:
            u, v = line.split()
            arcs.append((full.id_map[int(u)], full.id_map[int(v)]))
    return DiGraph(full.node_count, np.array(arcs, dtype=np.int64),
                   full.directed, raw_ids=full.raw_ids)


def _to_raw(edges: list[LabeledEdge], g: DiGraph) -> list[LabeledEdge]:
    return [LabeledEdge(int(g.raw_ids[e.src]), int(g.raw_ids[e.dst]), e.label)
            for e in edges]


def _load_edges(path: Path, full: DiGraph, cfg: PipelineConfig) -> list[LabeledEdge]:
    raw_edges, meta = load_labeled_edges(path)
    _check_meta(meta, cfg, path)
    return [LabeledEdge(full.id_map[e.src], full.id_map[e.dst], e.label)
            for e in raw_edges]


def _save_features(path: Path, X: np.ndarray, y: np.ndarray,
                   names: list[str], meta: dict) -> None:
    with open(path, "w") as fh:
        fh.write(_meta_line(meta))
        fh.write(",".join(names) + ",label\n")
        np.savetxt(fh, np.column_stack([X, y.astype(np.float64)]),
                   delimiter=",", fmt="%.17g")


def _load_features(path: Path, cfg: PipelineConfig) -> tuple[np.ndarray, np.ndarray, dict]:
    meta = _read_meta(path)
    _check_meta(meta, cfg, path)
    data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    return data[:, :-1], data[:, -1].astype(np.int64), meta


def _heuristic_names(rank: int) -> list[str]:
    names = list(FEATURE_NAMES[:28])
    for block in ("svd_u_src", "svd_u_dst", "svd_v_src", "svd_v_dst"):
        names += [f"{block}_{i}" for i in range(rank)]
    return names + list(FEATURE_NAMES[-4:])


# -- stages ------------------------------------------------------------------------


def stage_ingest(cfg: PipelineConfig, out: Path) -> None:
    src = Path(cfg.dataset_path)
    if not cfg.dataset_path:
        raise StageError("config has no dataset.path")
    if not src.exists():
        raise StageError(f"dataset file not found: {src}")
    with open(src) as fh:
        raw = parse_edge_list(fh, directed=cfg.directed)
    g = build_graph(raw)
    dropped = len(raw.edges) - (g.arc_count if g.directed else g.edge_count)
    _save_graph(out / FILES["graph"], g, _base_meta(cfg))
    print(f"ingest: nodes={g.node_count} edges={g.edge_count} "
          f"parsed_pairs={len(raw.edges)} dropped_loops_or_dupes={dropped} "
          f"directed={int(g.directed)}")


def stage_split(cfg: PipelineConfig, out: Path) -> None:
    g = _load_graph(_require(out / FILES["graph"], "ingest"), cfg)
    ds = assemble_dataset(g, cfg.test_fraction, cfg.stage_seed("split"))
    meta = _base_meta(cfg)
    _save_graph(out / FILES["train_graph"], ds.train_graph, meta)
    save_labeled_edges(out / FILES["train_edges"], _to_raw(ds.train, g),
                       cfg.seed, cfg.test_fraction, extra=meta)
    save_labeled_edges(out / FILES["test_edges"], _to_raw(ds.test, g),
                       cfg.seed, cfg.test_fraction, extra=meta)
    n_train_pos = sum(e.label for e in ds.train)
    n_test_pos = sum(e.label for e in ds.test)
    print(f"split: train={len(ds.train)} (pos={n_train_pos}) "
          f"test={len(ds.test)} (pos={n_test_pos}) "
          f"pos_shortfall={ds.pos_shortfall} neg_shortfall={ds.neg_shortfall}")


def stage_embed(cfg: PipelineConfig, out: Path, threads: int) -> None:
    full = _load_graph(_require(out / FILES["graph"], "ingest"), cfg)
    tg = _load_train_graph(_require(out / FILES["train_graph"], "split"), full, cfg)
    walks = generate_walks(tg, cfg.walk_config())
    emb = train_skipgram(walks, cfg.sgns_config(), node_count=tg.node_count,
                         threads=threads)
    save_embeddings(out / FILES["embeddings"], emb)
    with open(out / FILES["embeddings_meta"], "w") as fh:
        fh.write(_meta_line(_base_meta(cfg)))
    losses = emb.epoch_losses if emb.epoch_losses is not None else []
    loss_txt = f" final_loss={losses[-1]:.6g}" if len(losses) else ""
    print(f"embed: walks={len(walks)} nodes={emb.node_count} dim={emb.dim}"
          f"{loss_txt}")


def _edge_hadamard(emb: EmbeddingMatrix, edges: list[LabeledEdge]) -> np.ndarray:
    src = np.array([e.src for e in edges], dtype=np.int64)
    dst = np.array([e.dst for e in edges], dtype=np.int64)
    return (emb.vectors[src] * emb.vectors[dst]).astype(np.float64)


def stage_features(cfg: PipelineConfig, out: Path) -> None:
    full = _load_graph(_require(out / FILES["graph"], "ingest"), cfg)
    tg = _load_train_graph(_require(out / FILES["train_graph"], "split"), full, cfg)
    splits = {
        "features_train": _load_edges(_require(out / FILES["train_edges"], "split"), full, cfg),
        "features_test": _load_edges(_require(out / FILES["test_edges"], "split"), full, cfg),
    }

    names: list[str] = []
    hcfg = cfg.heuristic_config()
    use_h = cfg.feature_mode in ("heuristic", "combined")
    use_r = cfg.feature_mode in ("embedding", "combined")
    artifacts = precompute_artifacts(tg, hcfg) if use_h else None
    emb = None
    if use_r:
        emb_path = _require(out / FILES["embeddings"], "embed")
        _check_meta(_read_meta(out / FILES["embeddings_meta"]), cfg,
                    out / FILES["embeddings_meta"])
        emb = load_embeddings(emb_path)
    if use_h:
        names += _heuristic_names(hcfg.svd_rank)
    if use_r:
        names += [f"r{i}" for i in range(emb.dim)]

    width = None
    for key, edges in splits.items():
        blocks = []
        if use_h:
            H, y = featurize_dataset(tg, edges, hcfg, artifacts)
            blocks.append(H)
        if use_r:
            blocks.append(_edge_hadamard(emb, edges))
        y = np.array([e.label for e in edges], dtype=np.int64)
        X = np.hstack(blocks)
        width = X.shape[1]
        meta = {**_base_meta(cfg), "feature_mode": cfg.feature_mode, "width": width}
        _save_features(out / FILES[key], X, y, names, meta)
    print(f"features: mode={cfg.feature_mode} width={width} "
          f"train_rows={len(splits['features_train'])} "
          f"test_rows={len(splits['features_test'])}")


def stage_train(cfg: PipelineConfig, out: Path) -> None:
    X, y, meta = _load_features(_require(out / FILES["features_train"], "features"), cfg)
    scaler = Standardizer()
    Xs = scaler.fit_transform(X)
    spec = cfg.model_spec(X.shape[1])
    params, history = train(spec, Xs, y, cfg.train_config())
    extra = {**_base_meta(cfg), "feature_mode": cfg.feature_mode,
             "feature_width": X.shape[1]}
    save_model(out / FILES["model"], spec, params, scaler,
               extra={f"meta_{k}": v for k, v in extra.items()})
    last = history[-1]
    val_txt = "" if last.val_f1 is None else f" val_f1={last.val_f1:.4f}"
    print(f"train: rows={len(y)} width={X.shape[1]} epochs_run={len(history)} "
          f"train_loss={last.train_loss:.6g}{val_txt}")


def _read_model_meta(path: Path) -> dict:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("layers "):
                break
            key, _, value = line.rstrip("\n").partition(" ")
            if key.startswith("meta_"):
                meta[key[len("meta_"):]] = value
    return meta


def stage_eval(cfg: PipelineConfig, out: Path) -> None:
    model_path = _require(out / FILES["model"], "train")
    _check_meta(_read_model_meta(model_path), cfg, model_path)
    spec, params, scaler = load_model(model_path)
    X, y, _ = _load_features(_require(out / FILES["features_test"], "features"), cfg)
    if scaler is not None:
        X = scaler.transform(X)
    metrics = evaluate(params, spec, X, y)
    extra = {"config_hash": config_hash(cfg), "seed": cfg.seed,
             "feature_mode": cfg.feature_mode, "feature_width": X.shape[1]}
    text = metrics_to_text(metrics, extra=extra)
    (out / FILES["metrics"]).write_text(text)
    print(text, end="")


STAGES = ("ingest", "split", "embed", "features", "train", "eval")


def _run_stage(name: str, cfg: PipelineConfig, out: Path, threads: int) -> None:
    handlers = {
        "ingest": lambda: stage_ingest(cfg, out),
        "split": lambda: stage_split(cfg, out),
        "embed": lambda: stage_embed(cfg, out, threads),
        "features": lambda: stage_features(cfg, out),
        "train": lambda: stage_train(cfg, out),
        "eval": lambda: stage_eval(cfg, out),
    }
    try:
        handlers[name]()
    except Exception as exc:
        raise StageError(f"stage {name} failed: {exc}") from exc


def cmd_run(cfg: PipelineConfig, out: Path, threads: int) -> None:
    order = [s for s in STAGES
             if s != "embed" or cfg.feature_mode != "heuristic"]
    times: dict[str, float] = {}
    for name in order:
        t0 = time.perf_counter()
        _run_stage(name, cfg, out, threads)
        times[name] = time.perf_counter() - t0
    total = sum(times.values())
    with open(out / FILES["run_meta"], "w") as fh:
        fh.write(_meta_line(_base_meta(cfg)))
        for name, t in times.items():
            fh.write(f"{name}_seconds={t:.3f}\n")
        fh.write(f"runtime_seconds={total:.3f}\n")
    print(f"run: completed {len(order)} stages in {total:.1f}s")


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linkpred",
        description="link prediction pipeline over follower graphs")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES + ("run",):
        p = sub.add_parser(name, help=f"run the {name} stage"
                           if name != "run" else "run every stage in order")
        p.add_argument("--config", required=True, help="key=value config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's global seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for embedding training")
        p.add_argument("--out-dir", default="artifacts",
                       help="artifact directory (default: ./artifacts)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {} if args.seed is None else {"seed": args.seed}
        cfg = load_config(args.config, overrides)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "run":
            cmd_run(cfg, out, args.threads)
        else:
            _run_stage(args.command, cfg, out, args.threads)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
