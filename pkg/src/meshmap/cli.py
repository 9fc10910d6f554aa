"""Command-line entry point: ``meshmap <subcommand> ...``.

Every subcommand prints a JSON run summary on stdout. Settings come from
defaults, then an optional ``--config`` file of ``key=value`` lines, then
flags.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .basemap import (DEFAULT_SEED, DEFAULT_TAU, basemap_from_dict, basemap_to_dict, build_basemap,
                      emit_pajek, emit_svg, emit_vos_map)
from .bridge import compose_query, make_batch, parse_scopus_pmids, read_match, stubs_from_wos
from .errors import ConfigError, MeshMapError
from .fetch import API_KEY_ENV, FetchJob, fetch
from .matrix import DEPTH_MODES, CategorySet, build_matrix, eigen_summary, export_matrix
from .medline import read_medline
from .overlay import COUNTING_MODES, build_overlay, emit_overlay_map, emit_vector
from .trajectory import render_frames, run_trajectory, stats_dicts, write_stats
from .tree import load_tree

log = logging.getLogger("meshmap")


@dataclass
class Config:
    tree_path: str | None = None
    branch_filter: tuple[str, ...] = ("C", "D", "E")
    depth_mode: str = "strict"
    cosine_threshold: float = DEFAULT_TAU
    layout_seed: int = DEFAULT_SEED
    output_dir: str = "."
    source_mode: str | None = None
    counting_mode: str = "attributions"
    cell_values: str = "binary"

    def validate(self):
        if self.depth_mode not in DEPTH_MODES:
            raise ConfigError(f"depth_mode must be one of {DEPTH_MODES}")
        if self.counting_mode not in COUNTING_MODES:
            raise ConfigError(f"counting_mode must be one of {COUNTING_MODES}")
        if self.source_mode not in (None, "pubmed", "wok"):
            raise ConfigError("source_mode must be pubmed or wok")
        if self.cell_values not in ("binary", "attributions"):
            raise ConfigError("cell_values must be binary or attributions")
        if self.cosine_threshold < 0:
            raise ConfigError("cosine_threshold must be non-negative")
        return self


def _coerce(name: str, value: str):
    if name == "branch_filter":
        return tuple(b.strip().upper() for b in value.split(",") if b.strip())
    if name == "cosine_threshold":
        return float(value)
    if name == "layout_seed":
        return int(value)
    return value.strip()


def load_config(path) -> dict:
    known = {f.name for f in fields(Config)}
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown setting {raw.strip()!r}")
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return out


FLAG_TO_FIELD = {
    "tree": "tree_path", "branches": "branch_filter", "tau": "cosine_threshold",
    "seed": "layout_seed", "out": "output_dir", "source": "source_mode",
    "counting": "counting_mode", "cells": "cell_values",
}


def resolve_config(args) -> Config:
    cfg = Config()
    if getattr(args, "config", None):
        cfg = replace(cfg, **load_config(args.config))
    over = {}
    for flag, name in FLAG_TO_FIELD.items():
        v = getattr(args, flag, None)
        if v is not None:
            over[name] = _coerce(name, v) if isinstance(v, str) else v
    if getattr(args, "plus", False):
        over["depth_mode"] = "collapsed"
    return replace(cfg, **over).validate()


def _source_mode(cfg: Config) -> str:
    if cfg.source_mode:
        return cfg.source_mode
    if sys.stdin.isatty() and sys.stderr.isatty():
        sys.stderr.write("Input source: 1) PubMed  2) Web of Knowledge [1]: ")
        sys.stderr.flush()
        answer = sys.stdin.readline().strip()
        return "wok" if answer == "2" else "pubmed"
    return "pubmed"


def _tree(cfg: Config):
    if not cfg.tree_path:
        raise ConfigError("no MeSH tree file given (--tree or tree_path=)")
    if not Path(cfg.tree_path).is_file():
        raise ConfigError(f"MeSH tree file not found: {cfg.tree_path}")
    return load_tree(cfg.tree_path)


def _out_dir(cfg: Config) -> Path:
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _corpus(args, cfg):
    return read_medline(args.inputs, _source_mode(cfg))


def _load_basemap(path, tree):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    cats = CategorySet.from_tree(tree, data["branches"], data["depth_mode"])
    return basemap_from_dict(data, cats)


def _overlay_categories(bm, cfg: Config) -> CategorySet:
    return bm.categories.with_mode(cfg.depth_mode) if cfg.depth_mode == "collapsed" else bm.categories


def cmd_basemap(args, cfg):
    tree = _tree(cfg)
    corpus = _corpus(args, cfg)
    cats = CategorySet.from_tree(tree, cfg.branch_filter, cfg.depth_mode)
    m = build_matrix(corpus, tree, cats)
    bm = build_basemap(m, cfg.cosine_threshold, cfg.layout_seed, kind=cfg.cell_values)
    out = _out_dir(cfg)
    files = [
        emit_pajek(bm, out / "basemap.paj"),
        emit_vos_map(bm, out / "basemap_vos.txt"),
        emit_svg(bm, out / "basemap.svg"),
    ]
    (out / "basemap.json").write_text(json.dumps(basemap_to_dict(bm), indent=1) + "\n", encoding="utf-8")
    files.append(out / "basemap.json")
    stats = {
        "branches": ",".join(sorted(cats.branch_filter)),
        "records": len(corpus),
        "records_with_categories": m.n_records_with_hits,
        "categories": len(cats),
        "used": m.n_used,
        "largest_component": len(bm),
    }
    (out / "stats.tsv").write_text("\t".join(stats) + "\n" + "\t".join(map(str, stats.values())) + "\n",
                                   encoding="utf-8")
    files.append(out / "stats.tsv")
    return {**stats, "edges": len(bm.edges), "tau": bm.tau, "seed": bm.seed,
            "fingerprint": bm.fingerprint, "files": [str(f) for f in files]}


def cmd_overlay(args, cfg):
    tree = _tree(cfg)
    bm = _load_basemap(args.basemap, tree)
    cats = _overlay_categories(bm, cfg)
    sample = _corpus(args, cfg)
    o = build_overlay(sample, tree, cats, cfg.counting_mode)
    out = _out_dir(cfg)
    m = build_matrix(sample, tree, cats)
    files = list(export_matrix(m, out, kind=cfg.cell_values))
    files.append(emit_vector(o, bm, out / args.vector_name))
    files.append(emit_overlay_map(o, bm, out / args.map_name))
    files.append(emit_svg(bm, out / "overlay.svg", sizes=np.log2(o.on_basemap(bm) + 1.0)))
    return {"records": len(sample), "mode": o.mode, "counting": o.counting,
            "active_categories": len(o.active), "active_on_basemap": o.active_on_basemap(bm),
            "occurrences": o.n_occurrences, "basemap": bm.fingerprint,
            "files": [str(f) for f in files]}


def cmd_trajectory(args, cfg):
    tree = _tree(cfg)
    bm = _load_basemap(args.basemap, tree)
    cats = _overlay_categories(bm, cfg)
    corpus = _corpus(args, cfg)
    run = run_trajectory(corpus, tree, cats, args.year_from, args.year_to, bm, cfg.counting_mode)
    out = _out_dir(cfg)
    stats_path = write_stats(run, out / "trajectory.tsv")
    frames = render_frames(run, bm, out / "frames")
    return {"years": run.years, "mode": run.mode, "stats": stats_dicts(run),
            "missing_year": run.missing_year, "out_of_range": run.out_of_range,
            "files": [str(stats_path)] + [str(f) for f in frames] + [str(out / "frames" / "frames.txt")]}


def cmd_matrix(args, cfg):
    tree = _tree(cfg)
    corpus = _corpus(args, cfg)
    cats = CategorySet.from_tree(tree, cfg.branch_filter, cfg.depth_mode)
    m = build_matrix(corpus, tree, cats)
    files = export_matrix(m, _out_dir(cfg), kind=cfg.cell_values)
    return {"rows": m.shape[0], "columns": m.shape[1], "used": m.n_used,
            "attributions": int(m.col_occurrences.sum()), "unmapped_headings": m.n_unmapped,
            "files": [str(f) for f in files]}


def cmd_eigen(args, cfg):
    tree = _tree(cfg)
    corpus = _corpus(args, cfg)
    cats = CategorySet.from_tree(tree, cfg.branch_filter, cfg.depth_mode)
    s = eigen_summary(build_matrix(corpus, tree, cats), kind=cfg.cell_values)
    return s.as_dict()


def cmd_bridge(args, cfg):
    out = _out_dir(cfg)
    text = Path(args.input).read_text(encoding="utf-8-sig")
    if args.kind == "wos":
        stubs = stubs_from_wos(text)
        path = out / "batch.txt"
        path.write_text(make_batch(stubs), encoding="utf-8")
        return {"stubs": len(stubs), "files": [str(path)]}
    pl = parse_scopus_pmids(text) if args.kind == "scopus" else read_match(text)
    path = out / "pmid.txt"
    path.write_text(compose_query(pl) + "\n", encoding="utf-8")
    return {"pmids": len(pl.pmids), "unmatched": pl.unmatched_keys,
            "skipped_lines": pl.skipped_lines, "files": [str(path)]}


def cmd_fetch(args, cfg):
    job = FetchJob(query=args.query or "", date_from=args.year_from, date_to=args.year_to,
                   page_size=args.page_size, api_key=os.environ.get(API_KEY_ENV),
                   out_path=str(_out_dir(cfg) / args.output))
    report = fetch(job)
    return {**report.as_dict(), "files": [job.out_path]}


def _common(p, corpus=True, tree=True):
    p.add_argument("--config", help="key=value settings file")
    p.add_argument("--out", help="output directory")
    if tree:
        p.add_argument("--tree", help="MeSH tree file (label;tree_number per line)")
    if corpus:
        p.add_argument("inputs", nargs="+", help="Medline tagged-format files ('-' for stdin)")
        p.add_argument("--source", choices=["pubmed", "wok"], help="export flavour")
        p.add_argument("--branches", help="comma-separated branch letters (default C,D,E)")
        p.add_argument("--cells", choices=["binary", "attributions"], help="matrix cell values")
        p.add_argument("--plus", action="store_true", help="fold deeper headings onto level 2")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="meshmap", description="MeSH co-occurrence base maps, overlays and trajectories.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("basemap", help="build a base map from a corpus")
    _common(p)
    p.add_argument("--tau", type=float, help="cosine threshold (edges need cosine > tau)")
    p.add_argument("--seed", type=int, help="layout seed")
    p.set_defaults(func=cmd_basemap)

    p = sub.add_parser("overlay", help="overlay a sample on a base map")
    _common(p)
    p.add_argument("--basemap", required=True, help="basemap.json written by 'basemap'")
    p.add_argument("--counting", choices=list(COUNTING_MODES))
    p.add_argument("--vector-name", default="pajek.vec")
    p.add_argument("--map-name", default="vos.txt")
    p.set_defaults(func=cmd_overlay)

    p = sub.add_parser("trajectory", help="per-year overlays and frames")
    _common(p)
    p.add_argument("--basemap", required=True)
    p.add_argument("--from", dest="year_from", type=int, required=True)
    p.add_argument("--to", dest="year_to", type=int, required=True)
    p.add_argument("--counting", choices=list(COUNTING_MODES))
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("matrix", help="export the document x category matrix")
    _common(p)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("eigen", help="correlation eigenvalue summary")
    _common(p)
    p.set_defaults(func=cmd_eigen)

    p = sub.add_parser("bridge", help="citation database <-> PMID conversions")
    _common(p, corpus=False, tree=False)
    p.add_argument("kind", choices=["wos", "match", "scopus"],
                   help="wos: WoS export -> batch.txt; match/scopus: reply or table -> pmid.txt")
    p.add_argument("input")
    p.set_defaults(func=cmd_bridge)

    p = sub.add_parser("fetch", help="download Medline records from E-utilities")
    _common(p, corpus=False, tree=False)
    p.add_argument("--query", help="PubMed search expression, passed verbatim")
    p.add_argument("--from", dest="year_from", type=int)
    p.add_argument("--to", dest="year_to", type=int)
    p.add_argument("--page-size", type=int, default=500)
    p.add_argument("--output", default="medline.txt")
    p.set_defaults(func=cmd_fetch)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        summary = args.func(args, cfg)
    except (MeshMapError, OSError, ValueError, KeyError) as exc:
        print(f"meshmap {args.command}: error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"command": args.command, "ok": True, **summary}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
