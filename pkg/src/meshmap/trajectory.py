"""Year-by-year overlays of one topic sample."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .basemap import BaseMap, emit_svg
from .matrix import CategorySet
from .medline import Corpus, slice_by_year
from .overlay import Overlay, build_overlay
from .tree import MeshTree

STATS_COLUMNS = (
    "Year",
    "Number of Records",
    "Number of Records with MeSH Terms",
    "Number of MeSH Terms",
    "Number of Categories",
    "MeSH Terms Active in the Overlay",
)


@dataclass
class YearStats:
    year: int
    n_records: int = 0
    n_records_with_mesh: int = 0
    n_mesh_attributions: int = 0
    n_distinct_categories: int = 0
    n_active_on_basemap: int = 0

    def row(self):
        return [self.year, self.n_records, self.n_records_with_mesh, self.n_mesh_attributions,
                self.n_distinct_categories, self.n_active_on_basemap]


@dataclass
class TrajectoryRun:
    years: list[int]
    stats: dict[int, YearStats]
    frames: dict[int, Overlay]
    mode: str
    missing_year: int = 0
    out_of_range: int = 0
    manifest: list[str] = field(default_factory=list)

    def totals(self) -> list:
        cols = list(zip(*(self.stats[y].row()[1:] for y in self.years))) or [()] * 5
        return ["Total"] + [sum(c) for c in cols]


def distinct_categories(c: Corpus, tree: MeshTree) -> int:
    """Distinct (label, tree number) positions reached by the headings, any depth."""
    seen = set()
    for r in c.records:
        for h in r.headings:
            d = tree.lookup(h.label)
            if d is not None:
                seen.update((d.label, n) for n in d.tree_numbers)
    return len(seen)


def year_stats(year: int, c: Corpus, tree: MeshTree, o: Overlay, bm: BaseMap | None) -> YearStats:
    return YearStats(
        year=year,
        n_records=len(c),
        n_records_with_mesh=sum(1 for r in c.records if r.headings),
        n_mesh_attributions=c.n_attributions,
        n_distinct_categories=distinct_categories(c, tree),
        n_active_on_basemap=o.active_on_basemap(bm) if bm is not None else len(o.active),
    )


def run_trajectory(c: Corpus, tree: MeshTree, cats: CategorySet, start: int, end: int,
                   bm: BaseMap | None = None, counting: str = "attributions") -> TrajectoryRun:
    slices = slice_by_year(c, start, end)
    years = sorted(slices.buckets)
    frames, stats = {}, {}
    for y in years:
        sample = slices.buckets[y]
        frames[y] = build_overlay(sample, tree, cats, counting)
        stats[y] = year_stats(y, sample, tree, frames[y], bm)
    return TrajectoryRun(years, stats, frames, cats.depth_mode,
                         slices.missing_year, slices.out_of_range)


def write_stats(run: TrajectoryRun, path) -> Path:
    path = Path(path)
    rows = ["\t".join(STATS_COLUMNS)]
    rows += ["\t".join(map(str, run.stats[y].row())) for y in run.years]
    rows.append("\t".join(map(str, run.totals())))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


def read_stats(path) -> list[YearStats]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    out = []
    for line in lines[1:]:
        cells = line.split("\t")
        if cells[0] == "Total":
            continue
        out.append(YearStats(*map(int, cells)))
    return out


def frame_name(year: int) -> str:
    return f"frame_{year:04d}.svg"


def render_frames(run: TrajectoryRun, bm: BaseMap, directory, manifest_name: str = "frames.txt") -> list[Path]:
    """One SVG per year on the fixed base-map layout, plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for y in run.years:
        sizes = np.log2(run.frames[y].on_basemap(bm) + 1.0)
        paths.append(emit_svg(bm, directory / frame_name(y), sizes=sizes, caption=str(y)))
    run.manifest = [p.name for p in paths]
    (directory / manifest_name).write_text("".join(f"{n}\n" for n in run.manifest), encoding="utf-8")
    return paths


def stats_dicts(run: TrajectoryRun) -> list[dict]:
    return [asdict(run.stats[y]) for y in run.years]
