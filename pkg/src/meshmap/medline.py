"""Medline tagged-format ("MEDLINE display") parsing.

A field line is a tag of up to four characters padded to width four, then
``"- "`` and the value. Continuation lines start with six spaces. Records
are separated by blank lines. The same grammar serves PubMed downloads and
the Medline exports of Web of Knowledge; the latter may carry a preamble,
a BOM, or CRLF endings.
"""
from __future__ import annotations

import logging
import re
import sys
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

MODES = ("pubmed", "wok")

_FIELD = re.compile(r"^([A-Z][A-Z0-9]{0,3}) {0,3}-(?: (.*))?$")
_YEAR = re.compile(r"\b(\d{4})\b")


@dataclass(frozen=True)
class MeshHeading:
    label: str
    is_major: bool = False
    qualifiers: tuple[tuple[str, bool], ...] = ()

    @classmethod
    def parse(cls, value: str) -> "MeshHeading":
        parts = [p.strip() for p in value.split("/")]
        label, major = _star(parts[0])
        if not label:
            raise ValueError(f"empty MeSH heading in {value!r}")
        quals = tuple(_star(q) for q in parts[1:] if q.strip("* "))
        return cls(label, major, quals)


def _star(token):
    token = token.strip()
    if token.startswith("*"):
        return token[1:].strip(), True
    return token, False


@dataclass
class MedlineRecord:
    pmid: int
    status: str = ""
    owner: str = ""
    pub_year: int | None = None
    headings: list[MeshHeading] = field(default_factory=list)
    raw_fields: list[tuple[str, str]] = field(default_factory=list)

    @classmethod
    def from_fields(cls, fields) -> "MedlineRecord":
        first = {}
        headings = []
        for tag, value in fields:
            first.setdefault(tag, value)
            if tag == "MH":
                try:
                    headings.append(MeshHeading.parse(value))
                except ValueError:
                    log.warning("skipping empty MH value %r", value)
        year = None
        m = _YEAR.search(first.get("DP", ""))
        if m:
            year = int(m.group(1))
        return cls(
            pmid=int(first["PMID"]),
            status=first.get("STAT", ""),
            owner=first.get("OWN", ""),
            pub_year=year,
            headings=headings,
            raw_fields=list(fields),
        )

    def values(self, tag: str) -> list[str]:
        return [v for t, v in self.raw_fields if t == tag]

    @property
    def n_qualifiers(self) -> int:
        return sum(len(h.qualifiers) for h in self.headings)


@dataclass
class Corpus:
    records: list[MedlineRecord] = field(default_factory=list)
    source_mode: str = "pubmed"
    skipped_no_pmid: int = 0
    duplicates: int = 0
    warnings: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def n_attributions(self) -> int:
        return sum(len(r.headings) for r in self.records)

    def subset(self, records) -> "Corpus":
        return Corpus(list(records), self.source_mode)


def _blocks(lines, mode):
    """Yield lists of (tag, value) for each blank-line separated block."""
    block = []
    warnings = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            if block:
                yield block, warnings
                block, warnings = [], []
            continue
        m = _FIELD.match(line)
        if m:
            tag, value = m.group(1), (m.group(2) or "").strip()
            # a second PMID without a separating blank line opens a new record
            if tag == "PMID" and any(t == "PMID" for t, _ in block):
                yield block, warnings
                block, warnings = [], []
            block.append([tag, value])
            continue
        continuation = line.startswith("      ") or (mode == "wok" and line[:1] in " \t")
        if continuation and block:
            text = line.strip()
            block[-1][1] = f"{block[-1][1]} {text}" if block[-1][1] else text
        elif block or mode == "pubmed":
            warnings.append(f"line {lineno}: unrecognized line {line[:40]!r}")
        # wok mode: leading non-record lines before the first field are preamble
    if block:
        yield block, warnings


def parse_medline(text: str, mode: str = "pubmed", on_duplicate: str = "skip") -> Corpus:
    """Parse tagged-format text into a Corpus.

    ``on_duplicate`` is ``"skip"`` (keep the first record per PMID) or
    ``"error"``. Blocks without a PMID are skipped and tallied.
    """
    if mode not in MODES:
        raise ValueError(f"unknown source mode {mode!r}")
    if on_duplicate not in ("skip", "error"):
        raise ValueError(f"unknown duplicate policy {on_duplicate!r}")
    text = text.removeprefix("\ufeff")
    corpus = Corpus(source_mode=mode)
    seen = set()
    for block, warnings in _blocks(text.splitlines(), mode):
        corpus.warnings.extend(warnings)
        fields = [(t, v) for t, v in block]
        pmids = [v for t, v in fields if t == "PMID"]
        if not pmids or not pmids[0].strip().isdigit():
            corpus.skipped_no_pmid += 1
            continue
        rec = MedlineRecord.from_fields(fields)
        if rec.pmid in seen:
            if on_duplicate == "error":
                raise ValueError(f"duplicate PMID {rec.pmid}")
            corpus.duplicates += 1
            continue
        seen.add(rec.pmid)
        corpus.records.append(rec)
    for w in corpus.warnings:
        log.warning(w)
    return corpus


def read_medline(paths, mode: str = "pubmed", on_duplicate: str = "skip") -> Corpus:
    """Parse and concatenate one or more files ("-" reads standard input)."""
    if isinstance(paths, (str, bytes)) or hasattr(paths, "__fspath__"):
        paths = [paths]
    chunks = []
    for p in paths:
        if str(p) == "-":
            chunks.append(sys.stdin.read())
        else:
            with open(p, encoding="utf-8-sig", errors="replace") as fh:
                chunks.append(fh.read())
    return parse_medline("\n\n".join(chunks), mode, on_duplicate)


def format_record(rec: MedlineRecord) -> str:
    return "".join(f"{tag:<4}- {value}\n" for tag, value in rec.raw_fields)


def format_medline(records) -> str:
    """Canonical serialization: unwrapped values, one blank line between records."""
    return "\n".join(format_record(r) for r in records)


def mesh_eligible(r: MedlineRecord) -> bool:
    return r.status == "MEDLINE" and r.owner == "NLM"


@dataclass
class YearSlices:
    buckets: dict[int, Corpus]
    missing_year: int = 0
    out_of_range: int = 0

    @property
    def skipped(self) -> int:
        return self.missing_year + self.out_of_range


def slice_by_year(c: Corpus, start: int, end: int) -> YearSlices:
    if start > end:
        raise ValueError(f"year range {start}-{end} is empty")
    buckets = {y: Corpus(source_mode=c.source_mode) for y in range(start, end + 1)}
    out = YearSlices(buckets)
    for r in c.records:
        if r.pub_year is None:
            out.missing_year += 1
        elif r.pub_year in buckets:
            buckets[r.pub_year].records.append(r)
        else:
            out.out_of_range += 1
    return out
