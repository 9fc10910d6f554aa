"""Moving between citation-database exports and PubMed identifiers.

batch.txt  one pipe-delimited citation stub per line for the batch citation
           matcher: ``journal|year|volume|first_page|author|key|``
match.txt  the matcher reply (the stub echoed with a PMID or a status token
           appended), a Scopus CSV/TSV export with a "PubMed ID" column, or a
           bare list of PMIDs
pmid.txt   a PubMed query, ``123[PMID] OR 456[PMID]``
"""
from __future__ import annotations

import csv
import io
import logging
import re
from dataclasses import dataclass, field

from .errors import FormatError

log = logging.getLogger(__name__)

STUB_FIELDS = ("journal", "year", "volume", "first_page", "author", "user_key")
SCOPUS_PMID_HEADER = "pubmed id"


@dataclass(frozen=True)
class CitationStub:
    journal: str = ""
    year: str = ""
    volume: str = ""
    first_page: str = ""
    author: str = ""
    user_key: str = ""

    def fields(self) -> tuple[str, ...]:
        return tuple(str(getattr(self, f)) for f in STUB_FIELDS)


@dataclass
class PmidList:
    pmids: list[int] = field(default_factory=list)
    unmatched_keys: list[str] = field(default_factory=list)
    skipped_lines: int = 0

    def add(self, pmid: int) -> None:
        if pmid <= 0:
            raise ValueError(f"PMID must be positive, got {pmid}")
        if pmid not in self.pmids:
            self.pmids.append(pmid)


def _clean(value: str) -> str:
    return str(value).replace("|", " ").replace("\n", " ").strip()


def make_batch(stubs) -> str:
    stubs = list(stubs)
    if not stubs:
        raise ValueError("no citation stubs to format")
    keys = [s.user_key for s in stubs]
    dupes = sorted({k for k in keys if keys.count(k) > 1})
    if dupes:
        raise ValueError(f"duplicate user keys: {', '.join(dupes)}")
    return "".join("|".join(_clean(v) for v in s.fields()) + "|\n" for s in stubs)


def parse_batch(text: str) -> list[CitationStub]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split("|")
        if len(parts) != len(STUB_FIELDS) + 1 or parts[-1] != "":
            raise FormatError(f"not a batch line: {line!r}")
        out.append(CitationStub(*parts[:-1]))
    return out


def parse_match(text: str) -> PmidList:
    """PMIDs from a matcher reply; non-numeric tails are recorded as unmatched."""
    out = PmidList()
    seen = set()
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.rstrip("\r").split("|")
        if len(parts) == len(STUB_FIELDS) + 2 and parts[-1].strip() == "":
            parts = parts[:-1]
        if len(parts) != len(STUB_FIELDS) + 1:
            log.warning("skipping matcher line with %d fields: %r", len(parts), line)
            out.skipped_lines += 1
            continue
        key, tail = parts[-2].strip(), parts[-1].strip()
        if tail.isdigit() and int(tail) > 0:
            pmid = int(tail)
            if pmid not in seen:
                seen.add(pmid)
                out.pmids.append(pmid)
        else:
            out.unmatched_keys.append(key)
    return out


def _sniff_dialect(text: str):
    first = text.split("\n", 1)[0]
    return "excel-tab" if "\t" in first and first.count("\t") >= first.count(",") else "excel"


def parse_scopus_pmids(text: str) -> PmidList:
    """PMIDs from a Scopus export column "PubMed ID", or from bare PMID lines."""
    text = text.removeprefix("\ufeff")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    out = PmidList()
    if not lines:
        return out
    seen = set()

    def take(cell):
        cell = cell.strip()
        if cell.isdigit() and int(cell) > 0 and int(cell) not in seen:
            seen.add(int(cell))
            out.pmids.append(int(cell))
        elif cell:
            out.skipped_lines += 1

    rows = list(csv.reader(io.StringIO("\n".join(lines)), dialect=_sniff_dialect(text)))
    header = [h.strip().lower() for h in rows[0]]
    if SCOPUS_PMID_HEADER in header:
        col = header.index(SCOPUS_PMID_HEADER)
        for row in rows[1:]:
            take(row[col] if col < len(row) else "")
        return out
    if lines[0].strip().isdigit():
        for ln in lines:
            take(ln)
        return out
    raise FormatError("no 'PubMed ID' column and first line is not a PMID")


_PIPE_LINE = re.compile(r"^[^|\n]*(\|[^|\n]*){6,7}$")


def read_match(text: str) -> PmidList:
    """Dispatch on content: matcher reply, Scopus table, or bare PMIDs."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if lines and all(_PIPE_LINE.match(ln.rstrip("\r")) for ln in lines[:5]):
        return parse_match(text)
    return parse_scopus_pmids(text)


def compose_query(p, joiner: str = " OR ") -> str:
    pmids = p.pmids if isinstance(p, PmidList) else list(p)
    unique = list(dict.fromkeys(int(x) for x in pmids))
    if not unique:
        raise ValueError("no PMIDs to compose a query from")
    return joiner.join(f"{x}[PMID]" for x in unique)


# --- Web of Science field-tagged exports -----------------------------------

def _wos_records(text: str):
    rec: dict[str, list[str]] = {}
    tag = None
    for line in text.removeprefix("\ufeff").splitlines():
        if line.startswith("ER"):
            if rec:
                yield rec
            rec, tag = {}, None
            continue
        if line[:2] in ("FN", "VR", "EF") and not rec:
            continue
        if line[:2].strip() and len(line) >= 2 and line[2:3] in (" ", ""):
            tag = line[:2]
            rec.setdefault(tag, []).append(line[3:].strip())
        elif tag and line.startswith("   "):
            rec[tag].append(line.strip())
    if rec:
        yield rec


def _matcher_author(name: str) -> str:
    last, _, initials = name.partition(",")
    return f"{last.strip()} {initials.replace('.', '').replace(' ', '')}".strip()


def stubs_from_wos(text: str) -> list[CitationStub]:
    """Citation stubs from a WoS tagged export (SO, PY, VL, BP, AU, UT)."""
    out = []
    for k, rec in enumerate(_wos_records(text), 1):
        first = {t: v[0] for t, v in rec.items() if v}
        out.append(CitationStub(
            journal=first.get("SO", ""),
            year=first.get("PY", ""),
            volume=first.get("VL", ""),
            first_page=first.get("BP", ""),
            author=_matcher_author(first.get("AU", "")),
            user_key=first.get("UT", f"r{k}"),
        ))
    return out
