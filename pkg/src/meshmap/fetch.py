"""Download Medline records through the NCBI E-utilities.

One ``esearch`` call (with history) gives the hit count; ``efetch`` then
pulls the records page by page in MEDLINE text format. Progress is kept in
a sidecar next to the output so an interrupted download can be resumed
without refetching finished pages.
"""
from __future__ import annotations

import json
import logging
import os
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import FetchError
from .medline import parse_medline

log = logging.getLogger(__name__)

EUTILS = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/"
MAX_PAGE_SIZE = 10000
API_KEY_ENV = "NCBI_API_KEY"
RATE_NO_KEY = 3.0
RATE_WITH_KEY = 10.0


class HttpError(Exception):
    def __init__(self, status, retry_after=None, body=""):
        self.status = status
        self.retry_after = retry_after
        self.body = body
        super().__init__(f"HTTP {status}")


def urllib_transport(url: str, params: dict, timeout: float = 60.0) -> str:
    data = urllib.parse.urlencode(params).encode()
    req = urllib.request.Request(url, data=data, headers={"User-Agent": "meshmap"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.read().decode("utf-8", errors="replace")
    except urllib.error.HTTPError as exc:
        retry = exc.headers.get("Retry-After") if exc.headers else None
        raise HttpError(exc.code, float(retry) if retry and retry.isdigit() else None) from None


class RateLimiter:
    """Spaces request starts at least 1/rate seconds apart."""

    def __init__(self, rate: float, clock=time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.interval = 1.0 / rate
        self.clock = clock
        self.sleep = sleep
        self._last = None

    def wait(self):
        now = self.clock()
        if self._last is not None:
            delay = self._last + self.interval - now
            if delay > 0:
                self.sleep(delay)
                now = self.clock()
        self._last = now


@dataclass
class FetchJob:
    query: str = ""
    date_from: int | None = None
    date_to: int | None = None
    page_size: int = 500
    api_key: str | None = None
    out_path: str = "medline.txt"

    def __post_init__(self):
        if not 0 < self.page_size <= MAX_PAGE_SIZE:
            raise ValueError(f"page size must be in 1..{MAX_PAGE_SIZE}")
        if (self.date_from is None) != (self.date_to is None):
            raise ValueError("give both years of the date range or neither")
        if self.date_from is not None and self.date_from > self.date_to:
            raise ValueError(f"date range {self.date_from}-{self.date_to} is empty")

    @property
    def term(self) -> str:
        parts = []
        if self.query.strip():
            parts.append(self.query.strip())
        if self.date_from is not None:
            parts.append(f'("{self.date_from}"[Publication Date] : "{self.date_to}"[Publication Date])')
        if not parts:
            raise ValueError("empty query")
        if len(parts) == 1:
            return parts[0]
        return f"({parts[0]}) AND {parts[1]}"


@dataclass
class FetchReport:
    term: str
    requested: int = 0
    retrieved: int = 0
    search_requests: int = 0
    fetch_requests: int = 0
    retries: int = 0
    pages_total: int = 0
    pages_skipped: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.retrieved == self.requested

    def as_dict(self) -> dict:
        out = asdict(self)
        out["complete"] = self.complete
        return out


class EutilsClient:
    def __init__(self, base_url: str = EUTILS, api_key: str | None = None, rate: float | None = None,
                 transport=None, max_retries: int = 4, backoff: float = 1.0, max_backoff: float = 30.0,
                 clock=time.monotonic, sleep=time.sleep, email: str | None = None):
        self.base_url = base_url.rstrip("/") + "/"
        self.api_key = api_key
        self.email = email
        if rate is None:
            rate = RATE_WITH_KEY if api_key else RATE_NO_KEY
        self.limiter = RateLimiter(rate, clock, sleep)
        self.transport = transport or urllib_transport
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self.sleep = sleep
        self.retries = 0
        self.requests = 0

    def get(self, endpoint: str, params: dict) -> str:
        params = dict(params, tool="meshmap")
        if self.api_key:
            params["api_key"] = self.api_key
        if self.email:
            params["email"] = self.email
        url = self.base_url + endpoint
        for attempt in range(self.max_retries + 1):
            self.limiter.wait()
            self.requests += 1
            try:
                return self.transport(url, params)
            except HttpError as exc:
                if exc.status != 429 and exc.status < 500:
                    raise FetchError(f"{endpoint}: HTTP {exc.status}") from exc
                err, wait = exc, exc.retry_after
            except OSError as exc:
                err, wait = exc, None
            if attempt == self.max_retries:
                raise FetchError(f"{endpoint}: giving up after {attempt + 1} attempts ({err})") from err
            self.retries += 1
            wait = wait if wait is not None else min(self.backoff * 2 ** attempt, self.max_backoff)
            log.warning("%s failed (%s); retrying in %.1fs", endpoint, err, wait)
            self.sleep(wait)
        raise AssertionError("unreachable")

    def search(self, term: str) -> tuple[int, str, str]:
        text = self.get("esearch.fcgi", {"db": "pubmed", "term": term, "usehistory": "y",
                                         "retmax": 0, "retmode": "json"})
        try:
            res = json.loads(text)["esearchresult"]
            return int(res["count"]), res.get("webenv", ""), res.get("querykey", "")
        except (ValueError, KeyError) as exc:
            raise FetchError(f"unexpected esearch reply: {text[:200]!r}") from exc

    def fetch_page(self, webenv: str, query_key: str, retstart: int, retmax: int) -> str:
        return self.get("efetch.fcgi", {"db": "pubmed", "WebEnv": webenv, "query_key": query_key,
                                        "retstart": retstart, "retmax": retmax,
                                        "rettype": "medline", "retmode": "text"})


def _progress_path(out: Path) -> Path:
    return out.with_name(out.name + ".progress.json")


def _load_progress(out: Path, term: str, page_size: int, count: int) -> dict | None:
    p = _progress_path(out)
    if not (p.exists() and out.exists()):
        return None
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except ValueError:
        return None
    if (data.get("term"), data.get("page_size"), data.get("count")) != (term, page_size, count):
        return None
    return data


def fetch(job: FetchJob, client: EutilsClient | None = None) -> FetchReport:
    """Run a download job; shortfalls are reported as warnings, not errors."""
    api_key = job.api_key or os.environ.get(API_KEY_ENV)
    client = client or EutilsClient(api_key=api_key)
    out = Path(job.out_path)
    report = FetchReport(job.term)
    retries0 = client.retries

    count, webenv, qk = client.search(job.term)
    report.search_requests = 1
    report.requested = count
    pages = -(-count // job.page_size)
    report.pages_total = pages

    progress = _load_progress(out, job.term, job.page_size, count)
    if progress is None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text("", encoding="utf-8")
        progress = {"term": job.term, "page_size": job.page_size, "count": count, "pages": {}}
    done = progress["pages"]

    fetches = 0
    for page in range(pages):
        if str(page) in done:
            report.pages_skipped += 1
            continue
        start = page * job.page_size
        expected = min(job.page_size, count - start)
        text = client.fetch_page(webenv, qk, start, job.page_size)
        fetches += 1
        got = len(parse_medline(text).records)
        if got != expected:
            report.warnings.append(f"page {page}: expected {expected} records, got {got}")
        body = text.strip("\n")
        if body:
            with open(out, "a", encoding="utf-8") as fh:
                if out.stat().st_size:
                    fh.write("\n")
                fh.write(body + "\n")
        done[str(page)] = got
        _progress_path(out).write_text(json.dumps(progress, sort_keys=True), encoding="utf-8")

    report.fetch_requests = fetches
    report.retries = client.retries - retries0
    report.retrieved = sum(done.values())
    if report.retrieved != count:
        report.warnings.append(f"retrieved {report.retrieved} of {count} records")
    for w in report.warnings:
        log.warning(w)
    return report
