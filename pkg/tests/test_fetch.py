import json
import threading
import urllib.parse
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from meshmap.errors import FetchError
from meshmap.fetch import EutilsClient, FetchJob, HttpError, RateLimiter, fetch
from meshmap.medline import parse_medline
from mock_eutils import FakeClock, MockService, record


def client_for(service, clock, **kw):
    return EutilsClient(transport=service, clock=clock, sleep=clock.sleep, **kw)


def max_in_window(starts, width=1.0, eps=1e-9):
    # starts exactly one interval apart may drift below it in float arithmetic
    return max(sum(1 for u in starts if t <= u < t + width - eps) for t in starts)


def test_paging_arithmetic(tmp_path):
    clock = FakeClock()
    svc = MockService(5, clock)
    out = tmp_path / "m.txt"
    rep = fetch(FetchJob("cancer", 2010, 2010, page_size=2, out_path=str(out)), client_for(svc, clock))
    assert rep.fetch_requests == 3 and rep.search_requests == 1
    assert [(p["retstart"], p["retmax"]) for p in svc.efetches()] == [(0, 2), (2, 2), (4, 2)]
    assert rep.requested == rep.retrieved == 5 and rep.complete and rep.warnings == []
    c = parse_medline(out.read_text())
    assert [r.pmid for r in c.records] == svc.pmids
    assert len(c) == rep.retrieved


def test_rate_ceiling_no_key(tmp_path):
    clock = FakeClock()
    svc = MockService(20, clock)
    fetch(FetchJob("q", page_size=1, out_path=str(tmp_path / "m.txt")), client_for(svc, clock))
    starts = svc.starts()
    assert len(starts) == 21
    assert all(b - a >= 1 / 3 - 1e-12 for a, b in zip(starts, starts[1:]))
    assert max_in_window(starts) <= 3


def test_rate_ceiling_with_key(tmp_path):
    clock = FakeClock()
    svc = MockService(30, clock)
    client = client_for(svc, clock, api_key="secret")
    fetch(FetchJob("q", page_size=1, out_path=str(tmp_path / "m.txt")), client)
    assert all(p["api_key"] == "secret" for _, _, p in svc.log)
    assert max_in_window(svc.starts()) <= 10


def test_rate_limiter_spacing():
    clock = FakeClock()
    lim = RateLimiter(4, clock, clock.sleep)
    stamps = []
    for _ in range(9):
        lim.wait()
        stamps.append(clock())
    assert stamps == pytest.approx([0.25 * k for k in range(9)])
    with pytest.raises(ValueError):
        RateLimiter(0)


def test_retry_once(tmp_path):
    clock = FakeClock()
    svc = MockService(5, clock, faults=[None, HttpError(503)])
    rep = fetch(FetchJob("q", page_size=2, out_path=str(tmp_path / "m.txt")), client_for(svc, clock))
    assert rep.retries == 1 and rep.retrieved == 5 and rep.warnings == []
    assert 1.0 in clock.sleeps


def test_retry_after_honoured(tmp_path):
    clock = FakeClock()
    svc = MockService(1, clock, faults=[HttpError(429, retry_after=7), OSError("reset")])
    rep = fetch(FetchJob("q", out_path=str(tmp_path / "m.txt")), client_for(svc, clock))
    assert rep.retries == 2 and 7 in clock.sleeps and rep.complete


def test_retries_bounded():
    clock = FakeClock()
    svc = MockService(1, clock, faults=[HttpError(500)] * 10)
    with pytest.raises(FetchError):
        client_for(svc, clock, max_retries=2).search("q")
    assert len(svc.log) == 3
    svc = MockService(1, clock, faults=[HttpError(400)])
    with pytest.raises(FetchError):
        client_for(svc, clock).search("q")
    assert len(svc.log) == 1


def test_shortfall_is_warning(tmp_path):
    clock = FakeClock()
    svc = MockService(5, clock, drop={1003})
    out = tmp_path / "m.txt"
    rep = fetch(FetchJob("q", page_size=2, out_path=str(out)), client_for(svc, clock))
    assert (rep.requested, rep.retrieved) == (5, 4) and not rep.complete
    assert "page 1: expected 2 records, got 1" in rep.warnings
    assert rep.warnings[-1] == "retrieved 4 of 5 records"
    assert len(parse_medline(out.read_text())) == 4


def test_zero_hits(tmp_path):
    clock = FakeClock()
    svc = MockService(0, clock)
    out = tmp_path / "m.txt"
    rep = fetch(FetchJob("nothing", out_path=str(out)), client_for(svc, clock))
    assert out.read_text() == "" and (rep.requested, rep.retrieved) == (0, 0)
    assert rep.fetch_requests == 0 and rep.complete


def test_resume_skips_done_pages(tmp_path):
    clock = FakeClock()
    out = tmp_path / "m.txt"
    job = FetchJob("q", page_size=2, out_path=str(out))
    svc = MockService(5, clock, faults=[None, None, None] + [HttpError(503)] * 5)
    with pytest.raises(FetchError):
        fetch(job, client_for(svc, clock, max_retries=1))
    assert len(parse_medline(out.read_text())) == 4
    svc2 = MockService(5, clock)
    rep = fetch(job, client_for(svc2, clock))
    assert rep.pages_skipped == 2 and rep.fetch_requests == 1
    assert [p["retstart"] for p in svc2.efetches()] == [4]
    assert [r.pmid for r in parse_medline(out.read_text()).records] == svc2.pmids
    # a finished job reruns with no fetches at all
    svc3 = MockService(5, clock)
    rep = fetch(job, client_for(svc3, clock))
    assert rep.fetch_requests == 0 and rep.retrieved == 5


def test_changed_query_restarts(tmp_path):
    clock = FakeClock()
    out = tmp_path / "m.txt"
    fetch(FetchJob("a", page_size=2, out_path=str(out)), client_for(MockService(3, clock), clock))
    rep = fetch(FetchJob("b", page_size=2, out_path=str(out)), client_for(MockService(3, clock), clock))
    assert rep.pages_skipped == 0 and len(parse_medline(out.read_text())) == 3


def test_job_validation():
    with pytest.raises(ValueError):
        FetchJob("q", page_size=0)
    with pytest.raises(ValueError):
        FetchJob("q", 2011, 2010)
    with pytest.raises(ValueError):
        FetchJob("q", 2010, None)
    q = '"siRNA[Title/Abstract]) OR RNAi[Title/Abstract]"'
    assert FetchJob(q, 2010, 2010).term == \
        f'({q}) AND ("2010"[Publication Date] : "2010"[Publication Date])'


class _Handler(BaseHTTPRequestHandler):
    pmids = [1, 2, 3]
    seen = []

    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"])).decode()
        params = dict(urllib.parse.parse_qsl(body))
        type(self).seen.append((self.path, params))
        if self.path.endswith("esearch.fcgi"):
            out = json.dumps({"esearchresult": {"count": "3", "webenv": "W", "querykey": "1"}})
        else:
            s, n = int(params["retstart"]), int(params["retmax"])
            out = "\n".join(record(p) for p in self.pmids[s:s + n])
        data = out.encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


def test_local_http_server(tmp_path):
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        client = EutilsClient(base_url=f"http://127.0.0.1:{server.server_port}/eutils", rate=1000)
        q = 'RNAi[Title/Abstract] & "x"'
        rep = fetch(FetchJob(q, page_size=2, out_path=str(tmp_path / "m.txt")), client)
    finally:
        server.shutdown()
    assert rep.retrieved == 3 and rep.fetch_requests == 2
    assert _Handler.seen[0][1]["term"] == q
    assert _Handler.seen[1][1]["rettype"] == "medline"
