import json

import pytest

from tckit.acquisition import (AcquisitionConfig, fetch_pdfs,
                               resolve_pdf_urls)
from tckit.records import Document


class FakeResponse:
    def __init__(self, status_code=200, payload=None, content=b""):
        self.status_code = status_code
        self._payload = payload
        self.content = content

    def json(self):
        return self._payload


class FakeSession:
    """Canned GET responses keyed by URL substring, recorded in order."""

    def __init__(self, routes):
        self.routes = routes
        self.calls = []

    def get(self, url, params=None, timeout=None):
        self.calls.append(url)
        for key, response in self.routes.items():
            if key in url:
                if isinstance(response, list):
                    return response.pop(0)
                if isinstance(response, Exception):
                    raise response
                return response
        return FakeResponse(status_code=404)


def openalex_payload(pdf_url):
    return {"best_oa_location": {"pdf_url": pdf_url},
            "open_access": {"oa_url": pdf_url + "?landing"},
            "locations": []}


def unpaywall_payload(pdf_url):
    return {"best_oa_location": {"url_for_pdf": pdf_url, "url": None},
            "oa_locations": []}


def cfg(**kwargs):
    kwargs.setdefault("concurrency", 1)
    kwargs.setdefault("backoff_initial", 0.0)
    return AcquisitionConfig(**kwargs)


def test_first_provider_wins():
    session = FakeSession({
        "openalex": FakeResponse(payload=openalex_payload("https://x/a.pdf")),
        "unpaywall": FakeResponse(payload=unpaywall_payload("https://y/b.pdf")),
    })
    results = resolve_pdf_urls(["10.1/one"], cfg(), session=session,
                               sleep=lambda _: None)
    assert results[0].provider == "openalex"
    assert results[0].candidate_urls[0] == "https://x/a.pdf"
    assert all("unpaywall" not in u for u in session.calls)


def test_fallback_to_second_provider():
    session = FakeSession({
        "openalex": FakeResponse(status_code=404),
        "unpaywall": FakeResponse(payload=unpaywall_payload("https://y/b.pdf")),
    })
    results = resolve_pdf_urls(["10.1/one"], cfg(), session=session,
                               sleep=lambda _: None)
    assert results[0].provider == "unpaywall"


def test_unknown_everywhere_yields_empty():
    session = FakeSession({})
    results = resolve_pdf_urls(["10.1/nowhere"], cfg(), session=session,
                               sleep=lambda _: None)
    assert results[0].candidate_urls == ()
    assert results[0].provider is None


def test_mixed_batch_isolates_failures():
    session = FakeSession({
        "doi:10.1/ok": FakeResponse(payload=openalex_payload("https://x/ok.pdf")),
        "doi:10.1/boom": RuntimeError("connection exploded"),
        "10.1/ok": FakeResponse(payload=unpaywall_payload("https://y/ok.pdf")),
        "10.1/boom": RuntimeError("connection exploded"),
        "doi:10.1/also": FakeResponse(payload=openalex_payload("https://x/also.pdf")),
    })
    results = resolve_pdf_urls(["10.1/ok", "10.1/boom", "10.1/also"], cfg(),
                               session=session, sleep=lambda _: None)
    assert len(results) == 3
    assert results[0].candidate_urls and results[2].candidate_urls
    assert results[1].candidate_urls == ()
    assert "connection exploded" in results[1].error


def test_rate_limit_retried_with_backoff():
    sleeps = []
    session = FakeSession({
        "openalex": [FakeResponse(status_code=429),
                     FakeResponse(payload=openalex_payload("https://x/a.pdf"))],
    })
    results = resolve_pdf_urls(["10.1/one"], cfg(backoff_initial=1.0),
                               session=session, sleep=sleeps.append)
    assert results[0].provider == "openalex"
    assert len(sleeps) == 1 and 1.0 <= sleeps[0] <= 1.25  # base plus jitter


def test_manual_provider():
    config = cfg(providers=("manual",),
                 manual_urls={"10.1/one": "https://mirror/one.pdf"})
    results = resolve_pdf_urls(["10.1/one"], config, session=FakeSession({}),
                               sleep=lambda _: None)
    assert results[0].provider == "manual"


def test_input_order_preserved_under_concurrency():
    session = FakeSession({
        f"doi:10.1/{i}": FakeResponse(payload=openalex_payload(f"https://x/{i}.pdf"))
        for i in range(6)
    })
    dois = [f"10.1/{i}" for i in range(6)]
    results = resolve_pdf_urls(dois, cfg(concurrency=4), session=session,
                               sleep=lambda _: None)
    assert [r.doi for r in results] == dois


def resolution(doi, *urls):
    from tckit.records import ResolutionResult

    return ResolutionResult(doi=doi, candidate_urls=tuple(urls),
                            provider="openalex", resolved_at="now")


def test_fetch_stores_pdfs(store):
    store.upsert([Document(doc_id="d1", doi="10.1/a"),
                  Document(doc_id="d2", doi="10.1/b")])
    session = FakeSession({
        "a.pdf": FakeResponse(content=b"%PDF-1.7 alpha"),
        "b.pdf": FakeResponse(content=b"%PDF-1.7 beta"),
    })
    report = fetch_pdfs([resolution("10.1/a", "https://x/a.pdf"),
                         resolution("10.1/b", "https://x/b.pdf")],
                        store, session=session)
    assert (report.attempted, report.succeeded, report.failed) == (2, 2, 0)
    ref = store.get_document("d1").pdf_blob_ref
    assert store.get_blob(ref) == b"%PDF-1.7 alpha"


def test_fetch_rejects_html_landing_page(store):
    store.upsert([Document(doc_id="d1", doi="10.1/a")])
    session = FakeSession({"a.pdf": FakeResponse(content=b"<html>paywall</html>")})
    report = fetch_pdfs([resolution("10.1/a", "https://x/a.pdf")], store,
                        session=session)
    assert (report.succeeded, report.failed) == (0, 1)
    assert "not a PDF" in report.failures[0][1]


def test_fetch_idempotent_via_content_addressing(store):
    store.upsert([Document(doc_id="d1", doi="10.1/a")])
    session = FakeSession({"a.pdf": FakeResponse(content=b"%PDF-1.7 alpha")})
    first = fetch_pdfs([resolution("10.1/a", "https://x/a.pdf")], store,
                       session=session)
    calls_after_first = len(session.calls)
    second = fetch_pdfs([resolution("10.1/a", "https://x/a.pdf")], store,
                        session=session)
    assert first.succeeded == second.succeeded == 1
    assert len(session.calls) == calls_after_first  # no re-download
    assert second.attempted == second.succeeded + second.failed


def test_fetch_skips_unresolved(store):
    report = fetch_pdfs([resolution("10.1/none")], store, session=FakeSession({}))
    assert report.skipped == 1
    assert report.attempted == report.succeeded + report.failed == 0


def test_fetch_counts_consistent_on_mixed_batch(store):
    store.upsert([Document(doc_id="d1", doi="10.1/a")])
    session = FakeSession({
        "a.pdf": FakeResponse(content=b"%PDF ok"),
        "b.pdf": FakeResponse(content=b"nope"),
    })
    report = fetch_pdfs([resolution("10.1/a", "https://x/a.pdf"),
                         resolution("10.1/b", "https://x/b.pdf"),
                         resolution("10.1/c")], store, session=session)
    assert report.attempted == report.succeeded + report.failed
    assert report.skipped == 1
