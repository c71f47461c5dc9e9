"""DOI to open-access PDF resolution and download.

Scholarly metadata providers are queried in order per DOI, stopping at
the first that yields a candidate URL; downloads verify the %PDF magic
bytes, since landing pages behind "pdf" links are common. One DOI's
failure never affects another's outcome, and everything is recorded
rather than raised so batches always complete.
"""

from __future__ import annotations

import random
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .records import Document, ResolutionResult
from .store import Store

OPENALEX_BASE = "https://api.openalex.org"
UNPAYWALL_BASE = "https://api.unpaywall.org/v2"
DEFAULT_PROVIDERS = ("openalex", "unpaywall")

_RETRYABLE = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class AcquisitionConfig:
    providers: tuple[str, ...] = DEFAULT_PROVIDERS
    email: str | None = None  # unpaywall requires a contact email
    publisher_url_template: str | None = None  # e.g. ".../{doi}.pdf"
    manual_urls: dict[str, str] = field(default_factory=dict)
    max_attempts: int = 3
    backoff_initial: float = 1.0
    concurrency: int = 8
    timeout: float = 30.0


@dataclass
class FetchReport:
    attempted: int = 0
    succeeded: int = 0
    failed: int = 0
    skipped: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)  # (doi, reason)


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _dedupe(urls) -> list[str]:
    seen = []
    for url in urls:
        if url and url not in seen:
            seen.append(url)
    return seen


def _get_with_backoff(session, url: str, params: dict | None,
                      config: AcquisitionConfig, sleep):
    """GET with exponential backoff plus jitter on retryable statuses."""
    last_exc = None
    for attempt in range(config.max_attempts):
        try:
            resp = session.get(url, params=params, timeout=config.timeout)
        except Exception as exc:  # requests.RequestException and test fakes
            last_exc = exc
            resp = None
        if resp is not None and resp.status_code not in _RETRYABLE:
            return resp
        if attempt + 1 < config.max_attempts:
            delay = config.backoff_initial * (2 ** attempt)
            sleep(delay * (1.0 + random.random() * 0.25))
    if last_exc is not None:
        raise last_exc
    return resp


def _query_openalex(session, doi: str, config: AcquisitionConfig, sleep) -> list[str]:
    resp = _get_with_backoff(session, f"{OPENALEX_BASE}/works/doi:{doi}",
                             None, config, sleep)
    if resp.status_code == 404:
        return []
    if resp.status_code != 200:
        raise RuntimeError(f"openalex HTTP {resp.status_code}")
    data = resp.json()
    urls = []
    for loc in (data.get("best_oa_location"), data.get("primary_location")):
        if loc:
            urls.append(loc.get("pdf_url"))
    oa = data.get("open_access") or {}
    urls.append(oa.get("oa_url"))
    for loc in data.get("locations") or []:
        urls.append(loc.get("pdf_url"))
    return _dedupe(urls)


def _query_unpaywall(session, doi: str, config: AcquisitionConfig, sleep) -> list[str]:
    params = {"email": config.email or "toolkit@example.org"}
    resp = _get_with_backoff(session, f"{UNPAYWALL_BASE}/{doi}", params,
                             config, sleep)
    if resp.status_code == 404:
        return []
    if resp.status_code != 200:
        raise RuntimeError(f"unpaywall HTTP {resp.status_code}")
    data = resp.json()
    best = data.get("best_oa_location") or {}
    urls = [best.get("url_for_pdf"), best.get("url")]
    for loc in data.get("oa_locations") or []:
        urls.append(loc.get("url_for_pdf"))
    return _dedupe(urls)


def _resolve_one(doi: str, config: AcquisitionConfig, session,
                 sleep) -> ResolutionResult:
    error = None
    for provider in config.providers:
        try:
            if provider == "openalex":
                urls = _query_openalex(session, doi, config, sleep)
            elif provider == "unpaywall":
                urls = _query_unpaywall(session, doi, config, sleep)
            elif provider == "publisher":
                template = config.publisher_url_template
                urls = [template.format(doi=doi)] if template else []
            elif provider == "manual":
                url = config.manual_urls.get(doi)
                urls = [url] if url else []
            else:
                warnings.warn(f"unknown provider {provider!r} skipped",
                              stacklevel=2)
                continue
        except Exception as exc:
            error = f"{provider}: {exc}"
            continue
        if urls:
            return ResolutionResult(doi=doi, candidate_urls=tuple(urls),
                                    provider=provider, resolved_at=_now_iso())
    return ResolutionResult(doi=doi, candidate_urls=(), provider=None,
                            resolved_at=_now_iso(), error=error)


def resolve_pdf_urls(dois, config: AcquisitionConfig | None = None,
                     providers=None, session=None,
                     sleep=time.sleep) -> list[ResolutionResult]:
    """One result per DOI, in input order, never raising per-DOI errors.

    ``providers`` overrides the configured provider order for this call.
    """
    config = config or AcquisitionConfig()
    if providers is not None:
        config = AcquisitionConfig(
            providers=tuple(providers), email=config.email,
            publisher_url_template=config.publisher_url_template,
            manual_urls=config.manual_urls, max_attempts=config.max_attempts,
            backoff_initial=config.backoff_initial,
            concurrency=config.concurrency, timeout=config.timeout)
    if session is None:
        import requests

        session = requests.Session()
    dois = list(dois)
    if config.concurrency <= 1 or len(dois) <= 1:
        return [_resolve_one(doi, config, session, sleep) for doi in dois]
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        futures = [pool.submit(_resolve_one, doi, config, session, sleep)
                   for doi in dois]
        return [f.result() for f in futures]  # merged in input order


def fetch_pdfs(results, store: Store, session=None,
               timeout: float = 30.0) -> FetchReport:
    """Download the first working candidate per DOI into the blob store.

    The blob ref lands on the matching document (by DOI). Content
    addressing makes re-fetching idempotent: an already-referenced blob
    counts as succeeded without a new download.
    """
    if session is None:
        import requests

        session = requests.Session()
    by_doi = {d.doi: d for d in store.documents() if d.doi}
    report = FetchReport()
    for result in results:
        if not result.candidate_urls:
            report.skipped += 1
            continue
        document = by_doi.get(result.doi)
        if document is None:
            report.attempted += 1
            report.failed += 1
            report.failures.append((result.doi, "no document with this DOI"))
            continue
        if document.pdf_blob_ref and store.has_blob(document.pdf_blob_ref):
            report.attempted += 1
            report.succeeded += 1
            continue
        report.attempted += 1
        reason = "no candidate URLs worked"
        stored = False
        for url in result.candidate_urls:
            try:
                resp = session.get(url, timeout=timeout)
            except Exception as exc:
                reason = f"{url}: {exc}"
                continue
            if resp.status_code != 200:
                reason = f"{url}: HTTP {resp.status_code}"
                continue
            if not resp.content.startswith(b"%PDF"):
                reason = f"{url}: not a PDF"
                continue
            ref = store.put_blob(resp.content)
            store.upsert([Document(
                doc_id=document.doc_id, doi=document.doi,
                title=document.title, full_text=document.full_text,
                metadata=document.metadata, pdf_blob_ref=ref)])
            stored = True
            break
        if stored:
            report.succeeded += 1
        else:
            report.failed += 1
            report.failures.append((result.doi, reason))
    return report
