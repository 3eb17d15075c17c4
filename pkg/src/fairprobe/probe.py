"""Retrievability probing: resolve a record's DOI and negotiate for an image.

Phase 1 asks for ``image/*`` and follows the redirect chain the resolver
produces. Phase 2 runs only when that failed and the last reply offered a
Link header: a link-value whose type parameter matches an annotated format
is fetched directly. Every failure is an outcome with a reason token, never
an exception; the trace records each request made.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any
from urllib.parse import urljoin, urlparse

import requests
from requests.utils import parse_header_links

from .datacite import DataciteRecord
from .throttle import HostGate

logger = logging.getLogger(__name__)

REDIRECT_CODES = (301, 302, 303, 307, 308)

OUTCOME_CLIENT = "client_negotiated"
OUTCOME_LINK = "link_negotiated"
OUTCOME_FAILED = "failed"

REASON_NO_IMAGE = "no-image-content-type"
REASON_REDIRECT_LIMIT = "redirect-limit"
REASON_TIMEOUT = "timeout"
REASON_NO_LINK_MATCH = "no-link-match"
REASON_TRANSPORT = "transport"
REASON_NON_200 = "non-200"

DEFAULT_RESOLVER = "https://doi.org/"


@dataclass
class ProbeStep:
    url: str
    method: str
    request_accept: str
    status: int
    content_type: str | None
    link_header: str | None


@dataclass
class ProbeTrace:
    steps: list[ProbeStep] = field(default_factory=list)
    outcome: str = OUTCOME_FAILED
    reason: str | None = None
    elapsed: float = 0.0  # milliseconds


@dataclass
class ProbePolicy:
    max_redirects: int = 10
    request_timeout: float = 20.0
    max_body_bytes: int = 0  # 0 means headers only, abort before any body
    per_host_delay: float = 1000.0  # milliseconds

    def __post_init__(self) -> None:
        if self.max_redirects < 1:
            raise ValueError("max_redirects must be at least 1")


def _bare_type(value: str) -> str:
    """Media type without parameters, trimmed; case preserved."""
    return value.split(";", 1)[0].strip()


def _is_image_type(value: str | None) -> bool:
    if not value:
        return False
    return _bare_type(value).lower().startswith("image/")


def _core_fetch(
    url: str,
    accept: str,
    policy: ProbePolicy,
    gate: HostGate,
    session: requests.Session,
) -> requests.Response:
    host = urlparse(url).netloc
    with gate.slot(host):
        reply = session.get(
            url,
            headers={"Accept": accept},
            allow_redirects=False,
            stream=True,
            timeout=policy.request_timeout,
        )
    # touch at most max_body_bytes, then drop the connection
    try:
        if policy.max_body_bytes > 0:
            reply.raw.read(policy.max_body_bytes)
    finally:
        reply.close()
    return reply


def _follow_chain(
    start_url: str,
    accept: str,
    policy: ProbePolicy,
    gate: HostGate,
    session: requests.Session,
    trace: ProbeTrace,
) -> tuple[requests.Response | None, str | None]:
    """GET with manual redirect following; returns (terminal reply, reason).

    The Accept header is preserved across every hop. A reply is returned
    even on failure so the caller can inspect its Link header; reason is
    None exactly when the chain ended in some non-3xx status.
    """
    url = start_url
    redirects_left = policy.max_redirects
    while True:
        try:
            reply = _core_fetch(url, accept, policy, gate, session)
        except requests.RequestException as exc:
            # no response: status 0 keeps the attempt visible in the trace
            trace.steps.append(
                ProbeStep(
                    url=url,
                    method="GET",
                    request_accept=accept,
                    status=0,
                    content_type=None,
                    link_header=None,
                )
            )
            timed_out = isinstance(exc, requests.Timeout)
            return None, REASON_TIMEOUT if timed_out else REASON_TRANSPORT
        trace.steps.append(
            ProbeStep(
                url=url,
                method="GET",
                request_accept=accept,
                status=reply.status_code,
                content_type=reply.headers.get("Content-Type"),
                link_header=reply.headers.get("Link"),
            )
        )
        if reply.status_code in REDIRECT_CODES:
            location = reply.headers.get("Location")
            if not location:
                return reply, REASON_NON_200
            if redirects_left == 0:
                return reply, REASON_REDIRECT_LIMIT
            redirects_left -= 1
            url = urljoin(url, location)
            continue
        return reply, None


def _match_link(link_header: str, formats: list[str]) -> tuple[str, str] | None:
    """First link-value whose type parameter equals an annotated format.

    Comparison is an exact string compare after trimming both sides.
    Returns (target uri-reference, matched format) or None.
    """
    try:
        links = parse_header_links(link_header)
    except Exception:
        return None
    trimmed_formats = [f.strip() for f in formats]
    for link in links:
        link_type = (link.get("type") or "").strip()
        target = link.get("url", "")
        if not target or not link_type:
            continue
        for fmt in trimmed_formats:
            if link_type == fmt:
                return target, fmt
    return None


def doi_url(doi: str, resolver_base: str = DEFAULT_RESOLVER) -> str:
    return resolver_base.rstrip("/") + "/" + doi.lstrip("/")


def f_ret(
    record: DataciteRecord,
    policy: ProbePolicy | None = None,
    *,
    resolver_base: str = DEFAULT_RESOLVER,
    gate: HostGate | None = None,
    session: requests.Session | None = None,
) -> tuple[bool, ProbeTrace]:
    """Is the image behind this record's DOI machine-retrievable?

    True when either negotiation phase ends in a 200 with an acceptable
    Content-Type; the trace tells which phase and why otherwise.
    """
    policy = policy or ProbePolicy()
    gate = gate or HostGate(policy.per_host_delay)
    own_session = session is None
    http = session or requests.Session()
    trace = ProbeTrace()
    started = time.monotonic()
    try:
        reply, reason = _follow_chain(
            doi_url(record.doi, resolver_base), "image/*", policy, gate, http, trace
        )

        if reply is not None and reason is None:
            if reply.status_code == 200 and _is_image_type(
                reply.headers.get("Content-Type")
            ):
                trace.outcome = OUTCOME_CLIENT
                return True, trace
            reason = (
                REASON_NO_IMAGE if reply.status_code == 200 else REASON_NON_200
            )

        # server-side fallback: only with a failed phase 1 and a Link header
        link_header = reply.headers.get("Link") if reply is not None else None
        if link_header:
            match = _match_link(link_header, record.formats)
            if match is None:
                trace.reason = REASON_NO_LINK_MATCH
                return False, trace
            target, matched_format = match
            target_url = urljoin(trace.steps[-1].url, target)
            reply2, reason2 = _follow_chain(
                target_url, matched_format, policy, gate, http, trace
            )
            if reply2 is not None and reason2 is None:
                served = _bare_type(reply2.headers.get("Content-Type") or "")
                if reply2.status_code == 200 and served == _bare_type(matched_format):
                    trace.outcome = OUTCOME_LINK
                    return True, trace
                reason2 = (
                    REASON_NO_IMAGE
                    if reply2.status_code == 200
                    else REASON_NON_200
                )
            trace.reason = reason2
            return False, trace

        trace.reason = reason
        return False, trace
    finally:
        trace.elapsed = (time.monotonic() - started) * 1000.0
        if own_session:
            http.close()


def trace_to_dict(trace: ProbeTrace) -> dict[str, Any]:
    return {
        "steps": [
            {
                "url": s.url,
                "method": s.method,
                "request_accept": s.request_accept,
                "status": s.status,
                "content_type": s.content_type,
                "link_header": s.link_header,
            }
            for s in trace.steps
        ],
        "outcome": trace.outcome,
        "reason": trace.reason,
        "elapsed": trace.elapsed,
    }


def trace_from_dict(data: dict[str, Any]) -> ProbeTrace:
    return ProbeTrace(
        steps=[ProbeStep(**s) for s in data.get("steps", [])],
        outcome=data.get("outcome", OUTCOME_FAILED),
        reason=data.get("reason"),
        elapsed=data.get("elapsed", 0.0),
    )
