"""Repository registry client: live HTTP listing or an offline seed file.

The live path speaks a re3data-style XML API (list plus per-entry detail);
the offline path reads a newline-delimited seed. Both map into the same
descriptor type. Malformed entries are skipped with a warning naming the
entry index, never fatally: registry data is known to be inconsistent.
"""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence
from urllib.parse import urlparse

import requests

logger = logging.getLogger(__name__)

KNOWN_KINDS = {"oai-pmh": "OAI-PMH", "rest": "REST", "soap": "SOAP", "sparql": "SPARQL"}
NO_API_LABEL = "no API"

SUPPORT_UNKNOWN = "unknown"
SUPPORT_SUPPORTED = "supported"
SUPPORT_UNSUPPORTED = "unsupported"


class RegistryError(Exception):
    pass


class RegistryUnreachableError(RegistryError):
    """No live registry and no permitted fallback."""


@dataclass(frozen=True)
class ApiEndpoint:
    kind: str
    url: str


@dataclass
class DataciteSupport:
    status: str = SUPPORT_UNKNOWN  # unknown | supported | unsupported
    prefix: str | None = None  # set only when supported


@dataclass
class RepositoryDescriptor:
    registry_id: str
    name: str
    api_endpoints: list[ApiEndpoint] = field(default_factory=list)
    quality_info: list[str] = field(default_factory=list)
    datacite_support: DataciteSupport = field(default_factory=DataciteSupport)


def normalize_kind(raw: str) -> str:
    return KNOWN_KINDS.get(raw.strip().lower(), raw.strip())


def _valid_url(url: str) -> bool:
    parsed = urlparse(url)
    return parsed.scheme in ("http", "https") and bool(parsed.netloc)


def _local_name(tag: object) -> str:
    if not isinstance(tag, str):
        return ""
    return tag.rsplit("}", 1)[-1]


def _find_text(element: ET.Element, name: str) -> str:
    for child in element.iter():
        if _local_name(child.tag) == name and child.text:
            return child.text.strip()
    return ""


# --- XML payloads -------------------------------------------------------------

def parse_repository_list(xml_text: str) -> list[dict[str, str]]:
    """Ids and names from the list payload; malformed entries skipped."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise RegistryError(f"registry list payload is not XML: {exc}") from exc
    entries: list[dict[str, str]] = []
    for index, el in enumerate(
        e for e in root.iter() if _local_name(e.tag) == "repository"
    ):
        registry_id = _find_text(el, "id") or _find_text(el, "re3data.orgIdentifier")
        if not registry_id:
            logger.warning("registry list entry %d has no id, skipped", index)
            continue
        entries.append({"registry_id": registry_id, "name": _find_text(el, "name")})
    return entries


QUALITY_TAGS = ("certificate", "qualityManagement", "policyName")


def parse_repository_detail(xml_text: str) -> dict[str, Any]:
    """Endpoints and quality tags from one detail payload."""
    root = ET.fromstring(xml_text)
    registry_id = _find_text(root, "id") or _find_text(root, "re3data.orgIdentifier")
    name = _find_text(root, "repositoryName") or _find_text(root, "name")
    endpoints: list[ApiEndpoint] = []
    for el in root.iter():
        if _local_name(el.tag) != "api":
            continue
        url = (el.text or "").strip()
        kind_raw = next(
            (v for k, v in el.attrib.items() if _local_name(k) == "apiType"), ""
        )
        if not _valid_url(url):
            logger.warning("dropping api endpoint with invalid url %r", url)
            continue
        endpoints.append(ApiEndpoint(kind=normalize_kind(kind_raw), url=url))
    quality = [
        (el.text or "").strip()
        for el in root.iter()
        if _local_name(el.tag) in QUALITY_TAGS and el.text and el.text.strip()
    ]
    return {
        "registry_id": registry_id,
        "name": name,
        "api_endpoints": endpoints,
        "quality_info": quality,
    }


# --- seed file ----------------------------------------------------------------

def load_seed_file(path: str | Path) -> list[RepositoryDescriptor]:
    """Parse the offline seed: one ``registry_id|name|kind=url;...`` per line.

    Blank lines and lines starting with ``#`` are ignored. Endpoints with
    invalid URLs are dropped; lines without an id are skipped with a warning
    naming the line number.
    """
    descriptors: list[RepositoryDescriptor] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("|")
        if len(fields) < 2 or not fields[0].strip():
            logger.warning("seed line %d is malformed, skipped: %r", lineno, line)
            continue
        endpoints: list[ApiEndpoint] = []
        bad = False
        if len(fields) >= 3 and fields[2].strip():
            for part in fields[2].split(";"):
                part = part.strip()
                if not part:
                    continue
                kind, sep, url = part.partition("=")
                if not sep or not _valid_url(url.strip()):
                    logger.warning(
                        "seed line %d has malformed endpoint %r, line skipped",
                        lineno,
                        part,
                    )
                    bad = True
                    break
                endpoints.append(
                    ApiEndpoint(kind=normalize_kind(kind), url=url.strip())
                )
        if bad:
            continue
        descriptors.append(
            RepositoryDescriptor(
                registry_id=fields[0].strip(),
                name=fields[1].strip(),
                api_endpoints=endpoints,
            )
        )
    return descriptors


# --- fetching -----------------------------------------------------------------

def fetch_repository_list(
    registry_endpoint: str | None,
    fallback_seed: str | Path | None = None,
    *,
    allow_seed_fallback: bool = False,
    timeout: float = 20.0,
    detail_workers: int = 4,
    session: requests.Session | None = None,
) -> list[RepositoryDescriptor]:
    """Candidate repositories from the registry, or from the seed file.

    The network source is preferred. The seed is consulted only when no
    endpoint is configured, or when the endpoint is unreachable and the
    fallback was explicitly allowed.
    """
    if not registry_endpoint:
        if fallback_seed:
            return load_seed_file(fallback_seed)
        raise RegistryUnreachableError("no registry endpoint and no seed file")

    own_session = session is None
    http = session or requests.Session()
    try:
        try:
            reply = http.get(
                registry_endpoint.rstrip("/") + "/repositories", timeout=timeout
            )
            reply.raise_for_status()
            entries = parse_repository_list(reply.text)
        except (requests.RequestException, RegistryError) as exc:
            if fallback_seed and allow_seed_fallback:
                logger.warning(
                    "registry unreachable (%s), falling back to seed file", exc
                )
                return load_seed_file(fallback_seed)
            raise RegistryUnreachableError(str(exc)) from exc

        def fetch_detail(indexed: tuple[int, dict[str, str]]):
            index, entry = indexed
            url = (
                registry_endpoint.rstrip("/")
                + "/repository/"
                + entry["registry_id"]
            )
            try:
                detail_reply = http.get(url, timeout=timeout)
                detail_reply.raise_for_status()
                return index, parse_repository_detail(detail_reply.text)
            except (requests.RequestException, ET.ParseError) as exc:
                logger.warning(
                    "registry entry %d (%s) detail failed, skipped: %s",
                    index,
                    entry["registry_id"],
                    exc,
                )
                return index, None

        with ThreadPoolExecutor(max_workers=max(detail_workers, 1)) as pool:
            details = list(pool.map(fetch_detail, enumerate(entries)))
    finally:
        if own_session:
            http.close()

    # merge in list order regardless of fetch completion order
    descriptors: list[RepositoryDescriptor] = []
    details.sort(key=lambda item: item[0])
    for (index, detail), entry in zip(details, entries):
        if detail is None:
            continue
        descriptors.append(
            RepositoryDescriptor(
                registry_id=entry["registry_id"],
                name=detail["name"] or entry["name"],
                api_endpoints=detail["api_endpoints"],
                quality_info=detail["quality_info"],
            )
        )
    return descriptors


def filter_by_api(
    repos: Sequence[RepositoryDescriptor], kind: str
) -> list[RepositoryDescriptor]:
    """Descriptors having at least one endpoint of ``kind``, order kept.

    A repository appears once no matter how many matching endpoints it has.
    """
    wanted = normalize_kind(kind)
    seen: set[str] = set()
    out: list[RepositoryDescriptor] = []
    for repo in repos:
        if repo.registry_id in seen:
            continue
        if any(ep.kind == wanted for ep in repo.api_endpoints):
            seen.add(repo.registry_id)
            out.append(repo)
    return out


def api_adoption_stats(
    repos: Sequence[RepositoryDescriptor],
) -> list[tuple[str, int, float]]:
    """Per-kind adoption: (kind, repositories having it, share as percent).

    A repository with several kinds counts once per kind; the closing
    ``no API`` row counts repositories without any endpoint. Empty input
    yields an empty table.
    """
    if not repos:
        return []
    counts: dict[str, int] = {}
    no_api = 0
    for repo in repos:
        kinds = {ep.kind for ep in repo.api_endpoints}
        if not kinds:
            no_api += 1
        for kind in kinds:
            counts[kind] = counts.get(kind, 0) + 1
    total = len(repos)
    rows = [
        (kind, count, 100.0 * count / total)
        for kind, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    ]
    rows.append((NO_API_LABEL, no_api, 100.0 * no_api / total))
    return rows


# --- dict round-trip for ndjson -----------------------------------------------

def descriptor_to_dict(repo: RepositoryDescriptor) -> dict[str, Any]:
    return {
        "registry_id": repo.registry_id,
        "name": repo.name,
        "api_endpoints": [
            {"kind": ep.kind, "url": ep.url} for ep in repo.api_endpoints
        ],
        "quality_info": list(repo.quality_info),
        "datacite_support": {
            "status": repo.datacite_support.status,
            "prefix": repo.datacite_support.prefix,
        },
    }


def descriptor_from_dict(data: dict[str, Any]) -> RepositoryDescriptor:
    support = data.get("datacite_support") or {}
    return RepositoryDescriptor(
        registry_id=data["registry_id"],
        name=data.get("name", ""),
        api_endpoints=[
            ApiEndpoint(kind=ep["kind"], url=ep["url"])
            for ep in data.get("api_endpoints", [])
        ],
        quality_info=list(data.get("quality_info", [])),
        datacite_support=DataciteSupport(
            status=support.get("status", SUPPORT_UNKNOWN),
            prefix=support.get("prefix"),
        ),
    )
