"""Quality predicates over parsed records.

Each predicate answers one question about a single record and never touches
the network; retrievability is decided elsewhere and merged into the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any
from urllib.parse import urlparse

from .datacite import DataciteRecord, GeoPlace


@dataclass
class AssessmentResult:
    doi: str
    repository: str
    chrono: bool
    geo: bool
    lic: bool
    ret: bool = False
    probe_trace: dict[str, Any] | None = None

    def met_count(self) -> int:
        return int(self.chrono) + int(self.geo) + int(self.lic) + int(self.ret)


@dataclass
class AssessorConfig:
    # Place names count as geo annotation unless the run insists on
    # machine-usable coordinates.
    geo_require_coordinates: bool = False


def f_chrono(record: DataciteRecord) -> bool:
    """Does the record say when the image was created?

    Only the dateType ``Created`` qualifies, compared case-sensitively as
    the vocabulary defines it, and the date value must be non-empty.
    """
    return any(d.date_type == "Created" and d.value.strip() for d in record.dates)


def f_geo(record: DataciteRecord, config: AssessorConfig | None = None) -> bool:
    """Does the record say where the image belongs?

    At least one valid location: a point or box within coordinate bounds,
    or a non-empty place name when the configuration accepts those.
    """
    config = config or AssessorConfig()
    for loc in record.geo_locations:
        if isinstance(loc, GeoPlace) and config.geo_require_coordinates:
            continue
        if loc.valid():
            return True
    return False


def f_lic(record: DataciteRecord) -> bool:
    """Does the record link a licence?

    The rightsURI must be an absolute http(s) URL; free-text rights alone
    do not qualify because they cannot be dereferenced.
    """
    for entry in record.rights:
        if not entry.rights_uri:
            continue
        parsed = urlparse(entry.rights_uri.strip())
        if parsed.scheme in ("http", "https") and parsed.netloc:
            return True
    return False


def assess(record: DataciteRecord, config: AssessorConfig | None = None) -> AssessmentResult:
    """Evaluate the metadata-only predicates; ret stays False until probed."""
    return AssessmentResult(
        doi=record.doi,
        repository=record.repository,
        chrono=f_chrono(record),
        geo=f_geo(record, config),
        lic=f_lic(record),
        ret=False,
        probe_trace=None,
    )


def assessment_to_dict(result: AssessmentResult) -> dict[str, Any]:
    return {
        "doi": result.doi,
        "repository": result.repository,
        "chrono": result.chrono,
        "geo": result.geo,
        "lic": result.lic,
        "ret": result.ret,
        "probe_trace": result.probe_trace,
    }


def assessment_from_dict(data: dict[str, Any]) -> AssessmentResult:
    return AssessmentResult(
        doi=data["doi"],
        repository=data["repository"],
        chrono=bool(data["chrono"]),
        geo=bool(data["geo"]),
        lic=bool(data["lic"]),
        ret=bool(data.get("ret", False)),
        probe_trace=data.get("probe_trace"),
    )
