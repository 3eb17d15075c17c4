"""Datacite XML parsing and the image-of-interest filter.

Extraction is namespace-agnostic and keyed on local element names so that
kernel 3 and kernel 4 payloads (and the ``oai_datacite`` envelope around
them) all map onto the same record type. Anything the record model does not
cover is ignored; geo children whose numbers do not parse are kept as
``GeoMalformed`` so they can be counted without ever validating.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Any, Union
from xml.sax.saxutils import escape, quoteattr


class RecordParseError(Exception):
    """Base class for payloads that cannot become a DataciteRecord."""


class XmlMalformedError(RecordParseError):
    pass


class NotDataciteError(RecordParseError):
    """No element with local name ``resource`` anywhere in the payload."""


class MissingIdentifierError(RecordParseError):
    """Datacite mandates the identifier; a record without one is unusable."""


@dataclass(frozen=True)
class DateEntry:
    value: str
    date_type: str  # dateType attribute, preserved verbatim (case-sensitive)


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def valid(self) -> bool:
        return -90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0


@dataclass(frozen=True)
class GeoBox:
    south: float
    west: float
    north: float
    east: float

    def valid(self) -> bool:
        # West may exceed east (dateline crossing); only the latitude order
        # is constrained.
        corners_ok = (
            GeoPoint(self.south, self.west).valid()
            and GeoPoint(self.north, self.east).valid()
        )
        return corners_ok and self.south <= self.north

@dataclass(frozen=True)
class GeoPlace:
    text: str

    def valid(self) -> bool:
        return bool(self.text.strip())


@dataclass(frozen=True)
class GeoMalformed:
    raw: str

    def valid(self) -> bool:
        return False


GeoLocation = Union[GeoPoint, GeoBox, GeoPlace, GeoMalformed]


@dataclass(frozen=True)
class RightsEntry:
    text: str
    rights_uri: str | None = None


@dataclass
class DataciteRecord:
    doi: str
    resource_type_general: str | None = None
    formats: list[str] = field(default_factory=list)
    dates: list[DateEntry] = field(default_factory=list)
    geo_locations: list[GeoLocation] = field(default_factory=list)
    rights: list[RightsEntry] = field(default_factory=list)
    repository: str = ""
    oai_identifier: str = ""


def _local_name(tag: object) -> str:
    if not isinstance(tag, str):
        return ""
    return tag.rsplit("}", 1)[-1]


def _children(element: ET.Element, name: str) -> list[ET.Element]:
    return [child for child in element if _local_name(child.tag) == name]


def _first_child(element: ET.Element, name: str) -> ET.Element | None:
    for child in element:
        if _local_name(child.tag) == name:
            return child
    return None


def _attr(element: ET.Element, name: str) -> str | None:
    for key, value in element.attrib.items():
        if _local_name(key) == name:
            return value
    return None


def _text(element: ET.Element | None) -> str:
    if element is None or element.text is None:
        return ""
    return element.text.strip()


def _flat_text(element: ET.Element) -> str:
    return " ".join("".join(element.itertext()).split())


def _parse_point(element: ET.Element) -> GeoLocation:
    lat_el = _first_child(element, "pointLatitude")
    lon_el = _first_child(element, "pointLongitude")
    if lat_el is not None or lon_el is not None:
        parts = [_text(lat_el), _text(lon_el)]
    else:
        # kernel 3: "lat lon" in the element text
        parts = _flat_text(element).split()
    try:
        lat, lon = (float(p) for p in parts)
    except (TypeError, ValueError):
        return GeoMalformed(raw=" ".join(p for p in parts if p) or _flat_text(element))
    return GeoPoint(lat=lat, lon=lon)


def _parse_box(element: ET.Element) -> GeoLocation:
    names = (
        "southBoundLatitude",
        "westBoundLongitude",
        "northBoundLatitude",
        "eastBoundLongitude",
    )
    child_els = [_first_child(element, name) for name in names]
    if any(el is not None for el in child_els):
        parts = [_text(el) for el in child_els]
    else:
        # kernel 3 order: south west north east
        parts = _flat_text(element).split()
    try:
        south, west, north, east = (float(p) for p in parts)
    except (TypeError, ValueError):
        return GeoMalformed(raw=" ".join(p for p in parts if p) or _flat_text(element))
    return GeoBox(south=south, west=west, north=north, east=east)


def _parse_geo_location(element: ET.Element) -> list[GeoLocation]:
    out: list[GeoLocation] = []
    for child in element:
        name = _local_name(child.tag)
        if name == "geoLocationPoint":
            out.append(_parse_point(child))
        elif name == "geoLocationBox":
            out.append(_parse_box(child))
        elif name == "geoLocationPlace":
            out.append(GeoPlace(text=_flat_text(child)))
        # polygons and anything newer are not modelled
    if not out and element.text and element.text.strip():
        # a bare geoLocation with loose text is still an annotation attempt
        out.append(GeoMalformed(raw=_flat_text(element)))
    return out


def parse_record(
    payload: str,
    *,
    repository: str = "",
    oai_identifier: str = "",
) -> DataciteRecord:
    """Parse one Datacite metadata payload into a DataciteRecord.

    Raises XmlMalformedError, NotDataciteError or MissingIdentifierError;
    everything else the payload contains is either mapped or ignored.
    """
    try:
        root = ET.fromstring(payload)
    except ET.ParseError as exc:
        raise XmlMalformedError(str(exc)) from exc

    if _local_name(root.tag) == "resource":
        resource = root
    else:
        resource = next(
            (el for el in root.iter() if _local_name(el.tag) == "resource"), None
        )
        if resource is None:
            raise NotDataciteError(
                f"no resource element (root is {_local_name(root.tag)!r})"
            )

    doi = _text(_first_child(resource, "identifier"))
    if not doi:
        raise MissingIdentifierError("record carries no identifier")

    record = DataciteRecord(
        doi=doi, repository=repository, oai_identifier=oai_identifier
    )

    resource_type = _first_child(resource, "resourceType")
    if resource_type is not None:
        record.resource_type_general = _attr(resource_type, "resourceTypeGeneral")

    formats = _first_child(resource, "formats")
    if formats is not None:
        record.formats = [_text(el) for el in _children(formats, "format")]

    dates = _first_child(resource, "dates")
    if dates is not None:
        record.dates = [
            DateEntry(value=_text(el), date_type=_attr(el, "dateType") or "")
            for el in _children(dates, "date")
        ]

    geo = _first_child(resource, "geoLocations")
    if geo is not None:
        for loc in _children(geo, "geoLocation"):
            record.geo_locations.extend(_parse_geo_location(loc))

    rights_list = _first_child(resource, "rightsList")
    rights_elements = (
        _children(rights_list, "rights") if rights_list is not None
        else _children(resource, "rights")
    )
    record.rights = [
        RightsEntry(text=_flat_text(el), rights_uri=_attr(el, "rightsURI"))
        for el in rights_elements
    ]

    return record


def media_type(value: str) -> str:
    """Bare media type: parameters after ';' dropped, trimmed, lowercased."""
    return value.split(";", 1)[0].strip().lower()


def is_image_format(value: str) -> bool:
    bare = media_type(value)
    return bare.startswith("image/") and len(bare) > len("image/")


def has_wildcard_image_format(record: DataciteRecord) -> bool:
    """True when interest hinges on a literal ``image/*`` annotation."""
    return any(media_type(f) == "image/*" for f in record.formats)


def is_of_interest(record: DataciteRecord) -> bool:
    """Is this record an image, i.e. worth assessing for the use case?

    True when the general resource type says Image (any case) or at least
    one declared format is an image media type. A literal ``image/*``
    counts; media-type parameters and case never matter.
    """
    if (record.resource_type_general or "").strip().lower() == "image":
        return True
    return any(is_image_format(f) or media_type(f) == "image/*" for f in record.formats)


# --- canonical serialisation -------------------------------------------------
#
# Kernel-4 shaped XML covering exactly the modelled fields. Reparsing the
# output yields an equal record, which the test suite leans on.

def to_canonical_xml(record: DataciteRecord) -> str:
    parts: list[str] = ['<resource xmlns="http://datacite.org/schema/kernel-4">']
    parts.append(
        f'  <identifier identifierType="DOI">{escape(record.doi)}</identifier>'
    )
    if record.resource_type_general is not None:
        parts.append(
            f"  <resourceType resourceTypeGeneral={quoteattr(record.resource_type_general)}/>"
        )
    if record.formats:
        parts.append("  <formats>")
        for fmt in record.formats:
            parts.append(f"    <format>{escape(fmt)}</format>")
        parts.append("  </formats>")
    if record.dates:
        parts.append("  <dates>")
        for date in record.dates:
            parts.append(
                f"    <date dateType={quoteattr(date.date_type)}>{escape(date.value)}</date>"
            )
        parts.append("  </dates>")
    if record.geo_locations:
        parts.append("  <geoLocations>")
        for loc in record.geo_locations:
            parts.append("    <geoLocation>")
            if isinstance(loc, GeoPoint):
                parts.append("      <geoLocationPoint>")
                parts.append(f"        <pointLatitude>{loc.lat!r}</pointLatitude>")
                parts.append(f"        <pointLongitude>{loc.lon!r}</pointLongitude>")
                parts.append("      </geoLocationPoint>")
            elif isinstance(loc, GeoBox):
                parts.append("      <geoLocationBox>")
                parts.append(f"        <southBoundLatitude>{loc.south!r}</southBoundLatitude>")
                parts.append(f"        <westBoundLongitude>{loc.west!r}</westBoundLongitude>")
                parts.append(f"        <northBoundLatitude>{loc.north!r}</northBoundLatitude>")
                parts.append(f"        <eastBoundLongitude>{loc.east!r}</eastBoundLongitude>")
                parts.append("      </geoLocationBox>")
            elif isinstance(loc, GeoPlace):
                parts.append(
                    f"      <geoLocationPlace>{escape(loc.text)}</geoLocationPlace>"
                )
            else:
                # malformed content survives as the raw text it came from
                parts.append(
                    f"      <geoLocationPoint>{escape(loc.raw)}</geoLocationPoint>"
                )
            parts.append("    </geoLocation>")
        parts.append("  </geoLocations>")
    if record.rights:
        parts.append("  <rightsList>")
        for entry in record.rights:
            attr = (
                f" rightsURI={quoteattr(entry.rights_uri)}"
                if entry.rights_uri is not None
                else ""
            )
            parts.append(f"    <rights{attr}>{escape(entry.text)}</rights>")
        parts.append("  </rightsList>")
    parts.append("</resource>")
    return "\n".join(parts)


# --- dict round-trip for the catalogue store ---------------------------------

_GEO_KINDS = {"point": GeoPoint, "box": GeoBox, "place": GeoPlace, "malformed": GeoMalformed}


def _geo_to_dict(loc: GeoLocation) -> dict[str, Any]:
    if isinstance(loc, GeoPoint):
        return {"kind": "point", "lat": loc.lat, "lon": loc.lon}
    if isinstance(loc, GeoBox):
        return {
            "kind": "box",
            "south": loc.south,
            "west": loc.west,
            "north": loc.north,
            "east": loc.east,
        }
    if isinstance(loc, GeoPlace):
        return {"kind": "place", "text": loc.text}
    return {"kind": "malformed", "raw": loc.raw}


def _geo_from_dict(data: dict[str, Any]) -> GeoLocation:
    kind = data["kind"]
    cls = _GEO_KINDS[kind]
    return cls(**{k: v for k, v in data.items() if k != "kind"})


def record_to_dict(record: DataciteRecord) -> dict[str, Any]:
    return {
        "doi": record.doi,
        "resource_type_general": record.resource_type_general,
        "formats": list(record.formats),
        "dates": [{"value": d.value, "date_type": d.date_type} for d in record.dates],
        "geo_locations": [_geo_to_dict(g) for g in record.geo_locations],
        "rights": [{"text": r.text, "rights_uri": r.rights_uri} for r in record.rights],
        "repository": record.repository,
        "oai_identifier": record.oai_identifier,
    }


def record_from_dict(data: dict[str, Any]) -> DataciteRecord:
    return DataciteRecord(
        doi=data["doi"],
        resource_type_general=data.get("resource_type_general"),
        formats=list(data.get("formats", [])),
        dates=[DateEntry(value=d["value"], date_type=d["date_type"]) for d in data.get("dates", [])],
        geo_locations=[_geo_from_dict(g) for g in data.get("geo_locations", [])],
        rights=[
            RightsEntry(text=r["text"], rights_uri=r.get("rights_uri"))
            for r in data.get("rights", [])
        ],
        repository=data.get("repository", ""),
        oai_identifier=data.get("oai_identifier", ""),
    )
