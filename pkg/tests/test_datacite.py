"""Datacite parsing: both kernel generations, the envelope, and the filter."""

from __future__ import annotations

import json

import pytest

from fairprobe.datacite import (
    DataciteRecord,
    DateEntry,
    GeoBox,
    GeoMalformed,
    GeoPlace,
    GeoPoint,
    MissingIdentifierError,
    NotDataciteError,
    RightsEntry,
    XmlMalformedError,
    has_wildcard_image_format,
    is_image_format,
    is_of_interest,
    media_type,
    parse_record,
    record_from_dict,
    record_to_dict,
    to_canonical_xml,
)


def load(fixtures_dir, name: str) -> str:
    return (fixtures_dir / name).read_text(encoding="utf-8")


def test_kernel4_full_record(fixtures_dir):
    record = parse_record(
        load(fixtures_dir, "kernel4.xml"),
        repository="example-rdr",
        oai_identifier="oai:example:1",
    )
    assert record.doi == "10.5072/example-full"
    assert record.repository == "example-rdr"
    assert record.oai_identifier == "oai:example:1"
    assert record.resource_type_general == "Image"
    assert record.formats == ["image/png", "text/plain"]
    assert record.dates == [
        DateEntry(value="2016-09-08", date_type="Created"),
        DateEntry(value="2017-01-02", date_type="Issued"),
    ]
    assert record.geo_locations == [
        GeoPlace(text="Atlantic Ocean"),
        GeoPoint(lat=-31.233, lon=-67.302),
        GeoBox(south=41.09, west=-71.032, north=42.893, east=-68.211),
    ]
    assert record.rights == [
        RightsEntry(
            text="CC0 1.0",
            rights_uri="https://creativecommons.org/publicdomain/zero/1.0/",
        )
    ]


def test_kernel3_whitespace_coordinates(fixtures_dir):
    record = parse_record(load(fixtures_dir, "kernel3.xml"))
    assert record.doi == "10.5072/example-k3"
    assert record.geo_locations == [
        GeoPoint(lat=47.5, lon=9.2),
        GeoBox(south=-10.5, west=5.25, north=10.5, east=40.125),
    ]
    assert record.formats == ["IMAGE/TIFF; compression=lzw"]


def test_envelope_is_unwrapped(fixtures_dir):
    record = parse_record(load(fixtures_dir, "wrapped.xml"))
    assert record.doi == "10.5072/wrapped"
    assert record.resource_type_general == "Image"
    assert record.dates == [DateEntry(value="2015-05-05", date_type="Created")]


def test_malformed_xml_raises(fixtures_dir):
    with pytest.raises(XmlMalformedError):
        parse_record(load(fixtures_dir, "malformed.xml"))


def test_non_datacite_payload_raises(fixtures_dir):
    with pytest.raises(NotDataciteError):
        parse_record(load(fixtures_dir, "not_datacite.xml"))


def test_blank_identifier_raises(fixtures_dir):
    with pytest.raises(MissingIdentifierError):
        parse_record(load(fixtures_dir, "no_identifier.xml"))


def test_edge_cases_keep_malformed_geo(fixtures_dir):
    record = parse_record(load(fixtures_dir, "edge_cases.xml"))
    assert record.geo_locations == [
        GeoMalformed(raw="north-ish 9.2"),
        GeoMalformed(raw="somewhere east of the river"),
    ]
    assert not any(loc.valid() for loc in record.geo_locations)
    assert record.dates[0] == DateEntry(value="", date_type="Created")
    assert record.rights == [
        RightsEntry(text="free for academic use", rights_uri=None),
        RightsEntry(text="urn, not a link", rights_uri="urn:nbn:de:example"),
    ]


def test_rights_without_rights_list_element():
    payload = (
        '<resource xmlns="http://datacite.org/schema/kernel-3">'
        "<identifier>10.1/r</identifier>"
        '<rights rightsURI="https://example.org/l">direct child</rights>'
        "</resource>"
    )
    record = parse_record(payload)
    assert record.rights == [
        RightsEntry(text="direct child", rights_uri="https://example.org/l")
    ]


@pytest.mark.parametrize(
    "lat,lon,ok",
    [
        (0.0, 0.0, True),
        (90.0, 180.0, True),
        (-90.0, -180.0, True),
        (90.1, 0.0, False),
        (-90.1, 0.0, False),
        (0.0, 180.1, False),
        (0.0, -180.1, False),
    ],
)
def test_point_validity(lat, lon, ok):
    assert GeoPoint(lat=lat, lon=lon).valid() is ok


@pytest.mark.parametrize(
    "south,west,north,east,ok",
    [
        (-10.0, 5.0, 10.0, 40.0, True),
        (10.0, 5.0, -10.0, 40.0, False),  # south above north
        (-10.0, 170.0, 10.0, -170.0, True),  # dateline crossing
        (-95.0, 5.0, 10.0, 40.0, False),
        (-10.0, 181.0, 10.0, 40.0, False),
        (0.0, 0.0, 0.0, 0.0, True),  # degenerate but in bounds
    ],
)
def test_box_validity(south, west, north, east, ok):
    assert GeoBox(south=south, west=west, north=north, east=east).valid() is ok


def test_place_and_malformed_validity():
    assert GeoPlace(text="Lake Constance").valid()
    assert not GeoPlace(text="   ").valid()
    assert not GeoMalformed(raw="anything").valid()


@pytest.mark.parametrize(
    "value,expected",
    [
        ("image/png", "image/png"),
        (" IMAGE/TIFF ; compression=lzw", "image/tiff"),
        ("text/plain;charset=utf-8", "text/plain"),
    ],
)
def test_media_type_normalisation(value, expected):
    assert media_type(value) == expected


@pytest.mark.parametrize(
    "value,ok",
    [
        ("image/png", True),
        ("IMAGE/JPEG; quality=9", True),
        ("image/", False),
        ("text/plain", False),
        ("imaginary/fmt", False),
    ],
)
def test_is_image_format(value, ok):
    assert is_image_format(value) is ok


@pytest.mark.parametrize(
    "type_general,formats,interesting",
    [
        ("Image", [], True),
        ("image", [], True),
        ("IMAGE", ["text/csv"], True),
        ("Dataset", ["image/png"], True),
        ("Dataset", ["IMAGE/TIFF; x=y"], True),
        ("Dataset", ["image/*"], True),
        ("Dataset", [" Image/* "], True),
        ("Dataset", ["text/csv"], False),
        (None, [], False),
        ("Dataset", ["image/"], False),
    ],
)
def test_is_of_interest(type_general, formats, interesting):
    record = DataciteRecord(
        doi="10.1/x", resource_type_general=type_general, formats=list(formats)
    )
    assert is_of_interest(record) is interesting


def test_wildcard_annotation_detected():
    record = DataciteRecord(doi="10.1/x", formats=["Image/* ; q=1"])
    assert has_wildcard_image_format(record)
    assert not has_wildcard_image_format(DataciteRecord(doi="10.1/y", formats=["image/png"]))


@pytest.mark.parametrize(
    "fixture",
    ["kernel4.xml", "kernel3.xml", "wrapped.xml", "edge_cases.xml"],
)
def test_canonical_xml_round_trip(fixtures_dir, fixture):
    record = parse_record(
        load(fixtures_dir, fixture), repository="r", oai_identifier="oai:r:0"
    )
    again = parse_record(
        to_canonical_xml(record), repository="r", oai_identifier="oai:r:0"
    )
    assert again == record


@pytest.mark.parametrize(
    "fixture",
    ["kernel4.xml", "kernel3.xml", "wrapped.xml", "edge_cases.xml"],
)
def test_dict_round_trip_through_json(fixtures_dir, fixture):
    record = parse_record(
        load(fixtures_dir, fixture), repository="r", oai_identifier="oai:r:0"
    )
    wire = json.loads(json.dumps(record_to_dict(record)))
    assert record_from_dict(wire) == record
