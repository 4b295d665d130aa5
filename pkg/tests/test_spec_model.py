import json
import random

import pytest

from stitchfuzz.errors import (
    AmbiguousAlias,
    DuplicateBlockName,
    DuplicateTypeName,
    EmptyCode,
    SpecError,
    UnknownType,
)
from stitchfuzz.spec_model import (
    constructability_report,
    parse_spec,
    serialize_spec,
    spec_warnings,
)


def test_parse_minimal_document():
    doc = {
        "types": ["Doc"],
        "blocks": [
            {
                "name": "createDoc",
                "code": "emit 0 new",
                "inputs": [],
                "outputs": [{"name": "doc", "type": "Doc"}],
            }
        ],
    }
    spec = parse_spec(json.dumps(doc))
    assert len(spec.types) == 1
    assert len(spec.blocks) == 1
    assert spec.revision == 1
    assert spec.blocks[0].output_types == ("Doc",)


def test_alias_resolved_to_canonical():
    doc = {
        "types": [{"name": "Document", "aliases": ["IXML_Document*"]}],
        "blocks": [
            {
                "name": "use",
                "code": "x",
                "inputs": [{"name": "d", "type": "IXML_Document*"}],
                "outputs": [],
            }
        ],
    }
    spec = parse_spec(json.dumps(doc))
    assert spec.blocks[0].input_types == ("Document",)


def test_duplicate_block_name():
    doc = {
        "types": [],
        "blocks": [
            {"name": "parse", "code": "x", "inputs": [], "outputs": []},
            {"name": "parse", "code": "y", "inputs": [], "outputs": []},
        ],
    }
    with pytest.raises(DuplicateBlockName) as exc:
        parse_spec(json.dumps(doc))
    assert exc.value.name == "parse"


def test_duplicate_type_name():
    with pytest.raises(DuplicateTypeName):
        parse_spec(json.dumps({"types": ["Doc", "Doc"], "blocks": []}))


def test_ambiguous_alias():
    doc = {
        "types": [
            {"name": "A", "aliases": ["X"]},
            {"name": "B", "aliases": ["X"]},
        ],
        "blocks": [],
    }
    with pytest.raises(AmbiguousAlias):
        parse_spec(json.dumps(doc))


def test_unknown_type_names_offender():
    doc = {
        "types": ["Doc"],
        "blocks": [
            {
                "name": "bad",
                "code": "x",
                "inputs": [{"name": "e", "type": "Elem"}],
                "outputs": [],
            }
        ],
    }
    with pytest.raises(UnknownType) as exc:
        parse_spec(json.dumps(doc))
    assert exc.value.block == "bad"
    assert exc.value.type_name == "Elem"


def test_empty_code_rejected():
    doc = {"types": [], "blocks": [{"name": "b", "code": "", "inputs": [], "outputs": []}]}
    with pytest.raises(EmptyCode):
        parse_spec(json.dumps(doc))


def test_malformed_json():
    with pytest.raises(SpecError):
        parse_spec("{not json")


def test_bad_revision():
    with pytest.raises(SpecError):
        parse_spec(json.dumps({"types": [], "blocks": [], "revision": 0}))


def test_round_trip_identity(tiny_doc):
    tiny_doc["types"][0] = {"name": "Doc", "aliases": ["Doc*"], "note": "kept"}
    tiny_doc["blocks"][0]["extra_field"] = [1, 2]
    tiny_doc["hints"] = {"tag": ["a", "b"]}
    tiny_doc["revision"] = 3
    tiny_doc["vendor"] = {"x": 1}
    spec = parse_spec(json.dumps(tiny_doc))
    again = parse_spec(serialize_spec(spec))
    assert again == spec
    assert again.extra == spec.extra == {"vendor": {"x": 1}}
    assert again.blocks[0].extra == {"extra_field": [1, 2]}
    assert again.hints == {"tag": (b"a", b"b")}
    assert again.revision == 3


def test_canonicalization_idempotent(tiny_doc):
    tiny_doc["types"][0] = {"name": "Doc", "aliases": ["D*"]}
    once = parse_spec(json.dumps(tiny_doc))
    twice = parse_spec(serialize_spec(once))
    assert twice == once
    assert parse_spec(serialize_spec(twice)) == once


def test_block_and_type_namespaces_disjoint():
    doc = {
        "types": ["Doc"],
        "blocks": [{"name": "Doc", "code": "x", "inputs": [], "outputs": []}],
    }
    spec = parse_spec(json.dumps(doc))
    assert spec.blocks[0].name == "Doc"


def test_constructability_base_and_step(tiny_spec):
    report = constructability_report(tiny_spec)
    assert report == {"Doc": True, "Elem": True}


def test_constructability_no_base_case():
    doc = {
        "types": ["Doc"],
        "blocks": [
            {
                "name": "clone",
                "code": "emit 0 passthrough 0",
                "inputs": [{"name": "d", "type": "Doc"}],
                "outputs": [{"name": "d2", "type": "Doc"}],
            }
        ],
    }
    report = constructability_report(parse_spec(json.dumps(doc)))
    assert report == {"Doc": False}
    assert any("Doc" in w for w in spec_warnings(parse_spec(json.dumps(doc))))


def test_constructability_empty_spec():
    assert constructability_report(parse_spec('{"types": [], "blocks": []}')) == {}


def test_constructability_monotone():
    rng = random.Random(5)
    types = ["T0", "T1", "T2"]
    for _ in range(50):
        blocks = []
        for b in range(rng.randint(1, 4)):
            blocks.append(
                {
                    "name": f"b{b}",
                    "code": "x",
                    "inputs": [
                        {"name": f"i{j}", "type": rng.choice(types)}
                        for j in range(rng.randint(0, 2))
                    ],
                    "outputs": [
                        {"name": f"o{j}", "type": rng.choice(types)}
                        for j in range(rng.randint(0, 2))
                    ],
                }
            )
        doc = {"types": types, "blocks": blocks}
        before = constructability_report(parse_spec(json.dumps(doc)))
        doc["blocks"] = blocks + [
            {
                "name": "extra",
                "code": "x",
                "inputs": [
                    {"name": f"i{j}", "type": rng.choice(types)}
                    for j in range(rng.randint(0, 2))
                ],
                "outputs": [
                    {"name": f"o{j}", "type": rng.choice(types)}
                    for j in range(rng.randint(0, 2))
                ],
            }
        ]
        after = constructability_report(parse_spec(json.dumps(doc)))
        for t in types:
            assert not (before[t] and not after[t])


def test_hint_values_are_bytes():
    doc = {"types": [], "blocks": [], "hints": {"json": ["{}"]}}
    spec = parse_spec(json.dumps(doc))
    assert spec.hints["json"] == (b"{}",)
