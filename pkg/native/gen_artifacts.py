#!/usr/bin/env python3
"""Build-time artifact generation for the native fixture package.

Writes into the build directory:
  crash_ns_clash.stc  the planted-bug testcase (Listing-style 6-call chain)
  manifest.json       frozen bug signatures + file layout for consumers
  repro_compile.json  compile command template for emitted reproducers
plus copies of fixture_spec.json, twin_spec.json and twin/ programs so the
build directory is self-contained.
"""

import json
import shutil
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent / "src"))

from stitchfuzz.spec_model import load_spec  # noqa: E402
from stitchfuzz.testcase import (  # noqa: E402
    BlockInstance,
    ParamKind,
    ParamValue,
    Testcase,
    serialize,
    validate,
)


def planted_crash_testcase(spec) -> Testcase:
    name2idx = {b.name: i for i, b in enumerate(spec.blocks)}
    s = lambda data: ParamValue(ParamKind.STR, data)
    seq = [
        ("createDocument", [], ()),                      # flat 0: doc
        ("createElement", [0], (s(b"E"),)),              # flat 1: doc, 2: el
        ("createAttr", [1], (s(b"x"),)),                 # flat 3: doc, 4: attr
        ("setAttrNode", [2, 4], ()),                     # flat 5: el
        ("createAttrNS", [3], (s(b"urn:ns"), s(b"p"), s(b"x"))),  # 6: doc, 7: attr
        ("setAttrNodeNS", [5, 7], ()),                   # crash
    ]
    t = Testcase(
        tuple(BlockInstance(name2idx[n], tuple(r), p) for n, r, p in seq)
    )
    report = validate(spec, t)
    assert report.ok, report.violations
    return t


def main() -> int:
    build = Path(sys.argv[1] if len(sys.argv) > 1 else HERE / "build")
    build.mkdir(parents=True, exist_ok=True)

    shutil.copy(HERE / "fixture_spec.json", build / "fixture_spec.json")
    shutil.copy(HERE / "twin_spec.json", build / "twin_spec.json")
    (build / "twin").mkdir(exist_ok=True)
    for vblk in (HERE / "twin").glob("*.vblk"):
        shutil.copy(vblk, build / "twin" / vblk.name)

    spec = load_spec(build / "fixture_spec.json")
    t = planted_crash_testcase(spec)
    (build / "crash_ns_clash.stc").write_bytes(serialize(t))

    manifest = {
        "spec": "fixture_spec.json",
        "twin_spec": "twin_spec.json",
        "harness": "harness",
        "library": "libminifix.a",
        "block_correspondence": "twin block indices 0-5 equal native indices 0-5",
        "bugs": {
            "ns_name_clash": {
                "testcase": "crash_ns_clash.stc",
                "signature": "SEGV",
                "min_instances": 6,
                "trigger": (
                    "attach a plain attribute, then a namespaced attribute "
                    "with the same local name to the same element"
                ),
            },
            "json_oob_delete": {
                "signature": "heap-buffer-overflow",
                "trigger": "mj_delete_item at index >= size (spec blocks guard "
                           "this with the modulo cast; see test_json_oob.c)",
            },
        },
    }
    (build / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    repro_cmd = [
        "clang++", "-std=c++17", "-g", "-O1", "-fsanitize=address",
        "-I..", "{src}", "libminifix.a", "-o", "{out}",
    ]
    (build / "repro_compile.json").write_text(json.dumps(repro_cmd, indent=2) + "\n")
    print(f"artifacts written to {build}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
