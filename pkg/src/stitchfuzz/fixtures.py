"""Virtual fixture specifications used by tests, demos, and the CLI examples.

Three families:

* ``planted40_spec``: a 40-block API model (a small XML-ish document library
  plus unrelated filler subsystems) with one planted crash that requires a
  specific typestate-constrained 6-instance call sequence: create a document
  and element, attach a plain attribute, then attach a namespaced attribute
  to the same element. Coverage milestones along the guard chains give the
  search a gradient.

* ``misuse_spec``: a library model whose blocks contain modeled
  library-crash points (crash ids prefixed ``misuse_``) for API misuse such
  as passing a namespaced attribute to the plain setter or deleting out of
  range. With ``guarded=True`` each misuse point sits behind the matching
  constraint check (bail or modulo-cast), so misuse crashes are unreachable;
  with ``guarded=False`` the guards are stripped.

* ``px_minimize_spec``: a tiny spec whose crash depends on an exact string
  parameter, for crash-preservation tests of the minimizer.
"""

from __future__ import annotations

import json

from .spec_model import Specification, parse_spec

# Manifest for the planted 6-call bug: block names that any minimized
# reproducer must contain, and the crash dedup identity.
PLANTED_BUG_BLOCKS = (
    "createDocument",
    "createElement",
    "createAttr",
    "setAttrNode",
    "createAttrNS",
    "setAttrNodeNS",
)
PLANTED_BUG_CRASH_ID = "ns_name_clash"
PLANTED_BUG_BLOCK = "setAttrNodeNS"
PLANTED_BUG_MIN_INSTANCES = 6


def _block(name, code, inputs=(), outputs=(), hint_class=None):
    entry = {
        "name": name,
        "code": code,
        "inputs": [{"name": n, "type": t} for n, t in inputs],
        "outputs": [{"name": n, "type": t} for n, t in outputs],
    }
    if hint_class:
        entry["hint_class"] = hint_class
    return entry


def _xml_core_blocks(guards: bool = True, misuse_crashes: bool = False):
    """The six-block document/element/attribute protocol.

    ``guards``: include the constraint checks (ns flag and parent-document
    matching). ``misuse_crashes``: include modeled library crashes on misuse,
    used by the misuse-model fixture.
    """

    def g(line):  # guard line, dropped when guards are stripped
        return line if guards else None

    def m(line):  # modeled library misuse crash
        return line if misuse_crashes else None

    def code(*lines):
        return "\n".join(l for l in lines if l is not None) + "\n"

    return [
        _block(
            "createDocument",
            code(
                "cover 100",
                "emit 0 new",
                'set_attr out0 "nelems" 0',
                "cover 101",
            ),
            outputs=[("doc", "Doc")],
        ),
        _block(
            "createElement",
            code(
                "cover 110",
                "param tag str",
                "emit 0 passthrough 0",
                "emit 1 new",
                'set_attr out1 "doc" ptr(in0)',
                'set_attr out1 "has_plain" 0',
                'set_attr out1 "tag" param(tag)',
                "cover 111",
            ),
            inputs=[("doc", "Doc")],
            outputs=[("doc", "Doc"), ("el", "Elem")],
            hint_class="tag_name",
        ),
        _block(
            "createAttr",
            code(
                "cover 120",
                "param name str",
                "emit 0 passthrough 0",
                "emit 1 new",
                'set_attr out1 "ns" 0',
                'set_attr out1 "doc" ptr(in0)',
                'set_attr out1 "name" param(name)',
                "cover 121",
            ),
            inputs=[("doc", "Doc")],
            outputs=[("doc", "Doc"), ("attr", "Attr")],
            hint_class="attr_name",
        ),
        _block(
            "createAttrNS",
            code(
                "cover 130",
                "param uri str",
                "param qname str",
                "emit 0 passthrough 0",
                "emit 1 new",
                'set_attr out1 "ns" 1',
                'set_attr out1 "doc" ptr(in0)',
                'set_attr out1 "name" param(qname)',
                "cover 131",
            ),
            inputs=[("doc", "Doc")],
            outputs=[("doc", "Doc"), ("attr", "Attr")],
            hint_class="qname",
        ),
        _block(
            "setAttrNode",
            code(
                "cover 140",
                g('bail_if attr_int(in1,"ns") != 0'),
                m('crash_if attr_int(in1,"ns") == 1 :misuse_ns_attr_in_plain_setter'),
                "cover 141",
                g('bail_if attr_ptr(in0,"doc") != attr_ptr(in1,"doc")'),
                m('crash_if attr_ptr(in0,"doc") != attr_ptr(in1,"doc") :misuse_doc_mismatch'),
                "cover 142",
                'set_attr in0 "has_plain" 1',
                'set_attr in0 "plain_name" attr_str(in1,"name")',
                "emit 0 passthrough 0",
                "cover 143",
            ),
            inputs=[("el", "Elem"), ("attr", "Attr")],
            outputs=[("el", "Elem")],
        ),
        _block(
            "setAttrNodeNS",
            code(
                "cover 150",
                g('bail_if attr_int(in1,"ns") != 1'),
                m('crash_if attr_int(in1,"ns") == 0 :misuse_plain_attr_in_ns_setter'),
                "cover 151",
                g('bail_if attr_ptr(in0,"doc") != attr_ptr(in1,"doc")'),
                m('crash_if attr_ptr(in0,"doc") != attr_ptr(in1,"doc") :misuse_doc_mismatch_ns'),
                "cover 152",
                'crash_if attr_int(in0,"has_plain") == 1 :ns_name_clash',
                "cover 153",
                'set_attr in0 "has_ns" 1',
                "emit 0 passthrough 0",
            ),
            inputs=[("el", "Elem"), ("attr", "Attr")],
            outputs=[("el", "Elem")],
        ),
    ]


def _filler_blocks():
    """34 unrelated blocks: buffers, nodes, tokens, global init gating."""
    blocks = [
        _block("initLib", 'set_global "init" 1\ncover 200\n'),
        _block("libStatus", 'bail_if global_int("init") != 1\ncover 201\n'),
    ]
    for k in range(4):
        blocks.append(
            _block(
                f"mkBuf{k}",
                f"cover {210 + k}\nemit 0 new\n" f'set_attr out0 "sz" {k}\n',
                outputs=[("buf", "Buf")],
            )
        )
    for k in range(4):
        blocks.append(
            _block(
                f"useBuf{k}",
                f'bail_if attr_int(in0,"sz") != {k}\ncover {220 + k}\n',
                inputs=[("buf", "Buf")],
            )
        )
    for k in range(4):
        blocks.append(
            _block(
                f"mkNode{k}",
                f"cover {230 + k}\nemit 0 passthrough 0\nemit 1 new\n"
                f'set_attr out1 "kind" {k}\n',
                inputs=[("doc", "Doc")],
                outputs=[("doc", "Doc"), ("node", "Node")],
            )
        )
    for k in range(4):
        blocks.append(
            _block(
                f"useNode{k}",
                "param x fixed 1\n"
                f"cover_if int_mod(param_int(x), 4) == {k} {240 + k}\n"
                f"cover {250 + k}\nemit 0 passthrough 0\n",
                inputs=[("node", "Node")],
                outputs=[("node", "Node")],
            )
        )
    for k in range(4):
        blocks.append(
            _block(
                f"mkTok{k}",
                f"cover {260 + k}\nemit 0 new\nset_attr out0 \"lvl\" {k}\n",
                outputs=[("tok", "Tok")],
            )
        )
    for k in range(4):
        blocks.append(
            _block(
                f"pairTok{k}",
                f'bail_if attr_int(in1,"sz") != {k}\ncover {270 + k}\n'
                "emit 0 passthrough 0\n",
                inputs=[("tok", "Tok"), ("buf", "Buf")],
                outputs=[("tok", "Tok")],
            )
        )
    for k in range(4):
        blocks.append(
            _block(
                f"docStat{k}",
                f"cover {280 + k}\nemit 0 passthrough 0\n",
                inputs=[("doc", "Doc")],
                outputs=[("doc", "Doc")],
            )
        )
    blocks.append(
        _block("elemInfo", "cover 290\nemit 0 passthrough 0\n",
               inputs=[("el", "Elem")], outputs=[("el", "Elem")])
    )
    blocks.append(
        _block("attrInfo", "cover 291\nemit 0 passthrough 0\n",
               inputs=[("attr", "Attr")], outputs=[("attr", "Attr")])
    )
    blocks.append(_block("freeNode", "cover 292\n", inputs=[("node", "Node")]))
    blocks.append(_block("freeTok", "cover 293\n", inputs=[("tok", "Tok")]))
    return blocks


def planted40_doc() -> dict:
    blocks = _xml_core_blocks(guards=True) + _filler_blocks()
    assert len(blocks) == 40, len(blocks)
    return {
        "types": ["Doc", "Elem", "Attr", "Buf", "Node", "Tok"],
        "blocks": blocks,
        "hints": {
            "tag_name": ["E"],
            "attr_name": ["x"],
            "qname": ["urn:ns", "p:x"],
        },
        "revision": 1,
    }


def planted40_spec() -> Specification:
    return parse_spec(json.dumps(planted40_doc()))


def _json_blocks(guarded: bool):
    """Parser-style blocks following the dynamic-checker idiom: inspect the
    parse result, record metadata, and cast indices into range (guarded) or
    pass raw fuzz data straight through (stripped)."""
    parse_code = (
        "cover 300\n"
        "param text file\n"
        "emit 0 new\n"
        'set_attr out0 "size" int_mod(param_int(text), 5)\n'
        "cover 301\n"
    )
    if guarded:
        delete_code = (
            "cover 310\n"
            "param idx fixed 4\n"
            'bail_if attr_int(in0,"size") == 0\n'
            "cover 311\n"
            'crash_if attr_int(in0,"size") < int_mod(param_int(idx), attr_int(in0,"size")) :misuse_oob_delete\n'
            'crash_if attr_int(in0,"size") == int_mod(param_int(idx), attr_int(in0,"size")) :misuse_oob_delete\n'
            "cover 312\n"
            'set_attr in0 "size" 0\n'
            "emit 0 passthrough 0\n"
        )
    else:
        delete_code = (
            "cover 310\n"
            "param idx fixed 4\n"
            "cover 311\n"
            'crash_if attr_int(in0,"size") < param_int(idx) :misuse_oob_delete\n'
            'crash_if attr_int(in0,"size") == param_int(idx) :misuse_oob_delete\n'
            "cover 312\n"
            'set_attr in0 "size" 0\n'
            "emit 0 passthrough 0\n"
        )
    return [
        _block("jsonParse", parse_code, outputs=[("obj", "Json")],
               hint_class="json_text"),
        _block("jsonDeleteItem", delete_code,
               inputs=[("obj", "Json")], outputs=[("obj", "Json")]),
        _block("jsonFree", "cover 320\n", inputs=[("obj", "Json")]),
    ]


def misuse_doc(guarded: bool) -> dict:
    blocks = _xml_core_blocks(guards=guarded, misuse_crashes=True)
    blocks += _json_blocks(guarded)
    return {
        "types": ["Doc", "Elem", "Attr", "Json"],
        "blocks": blocks,
        "hints": {"json_text": ["[1,2,3]", "{}"]},
        "revision": 1,
    }


def misuse_spec(guarded: bool) -> Specification:
    return parse_spec(json.dumps(misuse_doc(guarded)))


MISUSE_PREFIX = "misuse_"


def px_minimize_doc() -> dict:
    return {
        "types": ["Ctx"],
        "blocks": [
            _block("mkCtx", "cover 1\nemit 0 new\n", outputs=[("ctx", "Ctx")]),
            _block(
                "probe",
                "cover 2\nparam q str\n"
                'crash_if param(q) == "p:x" :qname_crash\n'
                "cover 3\n",
                inputs=[("ctx", "Ctx")],
            ),
            _block("noise", "cover 4\nemit 0 passthrough 0\n",
                   inputs=[("ctx", "Ctx")], outputs=[("ctx", "Ctx")]),
        ],
        "revision": 1,
    }


def px_minimize_spec() -> Specification:
    return parse_spec(json.dumps(px_minimize_doc()))


def demo_doc() -> dict:
    """Small guarded spec for README walkthroughs and CLI smoke tests."""
    return misuse_doc(guarded=True)


def write_fixture_files(directory: str) -> dict[str, str]:
    """Dump the fixture specs as JSON files; returns name -> path."""
    import os

    os.makedirs(directory, exist_ok=True)
    out = {}
    for name, doc in (
        ("planted40", planted40_doc()),
        ("misuse_guarded", misuse_doc(True)),
        ("misuse_stripped", misuse_doc(False)),
        ("px_minimize", px_minimize_doc()),
    ):
        path = os.path.join(directory, f"{name}.json")
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        out[name] = path
    return out
