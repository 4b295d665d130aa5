"""Load, validate, and canonicalize fuzzable specifications.

A specification is a JSON document declaring object types (with optional
aliases), code blocks (code text plus typed inputs/outputs), optional hint
pools for string/file parameters, and a revision counter that drives corpus
migration. Specifications are immutable after parse and safe to share.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

from .errors import (
    AmbiguousAlias,
    DuplicateBlockName,
    DuplicateTypeName,
    EmptyCode,
    SpecError,
    UnknownType,
)

_TYPE_KEYS = {"name", "aliases"}
_BLOCK_KEYS = {"name", "code", "inputs", "outputs", "hint_class"}
_TOP_KEYS = {"types", "blocks", "hints", "revision"}


@dataclass(frozen=True)
class TypeId:
    """A canonical object type name plus the alias spellings that resolve to it."""

    name: str
    aliases: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class CodeBlock:
    """One specification unit: code text plus typed input and output slots.

    ``inputs`` and ``outputs`` are ordered (slot name, canonical type name)
    pairs. The fuzzable-parameter space is implicit in the code and only
    observable by executing the block.
    """

    name: str
    code: str
    inputs: tuple[tuple[str, str], ...]
    outputs: tuple[tuple[str, str], ...]
    hint_class: str | None = None
    extra: dict = field(default_factory=dict, compare=False)

    @cached_property
    def input_types(self) -> tuple[str, ...]:
        return tuple(t for _, t in self.inputs)

    @cached_property
    def output_types(self) -> tuple[str, ...]:
        return tuple(t for _, t in self.outputs)


@dataclass(frozen=True)
class Specification:
    types: tuple[TypeId, ...]
    blocks: tuple[CodeBlock, ...]
    hints: dict[str, tuple[bytes, ...]] = field(default_factory=dict)
    revision: int = 1
    extra: dict = field(default_factory=dict, compare=False)

    def block_by_name(self, name: str) -> CodeBlock | None:
        for b in self.blocks:
            if b.name == name:
                return b
        return None

    def type_names(self) -> set[str]:
        return {t.name for t in self.types}


def _canonical_map(types: list[TypeId]) -> dict[str, str]:
    """Build the alias -> canonical name map, rejecting ambiguous aliases."""
    mapping: dict[str, str] = {}
    for t in types:
        mapping[t.name] = t.name
    for t in types:
        for alias in t.aliases:
            if alias in mapping and mapping[alias] != t.name:
                raise AmbiguousAlias(alias)
            mapping[alias] = t.name
    return mapping


def _parse_types(raw) -> list[TypeId]:
    if not isinstance(raw, list):
        raise SpecError("'types' must be an array")
    out: list[TypeId] = []
    seen: set[str] = set()
    for item in raw:
        if isinstance(item, str):
            name, aliases, extra = item, (), {}
        elif isinstance(item, dict):
            if "name" not in item:
                raise SpecError("type entry missing 'name'")
            name = item["name"]
            aliases = tuple(item.get("aliases", ()))
            extra = {k: v for k, v in item.items() if k not in _TYPE_KEYS}
        else:
            raise SpecError(f"bad type entry: {item!r}")
        if not isinstance(name, str) or not name:
            raise SpecError(f"bad type name: {name!r}")
        if name in seen:
            raise DuplicateTypeName(name)
        seen.add(name)
        out.append(TypeId(name=name, aliases=aliases, extra=extra))
    return out


def _parse_io(block_name: str, slot: str, raw, canon: dict[str, str]):
    if not isinstance(raw, list):
        raise SpecError(f"block {block_name!r}: {slot} must be an array")
    pairs = []
    for item in raw:
        if not isinstance(item, dict) or "name" not in item or "type" not in item:
            raise SpecError(f"block {block_name!r}: bad {slot} entry {item!r}")
        tname = item["type"]
        if tname not in canon:
            raise UnknownType(block_name, slot, tname)
        pairs.append((item["name"], canon[tname]))
    return tuple(pairs)


def parse_spec(text: str | bytes) -> Specification:
    """Parse a spec JSON document, resolving type aliases to canonical names.

    Raises SpecError subclasses naming the offending block or type. Unknown
    JSON fields are preserved on the parsed objects and otherwise ignored.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(f"malformed JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SpecError("top-level value must be an object")

    types = _parse_types(doc.get("types", []))
    canon = _canonical_map(types)

    blocks: list[CodeBlock] = []
    seen: set[str] = set()
    for raw in doc.get("blocks", []):
        if not isinstance(raw, dict) or "name" not in raw:
            raise SpecError(f"bad block entry: {raw!r}")
        name = raw["name"]
        if name in seen:
            raise DuplicateBlockName(name)
        seen.add(name)
        code = raw.get("code", "")
        if not isinstance(code, str) or not code:
            raise EmptyCode(name)
        blocks.append(
            CodeBlock(
                name=name,
                code=code,
                inputs=_parse_io(name, "inputs", raw.get("inputs", []), canon),
                outputs=_parse_io(name, "outputs", raw.get("outputs", []), canon),
                hint_class=raw.get("hint_class"),
                extra={k: v for k, v in raw.items() if k not in _BLOCK_KEYS},
            )
        )

    hints: dict[str, tuple[bytes, ...]] = {}
    for cls, values in (doc.get("hints") or {}).items():
        if not isinstance(values, list):
            raise SpecError(f"hint class {cls!r} must map to an array")
        hints[cls] = tuple(
            v.encode("utf-8") if isinstance(v, str) else bytes(v) for v in values
        )

    revision = doc.get("revision", 1)
    if not isinstance(revision, int) or revision < 1:
        raise SpecError(f"revision must be an integer >= 1, got {revision!r}")

    return Specification(
        types=tuple(types),
        blocks=tuple(blocks),
        hints=hints,
        revision=revision,
        extra={k: v for k, v in doc.items() if k not in _TOP_KEYS},
    )


def serialize_spec(spec: Specification) -> str:
    """Render a Specification back to its JSON document form."""
    types = []
    for t in spec.types:
        if t.aliases or t.extra:
            entry = {"name": t.name}
            if t.aliases:
                entry["aliases"] = list(t.aliases)
            entry.update(t.extra)
            types.append(entry)
        else:
            types.append(t.name)
    blocks = []
    for b in spec.blocks:
        entry = {
            "name": b.name,
            "code": b.code,
            "inputs": [{"name": n, "type": t} for n, t in b.inputs],
            "outputs": [{"name": n, "type": t} for n, t in b.outputs],
        }
        if b.hint_class is not None:
            entry["hint_class"] = b.hint_class
        entry.update(b.extra)
        blocks.append(entry)
    doc = {"types": types, "blocks": blocks, "revision": spec.revision}
    if spec.hints:
        doc["hints"] = {
            cls: [v.decode("utf-8", "surrogateescape") for v in values]
            for cls, values in spec.hints.items()
        }
    doc.update(spec.extra)
    return json.dumps(doc, indent=2)


def load_spec(path) -> Specification:
    with open(path, "rb") as fh:
        return parse_spec(fh.read())


def constructability_report(spec: Specification) -> dict[str, bool]:
    """Least fixed point: a type is constructable iff some block produces it
    from only constructable inputs, starting from zero-input blocks."""
    report = {t.name: False for t in spec.types}
    changed = True
    while changed:
        changed = False
        for b in spec.blocks:
            if all(report.get(t, False) for t in b.input_types):
                for t in b.output_types:
                    if not report.get(t, False):
                        report[t] = True
                        changed = True
    return report


def spec_warnings(spec: Specification) -> list[str]:
    """Non-fatal issues worth surfacing: unconstructable types, no entry block."""
    warnings: list[str] = []
    report = constructability_report(spec)
    unconstructable = sorted(t for t, ok in report.items() if not ok)
    if spec.blocks and not any(not b.inputs for b in spec.blocks):
        warnings.append("no block has zero inputs; nothing is constructable from scratch")
    for t in unconstructable:
        warnings.append(f"type {t!r} is not constructable by any block chain")
    return warnings
