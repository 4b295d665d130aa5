"""Testcases: block instances, well-formedness rules, binary wire format.

A testcase is an ordered list of block instances. References are flat global
output indices: instance i may reference any k < N_i where N_i is the number
of outputs produced by instances 0..i-1. Three rules define well-formedness
(backward references, single-use outputs, type correctness); they are checked
statically, before any execution.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

from .errors import BadMagic, StructuralError, WireFormatError
from .spec_model import Specification

WIRE_MAGIC = b"STCH"
WIRE_VERSION = 1


class ParamKind(IntEnum):
    FIXED = 0
    STR = 1
    FILE = 2


@dataclass(frozen=True)
class ParamValue:
    """One concrete fuzzable value. Fixed values carry exactly their width."""

    kind: ParamKind
    data: bytes

    @property
    def width(self) -> int:
        return len(self.data)

    @staticmethod
    def fixed(data: bytes) -> "ParamValue":
        return ParamValue(ParamKind.FIXED, bytes(data))

    @staticmethod
    def string(data: bytes) -> "ParamValue":
        return ParamValue(ParamKind.STR, bytes(data))

    @staticmethod
    def file(data: bytes) -> "ParamValue":
        return ParamValue(ParamKind.FILE, bytes(data))


@dataclass(frozen=True)
class BlockInstance:
    """A code block placed in a testcase: block index, refs, parameter record."""

    block: int
    refs: tuple[int, ...]
    params: tuple[ParamValue, ...] = ()


@dataclass(frozen=True)
class Testcase:
    instances: tuple[BlockInstance, ...] = ()

    def __len__(self) -> int:
        return len(self.instances)


class Rule(IntEnum):
    """Well-formedness rules in fixed reporting order."""

    BACKWARD = 0
    SINGLE_USE = 1
    TYPE = 2


@dataclass(frozen=True)
class Violation:
    rule: Rule
    instance: int
    ref_pos: int


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[Violation, ...] = ()


def _check_structure(spec: Specification, t: Testcase) -> None:
    for i, inst in enumerate(t.instances):
        if not (0 <= inst.block < len(spec.blocks)):
            raise StructuralError(
                f"instance {i}: block index {inst.block} out of range "
                f"(spec has {len(spec.blocks)} blocks)"
            )
        block = spec.blocks[inst.block]
        if len(inst.refs) != len(block.inputs):
            raise StructuralError(
                f"instance {i}: {len(inst.refs)} refs for block {block.name!r} "
                f"with {len(block.inputs)} inputs"
            )


def output_counts(spec: Specification, t: Testcase) -> list[int]:
    """N_i for each instance: total outputs produced before instance i."""
    counts = []
    n = 0
    for inst in t.instances:
        counts.append(n)
        n += len(spec.blocks[inst.block].outputs)
    return counts


def total_outputs(spec: Specification, t: Testcase) -> int:
    return sum(len(spec.blocks[i.block].outputs) for i in t.instances)


def flat_output_type(spec: Specification, t: Testcase, k: int) -> str:
    """Type of the flat output at index k via the (p, q) decomposition."""
    if k < 0:
        raise IndexError(f"flat output index {k} out of range")
    n = 0
    for inst in t.instances:
        outs = spec.blocks[inst.block].output_types
        if k < n + len(outs):
            return outs[k - n]
        n += len(outs)
    raise IndexError(f"flat output index {k} out of range (total {n})")


def validate(spec: Specification, t: Testcase) -> ValidationReport:
    """Check the three well-formedness rules.

    All rules are checked independently and every violation reported, ordered
    by (instance, rule, ref position). A ref that fails Backward References is
    not type-checked (its referent may not exist). Raises StructuralError for
    out-of-range block indices or ref-arity mismatches.
    """
    _check_structure(spec, t)
    violations: list[Violation] = []

    flat_types: list[str] = []
    counts = []
    for inst in t.instances:
        counts.append(len(flat_types))
        flat_types.extend(spec.blocks[inst.block].output_types)

    seen: set[int] = set()
    for i, inst in enumerate(t.instances):
        n_i = counts[i]
        in_types = spec.blocks[inst.block].input_types
        per_instance: list[Violation] = []
        for j, k in enumerate(inst.refs):
            backward_ok = 0 <= k < n_i
            if not backward_ok:
                per_instance.append(Violation(Rule.BACKWARD, i, j))
            if k in seen:
                per_instance.append(Violation(Rule.SINGLE_USE, i, j))
            else:
                seen.add(k)
            if backward_ok and flat_types[k] != in_types[j]:
                per_instance.append(Violation(Rule.TYPE, i, j))
        per_instance.sort(key=lambda v: (v.rule, v.ref_pos))
        violations.extend(per_instance)

    return ValidationReport(ok=not violations, violations=tuple(violations))


def is_well_formed(spec: Specification, t: Testcase) -> bool:
    """Boolean fast path over the three rules plus structure; early exit.

    Equivalent to ``validate(spec, t).ok`` but allocates no report and
    returns False (rather than raising) on structural breakage.
    """
    blocks = spec.blocks
    n_blocks = len(blocks)
    flat_types: list[str] = []
    seen: set[int] = set()
    for inst in t.instances:
        if not 0 <= inst.block < n_blocks:
            return False
        block = blocks[inst.block]
        in_types = block.input_types
        if len(inst.refs) != len(in_types):
            return False
        n_i = len(flat_types)
        for j, k in enumerate(inst.refs):
            if not 0 <= k < n_i:
                return False
            if k in seen:
                return False
            seen.add(k)
            if flat_types[k] != in_types[j]:
                return False
        flat_types.extend(block.output_types)
    return True


# --- Wire format ---
# Little-endian, no padding:
#   magic "STCH" | version u32 | instance_count u32
#   per instance: block_index u32 | ref_count u32 | refs u32[] | param_count u32
#   per param:    kind u8 | length u32 | bytes

_U32 = struct.Struct("<I")
_HDR = struct.Struct("<4sII")
_KIND_LEN = struct.Struct("<BI")


def serialize(t: Testcase) -> bytes:
    parts = [_HDR.pack(WIRE_MAGIC, WIRE_VERSION, len(t.instances))]
    for inst in t.instances:
        parts.append(_U32.pack(inst.block))
        parts.append(_U32.pack(len(inst.refs)))
        for r in inst.refs:
            parts.append(_U32.pack(r))
        parts.append(_U32.pack(len(inst.params)))
        for p in inst.params:
            parts.append(_KIND_LEN.pack(int(p.kind), len(p.data)))
            parts.append(p.data)
    return b"".join(parts)


class _Reader:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise WireFormatError(
                f"truncated record: need {n} bytes at offset {self.pos}, "
                f"have {len(self.buf) - self.pos}"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]


def deserialize(data: bytes, spec: Specification) -> Testcase:
    """Parse wire-format bytes back into a Testcase.

    Raises BadMagic / WireFormatError for malformed bytes and StructuralError
    for block indices outside the specification.
    """
    r = _Reader(data)
    magic = r.take(4)
    if magic != WIRE_MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    version = r.u32()
    if version != WIRE_VERSION:
        raise WireFormatError(f"unsupported wire version {version}")
    count = r.u32()
    instances = []
    for i in range(count):
        block = r.u32()
        if block >= len(spec.blocks):
            raise StructuralError(
                f"instance {i}: block index {block} out of range "
                f"(spec has {len(spec.blocks)} blocks)"
            )
        ref_count = r.u32()
        refs = tuple(r.u32() for _ in range(ref_count))
        param_count = r.u32()
        params = []
        for _ in range(param_count):
            kind_raw, length = _KIND_LEN.unpack(r.take(5))
            try:
                kind = ParamKind(kind_raw)
            except ValueError:
                raise WireFormatError(f"bad param kind {kind_raw}") from None
            params.append(ParamValue(kind, r.take(length)))
        instances.append(BlockInstance(block=block, refs=refs, params=tuple(params)))
    if r.pos != len(data):
        raise WireFormatError(f"{len(data) - r.pos} trailing bytes after record")
    return Testcase(instances=tuple(instances))
