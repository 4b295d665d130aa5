"""Exception hierarchy shared across the package."""

from __future__ import annotations


class StitchError(Exception):
    """Base class for all package errors."""


class SpecError(StitchError):
    """A specification document is malformed or inconsistent."""


class DuplicateBlockName(SpecError):
    def __init__(self, name: str):
        super().__init__(f"duplicate block name: {name!r}")
        self.name = name


class DuplicateTypeName(SpecError):
    def __init__(self, name: str):
        super().__init__(f"duplicate type name: {name!r}")
        self.name = name


class AmbiguousAlias(SpecError):
    def __init__(self, alias: str):
        super().__init__(f"alias maps to more than one type: {alias!r}")
        self.alias = alias


class UnknownType(SpecError):
    def __init__(self, block: str, slot: str, type_name: str):
        super().__init__(
            f"block {block!r} {slot} references unknown type {type_name!r}"
        )
        self.block = block
        self.slot = slot
        self.type_name = type_name


class EmptyCode(SpecError):
    def __init__(self, block: str):
        super().__init__(f"block {block!r} has empty code")
        self.block = block


class WireFormatError(StitchError):
    """Serialized testcase bytes do not follow the wire format."""


class BadMagic(WireFormatError):
    pass


class StructuralError(StitchError):
    """A testcase is structurally broken (bad block index or ref arity).

    Distinct from a well-formedness violation: the testcase cannot even be
    interpreted against the specification.
    """


class BlockProgramError(StitchError):
    """A virtual block program fails to parse or violates its declared interface."""

    def __init__(self, block: str, line: int, message: str):
        super().__init__(f"block {block!r}, line {line}: {message}")
        self.block = block
        self.line = line


class BackendContractViolation(StitchError):
    """The backend broke an execution obligation; an engine bug, never a finding."""


class NoConstructableSeed(StitchError):
    """No block with constructable input types could be chosen as a seed."""


class NativeOnly(StitchError):
    """The operation requires native block code, not virtual block programs."""


class EmissionError(StitchError):
    """Native source emission failed (e.g. a block defines a function)."""
