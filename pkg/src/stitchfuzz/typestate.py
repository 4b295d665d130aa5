"""Extrinsic typestate: per-object and global key->value stores.

Values are Python natives tagged by their type: int (64-bit signed), bytes,
or an ObjectToken (opaque identity handle). Reading an absent key, or reading
with the wrong type tag, bails the executing block; the stores themselves
report absence via the ABSENT sentinel and leave the bail to the caller.

One store exists per in-flight testcase execution and is never shared.
"""

from __future__ import annotations

from .errors import BackendContractViolation

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class ObjectToken:
    """Opaque identity of a runtime object; equality is identity."""

    __slots__ = ("type_name",)

    def __init__(self, type_name: str):
        self.type_name = type_name

    def __repr__(self):
        return f"<{self.type_name}@{id(self):#x}>"


class Absent:
    """Sentinel for a missing key; a partial-map lookup miss."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABSENT"


ABSENT = Absent()

# Tag names used by typed reads; values are checked by isinstance.
TAG_INT = "int"
TAG_STR = "str"
TAG_PTR = "ptr"

_TAG_TYPES = {TAG_INT: int, TAG_STR: bytes, TAG_PTR: ObjectToken}


class BailSignal(Exception):
    """A block cleanly refused to run: a violated usage constraint."""


class CrashSignal(Exception):
    """A modeled crash with an explicit identifier."""

    def __init__(self, crash_id: str):
        super().__init__(crash_id)
        self.crash_id = crash_id


class TypestateStore:
    """M_o and M_g: per-object maps keyed by object identity, plus a global map."""

    __slots__ = ("per_object", "global_map", "_registered")

    def __init__(self):
        self.per_object: dict[ObjectToken, dict[str, object]] = {}
        self.global_map: dict[str, object] = {}
        self._registered: set[int] = set()

    def register(self, obj: ObjectToken) -> None:
        self._registered.add(id(obj))

    def is_registered(self, obj: ObjectToken) -> bool:
        return id(obj) in self._registered

    def _require_registered(self, obj: ObjectToken) -> None:
        if id(obj) not in self._registered:
            raise BackendContractViolation(
                f"typestate access on unregistered object {obj!r}"
            )

    def set_attr(self, obj: ObjectToken, key: str, value) -> None:
        self._require_registered(obj)
        _check_value(value)
        attrs = self.per_object.get(obj)
        if attrs is None:
            attrs = self.per_object[obj] = {}
        attrs[key] = value

    def get_attr(self, obj: ObjectToken, key: str):
        """Partial lookup: the stored value, or ABSENT."""
        self._require_registered(obj)
        attrs = self.per_object.get(obj)
        if attrs is None:
            return ABSENT
        return attrs.get(key, ABSENT)

    def set_global(self, key: str, value) -> None:
        _check_value(value)
        self.global_map[key] = value

    def get_global(self, key: str):
        return self.global_map.get(key, ABSENT)

    def snapshot(self) -> tuple[dict, dict]:
        """Copies of both maps, for structural comparison in tests."""
        return (
            {o: dict(a) for o, a in self.per_object.items()},
            dict(self.global_map),
        )


def _check_value(value) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, bytes, ObjectToken)):
        raise BackendContractViolation(f"bad typestate value {value!r}")
    if isinstance(value, int) and not (INT64_MIN <= value <= INT64_MAX):
        raise BackendContractViolation(f"int typestate value out of 64-bit range")


def read_attr(store: TypestateStore, obj: ObjectToken, key: str, tag: str):
    """Typed per-object read: bail on absence or tag mismatch."""
    value = store.get_attr(obj, key)
    if value is ABSENT or not isinstance(value, _TAG_TYPES[tag]) or (
        tag == TAG_INT and isinstance(value, bool)
    ):
        raise BailSignal()
    return value


def read_global(store: TypestateStore, key: str, tag: str):
    """Typed global read: bail on absence or tag mismatch."""
    value = store.get_global(key)
    if value is ABSENT or not isinstance(value, _TAG_TYPES[tag]) or (
        tag == TAG_INT and isinstance(value, bool)
    ):
        raise BailSignal()
    return value


def wrap_i64(value: int) -> int:
    """Wrap an int into signed 64-bit range (the store's Int domain)."""
    return (value - INT64_MIN) % (2**64) + INT64_MIN
