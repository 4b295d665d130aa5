"""Deterministic testcase execution against interpreted block programs.

Testcases run from the empty runtime state: instances execute in order, each
resolving its references against the flat object list, then appending its
outputs. The first bail ends the run with the bailing instance's position;
modeled crashes carry an explicit crash identifier. Coverage is the union of
cover events from every executed instruction up to and including the
terminating one. Execution is pure given (spec, testcase).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum

from .blockprog import CompiledProgram, compile_program
from .errors import BackendContractViolation
from .spec_model import Specification
from .testcase import BlockInstance, ParamKind, Testcase
from .typestate import BailSignal, CrashSignal, ObjectToken, TypestateStore

FILE_CODE_PREFIX = "@file:"


class OutcomeKind(Enum):
    COMPLETED = "completed"
    BAIL = "bail"
    CRASH = "crash"
    HANG = "hang"


class RuntimeState:
    """The flat object sequence plus the typestate stores."""

    __slots__ = ("objects", "store")

    def __init__(self):
        self.objects: list[tuple[str, ObjectToken]] = []
        self.store = TypestateStore()

    def append_outputs(self, types, tokens) -> None:
        self.objects.extend(zip(types, tokens))

    def type_list(self) -> list[str]:
        return [t for t, _ in self.objects]


@dataclass(frozen=True)
class Outcome:
    """Result of executing a testcase.

    ``index`` is the absolute instance position for bail/crash/hang.
    ``shapes`` records the observed parameter request shape of each
    successfully completed instance (kind, fixed-width) and is execution
    metadata, not part of the semantic outcome.
    """

    kind: OutcomeKind
    index: int | None = None
    crash_id: str | None = None
    coverage: frozenset[int] = frozenset()
    state: RuntimeState | None = field(default=None, compare=False)
    shapes: tuple[tuple[tuple[ParamKind, int], ...], ...] = field(
        default=(), compare=False
    )

    @property
    def completed(self) -> bool:
        return self.kind == OutcomeKind.COMPLETED

    @property
    def bailed(self) -> bool:
        return self.kind == OutcomeKind.BAIL

    @property
    def crashed(self) -> bool:
        return self.kind == OutcomeKind.CRASH

    def summary(self) -> str:
        if self.kind == OutcomeKind.COMPLETED:
            return "Completed"
        if self.kind == OutcomeKind.BAIL:
            return f"Bail@{self.index}"
        if self.kind == OutcomeKind.CRASH:
            return f"Crash@{self.index}({self.crash_id})"
        return f"Hang@{self.index}"


def coverage_of(outcome: Outcome) -> frozenset[int]:
    return outcome.coverage


def resolve(refs, objects):
    """Positional projection of the flat object list: [objects[k] for k in refs]."""
    for k in refs:
        if not (0 <= k < len(objects)):
            raise BackendContractViolation(
                f"reference {k} out of range (only {len(objects)} objects exist)"
            )
    return [objects[k] for k in refs]


class _Frame:
    """Mutable per-instance execution state consumed by compiled instructions."""

    __slots__ = ("inputs", "outputs", "store", "cov", "params", "cursor", "bindings", "shapes")

    def __init__(self, inputs, n_out, store, cov, params):
        self.inputs = inputs
        self.outputs = [None] * n_out
        self.store = store
        self.cov = cov
        self.params = params
        self.cursor = 0
        self.bindings = {}
        self.shapes = []


def load_block_code(code: str, base_dir: str | None) -> str:
    """Resolve a block's code field, following the ``@file:`` prefix."""
    if code.startswith(FILE_CODE_PREFIX):
        rel = code[len(FILE_CODE_PREFIX) :].strip()
        path = os.path.join(base_dir, rel) if base_dir else rel
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    return code


class VirtualBackend:
    """Executes testcases against the spec's compiled block programs."""

    name = "virtual"

    def __init__(self, spec: Specification, base_dir: str | None = None):
        self.spec = spec
        self.programs: list[CompiledProgram] = [
            compile_program(b, load_block_code(b.code, base_dir)) for b in spec.blocks
        ]

    def exec_block(self, state: RuntimeState, inst: BlockInstance, cov: set,
                   consumed: set | None = None):
        """Run one block instance against ``state``.

        Returns ("ok", shapes) after appending outputs, ("bail",) or
        ("crash", crash_id). ``cov`` accumulates cover events in place.
        """
        program = self.programs[inst.block]
        resolved = resolve(inst.refs, state.objects)
        if consumed is not None:
            # Redundant single-use check; validation already guarantees it.
            for k in inst.refs:
                if k in consumed:
                    raise BackendContractViolation(
                        f"flat output {k} consumed more than once"
                    )
                consumed.add(k)
        inputs = [tok for _, tok in resolved]
        block = program.block
        for j, (tname, _) in enumerate(resolved):
            if tname != block.input_types[j]:
                raise BackendContractViolation(
                    f"block {block.name!r} input {j}: expected "
                    f"{block.input_types[j]!r}, resolved {tname!r}"
                )
        frame = _Frame(inputs, len(block.outputs), state.store, cov, inst.params)
        try:
            for op in program.ops:
                op(frame)
        except BailSignal:
            return ("bail",)
        except CrashSignal as e:
            return ("crash", e.crash_id)
        if any(tok is None for tok in frame.outputs):
            raise BackendContractViolation(
                f"block {block.name!r} completed without emitting every output"
            )
        state.append_outputs(block.output_types, frame.outputs)
        return ("ok", tuple(frame.shapes))

    def execute(self, t: Testcase) -> Outcome:
        """Execute a testcase from the initial empty state.

        Precondition: the testcase is well-formed for this spec (the engine
        validates candidates before execution); reference and type agreement
        then hold by construction and are not re-checked per instance. The
        single-use property is still asserted as a redundant check.
        """
        state = RuntimeState()
        objects = state.objects
        store = state.store
        programs = self.programs
        cov: set[int] = set()
        consumed: set[int] = set()
        shapes = []
        for i, inst in enumerate(t.instances):
            program = programs[inst.block]
            inputs = []
            for k in inst.refs:
                if k in consumed or k >= len(objects):
                    raise BackendContractViolation(
                        f"instance {i}: bad or reused reference {k}"
                    )
                consumed.add(k)
                inputs.append(objects[k][1])
            block = program.block
            frame = _Frame(inputs, len(block.outputs), store, cov, inst.params)
            try:
                for op in program.ops:
                    op(frame)
            except BailSignal:
                return Outcome(OutcomeKind.BAIL, i, None, frozenset(cov),
                               shapes=tuple(shapes))
            except CrashSignal as e:
                return Outcome(OutcomeKind.CRASH, i, e.crash_id, frozenset(cov),
                               shapes=tuple(shapes))
            outputs = frame.outputs
            if None in outputs:
                raise BackendContractViolation(
                    f"block {block.name!r} completed without emitting every output"
                )
            objects.extend(zip(block.output_types, outputs))
            shapes.append(tuple(frame.shapes))
        return Outcome(OutcomeKind.COMPLETED, None, None, frozenset(cov),
                       state=state, shapes=tuple(shapes))


def state_fingerprint(state: RuntimeState):
    """Canonical structure of a runtime state, independent of token identity.

    Tokens are replaced by the flat index of their first occurrence in the
    object list, so pass-through aliasing and typestate contents compare
    structurally.
    """
    first_index: dict[int, int] = {}
    for i, (_, tok) in enumerate(state.objects):
        first_index.setdefault(id(tok), i)

    def value_repr(v):
        if isinstance(v, ObjectToken):
            return ("ptr", first_index[id(v)])
        if isinstance(v, bytes):
            return ("str", v)
        return ("int", v)

    objects = [(t, first_index[id(tok)]) for t, tok in state.objects]
    per_object = {}
    for tok, attrs in state.store.per_object.items():
        if id(tok) not in first_index:
            continue  # token never landed in the object list (discarded emit)
        per_object[first_index[id(tok)]] = {
            k: value_repr(v) for k, v in attrs.items()
        }
    global_map = {k: value_repr(v) for k, v in state.store.global_map.items()}
    return (objects, per_object, global_map)


def outcome_fingerprint(outcome: Outcome):
    """Structural view of an Outcome for oracle comparisons."""
    base = (outcome.kind.value, outcome.index, outcome.crash_id,
            tuple(sorted(outcome.coverage)))
    if outcome.completed:
        return base + (state_fingerprint(outcome.state),)
    return base
