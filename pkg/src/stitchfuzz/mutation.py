"""Structural and parameter mutation operators.

Every operator guarantees well-formed output; whether the result executes
without bailing is the search's problem, not the mutator's. Structural
operators never touch the parameter records of retained instances, and
parameter mutation never changes structure. All operators are deterministic
functions of their inputs and the context's seeded rng.

Producer synthesis (used by regenerate, crossover and frontier extension)
draws uniformly among blocks that can produce a needed type from
constructable inputs, reuses unconsumed existing outputs with probability
``reuse_p``, and is bounded by a recursion depth cap and a total instance
cap.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import NoConstructableSeed
from .spec_model import Specification, constructability_report
from .testcase import BlockInstance, ParamKind, ParamValue, Testcase
from .virtual_backend import Outcome, OutcomeKind

DEPTH_CAP = 8
INSTANCE_CAP = 32
REUSE_P = 0.5
DEFAULT_P_HINT = 0.1
MAX_VAR_PARAM_LEN = 4096

ParamShape = tuple[tuple[ParamKind, int], ...]


class _CantProduce(Exception):
    pass


class SpecIndex:
    """Producer tables derived from a specification, shared by all operators.

    ``block_depth[b]`` is the height of the shortest producer chain that can
    feed block b from nothing (1 for zero-input blocks); ``type_depth[t]``
    the cheapest way to construct t. Synthesis uses these to pick producers
    that still fit the remaining recursion budget, so a constructable type is
    always constructable within the depth cap.
    """

    def __init__(self, spec: Specification):
        self.spec = spec
        self.constructable = {
            t for t, ok in constructability_report(spec).items() if ok
        }
        self.producers: dict[str, list[int]] = {}
        for idx, block in enumerate(spec.blocks):
            if all(t in self.constructable for t in block.input_types):
                for t in set(block.output_types):
                    self.producers.setdefault(t, []).append(idx)
        self.seedable = [
            idx
            for idx, block in enumerate(spec.blocks)
            if all(t in self.constructable for t in block.input_types)
        ]
        self.type_depth: dict[str, int] = {}
        self.block_depth: dict[int, int] = {}
        changed = True
        while changed:
            changed = False
            for idx, block in enumerate(spec.blocks):
                if not all(t in self.constructable for t in block.input_types):
                    continue
                if any(t not in self.type_depth for t in block.input_types):
                    continue
                depth = 1 + max(
                    (self.type_depth[t] for t in block.input_types), default=0
                )
                if depth < self.block_depth.get(idx, depth + 1):
                    self.block_depth[idx] = depth
                    changed = True
                    for t in set(block.output_types):
                        if depth < self.type_depth.get(t, depth + 1):
                            self.type_depth[t] = depth


@dataclass
class MutationContext:
    """Inputs shared by the operators: rng, corpus view, hints, learned shapes."""

    rng: random.Random
    corpus_view: list[Testcase] = field(default_factory=list)
    hints: dict[str, tuple[bytes, ...]] = field(default_factory=dict)
    shapes: dict[int, ParamShape] = field(default_factory=dict)
    p_hint: float = DEFAULT_P_HINT
    index: SpecIndex | None = None

    def spec_index(self, spec: Specification) -> SpecIndex:
        if self.index is None or self.index.spec is not spec:
            self.index = SpecIndex(spec)
        return self.index


@dataclass(frozen=True)
class MutationResult:
    testcase: Testcase
    op: str
    noop: bool = False
    provenance: tuple[int, ...] = ()


def random_params(spec: Specification, block_idx: int, ctx: MutationContext) -> tuple:
    """Draw a fresh parameter record for a block whose shape is known.

    Unknown-shape blocks get an empty record; execution zero-fills and the
    engine learns the true arity from the observed request shape.
    """
    shape = ctx.shapes.get(block_idx)
    if not shape:
        return ()
    rng = ctx.rng
    hint_class = spec.blocks[block_idx].hint_class
    pool = ctx.hints.get(hint_class, ()) if hint_class else ()
    values = []
    for kind, width in shape:
        if kind == ParamKind.FIXED:
            values.append(ParamValue(kind, rng.randbytes(width)))
        elif pool and rng.random() < ctx.p_hint:
            values.append(ParamValue(kind, rng.choice(pool)))
        else:
            values.append(ParamValue(kind, rng.randbytes(rng.randint(0, 8))))
    return tuple(values)


class _Builder:
    """Accumulates instances while tracking flat output types and consumption.

    The instance cap bounds the total size of the testcase under
    construction, keeping corpus entries from snowballing across repeated
    crossover/extension applications.
    """

    def __init__(self, spec: Specification, ctx: MutationContext):
        self.spec = spec
        self.ctx = ctx
        self.index = ctx.spec_index(spec)
        self.instances: list[BlockInstance] = []
        self.out_types: list[str] = []
        self.consumed: set[int] = set()
        self.reserved = 0  # instances the caller will append after synthesis

    @classmethod
    def from_testcase(cls, spec, ctx, t: Testcase) -> "_Builder":
        b = cls(spec, ctx)
        b.instances = list(t.instances)
        for inst in t.instances:
            b.out_types.extend(spec.blocks[inst.block].output_types)
            b.consumed.update(inst.refs)
        return b

    def unconsumed_of(self, type_name: str, limit: int | None = None) -> list[int]:
        hi = len(self.out_types) if limit is None else limit
        return [
            k
            for k in range(hi)
            if k not in self.consumed and self.out_types[k] == type_name
        ]

    def alloc(self, type_name: str, depth: int = 0) -> int:
        """Return a flat index carrying ``type_name``, synthesizing producers
        as needed. The caller consumes the returned index."""
        rng = self.ctx.rng
        candidates = self.unconsumed_of(type_name)
        budget = DEPTH_CAP - depth
        feasible = [
            b
            for b in self.index.producers.get(type_name, ())
            if self.index.block_depth.get(b, DEPTH_CAP + 1) <= budget
        ]
        can_synth = bool(feasible) and (
            len(self.instances) + self.reserved < INSTANCE_CAP
        )
        if candidates and (not can_synth or rng.random() < REUSE_P):
            return rng.choice(candidates)
        if not can_synth:
            if candidates:
                return rng.choice(candidates)
            raise _CantProduce(type_name)
        block_idx = rng.choice(feasible)
        block = self.spec.blocks[block_idx]
        refs = []
        for t in block.input_types:
            k = self.alloc(t, depth + 1)
            refs.append(k)
            self.consumed.add(k)
        base = len(self.out_types)
        self.instances.append(
            BlockInstance(
                block=block_idx,
                refs=tuple(refs),
                params=random_params(self.spec, block_idx, self.ctx),
            )
        )
        self.out_types.extend(block.output_types)
        slots = [s for s, ot in enumerate(block.output_types) if ot == type_name]
        return base + rng.choice(slots)

    def append_instance(self, block_idx: int, refs: tuple[int, ...], params: tuple):
        self.consumed.update(refs)
        self.instances.append(
            BlockInstance(block=block_idx, refs=refs, params=params)
        )
        self.out_types.extend(self.spec.blocks[block_idx].output_types)

    def testcase(self) -> Testcase:
        return Testcase(instances=tuple(self.instances))


def regenerate(
    spec: Specification, ctx: MutationContext, seed_block: int | None = None
) -> MutationResult:
    """Fresh testcase around a random (or given) seed block, producers prepended."""
    index = ctx.spec_index(spec)
    if not spec.blocks:
        raise NoConstructableSeed("specification has no blocks")
    attempts = max(16, 2 * len(spec.blocks))
    for _ in range(attempts):
        idx = seed_block if seed_block is not None else ctx.rng.randrange(len(spec.blocks))
        block = spec.blocks[idx]
        if not all(t in index.constructable for t in block.input_types):
            if seed_block is not None:
                raise NoConstructableSeed(f"block {block.name!r}")
            continue
        builder = _Builder(spec, ctx)
        builder.reserved = 1
        try:
            refs = []
            for t in block.input_types:
                k = builder.alloc(t)
                refs.append(k)
                builder.consumed.add(k)
        except _CantProduce:
            continue  # instance-cap bad luck; retry the build
        builder.append_instance(idx, tuple(refs), random_params(spec, idx, ctx))
        return MutationResult(builder.testcase(), "regenerate",
                              provenance=(len(builder.instances) - 1,))
    raise NoConstructableSeed(
        "no constructable seed block found"
        if seed_block is None
        else f"block {spec.blocks[seed_block].name!r} build failed repeatedly"
    )


def _dependency_closure(spec: Specification, t: Testcase, pos: int) -> list[int]:
    """Positions of ``pos`` and every instance feeding it, ascending."""
    starts = []
    n = 0
    for inst in t.instances:
        starts.append(n)
        n += len(spec.blocks[inst.block].outputs)

    def owner(flat: int) -> int:
        lo = 0
        for i in range(len(starts) - 1, -1, -1):
            if starts[i] <= flat:
                return i
        return lo

    needed = {pos}
    work = [pos]
    while work:
        p = work.pop()
        for k in t.instances[p].refs:
            producer = owner(k)
            if producer not in needed:
                needed.add(producer)
                work.append(producer)
    return sorted(needed)


def crossover(spec: Specification, ctx: MutationContext, t: Testcase) -> MutationResult:
    """Stitch at least one donor instance into ``t``; NoOp when impossible."""
    if not ctx.corpus_view:
        raise ValueError("crossover requires a non-empty corpus view")
    rng = ctx.rng
    for _ in range(8):
        donor = rng.choice(ctx.corpus_view)
        if not donor.instances:
            continue
        d = rng.randrange(len(donor.instances))
        if rng.random() < 0.5:
            result = _crossover_closure(spec, ctx, t, donor, d)
            if result is not None:
                return result
        result = _crossover_relink(spec, ctx, t, donor, d)
        if result is not None:
            return result
    return MutationResult(t, "crossover", noop=True)


def _crossover_closure(spec, ctx, t, donor: Testcase, d: int) -> MutationResult | None:
    """Copy the donor instance plus its dependency closure onto the host end."""
    closure = _dependency_closure(spec, donor, d)
    if len(t.instances) + len(closure) > INSTANCE_CAP:
        return None
    donor_starts = []
    n = 0
    for inst in donor.instances:
        donor_starts.append(n)
        n += len(spec.blocks[inst.block].outputs)

    host_flat = sum(len(spec.blocks[i.block].outputs) for i in t.instances)
    flat_map: dict[int, int] = {}
    new_instances = list(t.instances)
    provenance = []
    cursor = host_flat
    for p in closure:
        inst = donor.instances[p]
        for s in range(len(spec.blocks[inst.block].outputs)):
            flat_map[donor_starts[p] + s] = cursor + s
        new_refs = tuple(flat_map[k] for k in inst.refs)
        provenance.append(len(new_instances))
        new_instances.append(
            BlockInstance(block=inst.block, refs=new_refs, params=inst.params)
        )
        cursor += len(spec.blocks[inst.block].outputs)
    return MutationResult(
        Testcase(tuple(new_instances)), "crossover", provenance=tuple(provenance)
    )


def _crossover_relink(spec, ctx, t, donor: Testcase, d: int) -> MutationResult | None:
    """Re-link one donor instance to type-compatible host outputs."""
    inst = donor.instances[d]
    builder = _Builder.from_testcase(spec, ctx, t)
    builder.reserved = 1
    try:
        refs = []
        for tname in spec.blocks[inst.block].input_types:
            k = builder.alloc(tname)
            refs.append(k)
            builder.consumed.add(k)
    except _CantProduce:
        return None
    builder.append_instance(inst.block, tuple(refs), inst.params)
    return MutationResult(
        builder.testcase(), "crossover", provenance=(len(builder.instances) - 1,)
    )


def _insert_instances(
    spec: Specification, t: Testcase, pos: int, new_instances: list[BlockInstance]
) -> Testcase:
    """Insert instances at position ``pos``, shifting later flat refs."""
    n_pos = sum(
        len(spec.blocks[i.block].outputs) for i in t.instances[:pos]
    )
    shift = sum(len(spec.blocks[i.block].outputs) for i in new_instances)
    adjusted = []
    for inst in t.instances[pos:]:
        adjusted.append(
            BlockInstance(
                block=inst.block,
                refs=tuple(k + shift if k >= n_pos else k for k in inst.refs),
                params=inst.params,
            )
        )
    return Testcase(tuple(list(t.instances[:pos]) + new_instances + adjusted))


def frontier_extend(
    spec: Specification, ctx: MutationContext, t: Testcase, outcome: Outcome | None
) -> MutationResult:
    """Attach a new instance around the frontier (or a random) instance."""
    if not t.instances:
        raise ValueError("frontier_extend requires a non-empty testcase")
    rng = ctx.rng
    if outcome is not None and outcome.kind == OutcomeKind.BAIL and outcome.index >= 1:
        target = outcome.index - 1
    else:
        target = rng.randrange(len(t.instances))

    modes = ["consume", "produce"]
    rng.shuffle(modes)
    for mode in modes:
        result = (_extend_consume if mode == "consume" else _extend_produce)(
            spec, ctx, t, target
        )
        if result is not None:
            return result
    return MutationResult(t, "frontier_extend", noop=True)


def _extend_consume(spec, ctx, t, target: int) -> MutationResult | None:
    """New instance consuming one of the target's unconsumed outputs."""
    rng = ctx.rng
    starts = []
    n = 0
    for inst in t.instances:
        starts.append(n)
        n += len(spec.blocks[inst.block].outputs)
    target_block = spec.blocks[t.instances[target].block]
    base = starts[target]
    consumed = {k for inst in t.instances for k in inst.refs}
    free = [
        (base + s, ot)
        for s, ot in enumerate(target_block.output_types)
        if base + s not in consumed
    ]
    if not free:
        return None
    flat_idx, tname = rng.choice(free)
    consumers = [
        i for i, b in enumerate(spec.blocks) if tname in b.input_types
    ]
    if not consumers:
        return None
    block_idx = rng.choice(consumers)
    block = spec.blocks[block_idx]
    slots = [j for j, it in enumerate(block.input_types) if it == tname]
    chosen_slot = rng.choice(slots)
    builder = _Builder.from_testcase(spec, ctx, t)
    builder.reserved = 1
    builder.consumed.add(flat_idx)
    try:
        refs = []
        for j, it in enumerate(block.input_types):
            if j == chosen_slot:
                refs.append(flat_idx)
            else:
                k = builder.alloc(it)
                refs.append(k)
                builder.consumed.add(k)
    except _CantProduce:
        return None
    builder.append_instance(block_idx, tuple(refs), random_params(spec, block_idx, ctx))
    return MutationResult(
        builder.testcase(), "frontier_extend",
        provenance=(len(builder.instances) - 1,),
    )


def _extend_produce(spec, ctx, t, target: int) -> MutationResult | None:
    """Rewire one target input to a freshly synthesized producer chain."""
    rng = ctx.rng
    inst = t.instances[target]
    if not inst.refs:
        return None
    j = rng.randrange(len(inst.refs))
    tname = spec.blocks[inst.block].input_types[j]

    # Synthesize against the prefix before the target; anything consumed
    # anywhere in the testcase stays off-limits for reuse.
    builder = _Builder(spec, ctx)
    builder.reserved = len(t.instances)
    prefix_flat = 0
    for p in t.instances[:target]:
        builder.out_types.extend(spec.blocks[p.block].output_types)
        prefix_flat += len(spec.blocks[p.block].outputs)
    builder.consumed = {k for i2 in t.instances for k in i2.refs}
    try:
        new_idx = builder.alloc(tname)
    except _CantProduce:
        return None
    if not builder.instances:
        # alloc reused an existing output instead of synthesizing; rewiring
        # to it is still a structural change when it differs from refs[j].
        if new_idx == inst.refs[j]:
            return None
        new_t = list(t.instances)
        refs = list(inst.refs)
        refs[j] = new_idx
        new_t[target] = BlockInstance(inst.block, tuple(refs), inst.params)
        return MutationResult(Testcase(tuple(new_t)), "frontier_extend",
                              provenance=())
    inserted = builder.instances
    t2 = _insert_instances(spec, t, target, inserted)
    shift = sum(len(spec.blocks[i.block].outputs) for i in inserted)
    # new_idx was computed against the prefix plus inserted outputs laid out
    # from prefix_flat; in t2 the inserted outputs occupy the same range.
    new_target = target + len(inserted)
    inst2 = t2.instances[new_target]
    refs = list(inst2.refs)
    refs[j] = new_idx
    new_instances = list(t2.instances)
    new_instances[new_target] = BlockInstance(inst2.block, tuple(refs), inst2.params)
    return MutationResult(
        Testcase(tuple(new_instances)), "frontier_extend",
        provenance=tuple(range(target, target + len(inserted))),
    )


def frontier_trim_repair(
    spec: Specification, ctx: MutationContext, t: Testcase, outcome: Outcome | None
) -> MutationResult:
    """Trim the testcase to the prefix before the failing (or random) instance."""
    if not t.instances:
        raise ValueError("frontier_trim_repair requires a non-empty testcase")
    if outcome is not None and outcome.kind == OutcomeKind.BAIL:
        i = outcome.index
    else:
        i = ctx.rng.randrange(len(t.instances))
    return MutationResult(Testcase(t.instances[:i]), "frontier_trim_repair")


# --- Parameter mutation ---


def _bitflip(rng, data: bytes) -> bytes:
    pos = rng.randrange(len(data))
    return data[:pos] + bytes([data[pos] ^ (1 << rng.randrange(8))]) + data[pos + 1 :]


def _byteset(rng, data: bytes) -> bytes:
    pos = rng.randrange(len(data))
    return data[:pos] + bytes([rng.randrange(256)]) + data[pos + 1 :]


def _delete(rng, data: bytes) -> bytes:
    pos = rng.randrange(len(data))
    return data[:pos] + data[pos + 1 :]


def _insert(rng, data: bytes) -> bytes:
    pos = rng.randint(0, len(data))
    return data[:pos] + bytes([rng.randrange(256)]) + data[pos:]


def _dup_block(rng, data: bytes) -> bytes:
    if not data or len(data) >= MAX_VAR_PARAM_LEN:
        return _insert(rng, data)
    lo = rng.randrange(len(data))
    hi = rng.randint(lo + 1, len(data))
    return data[:hi] + data[lo:hi] + data[hi:]


def _splice(rng, data: bytes, donor: bytes) -> bytes:
    if not donor:
        return data
    take = donor[: rng.randint(1, len(donor))]
    if not data:
        return take
    pos = rng.randrange(len(data))
    return data[:pos] + take + data[pos + len(take) :]


def mutate_params(
    spec: Specification, ctx: MutationContext, t: Testcase
) -> MutationResult:
    """Mutate parameter bytes only; instance structure and refs are untouched.

    Fixed values mutate in place (width preserved); Str/File values may also
    grow, shrink, splice from a same-kind param, or be replaced by a hint
    from the block's hint class with probability ``p_hint``.
    """
    rng = ctx.rng
    sites = [
        (i, p)
        for i, inst in enumerate(t.instances)
        for p in range(len(inst.params))
    ]
    if not sites:
        return MutationResult(t, "mutate_params", noop=True)

    records = [list(inst.params) for inst in t.instances]
    same_kind = lambda kind: [
        v for rec in records for v in rec if v.kind == kind and v.data
    ]
    n_mut = 1 + (rng.random() < 0.4) + (rng.random() < 0.15)
    for _ in range(n_mut):
        i, p = rng.choice(sites)
        value = records[i][p]
        data = value.data
        if value.kind == ParamKind.FIXED:
            if not data:
                continue
            choice = rng.randrange(3)
            if choice == 0:
                data = _bitflip(rng, data)
            elif choice == 1:
                data = _byteset(rng, data)
            else:
                donors = same_kind(ParamKind.FIXED)
                donor = rng.choice(donors) if donors else value
                data = (_splice(rng, data, donor.data)[: len(data)]).ljust(
                    len(data), b"\x00"
                )
        else:
            hint_class = spec.blocks[t.instances[i].block].hint_class
            pool = ctx.hints.get(hint_class, ()) if hint_class else ()
            if pool and rng.random() < ctx.p_hint:
                data = rng.choice(pool)
            else:
                choice = rng.randrange(6)
                if choice == 0 and data:
                    data = _bitflip(rng, data)
                elif choice == 1 and data:
                    data = _byteset(rng, data)
                elif choice == 2 and data:
                    data = _delete(rng, data)
                elif choice == 3:
                    data = _insert(rng, data)
                elif choice == 4:
                    data = _dup_block(rng, data)
                else:
                    donors = same_kind(value.kind)
                    donor = rng.choice(donors) if donors else value
                    data = _splice(rng, data, donor.data)
            data = data[:MAX_VAR_PARAM_LEN]
        records[i][p] = ParamValue(value.kind, data)

    new_instances = tuple(
        BlockInstance(inst.block, inst.refs, tuple(records[i]))
        for i, inst in enumerate(t.instances)
    )
    return MutationResult(Testcase(new_instances), "mutate_params")


OPERATORS = {
    "regenerate": regenerate,
    "crossover": crossover,
    "frontier_extend": frontier_extend,
    "frontier_trim_repair": frontier_trim_repair,
    "mutate_params": mutate_params,
}
