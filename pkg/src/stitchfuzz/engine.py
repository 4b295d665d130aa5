"""The coverage-guided fuzzing loop and its corpus machinery.

A campaign seeds the corpus with one regenerated testcase per block, then
repeatedly schedules an entry, applies a mutation operator (70% parameter /
30% structural by default), executes the result, and admits it when it covers
a new edge or pushes the bail frontier deeper for its leading block. Crashes
are deduplicated by (block name, crash id), minimized to local minimality,
and exported alongside the corpus. Single-worker campaigns with an execution
budget are deterministic given the seed.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import struct
import threading
import time
from dataclasses import dataclass, field, replace

from .errors import BackendContractViolation, NoConstructableSeed
from .mutation import (
    MutationContext,
    MutationResult,
    crossover,
    frontier_extend,
    frontier_trim_repair,
    mutate_params,
    regenerate,
)
from .spec_model import Specification, serialize_spec
from .testcase import (
    BlockInstance,
    ParamKind,
    ParamValue,
    Testcase,
    deserialize,
    is_well_formed,
    serialize,
    validate,
)
from .virtual_backend import Outcome, OutcomeKind

STATS_SCHEMA_VERSION = 1
SPEC_SNAPSHOT_NAME = "spec.snapshot.json"

STRUCTURAL_OPS = ("regenerate", "crossover", "frontier_extend", "frontier_trim_repair")


@dataclass
class EngineConfig:
    p_param: float = 0.7
    p_hint: float = 0.1
    completed_bonus: float = 2.0
    energy_decay: float = 0.95
    energy_floor: float = 0.05
    recency_exponent: float = 0.0
    stats_interval_secs: float = 5.0
    stop_after_crashes: int | None = None
    minimize_crashes: bool = True
    minimize_budget: int = 20000
    workers: int = 1
    noop_retries: int = 4
    deterministic_stats: bool | None = None  # default: workers == 1 and exec budget


@dataclass
class CorpusEntry:
    testcase: Testcase
    outcome: Outcome  # summary: state stripped
    fingerprint: str
    coverage: frozenset[int]
    energy: float
    revision: int
    ordinal: int
    reason: str = ""  # admission audit: "new-coverage" and/or "frontier"
    new_edges: frozenset[int] = frozenset()  # edges unseen at insertion time


@dataclass
class CrashReport:
    block_name: str
    crash_id: str
    original: Testcase
    outcome_index: int
    discovery_execs: int
    discovery_wall_secs: float | None
    minimized: Testcase | None = None
    partial: bool = False

    @property
    def dedup_key(self) -> tuple[str, str]:
        return (self.block_name, self.crash_id)

    def key_str(self) -> str:
        safe = lambda s: "".join(c if c.isalnum() or c in "._-" else "_" for c in s)
        return f"{safe(self.block_name)}__{safe(self.crash_id)}"


def coverage_fingerprint(coverage) -> str:
    packed = b"".join(struct.pack("<I", e) for e in sorted(coverage))
    return hashlib.sha256(packed).hexdigest()[:16]


class Corpus:
    """Entries plus the admission bookkeeping (seen edges, bail frontiers)."""

    def __init__(self):
        self.entries: list[CorpusEntry] = []
        self.testcases: list[Testcase] = []  # live view for mutation contexts
        self.seen_edges: set[int] = set()
        self.frontier: dict[int, int] = {}  # leading block -> deepest bail index
        self._next_ordinal = 0
        # Scheduling weight cache, maintained by schedule(); invalidated by
        # length mismatch after inserts.
        self._weights: list[float] = []
        self._weight_total = 0.0
        self._weight_draws = 0

    def __len__(self):
        return len(self.entries)

    def consider(self, testcase: Testcase, outcome: Outcome, revision: int) -> bool:
        """Admit iff the outcome covers a new edge or deepens the bail
        frontier for the testcase's leading block. Crash reporting is the
        caller's job; crashing testcases still qualify via coverage."""
        fresh = outcome.coverage - self.seen_edges
        frontier_progress = False
        if outcome.kind == OutcomeKind.BAIL and testcase.instances:
            lead = testcase.instances[0].block
            if outcome.index > self.frontier.get(lead, -1):
                frontier_progress = True
        self.seen_edges |= outcome.coverage
        if not (fresh or frontier_progress):
            return False
        if frontier_progress:
            self.frontier[testcase.instances[0].block] = outcome.index
        reason = "+".join(
            r for r, hit in (("new-coverage", fresh), ("frontier", frontier_progress))
            if hit
        )
        summary = Outcome(outcome.kind, outcome.index, outcome.crash_id,
                          outcome.coverage)
        self.entries.append(
            CorpusEntry(
                testcase=testcase,
                outcome=summary,
                fingerprint=coverage_fingerprint(outcome.coverage),
                coverage=outcome.coverage,
                energy=1.0,
                revision=revision,
                ordinal=self._next_ordinal,
                reason=reason,
                new_edges=frozenset(fresh),
            )
        )
        self.testcases.append(testcase)
        self._next_ordinal += 1
        return True

    def corpus_hash(self) -> str:
        blobs = sorted(serialize(e.testcase) for e in self.entries)
        h = hashlib.sha256()
        for b in blobs:
            h.update(struct.pack("<I", len(b)))
            h.update(b)
        return h.hexdigest()


def entry_weight(entry: CorpusEntry, config: EngineConfig) -> float:
    """Scheduling weight: energy x non-bailing bonus x recency factor."""
    w = max(entry.energy, config.energy_floor)
    if entry.outcome.kind != OutcomeKind.BAIL:
        w *= config.completed_bonus
    w *= (1.0 + entry.ordinal) ** config.recency_exponent
    return w


def schedule(corpus: Corpus, rng: random.Random, config: EngineConfig) -> CorpusEntry:
    """Weighted draw over the corpus; decays the chosen entry's energy.

    Weights are cached on the corpus and updated incrementally (new entries
    extend the cache; the drawn entry's weight is recomputed after decay).
    The running total is refreshed periodically to bound float drift.
    """
    entries = corpus.entries
    if not entries:
        raise ValueError("cannot schedule from an empty corpus")
    weights = corpus._weights
    while len(weights) < len(entries):
        w = entry_weight(entries[len(weights)], config)
        weights.append(w)
        corpus._weight_total += w
    corpus._weight_draws += 1
    if corpus._weight_draws % 4096 == 0:
        corpus._weight_total = sum(weights)

    r = rng.random() * corpus._weight_total
    acc = 0.0
    idx = len(entries) - 1
    for i, w in enumerate(weights):
        acc += w
        if acc >= r:
            idx = i
            break
    entry = entries[idx]
    entry.energy = max(entry.energy * config.energy_decay, config.energy_floor)
    new_w = entry_weight(entry, config)
    corpus._weight_total += new_w - weights[idx]
    weights[idx] = new_w
    return entry


def dedup(reports: dict[tuple[str, str], CrashReport], key: tuple[str, str]) -> bool:
    """True iff this dedup key was already reported."""
    return key in reports


def conform_params(
    spec: Specification, t: Testcase, outcome: Outcome
) -> Testcase:
    """Normalize parameter records to the observed request shapes.

    Applies only to instances that completed; missing values become the same
    zero defaults execution used and unread trailing values are dropped, so
    the normalized testcase replays identically while exposing the true
    parameter arity to later mutation.
    """
    shapes = outcome.shapes
    if not shapes:
        return t
    instances = None
    for i, shape in enumerate(shapes):
        inst = t.instances[i]
        params = inst.params
        conforming = len(params) == len(shape) and all(
            p.kind == kind and (kind != ParamKind.FIXED or len(p.data) == width)
            for p, (kind, width) in zip(params, shape)
        )
        if conforming:
            continue
        new_params = []
        for j, (kind, width) in enumerate(shape):
            if j < len(params) and params[j].kind == kind:
                data = params[j].data
                if kind == ParamKind.FIXED and len(data) != width:
                    data = data[:width].ljust(width, b"\x00")
                new_params.append(ParamValue(kind, data))
            else:
                default = b"\x00" * width if kind == ParamKind.FIXED else b""
                new_params.append(ParamValue(kind, default))
        if instances is None:
            instances = list(t.instances)
        instances[i] = BlockInstance(inst.block, inst.refs, tuple(new_params))
    return Testcase(tuple(instances)) if instances is not None else t


# --- Crash minimization ---


def _remove_instance(spec: Specification, t: Testcase, pos: int) -> Testcase | None:
    """Remove one instance, shifting flat refs; None if something referenced it."""
    start = sum(len(spec.blocks[i.block].outputs) for i in t.instances[:pos])
    width = len(spec.blocks[t.instances[pos].block].outputs)
    out = []
    for i, inst in enumerate(t.instances):
        if i == pos:
            continue
        refs = []
        for k in inst.refs:
            if start <= k < start + width:
                return None  # dangling reference
            refs.append(k - width if k >= start + width else k)
        out.append(BlockInstance(inst.block, tuple(refs), inst.params))
    return Testcase(tuple(out))


def _remove_instance_rewire(spec: Specification, t: Testcase, pos: int) -> Testcase | None:
    """Remove one instance, remapping refs to its outputs onto the inputs it
    consumed (first type-compatible fit). This bypasses pass-through hops;
    whether the result still crashes is the caller's re-execution to decide.
    Returns None when no compatible remap exists."""
    start = sum(len(spec.blocks[i.block].outputs) for i in t.instances[:pos])
    removed = t.instances[pos]
    out_types = spec.blocks[removed.block].output_types
    width = len(out_types)
    flat_types: list[str] = []
    for inst in t.instances:
        flat_types.extend(spec.blocks[inst.block].output_types)

    freed = list(removed.refs)  # consumed by the removed instance; now free
    remap: dict[int, int] = {}
    for s in range(width):
        k = start + s
        if any(k in inst.refs for i, inst in enumerate(t.instances) if i != pos):
            target = None
            for fi, fk in enumerate(freed):
                if fk is not None and flat_types[fk] == out_types[s]:
                    target = fk
                    freed[fi] = None
                    break
            if target is None:
                return None
            remap[k] = target

    out = []
    for i, inst in enumerate(t.instances):
        if i == pos:
            continue
        refs = []
        for k in inst.refs:
            k = remap.get(k, k)
            refs.append(k - width if k >= start + width else k)
        out.append(BlockInstance(inst.block, tuple(refs), inst.params))
    return Testcase(tuple(out))


class ExecBudget:
    """A spendable execution allowance; ``used`` is readable afterwards."""

    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    def spend(self) -> bool:
        if self.used >= self.limit:
            return False
        self.used += 1
        return True


class _OutOfBudget(Exception):
    pass


def minimize(spec: Specification, backend, report: CrashReport,
             budget: int | ExecBudget = 20000) -> CrashReport:
    """Shrink the crashing testcase to a locally minimal reproducer.

    Fixed point over three passes: trim instances after the crash index,
    attempt removal of every other instance (re-validating), and shrink
    parameter bytes. A reduction is kept only if re-execution crashes with
    the same dedup key. On budget exhaustion the best-so-far is returned
    flagged partial.
    """
    key = report.dedup_key
    budget_state = budget if isinstance(budget, ExecBudget) else ExecBudget(budget)

    def crashes(t: Testcase):
        """Outcome if t crashes with the report's key, else None."""
        if not validate(spec, t).ok:
            return None
        if not budget_state.spend():
            raise _OutOfBudget()
        out = backend.execute(t)
        if out.crashed and (spec.blocks[t.instances[out.index].block].name,
                            out.crash_id) == key:
            return out
        return None

    best = report.minimized or report.original
    partial = False
    try:
        baseline = crashes(best)
        if baseline is None:
            raise BackendContractViolation(
                f"crash report {key} does not reproduce"
            )
        changed = True
        while changed:
            changed = False
            # (1) trim everything after the crash index
            out = crashes(best)
            if out is None:
                raise BackendContractViolation(f"crash {key} became unstable")
            if out.index + 1 < len(best.instances):
                cand = Testcase(best.instances[: out.index + 1])
                if crashes(cand) is not None:
                    best, changed = cand, True
            # (2) try removing each instance, last to first; when plain
            # removal dangles, retry with refs rewired onto the removed
            # instance's freed inputs (bypasses pass-through hops)
            p = len(best.instances) - 1
            while p >= 0:
                cand = _remove_instance(spec, best, p)
                if cand is None:
                    cand = _remove_instance_rewire(spec, best, p)
                if cand is not None and crashes(cand) is not None:
                    best, changed = cand, True
                p -= 1
            # (3) shrink parameter bytes
            for i in range(len(best.instances)):
                for j in range(len(best.instances[i].params)):
                    value = best.instances[i].params[j].data
                    for cand_data in _shrink_candidates(
                        best.instances[i].params[j]
                    ):
                        if cand_data == value:
                            continue
                        cand = _with_param(best, i, j, cand_data)
                        if crashes(cand) is not None:
                            best, changed = cand, True
                            value = cand_data
    except _OutOfBudget:
        partial = True

    return replace(report, minimized=best, partial=partial)


def _shrink_candidates(value: ParamValue):
    data = value.data
    if value.kind == ParamKind.FIXED:
        if data.strip(b"\x00"):
            yield b"\x00" * len(data)
            for i in range(len(data)):
                if data[i]:
                    yield data[:i] + b"\x00" + data[i + 1 :]
    else:
        if data:
            yield b""
            n = len(data) // 2
            while n > 0:
                yield data[:n]
                n //= 2


def _with_param(t: Testcase, i: int, j: int, data: bytes) -> Testcase:
    inst = t.instances[i]
    params = list(inst.params)
    params[j] = ParamValue(params[j].kind, data)
    instances = list(t.instances)
    instances[i] = BlockInstance(inst.block, inst.refs, tuple(params))
    return Testcase(tuple(instances))


# --- Corpus migration ---


def migrate_corpus(
    entries: list[CorpusEntry], old_spec: Specification, new_spec: Specification
) -> list[CorpusEntry]:
    """Drop entries referencing removed or edited blocks; remap the rest.

    Block identity across revisions is the block name; the comparison is on
    the spec's raw code field. Survivors are re-validated against the new
    spec and dropped on failure.
    """
    if new_spec.revision <= old_spec.revision:
        raise ValueError(
            f"new revision {new_spec.revision} must exceed {old_spec.revision}"
        )
    new_by_name = {b.name: i for i, b in enumerate(new_spec.blocks)}
    remap: dict[int, int | None] = {}
    for i, old_block in enumerate(old_spec.blocks):
        j = new_by_name.get(old_block.name)
        if j is None or new_spec.blocks[j].code != old_block.code:
            remap[i] = None
        else:
            remap[i] = j

    survivors = []
    for entry in entries:
        mapped = []
        ok = True
        for inst in entry.testcase.instances:
            j = remap.get(inst.block)
            if j is None:
                ok = False
                break
            mapped.append(BlockInstance(j, inst.refs, inst.params))
        if not ok:
            continue
        t2 = Testcase(tuple(mapped))
        try:
            if not validate(new_spec, t2).ok:
                continue
        except Exception:
            continue
        survivors.append(replace(entry, testcase=t2, revision=new_spec.revision))
    return survivors


# --- Campaign stats ---


@dataclass
class CampaignStats:
    executions: int = 0
    bails: int = 0
    crashes_found: int = 0
    unique_crashes: int = 0
    corpus_size: int = 0
    distinct_edges: int = 0
    wall_time_secs: float | None = None
    execs_per_sec: float | None = None
    seed: int = 0
    spec_revision: int = 1
    corpus_hash: str | None = None

    @property
    def bail_rate(self) -> float:
        return self.bails / self.executions if self.executions else 0.0

    def to_dict(self) -> dict:
        return {
            "schema_version": STATS_SCHEMA_VERSION,
            "seed": self.seed,
            "spec_revision": self.spec_revision,
            "executions": self.executions,
            "execs_per_sec": self.execs_per_sec,
            "corpus_size": self.corpus_size,
            "distinct_edges": self.distinct_edges,
            "bail_rate": round(self.bail_rate, 6),
            "crashes_found": self.crashes_found,
            "unique_crashes": self.unique_crashes,
            "wall_time_secs": self.wall_time_secs,
            "corpus_hash": self.corpus_hash,
        }


@dataclass
class CampaignResult:
    corpus: Corpus
    reports: dict[tuple[str, str], CrashReport]
    stats: CampaignStats

    def stats_json(self) -> str:
        return json.dumps(self.stats.to_dict(), indent=2, sort_keys=True) + "\n"


# --- Corpus directory I/O ---


def write_corpus_dir(path: str, spec: Specification, result: CampaignResult) -> None:
    os.makedirs(path, exist_ok=True)
    for stale in os.listdir(path):  # entries are rewritten wholesale
        if stale.endswith(".stc"):
            os.unlink(os.path.join(path, stale))
    seen_names: set[str] = set()
    for entry in sorted(result.corpus.entries, key=lambda e: e.ordinal):
        name = entry.fingerprint
        k = 0
        while f"{name}.stc" in seen_names:
            k += 1
            name = f"{entry.fingerprint}-{k}"
        seen_names.add(f"{name}.stc")
        with open(os.path.join(path, f"{name}.stc"), "wb") as fh:
            fh.write(serialize(entry.testcase))
    crashes_dir = os.path.join(path, "crashes")
    for key in sorted(result.reports):
        report = result.reports[key]
        d = os.path.join(crashes_dir, report.key_str())
        os.makedirs(d, exist_ok=True)
        with open(os.path.join(d, "original.stc"), "wb") as fh:
            fh.write(serialize(report.original))
        if report.minimized is not None:
            with open(os.path.join(d, "minimized.stc"), "wb") as fh:
                fh.write(serialize(report.minimized))
        with open(os.path.join(d, "report.json"), "w") as fh:
            json.dump(
                {
                    "block": report.block_name,
                    "crash_id": report.crash_id,
                    "outcome_index": report.outcome_index,
                    "discovery_execs": report.discovery_execs,
                    "discovery_wall_secs": report.discovery_wall_secs,
                    "original_instances": len(report.original.instances),
                    "minimized_instances": (
                        len(report.minimized.instances) if report.minimized else None
                    ),
                    "minimization_partial": report.partial,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")
    with open(os.path.join(path, SPEC_SNAPSHOT_NAME), "w") as fh:
        fh.write(serialize_spec(spec))
    with open(os.path.join(path, "stats.json"), "w") as fh:
        fh.write(result.stats_json())


def load_corpus_entries(path: str, spec: Specification) -> list[Testcase]:
    out = []
    for name in sorted(os.listdir(path)):
        if name.endswith(".stc"):
            with open(os.path.join(path, name), "rb") as fh:
                out.append(deserialize(fh.read(), spec))
    return out


def migrate_corpus_dir(path: str, new_spec: Specification) -> list[Testcase]:
    """Spec-reload migration over a persisted corpus directory.

    Loads the stored spec snapshot and corpus, drops testcases referencing
    removed or edited blocks (remapping indices by block name), re-validates
    the rest against the new spec, and returns the surviving testcases. With
    an unchanged revision the corpus is reloaded as-is (warm start).
    """
    from .spec_model import parse_spec

    snapshot_path = os.path.join(path, SPEC_SNAPSHOT_NAME)
    if not os.path.exists(snapshot_path):
        return []
    with open(snapshot_path, "rb") as fh:
        old_spec = parse_spec(fh.read())
    testcases = load_corpus_entries(path, old_spec)
    if new_spec.revision <= old_spec.revision:
        return [t for t in testcases if is_well_formed(new_spec, t)]
    entries = [
        CorpusEntry(
            testcase=t, outcome=Outcome(OutcomeKind.COMPLETED),
            fingerprint="", coverage=frozenset(), energy=1.0,
            revision=old_spec.revision, ordinal=i,
        )
        for i, t in enumerate(testcases)
    ]
    return [e.testcase for e in migrate_corpus(entries, old_spec, new_spec)]


# --- The campaign ---


class Campaign:
    def __init__(
        self,
        spec: Specification,
        backend,
        *,
        seed: int,
        budget_execs: int | None = None,
        budget_secs: float | None = None,
        config: EngineConfig | None = None,
        corpus_dir: str | None = None,
    ):
        if budget_execs is None and budget_secs is None:
            raise ValueError("a budget (executions or seconds) is required")
        self.spec = spec
        self.backend = backend
        self.seed = seed
        self.budget_execs = budget_execs
        self.budget_secs = budget_secs
        self.config = config or EngineConfig()
        self.corpus_dir = corpus_dir
        self.corpus = Corpus()
        self.reports: dict[tuple[str, str], CrashReport] = {}
        self.stats = CampaignStats(seed=seed, spec_revision=spec.revision)
        self.shapes: dict[int, tuple] = {}
        self._lock = threading.Lock()
        self._stop = False
        self._start_time = None
        self._last_stats_write = 0.0
        self.progress_cb = None

    # -- helpers --

    def _deterministic(self) -> bool:
        if self.config.deterministic_stats is not None:
            return self.config.deterministic_stats
        return self.config.workers == 1 and self.budget_execs is not None

    def _budget_left(self) -> bool:
        if self._stop:
            return False
        if self.budget_execs is not None and self.stats.executions >= self.budget_execs:
            return False
        if self.budget_secs is not None and (
            time.monotonic() - self._start_time
        ) >= self.budget_secs:
            return False
        return True

    def _execute(self, t: Testcase) -> Outcome:
        outcome = self.backend.execute(t)
        self.stats.executions += 1
        if outcome.kind == OutcomeKind.BAIL:
            self.stats.bails += 1
        for i, shape in enumerate(outcome.shapes):
            self.shapes.setdefault(t.instances[i].block, shape)
        return outcome

    def _note_crash(self, t: Testcase, outcome: Outcome) -> None:
        self.stats.crashes_found += 1
        block_name = self.spec.blocks[t.instances[outcome.index].block].name
        key = (block_name, outcome.crash_id)
        if dedup(self.reports, key):
            return
        wall = None if self._deterministic() else time.monotonic() - self._start_time
        self.reports[key] = CrashReport(
            block_name=block_name,
            crash_id=outcome.crash_id,
            original=t,
            outcome_index=outcome.index,
            discovery_execs=self.stats.executions,
            discovery_wall_secs=wall,
        )
        self.stats.unique_crashes = len(self.reports)
        if (
            self.config.stop_after_crashes is not None
            and len(self.reports) >= self.config.stop_after_crashes
        ):
            self._stop = True

    def _process(self, t: Testcase, outcome: Outcome) -> None:
        normalized = conform_params(self.spec, t, outcome)
        if outcome.crashed:
            self._note_crash(normalized, outcome)
        self.corpus.consider(normalized, outcome, self.spec.revision)
        self.stats.corpus_size = len(self.corpus)
        self.stats.distinct_edges = len(self.corpus.seen_edges)

    def _seed_corpus(self, ctx: MutationContext) -> None:
        """One regenerate per block, so every block is reachable as a donor.

        When the corpus directory holds a previous run, its testcases are
        migrated across the spec reload (entries referencing edited or
        removed blocks dropped) and re-executed as additional seeds.
        """
        for idx in range(len(self.spec.blocks)):
            try:
                result = regenerate(self.spec, ctx, seed_block=idx)
            except NoConstructableSeed:
                continue
            outcome = self._execute(result.testcase)
            self._process(result.testcase, outcome)
        if self.corpus_dir and os.path.exists(
            os.path.join(self.corpus_dir, SPEC_SNAPSHOT_NAME)
        ):
            for t in migrate_corpus_dir(self.corpus_dir, self.spec):
                outcome = self._execute(t)
                self._process(t, outcome)

    def _pick_operator(self, rng: random.Random, entry: CorpusEntry) -> str:
        if rng.random() < self.config.p_param and any(
            inst.params for inst in entry.testcase.instances
        ):
            return "mutate_params"
        return STRUCTURAL_OPS[rng.randrange(len(STRUCTURAL_OPS))]

    def _apply_operator(
        self, op: str, ctx: MutationContext, entry: CorpusEntry
    ) -> MutationResult:
        t = entry.testcase
        if op == "mutate_params":
            return mutate_params(self.spec, ctx, t)
        if op == "regenerate":
            return regenerate(self.spec, ctx)
        if op == "crossover":
            return crossover(self.spec, ctx, t)
        if op == "frontier_extend":
            if not t.instances:
                return MutationResult(t, op, noop=True)
            return frontier_extend(self.spec, ctx, t, entry.outcome)
        if op == "frontier_trim_repair":
            if not t.instances:
                return MutationResult(t, op, noop=True)
            return frontier_trim_repair(self.spec, ctx, t, entry.outcome)
        raise ValueError(f"unknown operator {op!r}")

    def _one_iteration(self, rng: random.Random, ctx: MutationContext) -> None:
        entry = schedule(self.corpus, rng, self.config)
        ctx.corpus_view = self.corpus.testcases
        result = None
        op = self._pick_operator(rng, entry)
        for _ in range(self.config.noop_retries):
            try:
                result = self._apply_operator(op, ctx, entry)
            except NoConstructableSeed:
                result = MutationResult(entry.testcase, op, noop=True)
            if not result.noop:
                break
            op = self._pick_operator(rng, entry)
        if result is None or result.noop:
            return
        candidate = result.testcase
        if not is_well_formed(self.spec, candidate):
            report = validate(self.spec, candidate)
            raise BackendContractViolation(
                f"mutation operator {result.op!r} produced an ill-formed testcase: "
                f"{report.violations[:3]}"
            )
        outcome = self._execute(candidate)
        self._process(candidate, outcome)

    def _write_stats_snapshot(self) -> None:
        if not self.corpus_dir:
            return
        now = time.monotonic()
        if now - self._last_stats_write < self.config.stats_interval_secs:
            return
        self._last_stats_write = now
        self._fill_timing(final=False)
        os.makedirs(self.corpus_dir, exist_ok=True)
        with open(os.path.join(self.corpus_dir, "stats.json"), "w") as fh:
            fh.write(json.dumps(self.stats.to_dict(), indent=2, sort_keys=True) + "\n")

    def _fill_timing(self, final: bool) -> None:
        elapsed = time.monotonic() - self._start_time
        if final and self._deterministic():
            self.stats.wall_time_secs = None
            self.stats.execs_per_sec = None
        else:
            self.stats.wall_time_secs = round(elapsed, 3)
            self.stats.execs_per_sec = (
                round(self.stats.executions / elapsed, 3) if elapsed > 0 else None
            )

    def run(self) -> CampaignResult:
        self._start_time = time.monotonic()
        rng = random.Random(self.seed)
        ctx = MutationContext(
            rng=rng, hints=self.spec.hints, shapes=self.shapes,
            p_hint=self.config.p_hint,
        )
        self._seed_corpus(ctx)

        if self.config.workers <= 1:
            while self._budget_left() and self.corpus.entries:
                self._one_iteration(rng, ctx)
                self._write_stats_snapshot()
                if self.progress_cb is not None:
                    self.progress_cb(self.stats)
        else:
            self._run_workers()

        if self.config.minimize_crashes:
            for key in sorted(self.reports):
                spent = ExecBudget(self.config.minimize_budget)
                self.reports[key] = minimize(
                    self.spec, self.backend, self.reports[key], budget=spent
                )
                self.stats.executions += spent.used

        self.stats.corpus_size = len(self.corpus)
        self.stats.distinct_edges = len(self.corpus.seen_edges)
        self.stats.unique_crashes = len(self.reports)
        self.stats.corpus_hash = self.corpus.corpus_hash()
        self._fill_timing(final=True)
        result = CampaignResult(self.corpus, self.reports, self.stats)
        if self.corpus_dir:
            write_corpus_dir(self.corpus_dir, self.spec, result)
        return result

    def _run_workers(self) -> None:
        """N-worker mode: each worker owns an rng; corpus and crash ledger
        sit behind a lock with insertion linearized. Execution itself runs
        unlocked (pure for the virtual backend, a subprocess for the native
        one). Not deterministic."""

        def worker(worker_seed: int) -> None:
            wrng = random.Random(worker_seed)
            wctx = MutationContext(
                rng=wrng, hints=self.spec.hints, shapes=self.shapes,
                p_hint=self.config.p_hint,
            )
            while True:
                with self._lock:
                    if not (self._budget_left() and self.corpus.entries):
                        return
                    entry = schedule(self.corpus, wrng, self.config)
                    wctx.corpus_view = list(self.corpus.testcases)
                    result = None
                    op = self._pick_operator(wrng, entry)
                    for _ in range(self.config.noop_retries):
                        try:
                            result = self._apply_operator(op, wctx, entry)
                        except NoConstructableSeed:
                            result = MutationResult(entry.testcase, op, noop=True)
                        if not result.noop:
                            break
                        op = self._pick_operator(wrng, entry)
                    if result is not None and not result.noop:
                        # reserve the budget unit while holding the lock
                        self.stats.executions += 1
                if result is None or result.noop:
                    continue
                candidate = result.testcase
                if not is_well_formed(self.spec, candidate):
                    raise BackendContractViolation(
                        f"mutation operator {result.op!r} produced an "
                        f"ill-formed testcase"
                    )
                outcome = self.backend.execute(candidate)
                with self._lock:
                    if outcome.kind == OutcomeKind.BAIL:
                        self.stats.bails += 1
                    for i, shape in enumerate(outcome.shapes):
                        self.shapes.setdefault(candidate.instances[i].block, shape)
                    self._process(candidate, outcome)
                    self._write_stats_snapshot()

        threads = [
            threading.Thread(target=worker, args=(self.seed + 1 + w,))
            for w in range(self.config.workers)
        ]
        for th in threads:
            th.start()
        for th in threads:
            th.join()


def run_campaign(
    spec: Specification,
    backend,
    *,
    seed: int,
    budget_execs: int | None = None,
    budget_secs: float | None = None,
    config: EngineConfig | None = None,
    corpus_dir: str | None = None,
) -> CampaignResult:
    campaign = Campaign(
        spec,
        backend,
        seed=seed,
        budget_execs=budget_execs,
        budget_secs=budget_secs,
        config=config,
        corpus_dir=corpus_dir,
    )
    return campaign.run()


# --- Uniform-sampling baseline (test-only mode) ---


def run_uniform_baseline(
    spec: Specification,
    backend,
    *,
    seed: int,
    budget_execs: int,
    sequence_len: int = 6,
) -> CampaignResult:
    """Naive baseline: uniformly sample fixed-length block sequences.

    Every sample draws ``sequence_len`` blocks uniformly with replacement and
    costs one budget unit, matching the naive 1-in-N^L sampling arithmetic.
    Tuples that cannot be wired into a well-formed testcase (some input has
    no unconsumed earlier output of its type) are vacuous non-crashing
    samples; wirable tuples get uniformly chosen wiring and are executed.
    No corpus, no coverage feedback, no hints.

    ``stats.executions`` counts samples; ``stats.bails`` counts executed
    testcases that bailed.
    """
    rng = random.Random(seed)
    rnd = rng.random
    stats = CampaignStats(seed=seed, spec_revision=spec.revision)
    reports: dict[tuple[str, str], CrashReport] = {}
    shapes: dict[int, tuple] = {}
    start = time.monotonic()

    # Intern type names; per-block input/output type ids for the fast
    # count-vector feasibility check (choice of wiring never affects
    # feasibility, only which outputs get consumed).
    type_ids = {t.name: i for i, t in enumerate(spec.types)}
    n_types = len(spec.types)
    block_in = [[type_ids[t] for t in b.input_types] for b in spec.blocks]
    block_out = [[type_ids[t] for t in b.output_types] for b in spec.blocks]
    n_blocks = len(spec.blocks)

    def feasible(tuple_idx: list[int]) -> bool:
        avail = [0] * n_types
        for idx in tuple_idx:
            for t in block_in[idx]:
                if avail[t] == 0:
                    return False
                avail[t] -= 1
            for t in block_out[idx]:
                avail[t] += 1
        return True

    def build(tuple_idx: list[int]) -> Testcase:
        out_types: list[int] = []
        consumed: set[int] = set()
        instances = []
        for idx in tuple_idx:
            refs = []
            for tname in block_in[idx]:
                candidates = [
                    k
                    for k, ot in enumerate(out_types)
                    if ot == tname and k not in consumed
                ]
                k = rng.choice(candidates)
                consumed.add(k)
                refs.append(k)
            params = []
            for kind, width in shapes.get(idx, ()):
                if kind == ParamKind.FIXED:
                    params.append(ParamValue(kind, rng.randbytes(width)))
                else:
                    params.append(ParamValue(kind, rng.randbytes(rng.randint(0, 8))))
            instances.append(BlockInstance(idx, tuple(refs), tuple(params)))
            out_types.extend(block_out[idx])
        return Testcase(tuple(instances))

    samples = 0
    while samples < budget_execs and not reports:
        samples += 1
        tuple_idx = [int(rnd() * n_blocks) for _ in range(sequence_len)]
        if not feasible(tuple_idx):
            continue
        t = build(tuple_idx)
        outcome = backend.execute(t)
        if outcome.kind == OutcomeKind.BAIL:
            stats.bails += 1
        for i, shape in enumerate(outcome.shapes):
            shapes.setdefault(t.instances[i].block, shape)
        if outcome.crashed:
            stats.crashes_found += 1
            block_name = spec.blocks[t.instances[outcome.index].block].name
            reports[(block_name, outcome.crash_id)] = CrashReport(
                block_name=block_name,
                crash_id=outcome.crash_id,
                original=t,
                outcome_index=outcome.index,
                discovery_execs=samples,
                discovery_wall_secs=round(time.monotonic() - start, 3),
            )
    stats.executions = samples
    stats.unique_crashes = len(reports)
    return CampaignResult(Corpus(), reports, stats)
