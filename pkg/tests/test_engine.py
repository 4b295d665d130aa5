import json
import random

import pytest

from stitchfuzz.engine import (
    Corpus,
    CrashReport,
    EngineConfig,
    dedup,
    migrate_corpus,
    minimize,
    run_campaign,
    run_uniform_baseline,
    schedule,
)
from stitchfuzz.fixtures import (
    PLANTED_BUG_BLOCKS,
    PLANTED_BUG_CRASH_ID,
    planted40_spec,
    px_minimize_spec,
)
from stitchfuzz.spec_model import parse_spec
from stitchfuzz.testcase import (
    BlockInstance,
    ParamKind,
    ParamValue,
    Testcase,
    serialize,
)
from stitchfuzz.virtual_backend import Outcome, OutcomeKind, VirtualBackend


def outcome(kind, index=None, crash_id=None, cov=()):
    return Outcome(kind, index, crash_id, frozenset(cov))


def spec_one_edge():
    doc = {
        "types": [],
        "blocks": [{"name": "only", "code": "cover 1\n", "inputs": [], "outputs": []}],
    }
    return parse_spec(json.dumps(doc))


# --- consider / corpus admission ---


def test_consider_new_edge_inserted(tiny_spec):
    corpus = Corpus()
    t = Testcase((BlockInstance(0, ()),))
    assert corpus.consider(t, outcome(OutcomeKind.COMPLETED, cov={1}), 1)
    assert corpus.entries[0].reason == "new-coverage"


def test_consider_duplicate_not_inserted(tiny_spec):
    corpus = Corpus()
    t = Testcase((BlockInstance(0, ()),))
    corpus.consider(t, outcome(OutcomeKind.COMPLETED, cov={1}), 1)
    assert not corpus.consider(t, outcome(OutcomeKind.COMPLETED, cov={1}), 1)


def test_consider_frontier_progress(tiny_spec):
    corpus = Corpus()
    t = Testcase((BlockInstance(0, ()), BlockInstance(1, (0,))))
    assert corpus.consider(t, outcome(OutcomeKind.BAIL, index=1), 1)
    # same depth again: no
    assert not corpus.consider(t, outcome(OutcomeKind.BAIL, index=1), 1)
    # deeper bail for the same leading block: yes
    t3 = Testcase(
        (BlockInstance(0, ()), BlockInstance(1, (0,)), BlockInstance(2, (1, 2)))
    )
    assert corpus.consider(t3, outcome(OutcomeKind.BAIL, index=3), 1)
    assert corpus.entries[-1].reason == "frontier"


# --- schedule ---


def test_schedule_single_entry(tiny_spec):
    corpus = Corpus()
    t = Testcase((BlockInstance(0, ()),))
    corpus.consider(t, outcome(OutcomeKind.COMPLETED, cov={1}), 1)
    cfg = EngineConfig()
    assert schedule(corpus, random.Random(0), cfg) is corpus.entries[0]


def test_schedule_completed_bonus_statistics(tiny_spec):
    corpus = Corpus()
    a = Testcase((BlockInstance(0, ()),))
    b = Testcase((BlockInstance(0, ()), BlockInstance(1, (0,))))
    corpus.consider(a, outcome(OutcomeKind.COMPLETED, cov={1}), 1)
    corpus.consider(b, outcome(OutcomeKind.BAIL, index=1, cov={2}), 1)
    cfg = EngineConfig(energy_decay=1.0)  # keep weights static for the draw test
    rng = random.Random(123)
    hits = 0
    n = 100_000
    for _ in range(n):
        if schedule(corpus, rng, cfg) is corpus.entries[0]:
            hits += 1
    assert abs(hits / n - 2 / 3) < 0.02


def test_schedule_reproducible(tiny_spec):
    def draw_sequence(seed):
        corpus = Corpus()
        a = Testcase((BlockInstance(0, ()),))
        b = Testcase((BlockInstance(0, ()), BlockInstance(1, (0,))))
        corpus.consider(a, outcome(OutcomeKind.COMPLETED, cov={1}), 1)
        corpus.consider(b, outcome(OutcomeKind.BAIL, index=1, cov={2}), 1)
        rng = random.Random(seed)
        cfg = EngineConfig()
        return [schedule(corpus, rng, cfg).ordinal for _ in range(50)]

    assert draw_sequence(9) == draw_sequence(9)


def test_energy_decays_with_floor(tiny_spec):
    corpus = Corpus()
    corpus.consider(
        Testcase((BlockInstance(0, ()),)), outcome(OutcomeKind.COMPLETED, cov={1}), 1
    )
    cfg = EngineConfig()
    rng = random.Random(0)
    for _ in range(200):
        schedule(corpus, rng, cfg)
    assert corpus.entries[0].energy == pytest.approx(cfg.energy_floor)


# --- dedup ---


def test_dedup():
    reports = {}
    assert not dedup(reports, ("b", "c1"))
    reports[("b", "c1")] = object()
    assert dedup(reports, ("b", "c1"))
    assert not dedup(reports, ("other", "c1"))


# --- minimize ---


def planted_crashing_testcase():
    """A bloated testcase around the planted 6-instance bug."""
    spec = planted40_spec()
    name2idx = {b.name: i for i, b in enumerate(spec.blocks)}
    seq = [
        ("initLib", []),            # removable
        ("createDocument", []),     # 0 -> flat 0 (Doc)
        ("mkBuf1", []),             # removable, flat 1 (Buf)
        ("createElement", [0]),     # flat 2 (Doc), 3 (Elem)
        ("createAttr", [2]),        # flat 4 (Doc), 5 (Attr)
        ("docStat0", [4]),          # removable passthrough, flat 6 (Doc)
        ("setAttrNode", [3, 5]),    # flat 7 (Elem)
        ("createAttrNS", [6]),      # flat 8 (Doc), 9 (Attr)
        ("useBuf1", [1]),           # removable
        ("setAttrNodeNS", [7, 9]),  # crash here
        ("mkTok0", []),             # after crash, removable
    ]
    instances = tuple(
        BlockInstance(name2idx[n], tuple(refs)) for n, refs in seq
    )
    return spec, Testcase(instances)


def test_minimize_planted_to_necessary_set():
    spec, t = planted_crashing_testcase()
    backend = VirtualBackend(spec)
    out = backend.execute(t)
    assert out.kind == OutcomeKind.CRASH and out.crash_id == PLANTED_BUG_CRASH_ID
    report = CrashReport(
        block_name="setAttrNodeNS",
        crash_id=PLANTED_BUG_CRASH_ID,
        original=t,
        outcome_index=out.index,
        discovery_execs=0,
        discovery_wall_secs=None,
    )
    result = minimize(spec, backend, report, budget=20000)
    assert not result.partial
    names = sorted(spec.blocks[i.block].name for i in result.minimized.instances)
    assert names == sorted(PLANTED_BUG_BLOCKS)
    assert len(result.minimized.instances) == 6
    # local minimality: removing any single instance breaks crash or validity
    from stitchfuzz.engine import _remove_instance
    from stitchfuzz.testcase import is_well_formed

    for p in range(len(result.minimized.instances)):
        cand = _remove_instance(spec, result.minimized, p)
        if cand is None or not is_well_formed(spec, cand):
            continue
        out2 = backend.execute(cand)
        assert not (
            out2.kind == OutcomeKind.CRASH
            and out2.crash_id == PLANTED_BUG_CRASH_ID
        )


def test_minimize_already_minimal_unchanged():
    spec, t = planted_crashing_testcase()
    backend = VirtualBackend(spec)
    report = CrashReport(
        block_name="setAttrNodeNS",
        crash_id=PLANTED_BUG_CRASH_ID,
        original=t,
        outcome_index=9,
        discovery_execs=0,
        discovery_wall_secs=None,
    )
    first = minimize(spec, backend, report, budget=20000)
    second = minimize(spec, backend, first, budget=20000)
    assert second.minimized == first.minimized


def test_minimize_preserves_required_param():
    spec = px_minimize_spec()
    backend = VirtualBackend(spec)
    t = Testcase(
        (
            BlockInstance(0, ()),  # mkCtx
            BlockInstance(2, (0,)),  # noise (removable)
            BlockInstance(
                1, (1,), (ParamValue(ParamKind.STR, b"p:x"),)
            ),  # probe crashes only on exactly "p:x"
        )
    )
    out = backend.execute(t)
    assert out.kind == OutcomeKind.CRASH
    report = CrashReport(
        block_name="probe",
        crash_id="qname_crash",
        original=t,
        outcome_index=out.index,
        discovery_execs=0,
        discovery_wall_secs=None,
    )
    result = minimize(spec, backend, report, budget=5000)
    assert len(result.minimized.instances) == 2  # mkCtx + probe
    probe = result.minimized.instances[-1]
    assert probe.params[0].data == b"p:x"


# --- migrate ---


def make_entries(spec, testcases):
    corpus = Corpus()
    for i, t in enumerate(testcases):
        corpus.consider(t, outcome(OutcomeKind.COMPLETED, cov={100 + i}), 1)
    return corpus.entries


def test_migrate_unchanged_spec_keeps_all(tiny_doc):
    old = parse_spec(json.dumps(tiny_doc))
    tiny_doc["revision"] = 2
    new = parse_spec(json.dumps(tiny_doc))
    entries = make_entries(
        old, [Testcase((BlockInstance(0, ()),)), Testcase((BlockInstance(0, ()), BlockInstance(1, (0,))))]
    )
    out = migrate_corpus(entries, old, new)
    assert len(out) == 2
    assert all(e.revision == 2 for e in out)


def test_migrate_drops_edited_block(tiny_doc):
    old = parse_spec(json.dumps(tiny_doc))
    tiny_doc["revision"] = 2
    tiny_doc["blocks"][1]["code"] = "cover 99\nemit 0 passthrough 0\nemit 1 new\n"
    new = parse_spec(json.dumps(tiny_doc))
    entries = make_entries(
        old,
        [
            Testcase((BlockInstance(0, ()),)),
            Testcase((BlockInstance(0, ()), BlockInstance(1, (0,)))),
        ],
    )
    out = migrate_corpus(entries, old, new)
    assert len(out) == 1
    assert out[0].testcase.instances[0].block == 0


def test_migrate_drops_removed_block_and_remaps(tiny_doc):
    old = parse_spec(json.dumps(tiny_doc))
    removed = dict(tiny_doc)
    removed["revision"] = 2
    removed["blocks"] = [tiny_doc["blocks"][1], tiny_doc["blocks"][2]]
    new = parse_spec(json.dumps(removed))
    entries = make_entries(
        old,
        [
            Testcase((BlockInstance(0, ()),)),  # references removed A
            Testcase((BlockInstance(0, ()), BlockInstance(1, (0,)))),
        ],
    )
    out = migrate_corpus(entries, old, new)
    assert out == []  # both referenced A


def test_migrate_requires_newer_revision(tiny_doc):
    spec = parse_spec(json.dumps(tiny_doc))
    with pytest.raises(ValueError):
        migrate_corpus([], spec, spec)


# --- campaigns ---


def test_campaign_single_block_spec():
    spec = spec_one_edge()
    res = run_campaign(
        spec, VirtualBackend(spec), seed=1, budget_execs=50,
        config=EngineConfig(minimize_crashes=False),
    )
    assert res.stats.corpus_size == 1
    assert res.stats.distinct_edges == 1
    assert res.stats.unique_crashes == 0


def test_campaign_budget_zero_keeps_seeds_only(tiny_spec):
    res = run_campaign(
        tiny_spec, VirtualBackend(tiny_spec), seed=1, budget_execs=0,
        config=EngineConfig(minimize_crashes=False),
    )
    # seeds executed; mutation loop never ran
    assert res.stats.executions == len(tiny_spec.blocks)
    assert res.stats.unique_crashes == 0
    assert len(res.corpus) <= len(tiny_spec.blocks)


def test_campaign_reproducible(tmp_path):
    spec = planted40_spec()

    def run(dirname):
        return run_campaign(
            spec,
            VirtualBackend(spec),
            seed=7,
            budget_execs=3000,
            config=EngineConfig(minimize_crashes=True, minimize_budget=2000),
            corpus_dir=str(tmp_path / dirname),
        )

    r1, r2 = run("a"), run("b")
    assert r1.stats_json() == r2.stats_json()
    assert r1.corpus.corpus_hash() == r2.corpus.corpus_hash()
    assert sorted(r1.reports) == sorted(r2.reports)
    for key in r1.reports:
        a, b = r1.reports[key], r2.reports[key]
        assert serialize(a.original) == serialize(b.original)
        assert serialize(a.minimized) == serialize(b.minimized)
        assert a.discovery_execs == b.discovery_execs
    stats_a = (tmp_path / "a" / "stats.json").read_bytes()
    stats_b = (tmp_path / "b" / "stats.json").read_bytes()
    assert stats_a == stats_b


def test_campaign_crash_reports_reexecute(tiny_spec):
    spec = planted40_spec()
    backend = VirtualBackend(spec)
    res = run_campaign(
        spec, backend, seed=3, budget_execs=20000,
        config=EngineConfig(stop_after_crashes=1),
    )
    assert res.reports
    for (block_name, crash_id), report in res.reports.items():
        out = backend.execute(report.original)
        assert out.kind == OutcomeKind.CRASH
        assert spec.blocks[report.original.instances[out.index].block].name == block_name
        assert out.crash_id == crash_id
        out_min = backend.execute(report.minimized)
        assert out_min.kind == OutcomeKind.CRASH
        assert out_min.crash_id == crash_id


def test_corpus_growth_justified():
    spec = planted40_spec()
    res = run_campaign(
        spec, VirtualBackend(spec), seed=5, budget_execs=4000,
        config=EngineConfig(minimize_crashes=False),
    )
    seen = set()
    frontier = {}
    backend = VirtualBackend(spec)
    for entry in res.corpus.entries:
        out = backend.execute(entry.testcase)
        assert out.coverage == entry.coverage  # fingerprint matches re-execution
        fresh = out.coverage - seen
        frontier_ok = (
            out.kind == OutcomeKind.BAIL
            and entry.testcase.instances
            and out.index > frontier.get(entry.testcase.instances[0].block, -1)
        )
        assert fresh or frontier_ok, entry.reason
        assert entry.new_edges == fresh
        seen |= out.coverage
        if frontier_ok:
            frontier[entry.testcase.instances[0].block] = out.index


def test_corpus_dir_layout(tmp_path):
    spec = planted40_spec()
    res = run_campaign(
        spec,
        VirtualBackend(spec),
        seed=3,
        budget_execs=20000,
        config=EngineConfig(stop_after_crashes=1, minimize_budget=5000),
        corpus_dir=str(tmp_path / "c"),
    )
    root = tmp_path / "c"
    stc = list(root.glob("*.stc"))
    assert len(stc) == len(res.corpus)
    assert (root / "stats.json").exists()
    assert (root / "spec.snapshot.json").exists()
    crash_dirs = list((root / "crashes").iterdir())
    assert crash_dirs
    for d in crash_dirs:
        assert (d / "original.stc").exists()
        assert (d / "minimized.stc").exists()
        report = json.loads((d / "report.json").read_text())
        assert report["discovery_execs"] > 0
        assert report["discovery_wall_secs"] is None  # deterministic mode
    stats = json.loads((root / "stats.json").read_text())
    assert stats["wall_time_secs"] is None
    assert stats["corpus_hash"] == res.corpus.corpus_hash()


def test_baseline_counts_samples_and_finds_trivial_crash():
    doc = {
        "types": [],
        "blocks": [
            {"name": "boom", "code": "crash_if 1 == 1 :b\n", "inputs": [], "outputs": []},
            {"name": "ok", "code": "cover 1\n", "inputs": [], "outputs": []},
        ],
    }
    spec = parse_spec(json.dumps(doc))
    res = run_uniform_baseline(spec, VirtualBackend(spec), seed=0, budget_execs=100)
    assert res.reports  # boom is trivially reachable
    assert res.stats.executions <= 100


def test_multi_worker_campaign_completes():
    spec = planted40_spec()
    res = run_campaign(
        spec, VirtualBackend(spec), seed=1, budget_execs=500,
        config=EngineConfig(workers=4, minimize_crashes=False),
    )
    assert res.stats.executions >= 500
    assert res.stats.wall_time_secs is not None  # not deterministic mode


def test_resume_migrates_on_spec_reload(tmp_path):
    import json as _json

    from stitchfuzz.engine import migrate_corpus_dir
    from stitchfuzz.fixtures import planted40_doc

    corpus_dir = str(tmp_path / "c")
    old_doc = planted40_doc()
    old_spec = parse_spec(_json.dumps(old_doc))
    run_campaign(
        old_spec, VirtualBackend(old_spec), seed=5, budget_execs=2000,
        config=EngineConfig(minimize_crashes=False), corpus_dir=corpus_dir,
    )
    before = load_entries_with_names(corpus_dir, old_spec)
    assert any("setAttrNode" in names for names in before.values())

    new_doc = planted40_doc()
    new_doc["revision"] = 2
    for block in new_doc["blocks"]:
        if block["name"] == "setAttrNode":
            block["code"] += "cover 9999\n"
    new_spec = parse_spec(_json.dumps(new_doc))

    survivors = migrate_corpus_dir(corpus_dir, new_spec)
    for t in survivors:
        assert all(
            new_spec.blocks[i.block].name != "setAttrNode" for i in t.instances
        )
    # a resumed campaign seeds from the migrated corpus and keeps running
    res = run_campaign(
        new_spec, VirtualBackend(new_spec), seed=6, budget_execs=500,
        config=EngineConfig(minimize_crashes=False), corpus_dir=corpus_dir,
    )
    assert res.stats.spec_revision == 2


def load_entries_with_names(corpus_dir, spec):
    from pathlib import Path

    from stitchfuzz.testcase import deserialize

    out = {}
    for p in Path(corpus_dir).glob("*.stc"):
        t = deserialize(p.read_bytes(), spec)
        out[p.name] = {spec.blocks[i.block].name for i in t.instances}
    return out
