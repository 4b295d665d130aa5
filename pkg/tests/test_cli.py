import json

import pytest

from stitchfuzz.cli import EXIT_OK, EXIT_USER, main
from stitchfuzz.fixtures import misuse_doc, planted40_doc
from stitchfuzz.testcase import BlockInstance, Testcase, serialize


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(planted40_doc()))
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_validate_ok(capsys, spec_file):
    code, out, err = run_cli(capsys, "validate", "--spec", spec_file)
    assert code == EXIT_OK
    assert "40 blocks" in out


def test_validate_duplicate_block_names_offender(capsys, tmp_path):
    doc = {
        "types": [],
        "blocks": [
            {"name": "parse", "code": "bail\n", "inputs": [], "outputs": []},
            {"name": "parse", "code": "bail\n", "inputs": [], "outputs": []},
        ],
    }
    path = tmp_path / "dup.json"
    path.write_text(json.dumps(doc))
    code, out, err = run_cli(capsys, "validate", "--spec", str(path))
    assert code == EXIT_USER
    assert "parse" in err


def test_validate_unconstructable_warns_but_ok(capsys, tmp_path):
    doc = {
        "types": ["X"],
        "blocks": [
            {
                "name": "needX",
                "code": "cover 1\n",
                "inputs": [{"name": "x", "type": "X"}],
                "outputs": [],
            }
        ],
    }
    path = tmp_path / "w.json"
    path.write_text(json.dumps(doc))
    code, out, err = run_cli(capsys, "validate", "--spec", str(path))
    assert code == EXIT_OK
    assert "warning" in err


def test_missing_spec_path_exits_1(capsys, tmp_path):
    code, out, err = run_cli(
        capsys, "fuzz", "--spec", str(tmp_path / "nope.json"),
        "--budget-execs", "10", "--corpus", str(tmp_path / "c"),
    )
    assert code == EXIT_USER


def test_fuzz_writes_corpus_and_stats(capsys, spec_file, tmp_path):
    corpus = str(tmp_path / "corpus")
    code, out, err = run_cli(
        capsys,
        "fuzz", "--spec", spec_file, "--seed", "1",
        "--budget-execs", "30000", "--corpus", corpus,
        "--stop-after-crashes", "1",
    )
    assert code == EXIT_OK
    assert "unique_crashes=1" in out
    assert "ns_name_clash" in out

    code, out, err = run_cli(capsys, "stats", "--corpus", corpus)
    assert code == EXIT_OK
    assert "corpus_hash" in out


def test_fuzz_requires_budget(capsys, spec_file, tmp_path):
    code, out, err = run_cli(
        capsys, "fuzz", "--spec", spec_file, "--corpus", str(tmp_path / "c")
    )
    assert code == EXIT_USER


def test_exec_empty_testcase(capsys, spec_file, tmp_path):
    tc = tmp_path / "empty.stc"
    tc.write_bytes(serialize(Testcase()))
    code, out, err = run_cli(
        capsys, "exec", "--spec", spec_file, "--testcase", str(tc)
    )
    assert code == EXIT_OK
    assert out.strip() == "Completed, 0 edges"


def test_exec_ill_formed_reports_violations(capsys, spec_file, tmp_path):
    tc = tmp_path / "bad.stc"
    tc.write_bytes(serialize(Testcase((BlockInstance(1, (9,)),))))
    code, out, err = run_cli(
        capsys, "exec", "--spec", spec_file, "--testcase", str(tc)
    )
    assert code == EXIT_USER
    assert "BACKWARD" in err


def test_exec_crash_outcome(capsys, spec_file, tmp_path):
    from stitchfuzz.fixtures import PLANTED_BUG_CRASH_ID
    from stitchfuzz.spec_model import parse_spec

    spec = parse_spec(json.dumps(planted40_doc()))
    name2idx = {b.name: i for i, b in enumerate(spec.blocks)}
    seq = [
        ("createDocument", []),
        ("createElement", [0]),
        ("createAttr", [1]),
        ("setAttrNode", [2, 4]),
        ("createAttrNS", [3]),
        ("setAttrNodeNS", [5, 7]),
    ]
    t = Testcase(
        tuple(BlockInstance(name2idx[n], tuple(r)) for n, r in seq)
    )
    tc = tmp_path / "crash.stc"
    tc.write_bytes(serialize(t))
    code, out, err = run_cli(
        capsys, "exec", "--spec", spec_file, "--testcase", str(tc)
    )
    assert code == EXIT_OK
    assert f"Crash@5({PLANTED_BUG_CRASH_ID})" in out


def test_minimize_cli(capsys, spec_file, tmp_path):
    # reuse the crash chain with junk appended
    from stitchfuzz.spec_model import parse_spec

    spec = parse_spec(json.dumps(planted40_doc()))
    name2idx = {b.name: i for i, b in enumerate(spec.blocks)}
    seq = [
        ("initLib", []),
        ("createDocument", []),
        ("createElement", [0]),
        ("createAttr", [1]),
        ("setAttrNode", [2, 4]),
        ("createAttrNS", [3]),
        ("setAttrNodeNS", [5, 7]),
    ]
    t = Testcase(tuple(BlockInstance(name2idx[n], tuple(r)) for n, r in seq))
    tc = tmp_path / "crash.stc"
    tc.write_bytes(serialize(t))
    out_path = tmp_path / "min.stc"
    code, out, err = run_cli(
        capsys,
        "minimize", "--spec", spec_file, "--testcase", str(tc),
        "--out", str(out_path),
    )
    assert code == EXIT_OK
    assert "7 -> 6 instances" in out
    assert out_path.exists()


def test_repro_virtual_is_native_only(capsys, spec_file, tmp_path):
    tc = tmp_path / "t.stc"
    tc.write_bytes(serialize(Testcase((BlockInstance(0, ()),))))
    code, out, err = run_cli(
        capsys,
        "repro", "--spec", spec_file, "--testcase", str(tc),
        "--out", str(tmp_path / "r.cpp"),
    )
    assert code == EXIT_USER
    assert "NativeOnly" in err


def test_env_var_defaults(capsys, spec_file, monkeypatch):
    monkeypatch.setenv("STITCH_SPEC", spec_file)
    code, out, err = run_cli(capsys, "validate")
    assert code == EXIT_OK


def test_baseline_mode(capsys, tmp_path):
    doc = misuse_doc(guarded=True)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    code, out, err = run_cli(
        capsys,
        "fuzz", "--spec", str(path), "--budget-execs", "500",
        "--corpus", str(tmp_path / "c"), "--baseline",
    )
    assert code == EXIT_OK
    assert "executions=500" in out
