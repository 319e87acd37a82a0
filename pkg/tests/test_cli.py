import csv
import io
import json
from pathlib import Path

import jsonschema
import pytest

from hpmdiag.cli import main
from hpmdiag.patterns import PatternKind
from hpmdiag.session import session_from_dict, write_session
from hpmdiag.synth import SyntheticSpec, generate_session, write_case
from hpmdiag.thresholds import DEFAULTS

ROOT = Path(__file__).resolve().parents[1]
SAMPLES = ROOT / "samples"
SCHEMA = json.loads((ROOT / "docs" / "report.schema.json").read_text())


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def clean_case(tmp_path):
    paths = write_case(generate_session(SyntheticSpec(None, 6, 0.0, 1)), tmp_path, "clean")
    return paths


def test_analyze_table3_text(capsys):
    code, out, _ = run(capsys, "analyze", "--session", SAMPLES / "rabbitct_static.json",
                       "--machine", SAMPLES / "westmere.json", "--useful-work", "fp", "--no-timestamp")
    assert code == 0
    lines = out.splitlines()
    sections = [lines.index(s) for s in ("Session summary", "Derived metrics", "Findings", "Caveats")]
    assert sections == sorted(sections)
    first = lines[sections[2] + 1]
    assert "Load imbalance" in first
    assert "Generated:" not in out


def test_analyze_clean(capsys, clean_case):
    code, out, _ = run(capsys, "analyze", "--session", clean_case["session"], "--machine", clean_case["machine"],
                       "--scaling", clean_case["scaling"], "--useful-work", "fp", "--data-parallel")
    assert code == 0
    assert "  no patterns detected" in out.splitlines()
    assert "Generated:" in out


def test_missing_machine_file(capsys, tmp_path):
    missing = tmp_path / "nope.json"
    code, _, err = run(capsys, "analyze", "--session", SAMPLES / "rabbitct_static.json", "--machine", missing)
    assert code == 1
    assert str(missing) in err


def test_validation_failure_exit_2(capsys, tmp_path):
    doc = json.loads((SAMPLES / "rabbitct_static.json").read_text())
    doc["regions"][0]["wall_time_s"] = 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code, _, err = run(capsys, "analyze", "--session", bad, "--machine", SAMPLES / "westmere.json")
    assert code == 2 and "wall_time_s" in err


def test_parse_failure_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, _, _ = run(capsys, "analyze", "--session", bad, "--machine", SAMPLES / "westmere.json")
    assert code == 1


def test_lenient_flag(capsys, tmp_path):
    doc = json.loads((SAMPLES / "rabbitct_static.json").read_text())
    doc["producer"] = "x"
    p = tmp_path / "extra.json"
    p.write_text(json.dumps(doc))
    args = ["analyze", "--session", p, "--machine", SAMPLES / "westmere.json"]
    assert run(capsys, *args)[0] == 1
    assert run(capsys, *args, "--lenient")[0] == 0


def test_json_report_schema_and_bytes(capsys):
    args = ["analyze", "--session", SAMPLES / "dgemm_ublas.json", "--machine", SAMPLES / "westmere.json",
            "--useful-work", "fp", "--format", "json", "--no-timestamp"]
    code, out, _ = run(capsys, *args)
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    assert doc["findings"][0]["pattern"] == "StridedErraticAccess"
    assert doc["thresholds_used"] == dict(sorted(DEFAULTS.items()))
    assert "generated_at" not in doc
    assert run(capsys, *args)[1] == out
    code, stamped, _ = run(capsys, *args[:-1])
    jsonschema.validate(json.loads(stamped), SCHEMA)
    assert "generated_at" in json.loads(stamped)


@pytest.mark.parametrize("kind", list(PatternKind), ids=lambda k: k.value)
def test_json_schema_on_synthetic(capsys, tmp_path, kind):
    case = generate_session(SyntheticSpec(kind, 4, 0.8, 2))
    paths = write_case(case, tmp_path, "c")
    args = ["analyze", "--session", paths["session"], "--machine", paths["machine"], "--scaling", paths["scaling"],
            "--model-mflops", case.model_mflops, "--useful-work", "fp", "--data-parallel", "--format", "json",
            "--no-timestamp"]
    code, out, _ = run(capsys, *args)
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    assert kind.value in [f["pattern"] for f in doc["findings"] if f["fired"]][:2]


def test_thresholds_flag(capsys, tmp_path):
    p = tmp_path / "th.json"
    p.write_text(json.dumps({"imb_threshold": 0.9}))
    code, out, _ = run(capsys, "analyze", "--session", SAMPLES / "rabbitct_static.json",
                       "--machine", SAMPLES / "westmere.json", "--thresholds", p, "--no-timestamp")
    assert code == 0 and "no patterns detected" in out
    p.write_text(json.dumps({"nonsense": 1}))
    code, _, err = run(capsys, "analyze", "--session", SAMPLES / "rabbitct_static.json",
                       "--machine", SAMPLES / "westmere.json", "--thresholds", p)
    assert code == 2 and "nonsense" in err


def test_baseline_flag(capsys):
    args = ["analyze", "--session", SAMPLES / "update_10GBs.json", "--machine", SAMPLES / "westmere.json",
            "--format", "json", "--no-timestamp"]
    util = json.loads(run(capsys, *args)[1])["metrics"]["mem_bw_util"]
    assert util == pytest.approx(10000 / 20300, abs=5e-4)
    util = json.loads(run(capsys, *args, "--baseline", "stream")[1])["metrics"]["mem_bw_util"]
    assert util == pytest.approx(10000 / 11814, abs=5e-4)


def test_static_cycles_flag(capsys, tmp_path):
    doc = {"session_id": "t", "machine_ref": "w", "thread_count": 1, "core_set": [0],
           "regions": [{"region_name": "r", "wall_time_s": 1.0, "cores": [
               {"core_id": 0, "counts": {"INSTR_RETIRED": 10 ** 10, "CPU_CLK_UNHALTED": 27 * 10 ** 8}}]}]}
    p = tmp_path / "s.json"
    write_session(session_from_dict(doc), p)
    code, out, _ = run(capsys, "analyze", "--session", p, "--machine", SAMPLES / "westmere.json",
                       "--static-cycles", 2.5, "--iterations", 10 ** 9, "--no-timestamp")
    assert code == 0 and "static analysis input" in out


def _timeline_rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_timeline_identity_and_binning(capsys, clean_case, tmp_path):
    code, out, _ = run(capsys, "timeline", "--session", clean_case["session"], "--metric", "DP_MFLOPS")
    assert code == 0
    rows = _timeline_rows(out)
    header, body = rows[0], rows[1:]
    assert header[0] == "t_s" and header[-1] == "DP_MFLOPS_aggregate"
    assert header[1] == "DP_MFLOPS_core0"
    session = json.loads(Path(clean_case["session"]).read_text())
    samples = session["regions"][0]["timeline"]
    assert len(body) == len(samples)
    dt = samples[0]["dt_s"]
    for row, s in zip(body, samples):
        assert float(row[0]) == pytest.approx(s["t_s"])
        c0 = s["per_core_counts"][0]["counts"]
        assert float(row[1]) == pytest.approx(1e-6 * (2 * c0["FP_PACKED_DP"] + c0["FP_SCALAR_DP"]) / dt, rel=1e-12)
    out_path = tmp_path / "t.csv"
    code, _, _ = run(capsys, "timeline", "--session", clean_case["session"], "--metric", "DP_MFLOPS",
                     "--resolution", 2 * dt, "--out", out_path)
    doubled = _timeline_rows(out_path.read_text())[1:]
    assert len(doubled) == len(body) // 2
    # rates over a double-width bin are the mean of the two native rates
    for i, row in enumerate(doubled):
        want = (float(body[2 * i][-1]) + float(body[2 * i + 1][-1])) / 2
        assert float(row[-1]) == pytest.approx(want, rel=1e-12)


def test_timeline_empty_bins(capsys, tmp_path):
    def sample(t):
        return {"t_s": t, "dt_s": 0.1, "per_core_counts": [{"core_id": 0, "counts": {"INSTR_RETIRED": 10,
                                                                                     "CPU_CLK_UNHALTED": 20}}]}
    doc = {"session_id": "g", "machine_ref": "m", "thread_count": 1, "core_set": [0],
           "regions": [{"region_name": "r", "wall_time_s": 0.2, "timeline": [sample(0.1), sample(0.4)],
                        "cores": [{"core_id": 0, "counts": {"INSTR_RETIRED": 20, "CPU_CLK_UNHALTED": 40}}]}]}
    p = tmp_path / "gap.json"
    p.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "timeline", "--session", p, "--metric", "CPI", "--resolution", 0.1)
    rows = _timeline_rows(out)[1:]
    assert [r[1:] for r in rows] == [["2.0", "2.0"], ["", ""], ["", ""], ["2.0", "2.0"]]


def test_timeline_errors(capsys):
    code, _, err = run(capsys, "timeline", "--session", SAMPLES / "rabbitct_static.json", "--metric", "MEM_BW")
    assert code == 2 and "MEM_READ_LINES" in err and "MEM_WRITE_LINES" in err
    code, _, err = run(capsys, "timeline", "--session", SAMPLES / "update_10GBs.json", "--metric", "MEM_BW")
    assert code == 2 and "no timeline" in err
    code, _, err = run(capsys, "timeline", "--session", SAMPLES / "update_10GBs.json", "--metric", "NOPE")
    assert code == 2 and "NOPE" in err


def test_scaling_compare(capsys):
    code, out, _ = run(capsys, "scaling", "--series", SAMPLES / "balance.series.json")
    assert code == 0 and "after: speedup 1.406" in out


def test_scaling_sessions_and_group_by(capsys, tmp_path):
    case = generate_session(SyntheticSpec(PatternKind.MemoryBandwidthSaturation, 6, 0.8, 3))
    paths = write_case(case, tmp_path, "m")
    runs = sorted(tmp_path.glob("m.t*.json"), key=lambda p: int(p.name.split(".t")[1].split(".")[0]))
    code, out, _ = run(capsys, "scaling", *runs)
    assert code == 0 and "shape: saturating" in out
    # compact runs: 1, 2, 4, 6 cores fill socket 0, the 12-core run spans both
    points = []
    for n, runtime in ((1, 60.0), (2, 31.0), (4, 24.0), (6, 23.5), (12, 12.0)):
        doc = {"session_id": f"c{n}", "machine_ref": "m", "thread_count": n, "core_set": list(range(n)),
               "regions": [{"region_name": "r", "wall_time_s": runtime, "cores": [
                   {"core_id": c, "counts": {"INSTR_RETIRED": 1}} for c in range(n)]}]}
        write_session(session_from_dict(doc), tmp_path / f"c{n}.json")
        points.append({"thread_count": n, "runtime_s": runtime, "session": f"c{n}.json"})
    (tmp_path / "compact.json").write_text(json.dumps({"label": "compact", "points": points}))
    code, out, _ = run(capsys, "scaling", "--series", tmp_path / "compact.json")
    assert "shape: irregular" in out
    code, out, _ = run(capsys, "scaling", "--series", tmp_path / "compact.json", "--group-by", "socket",
                       "--machine", paths["machine"])
    assert code == 0 and "restricted to socket group 0" in out and "1 run(s)" in out
    assert "shape: saturating" in out
    code, _, err = run(capsys, "scaling", "--series", tmp_path / "compact.json", "--group-by", "numa")
    assert code == 2 and "--machine" in err


def test_scaling_linear_and_too_few(capsys, tmp_path):
    p = tmp_path / "lin.json"
    p.write_text(json.dumps({"label": "l", "points": [{"thread_count": n, "runtime_s": 60.0 / n} for n in (1, 2, 4)]}))
    code, out, _ = run(capsys, "scaling", "--series", p)
    assert code == 0 and "shape: linear" in out
    code, _, err = run(capsys, "scaling", SAMPLES / "rabbitct_static.json")
    assert code == 2 and "at least 2" in err


def test_groups_listing(capsys, tmp_path):
    code, out, _ = run(capsys, "groups")
    assert code == 0
    names = [l.split(":")[0] for l in out.splitlines() if l and not l.startswith(" ")]
    assert names == ["CACHE", "CPI", "DATA", "FLOPS_DP", "FLOPS_SP", "L3", "MEM"]
    (tmp_path / "BAD.txt").write_text("SHORT b\nEVENTSET\nPMC0 X\nMETRICS\nY (PMC0\n")
    code, out, _ = run(capsys, "groups", "--groups", tmp_path)
    assert code == 0
    diag = out.split("diagnostics:")[1].strip().splitlines()
    assert len(diag) == 1 and "BAD.txt: line 5" in diag[0]
    empty = tmp_path / "empty"
    empty.mkdir()
    code, out2, _ = run(capsys, "groups", "--groups", empty)
    assert out2 == run(capsys, "groups")[1]


def test_synth_command(capsys, tmp_path):
    code, out, _ = run(capsys, "synth", "--pattern", "LoadImbalance", "--intensity", 0.7, "--seed", 42,
                       "--out", tmp_path, "--name", "li")
    assert code == 0
    assert (tmp_path / "li.json").exists() and (tmp_path / "li.label.json").exists()
    code, _, _ = run(capsys, "synth", "--pattern", "BadNumaPlacement", "--cores", 1, "--out", tmp_path)
    assert code == 2
