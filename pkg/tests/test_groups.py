import pytest

from casestudies import rabbit_session
from hpmdiag.errors import GroupSyntaxError, UnknownSlotError
from hpmdiag.markers import UNDEFINED, NotComputableValue
from hpmdiag.perfgroup import (
    builtin_groups,
    evaluate_group,
    format_group,
    load_group_dir,
    parse_group_file,
    parse_expression,
    registry_with,
)
from hpmdiag.perfgroup.expr import Number, Slot, Time
from hpmdiag.session import session_from_dict

MINIMAL = """SHORT Cycles per instruction
EVENTSET
FIXC0 INSTR_RETIRED
FIXC1 CPU_CLK_UNHALTED
METRICS
CPI FIXC1/FIXC0
"""


def region(counts_per_core, wall=1.0):
    doc = {
        "session_id": "t", "machine_ref": "m", "thread_count": len(counts_per_core),
        "core_set": list(range(len(counts_per_core))),
        "regions": [{"region_name": "r", "wall_time_s": wall,
                     "cores": [{"core_id": i, "counts": c} for i, c in enumerate(counts_per_core)]}],
    }
    return session_from_dict(doc).regions[0]


def by_name(results):
    return {r.metric_name: r for r in results}


def test_minimal_group():
    g = parse_group_file(MINIMAL, "CPI")
    assert g.group_name == "CPI"
    assert g.short_description == "Cycles per instruction"
    assert [(e.counter_slot, e.event_name) for e in g.event_set] == [("FIXC0", "INSTR_RETIRED"),
                                                                     ("FIXC1", "CPU_CLK_UNHALTED")]
    assert len(g.metrics) == 1


def test_comments_units_and_blank_lines():
    text = "# header\nSHORT x\n\nEVENTSET\nPMC0 FP_PACKED_DP  # packed\nMETRICS\nRATE [MFlop/s] 1.0E-06*PMC0/time\n"
    g = parse_group_file(text)
    m = g.metrics[0]
    assert m.unit == "MFlop/s"
    assert m.slots == {"PMC0"}


def test_unknown_slot():
    with pytest.raises(UnknownSlotError):
        parse_group_file(MINIMAL.replace("FIXC1/FIXC0", "PMC9/FIXC0"))


@pytest.mark.parametrize("text", [
    "EVENTSET\nPMC0 A\nMETRICS\nX PMC0\n",                         # no SHORT
    "SHORT s\nPMC0 A\nMETRICS\nX PMC0\n",                          # no EVENTSET
    "SHORT s\nEVENTSET\nPMC0 A\nPMC0 B\nMETRICS\nX PMC0\n",        # duplicate slot
    "SHORT s\nEVENTSET\nPMC0 a_lower\nMETRICS\nX PMC0\n",          # bad event name
    "SHORT s\nEVENTSET\nPMC0 A\nMETRICS\n",                        # no metric
    "SHORT s\nEVENTSET\nPMC0 A\nMETRICS\nX PMC0+\n",               # bad expression
])
def test_malformed_groups(text):
    with pytest.raises(GroupSyntaxError):
        parse_group_file(text)


def test_expression_error_reports_file_position():
    with pytest.raises(GroupSyntaxError) as info:
        parse_group_file(MINIMAL.replace("FIXC1/FIXC0", "FIXC1/(FIXC0"))
    assert info.value.line == 6
    assert info.value.column is not None


def test_builtin_registry():
    reg = builtin_groups()
    assert sorted(reg) == ["CACHE", "CPI", "DATA", "FLOPS_DP", "FLOPS_SP", "L3", "MEM"]
    assert reg.get("NOPE") is None
    cpi = reg["CPI"].metric("CPI")
    assert cpi.expression.op == "/"
    assert {reg["CPI"].event_for_slot(s.name) for s in (cpi.expression.left, cpi.expression.right)} == \
        {"CPU_CLK_UNHALTED", "INSTR_RETIRED"}
    # every group carries CPI
    assert all(g.metric("CPI") is not None for g in reg.values())
    mem = reg["MEM"].metric("MEM_BW")
    assert mem.unit == "MBytes/s"
    text = str(parse_expression("1.0E-06*(MBOX0+MBOX1)*64.0/time"))
    assert mem.expression == parse_expression("1.0E-06*(MBOX0+MBOX1)*64.0/time"), text


def test_dp_mflops_literal():
    node = builtin_groups()["FLOPS_DP"].metric("DP_MFLOPS").expression
    assert node.right == Time()
    assert node.left.left == Number(1e-6)
    assert Slot("PMC0") in (node.left.right.left.left,)


def test_round_trip_builtins():
    for name, g in builtin_groups().items():
        again = parse_group_file(format_group(g), name)
        assert again == g


def test_cpi_group_one_core():
    res = by_name(evaluate_group(builtin_groups()["CPI"], region([{"CPU_CLK_UNHALTED": 200, "INSTR_RETIRED": 100}])))
    assert res["CPI"].per_core[0] == 2.0
    assert res["CPI"].aggregate == 2.0


def test_cpi_homogeneous():
    g = builtin_groups()["CPI"]
    a = by_name(evaluate_group(g, region([{"CPU_CLK_UNHALTED": 777, "INSTR_RETIRED": 300}])))["CPI"].aggregate
    for k in (3, 1000, 12345):
        r = region([{"CPU_CLK_UNHALTED": 777 * k, "INSTR_RETIRED": 300 * k}])
        assert by_name(evaluate_group(g, r))["CPI"].aggregate == pytest.approx(a, rel=1e-15)


def test_aggregate_uses_summed_bindings():
    r = region([{"CPU_CLK_UNHALTED": 100, "INSTR_RETIRED": 100}, {"CPU_CLK_UNHALTED": 900, "INSTR_RETIRED": 100}])
    res = by_name(evaluate_group(builtin_groups()["CPI"], r))["CPI"]
    assert res.per_core == {0: 1.0, 1: 9.0}
    assert res.aggregate == 5.0
    r = region([{"CPU_CLK_UNHALTED": 100, "INSTR_RETIRED": 100}, {"CPU_CLK_UNHALTED": 900, "INSTR_RETIRED": 300}])
    res = by_name(evaluate_group(builtin_groups()["CPI"], r))["CPI"]
    mean_of_cores = sum(res.per_core.values()) / 2
    assert res.aggregate == 2.5
    assert res.aggregate != mean_of_cores


def test_flops_sp_on_packed_only_session():
    res = by_name(evaluate_group(builtin_groups()["FLOPS_SP"], rabbit_session().regions[0]))
    assert res["PACKED_MUOPS"].computable
    assert res["PACKED_MUOPS"].aggregate == pytest.approx(4.302e11 * 1e-6 / 61.72)
    total = res["SP_MFLOPS"].aggregate
    assert isinstance(total, NotComputableValue)
    assert str(total) == "not computable: missing FP_SCALAR_SP"


def test_mem_group_without_memory_events():
    res = evaluate_group(builtin_groups()["MEM"], region([{"INSTR_RETIRED": 1, "CPU_CLK_UNHALTED": 1}]))
    mem_only = [r for r in res if r.metric_name != "CPI"]
    assert mem_only and all(not r.computable for r in mem_only)
    assert all(str(r.aggregate).startswith("not computable: missing MEM_") for r in mem_only)


def test_division_by_zero_marker_in_group():
    res = by_name(evaluate_group(builtin_groups()["CPI"], region([{"CPU_CLK_UNHALTED": 5, "INSTR_RETIRED": 0}])))
    assert res["CPI"].aggregate is UNDEFINED


def test_group_dir_overrides_and_diagnostics(tmp_path):
    (tmp_path / "CPI.txt").write_text(MINIMAL.replace("Cycles per instruction", "custom"))
    (tmp_path / "BROKEN.txt").write_text("SHORT b\nEVENTSET\nPMC0 X\nMETRICS\nY PMC0*\n")
    groups, diags = load_group_dir(tmp_path)
    assert list(groups) == ["CPI"]
    assert len(diags) == 1 and diags[0].startswith("BROKEN.txt: line 5")
    reg, diags = registry_with(tmp_path)
    assert reg["CPI"].short_description == "custom"
    assert len(reg) == 7


def test_empty_dir_is_builtin_only(tmp_path):
    reg, diags = registry_with(tmp_path)
    assert sorted(reg) == sorted(builtin_groups()) and diags == []
