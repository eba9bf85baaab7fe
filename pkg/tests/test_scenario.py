"""Scenario grammar: parsing, diagnostics, and round-tripping."""

import pytest

from fairshare.errors import ScenarioParseError
from fairshare.scenario import parse_scenario, render_scenario

GOOD = """\
# demo
total_shares 100
group FIN shares=60
group WEB shares=10
group OPS shares=30
user fAgg group=FIN shares=60 procs=1 think=0 demand=1 active=yes
user wAgg group=WEB shares=10 procs=1 think=0 demand=1 active=yes
user opsA group=OPS shares=6 procs=1 think=0 demand=1 active=yes
user opsB group=OPS shares=5 procs=1 think=0 demand=1 active=yes
user opsC group=OPS shares=19 procs=1 think=0 demand=1 active=yes
event t=60 deactivate=opsC
solver partition
"""


class TestParse:
    def test_full_scenario(self):
        s = parse_scenario(GOOD, label="demo")
        assert s.label == "demo"
        assert len(s.hierarchy.groups) == 3
        assert len(list(s.hierarchy.users())) == 5
        assert all(u.active for u in s.hierarchy.users())
        assert s.hierarchy.total_allocated_shares == 100
        assert s.workload.for_user("opsC").demand == 1.0
        assert s.timeline[0].action == "deactivate"
        assert s.timeline[0].user == "opsC"
        assert s.solver == "partition"

    def test_shipped_report4(self, load_scenario):
        s = load_scenario("report4")
        assert len(s.hierarchy.groups) == 3
        assert sum(u.shares for u in s.hierarchy.users() if u.active) == 100

    def test_empty_input(self):
        with pytest.raises(ScenarioParseError, match="no groups defined"):
            parse_scenario("")

    def test_share_sum_violation_names_group(self):
        bad = GOOD.replace("user opsB group=OPS shares=5", "user opsB group=OPS shares=4")
        with pytest.raises(ScenarioParseError, match=r"OPS.*29.*30"):
            parse_scenario(bad)

    def test_unknown_group_reference(self):
        bad = GOOD.replace("user opsA group=OPS", "user opsA group=OPS2")
        with pytest.raises(ScenarioParseError, match=r"line 8.*OPS2"):
            parse_scenario(bad)

    def test_unknown_event_user(self):
        bad = GOOD.replace("deactivate=opsC", "deactivate=nobody")
        with pytest.raises(ScenarioParseError, match="nobody"):
            parse_scenario(bad)

    def test_duplicate_user(self):
        bad = GOOD.replace(
            "user opsB group=OPS shares=5", "user opsA group=OPS shares=5"
        )
        with pytest.raises(ScenarioParseError, match="duplicate user"):
            parse_scenario(bad)

    def test_bad_solver(self):
        bad = GOOD.replace("solver partition", "solver magic")
        with pytest.raises(ScenarioParseError, match="solver"):
            parse_scenario(bad)

    def test_bad_value_has_line_and_column(self):
        bad = GOOD.replace("shares=60 procs=1 think=0 demand=1 active=yes",
                           "shares=60 procs=one think=0 demand=1 active=yes", 1)
        with pytest.raises(ScenarioParseError, match=r"line 6.*procs"):
            parse_scenario(bad)

    def test_missing_total_shares(self):
        bad = "\n".join(l for l in GOOD.splitlines() if not l.startswith("total_shares"))
        with pytest.raises(ScenarioParseError, match="total_shares"):
            parse_scenario(bad)

    def test_unknown_directive(self):
        with pytest.raises(ScenarioParseError, match="line 1"):
            parse_scenario("groop A shares=1")

    def test_events_must_be_ordered(self):
        bad = GOOD.replace(
            "event t=60 deactivate=opsC",
            "event t=60 deactivate=opsC\nevent t=10 activate=opsC",
        )
        with pytest.raises(ScenarioParseError, match="non-decreasing"):
            parse_scenario(bad)

    def test_defaults_to_partition_solver(self):
        no_solver = "\n".join(l for l in GOOD.splitlines() if not l.startswith("solver"))
        assert parse_scenario(no_solver).solver == "partition"


class TestRoundTrip:
    def test_parse_render_parse_is_stable(self):
        first = parse_scenario(GOOD, label="demo")
        second = parse_scenario(render_scenario(first), label="demo")
        assert second == first
        assert render_scenario(second) == render_scenario(first)

    def test_shipped_scenarios_round_trip(self, scenario_dir):
        for path in sorted(scenario_dir.glob("*.fsp")):
            original = parse_scenario(path.read_text(), label=path.stem)
            rendered = render_scenario(original)
            assert parse_scenario(rendered, label=path.stem) == original
