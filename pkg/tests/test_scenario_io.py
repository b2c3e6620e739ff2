import csv
import io
import json

import pytest

from cerank.scenario_io import (
    RandomInstanceSpec,
    Report,
    ReportRow,
    ScenarioError,
    generate_instances,
    load_report,
    load_scenario,
    read_tabular,
    render_report,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    write_report,
)


def _ranking_doc(**extra):
    doc = {"format_version": 1, "kind": "ranking",
           "entities": [{"id": "A", "utility": 1.0, "click_prob": 0.4, "abandon_prob": 0.1},
                        {"id": "B", "utility": 2.0, "click_prob": 0.3, "abandon_prob": 0.2}]}
    doc.update(extra)
    return doc


def test_minimal_scenario_loads(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(_ranking_doc()))
    s = load_scenario(p)
    assert s.kind == "ranking" and s.size == 2


def test_probability_overflow_rejected():
    doc = _ranking_doc()
    doc["entities"][0].update(click_prob=0.7, abandon_prob=0.5)
    with pytest.raises(ScenarioError, match="click_prob \\+ abandon_prob exceeds 1"):
        scenario_from_dict(doc)


def test_auction_without_bids_rejected():
    doc = {"format_version": 1, "kind": "auction",
           "advertisers": [{"id": "a", "value": 1.0, "ctr": 0.5, "abandon_prob": 0.0}]}
    with pytest.raises(ScenarioError, match="bids"):
        scenario_from_dict(doc)


@pytest.mark.parametrize("doc", [
    {"kind": "ranking", "entities": []},
    {"format_version": 2, "kind": "ranking"},
    {"format_version": 1, "kind": "lottery"},
    {"format_version": 1, "kind": "ranking", "entities": []},
    {"format_version": 1, "kind": "ranking", "entities": [{"utility": "x", "click_prob": 0.1}]},
    {"format_version": 1, "kind": "diversity", "adjacency": [[0, 1], [0, 0]]},
    [],
])
def test_schema_errors(doc):
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc)


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{\"kind\": ")
    with pytest.raises(ScenarioError):
        load_scenario(p)


@pytest.mark.parametrize("kind", ["ranking", "auction", "equilibrium", "diversity"])
def test_scenario_round_trip(tmp_path, kind):
    for i, s in enumerate(generate_instances(RandomInstanceSpec(count=5, seed=3, kind=kind))):
        p = tmp_path / f"{kind}{i}.json"
        save_scenario(s, p)
        assert load_scenario(p) == s
        assert scenario_from_dict(scenario_to_dict(s)) == s


def test_generator_is_deterministic():
    spec = RandomInstanceSpec(count=20, seed=42, kind="auction")
    assert generate_instances(spec) == generate_instances(spec)
    assert generate_instances(spec) != generate_instances(RandomInstanceSpec(count=20, seed=43, kind="auction"))


def test_generator_respects_invariants():
    spec = RandomInstanceSpec(count=10_000, seed=1, n_range=(2, 8))
    for s in generate_instances(spec):
        assert 2 <= s.size <= 8
        for e in s.entities:
            assert 0.0 <= e.click_prob and 0.0 <= e.abandon_prob
            assert e.click_prob + e.abandon_prob <= 1.0 + 1e-12


def test_constant_absorption_mode():
    spec = RandomInstanceSpec(count=20, seed=1, abandon_mode="k_minus_c", k=0.8)
    for s in generate_instances(spec):
        for e in s.entities:
            assert e.click_prob + e.abandon_prob == pytest.approx(0.8)


def _report():
    rows = (ReportRow(1, "B", 1.2, 0.0, 0.3, 0.6), ReportRow(2, "A", 0.1 + 0.2, 0.0, 0.2, 0.1 / 3))
    return Report("rank", rows, {"expected_utility": 0.8, "order": ["B", "A"], "flag": True, "none": None})


def test_structured_report_round_trip(tmp_path):
    p = tmp_path / "r.json"
    write_report(_report(), p)
    assert load_report(p) == _report()


def test_tabular_report_has_one_row_per_position_at_full_precision(tmp_path):
    text = render_report(_report(), "tabular")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 2
    assert list(rows[0]) == ["position", "id", "score", "price", "click_prob", "contribution"]
    assert rows[1]["score"] == "0.30000000000000004"
    assert float(rows[1]["contribution"]) == 0.1 / 3
    p = tmp_path / "r.csv"
    write_report(_report(), p, "tabular")
    assert read_tabular(p) == rows


def test_unknown_format():
    with pytest.raises(ValueError):
        render_report(_report(), "yaml")
