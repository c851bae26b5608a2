from __future__ import annotations

import json

import pytest

from promptnilm.client import RawResponse, mock_complete
from promptnilm.errors import ConfigMismatch
from promptnilm.explain import (
    audit_rationales,
    audit_to_markdown,
    explain_window,
    write_audit_csv,
)
from promptnilm.knowledge import ApplianceProfile
from promptnilm.normalizer import OUTCOME_MALFORMED, OUTCOME_OK, normalize
from promptnilm.prompt import PromptConfig, WindowInput

PROFILES = [
    ApplianceProfile("fridge", 2.0, 100.0, 200.0, 90.0, 1800.0, "periodic cycling"),
    ApplianceProfile("kettle", 1.0, 2000.0, 3000.0, 30.0, 7200.0, "short high-power bursts"),
]

CFG = PromptConfig(
    window_size=4,
    appliance_names=("fridge", "kettle"),
    include_knowledge=True,
    explanation_mode=True,
)

WINDOW = WindowInput((150.0, 150.0, 3.0, 3.0))


class TestExplainWindow:
    def test_mock_rationales_captured(self):
        explained = explain_window(WINDOW, CFG, mock_complete, profiles=PROFILES)
        assert explained.outcome.kind == OUTCOME_OK
        assert explained.prediction.states["fridge"] == [1, 1, 0, 0]
        assert "marked ON" in explained.rationales["fridge"]
        assert "state remains OFF" in explained.rationales["kettle"]
        assert explained.missing_rationales == []

    def test_missing_rationale_reported(self):
        def backend(prompt):
            return RawResponse(text=json.dumps({
                "fridge_status": [1, 1, 0, 0],
                "kettle_status": [0, 0, 0, 0],
                "fridge_explanation": "compressor cycle",
            }))

        explained = explain_window(WINDOW, CFG, backend, profiles=PROFILES)
        assert explained.prediction.states["kettle"] == [0, 0, 0, 0]
        assert explained.missing_rationales == ["kettle"]

    def test_malformed_yields_fallback_and_empty_rationales(self):
        explained = explain_window(
            WINDOW, CFG, lambda p: RawResponse(text="no idea"), profiles=PROFILES
        )
        assert explained.outcome.kind == OUTCOME_MALFORMED
        assert explained.prediction.states == {
            "fridge": [0, 0, 0, 0], "kettle": [0, 0, 0, 0],
        }
        assert explained.rationales == {}

    def test_requires_explanation_mode(self):
        cfg = PromptConfig(window_size=4, appliance_names=("fridge",))
        with pytest.raises(ConfigMismatch):
            explain_window(WINDOW, cfg, mock_complete)

    def test_rationales_do_not_change_states(self):
        raw = json.dumps({
            "fridge_status": [1, 0, 1, 0],
            "kettle_status": [0, 0, 0, 1],
            "fridge_explanation": "cycling",
        })
        with_expl, _ = normalize(raw, ("fridge", "kettle"), 4, explanation_mode=True)
        without, _ = normalize(raw, ("fridge", "kettle"), 4, explanation_mode=False)
        assert with_expl.states == without.states


class TestAudit:
    def explained(self):
        return explain_window(WINDOW, CFG, mock_complete, profiles=PROFILES)

    def test_agreement_rows(self):
        truth = {"fridge": [1, 1, 0, 0], "kettle": [0, 0, 0, 0]}
        rows = audit_rationales(self.explained(), truth, WINDOW)
        assert len(rows) == 2
        by_name = {r.appliance: r for r in rows}
        assert by_name["fridge"].claimed_state == 1
        assert by_name["fridge"].true_state == 1
        assert by_name["fridge"].agreement
        assert by_name["kettle"].agreement

    def test_disagreement_flagged(self):
        truth = {"fridge": [1, 1, 0, 0], "kettle": [1, 0, 0, 0]}
        rows = audit_rationales(self.explained(), truth, WINDOW)
        by_name = {r.appliance: r for r in rows}
        assert by_name["kettle"].claimed_state == 0
        assert by_name["kettle"].true_state == 1
        assert not by_name["kettle"].agreement

    def test_blank_rationale_still_emitted(self):
        def backend(prompt):
            return RawResponse(text=json.dumps({
                "fridge_status": [0, 0, 0, 0], "kettle_status": [0, 0, 0, 0],
            }))

        explained = explain_window(WINDOW, CFG, backend, profiles=PROFILES)
        truth = {"fridge": [0, 0, 0, 0], "kettle": [0, 0, 0, 0]}
        rows = audit_rationales(explained, truth, WINDOW)
        assert all(r.rationale == "" for r in rows)

    def test_row_count_equals_appliances(self):
        truth = {"fridge": [0, 0, 0, 0], "kettle": [0, 0, 0, 0]}
        assert len(audit_rationales(self.explained(), truth, WINDOW)) == 2

    def test_truth_length_checked(self):
        truth = {"fridge": [1], "kettle": [0, 0, 0, 0]}
        with pytest.raises(ValueError):
            audit_rationales(self.explained(), truth, WINDOW)

    def test_markdown_and_csv_output(self, tmp_path):
        truth = {"fridge": [1, 1, 0, 0], "kettle": [0, 0, 0, 0]}
        rows = audit_rationales(self.explained(), truth, WINDOW)
        md = audit_to_markdown(rows)
        assert md.startswith("| appliance |")
        assert "| fridge | 1 | 1 | yes |" in md
        write_audit_csv(tmp_path / "audit.csv", rows)
        lines = (tmp_path / "audit.csv").read_text().strip().splitlines()
        assert lines[0] == "appliance,claimed_state,true_state,agreement,rationale"
        assert len(lines) == 3
