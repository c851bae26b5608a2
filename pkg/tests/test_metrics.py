from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from promptnilm.errors import EmptyRun, LengthMismatch
from promptnilm.metrics import (
    ConfusionCounts,
    build_report,
    confusion,
    error_rates,
    f1_from_precision_recall,
    overall,
    report_rows,
    scores,
    write_report_csv,
    write_report_json,
)
from promptnilm.normalizer import (
    OUTCOME_MALFORMED,
    OUTCOME_MISALIGNED,
    OUTCOME_OK,
    NormalizationOutcome,
)
from promptnilm.preprocess import StateSeries


def ss(values, name="fridge"):
    return StateSeries(name, np.asarray(values, dtype=int))


class TestConfusion:
    def test_slotwise_enumeration(self):
        c = confusion(ss([1, 0, 1]), ss([1, 1, 0]))
        assert (c.tp, c.fn, c.fp, c.tn) == (1, 1, 1, 0)

    def test_identical(self):
        c = confusion(ss([1, 0, 1]), ss([1, 0, 1]))
        assert c.fp == c.fn == 0
        assert c.tp == 2 and c.tn == 1

    def test_all_zero(self):
        c = confusion(ss([0, 0, 0]), ss([0, 0, 0]))
        assert c.tn == 3 and c.tp == c.fp == c.fn == 0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion(ss([1]), ss([1, 0]))

    def test_counts_sum_to_length(self):
        c = confusion(ss([1, 0, 1, 1]), ss([0, 0, 1, 0]))
        assert c.total == 4

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)),
                    min_size=1, max_size=50),
           st.randoms(use_true_random=False))
    def test_permutation_invariant(self, pairs, rnd):
        pred, truth = zip(*pairs)
        base = confusion(ss(pred), ss(truth))
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        p2, t2 = zip(*shuffled)
        assert confusion(ss(p2), ss(t2)) == base


class TestScores:
    def test_table_row_base(self):
        # counts chosen to reproduce P=0.3475, R=0.5392
        c = ConfusionCounts(tp=3475, fp=6525, fn=2970, tn=0)
        s = scores(c)
        assert s.precision == pytest.approx(0.3475, abs=5e-5)
        assert s.recall == pytest.approx(0.5392, abs=5e-5)
        assert s.f1 == pytest.approx(0.4226, abs=5e-4)

    def test_empty_positive_convention(self):
        s = scores(ConfusionCounts(tp=0, fp=0, fn=0, tn=10))
        assert s.precision == s.recall == s.f1 == 0.0
        assert s.degenerate

    def test_perfect(self):
        s = scores(ConfusionCounts(tp=5, tn=5))
        assert s.f1 == 1.0
        assert not s.degenerate

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(tp=-1)

    @given(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500),
           st.integers(0, 500))
    def test_f1_equals_harmonic_mean(self, tp, tn, fp, fn):
        s = scores(ConfusionCounts(tp, tn, fp, fn))
        if s.precision + s.recall > 0:
            assert s.f1 == pytest.approx(
                f1_from_precision_recall(s.precision, s.recall), abs=1e-12
            )

    @given(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500))
    def test_f1_bounds_and_equality_condition(self, tp, fp, fn):
        s = scores(ConfusionCounts(tp=tp, fp=fp, fn=fn))
        assert 0.0 <= s.f1 <= 1.0
        assert (s.f1 == 1.0) == (fp == 0 and fn == 0 and tp > 0)


class TestOverall:
    def test_pooling_identity(self):
        c = ConfusionCounts(tp=3, tn=4, fp=1, fn=2)
        pooled = overall({"a": c, "b": c})
        assert pooled == scores(ConfusionCounts(tp=6, tn=8, fp=2, fn=4))
        assert pooled.f1 == pytest.approx(scores(c).f1)

    def test_hand_pooled_example(self):
        counts = {
            "a": ConfusionCounts(tp=1, fp=1),
            "b": ConfusionCounts(tp=1, fn=1),
        }
        s = overall(counts)
        assert s.f1 == pytest.approx(2 * 2 / (4 + 1 + 1))

    def test_single_appliance(self):
        c = ConfusionCounts(tp=2, fp=1, fn=1, tn=3)
        assert overall({"a": c}) == scores(c)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            overall({})


class TestErrorRates:
    def test_mixed(self):
        outcomes = [
            NormalizationOutcome(OUTCOME_OK),
            NormalizationOutcome(OUTCOME_MISALIGNED, repaired=True),
            NormalizationOutcome(OUTCOME_MALFORMED),
            NormalizationOutcome(OUTCOME_OK),
        ]
        rates = error_rates(outcomes)
        assert rates.misaligned_rate == 0.25
        assert rates.malformed_rate == 0.25

    def test_all_ok(self):
        rates = error_rates([NormalizationOutcome(OUTCOME_OK)] * 3)
        assert rates.misaligned_rate == 0.0
        assert rates.malformed_rate == 0.0

    def test_all_malformed(self):
        rates = error_rates([NormalizationOutcome(OUTCOME_MALFORMED)] * 2)
        assert rates.malformed_rate == 1.0

    def test_empty_run(self):
        with pytest.raises(EmptyRun):
            error_rates([])


class TestReport:
    def make_report(self):
        counts = {
            "fridge": ConfusionCounts(tp=8, tn=10, fp=2, fn=1),
            "kettle": ConfusionCounts(tp=0, tn=21, fp=0, fn=0),
        }
        outcomes = [NormalizationOutcome(OUTCOME_OK)] * 3 + [
            NormalizationOutcome(OUTCOME_MISALIGNED, repaired=True)
        ]
        return build_report(counts, outcomes)

    def test_rows_shape(self):
        rows = report_rows(self.make_report())
        assert [r["appliance"] for r in rows] == ["fridge", "kettle", "overall"]
        assert rows[1]["degenerate"] == "true"
        assert rows[2]["misaligned_rate"] == "0.2500"

    def test_csv_and_json_written(self, tmp_path):
        report = self.make_report()
        write_report_csv(tmp_path / "r.csv", report)
        write_report_json(tmp_path / "r.json", report)
        lines = (tmp_path / "r.csv").read_text().strip().splitlines()
        assert len(lines) == 4  # header + 2 appliances + overall
        assert lines[0].startswith("appliance,precision,recall,f1")
        assert (tmp_path / "r.json").read_text().startswith("{")
