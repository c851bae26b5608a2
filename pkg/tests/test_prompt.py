from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from promptnilm.errors import ConfigMismatch, LengthMismatch, UnparseablePrompt
from promptnilm.knowledge import ApplianceProfile, KnowledgeToggle
from promptnilm.preprocess import StateSeries, UniformSeries
from promptnilm.prompt import (
    ContextBlock,
    OneShotExample,
    PromptConfig,
    WindowInput,
    approx_token_count,
    build_prompt,
    default_clock,
    default_example,
    parse_prompt,
    render_context,
    render_example,
    select_one_shot,
    split_messages,
)

NAMES = ("fridge", "kettle")

PROFILES = [
    ApplianceProfile("fridge", 2.0, 100.0, 200.0, 90.0, 1800.0, "periodic cycling"),
    ApplianceProfile("kettle", 1.0, 2000.0, 3000.0, 30.0, 7200.0, "short high-power bursts"),
]


def config(**overrides):
    base = dict(window_size=4, appliance_names=NAMES)
    base.update(overrides)
    return PromptConfig(**base)


def window(n=4, timestamps=False):
    values = tuple(float(100 + k) for k in range(n))
    return WindowInput(values, default_clock(n) if timestamps else None)


def context(c=2):
    return ContextBlock({"fridge": [1] * c, "kettle": [0] * c})


class TestPromptConfig:
    def test_window_must_be_positive(self):
        with pytest.raises(ValueError):
            config(window_size=0)

    def test_context_flag_requires_length(self):
        with pytest.raises(ValueError):
            config(include_context=True, context_length=0)

    def test_names_unique(self):
        with pytest.raises(ValueError):
            config(appliance_names=("a", "a"))

    def test_names_non_empty(self):
        with pytest.raises(ValueError):
            config(appliance_names=())


class TestBuildPrompt:
    def test_base_sections_only(self):
        text = build_prompt(config(), window())
        assert text.startswith("Role. ")
        for header in ("Task.", "Output Format.", "Input Data."):
            assert header in text
        for header in ("Prior Knowledge.", "Example Input.", "Context."):
            assert header not in text

    def test_section_order_full_config(self):
        cfg = config(include_one_shot=True, include_knowledge=True,
                     include_context=True, context_length=2)
        text = build_prompt(cfg, window(), context=context(),
                            profiles=PROFILES, example=default_example(NAMES))
        order = ["Role.", "Task.", "Output Format.", "Prior Knowledge.",
                 "Example Input.", "Example Output.", "Context.", "Input Data."]
        positions = [text.index(h) for h in order]
        assert positions == sorted(positions)

    def test_output_format_names_keys_and_length(self):
        text = build_prompt(config(), window())
        assert '"fridge_status", "kettle_status"' in text
        assert "list of exactly 4 integers (0 or 1)" in text
        assert "MUST have exactly 4 elements" in text

    def test_explanation_mode_mentions_explanation_keys(self):
        text = build_prompt(config(explanation_mode=True), window())
        assert '"fridge_explanation", "kettle_explanation"' in text

    def test_values_rendered_three_decimals(self):
        text = build_prompt(config(), window())
        assert "[100.000, 101.000, 102.000, 103.000]" in text

    def test_timestamps_render_as_entries(self):
        cfg = config(include_timestamps=True)
        text = build_prompt(cfg, window(timestamps=True))
        assert '{"time": "00:00:00", "power": 100.000}' in text
        assert "clock time (HH:mm:ss)" in text

    def test_timestamps_required_iff_enabled(self):
        with pytest.raises(ConfigMismatch):
            build_prompt(config(include_timestamps=True), window())
        with pytest.raises(ConfigMismatch):
            build_prompt(config(), window(timestamps=True))

    def test_bad_timestamp_spacing(self):
        w = WindowInput((1.0, 2.0), ("00:00:00", "00:00:07"))
        with pytest.raises(ConfigMismatch):
            build_prompt(config(window_size=2, include_timestamps=True), w)

    def test_profiles_required_iff_knowledge(self):
        with pytest.raises(ConfigMismatch):
            build_prompt(config(include_knowledge=True), window())
        with pytest.raises(ConfigMismatch):
            build_prompt(config(), window(), profiles=PROFILES)

    def test_example_required_iff_one_shot(self):
        with pytest.raises(ConfigMismatch):
            build_prompt(config(include_one_shot=True), window())
        with pytest.raises(ConfigMismatch):
            build_prompt(config(), window(), example=default_example(NAMES))

    def test_context_none_allowed_for_first_window(self):
        cfg = config(include_context=True, context_length=2)
        text = build_prompt(cfg, window(), context=None)
        assert "Context." not in text

    def test_context_rejected_when_disabled(self):
        with pytest.raises(ConfigMismatch):
            build_prompt(config(), window(), context=context())

    def test_context_length_must_match(self):
        cfg = config(include_context=True, context_length=3)
        with pytest.raises(ConfigMismatch):
            build_prompt(cfg, window(), context=context(c=2))

    def test_wrong_window_length(self):
        with pytest.raises(ConfigMismatch):
            build_prompt(config(window_size=5), window(4))

    def test_deterministic(self):
        cfg = config(include_knowledge=True)
        a = build_prompt(cfg, window(), profiles=PROFILES)
        b = build_prompt(cfg, window(), profiles=PROFILES)
        assert a == b

    def test_char_count_grows_along_component_chain(self):
        base = build_prompt(config(), window())
        oe = build_prompt(config(include_one_shot=True), window(),
                          example=default_example(NAMES))
        ki = build_prompt(config(include_one_shot=True, include_knowledge=True),
                          window(), profiles=PROFILES, example=default_example(NAMES))
        ct = build_prompt(
            config(include_one_shot=True, include_knowledge=True,
                   include_context=True, context_length=2),
            window(), context=context(), profiles=PROFILES,
            example=default_example(NAMES),
        )
        assert len(base) < len(oe) < len(ki) < len(ct)


class TestRenderExample:
    def test_appendix_style_arrays(self):
        text = render_example(default_example(NAMES))
        assert "[1,1,1,1,1,0,0,0,0,0]" in text
        assert "Example Input." in text
        assert "Example Output." in text
        assert "597.540" in text

    def test_single_slot(self):
        example = OneShotExample((5.0,), {"fridge": [1], "kettle": [0]})
        text = render_example(example)
        assert '"fridge_status": [1]' in text

    def test_length_mismatch(self):
        example = OneShotExample((5.0, 6.0), {"fridge": [1], "kettle": [0, 0]})
        with pytest.raises(LengthMismatch):
            render_example(example)


class TestRenderContext:
    def test_single_appliance_line(self):
        block = ContextBlock({"fridge": [1, 1, 0]})
        text = render_context(block)
        assert "fridge: [1,1,0]" in text
        assert "previous 3 steps" in text

    def test_four_appliances_ten_steps(self):
        names = ("microwave", "fridge", "washing_machine", "dishwasher")
        block = ContextBlock({name: [0] * 10 for name in names})
        lines = render_context(block).splitlines()
        assert len(lines) == 5  # lead line + one per appliance
        assert all(line.endswith("[" + ",".join("0" * 10) + "]") for line in lines[1:])

    def test_empty_block_renders_nothing(self):
        assert render_context(ContextBlock({})) == ""


class TestSplitMessages:
    def test_role_goes_to_system(self):
        text = build_prompt(config(), window())
        system, user = split_messages(text)
        assert system.startswith("You are an expert system")
        assert user.startswith("Task.")
        assert "Input Data." in user


class TestParsePrompt:
    def test_round_trip_base(self):
        text = build_prompt(config(), window())
        parsed = parse_prompt(text)
        assert parsed.window_size == 4
        assert parsed.appliance_names == NAMES
        assert parsed.aggregate_values == [100.0, 101.0, 102.0, 103.0]
        assert parsed.power_ranges == {}
        assert not parsed.explanation_mode

    def test_round_trip_knowledge_ranges(self):
        cfg = config(include_knowledge=True)
        parsed = parse_prompt(build_prompt(cfg, window(), profiles=PROFILES))
        assert parsed.power_ranges == {
            "fridge": (100.0, 200.0),
            "kettle": (2000.0, 3000.0),
        }

    def test_round_trip_context(self):
        cfg = config(include_context=True, context_length=2)
        parsed = parse_prompt(build_prompt(cfg, window(), context=context()))
        assert parsed.context_states == {"fridge": [1, 1], "kettle": [0, 0]}

    def test_round_trip_timestamped_input(self):
        cfg = config(include_timestamps=True)
        parsed = parse_prompt(build_prompt(cfg, window(timestamps=True)))
        assert parsed.aggregate_values == [100.0, 101.0, 102.0, 103.0]

    def test_example_values_not_mistaken_for_input(self):
        cfg = config(include_one_shot=True)
        parsed = parse_prompt(build_prompt(cfg, window(), example=default_example(NAMES)))
        assert parsed.aggregate_values == [100.0, 101.0, 102.0, 103.0]

    def test_garbage_rejected(self):
        with pytest.raises(UnparseablePrompt):
            parse_prompt("tell me about appliances")

    @given(
        st.lists(st.from_regex(r"[a-z][a-z0-9_]{0,12}", fullmatch=True),
                 min_size=1, max_size=5, unique=True),
        st.integers(min_value=1, max_value=40),
    )
    def test_round_trip_property(self, names, w):
        cfg = PromptConfig(window_size=w, appliance_names=tuple(names))
        values = tuple(float(k) for k in range(w))
        parsed = parse_prompt(build_prompt(cfg, WindowInput(values)))
        assert parsed.window_size == w
        assert parsed.appliance_names == tuple(names)


class TestSelectOneShot:
    def _series(self, values):
        arr = np.asarray(values, dtype=float)
        return UniformSeries(0, arr, np.zeros(len(arr), dtype=bool))

    def test_picks_transition_rich_window(self):
        # window 0 is flat, window 1 toggles every slot
        values = [1.0] * 4 + [5.0, 1.0, 5.0, 1.0]
        states = StateSeries("fridge", np.array([0, 0, 0, 0, 1, 0, 1, 0]))
        example = select_one_shot(self._series(values), {"fridge": states},
                                  window_size=4, example_length=4)
        assert example.states["fridge"] == [1, 0, 1, 0]

    def test_pads_to_example_length(self):
        values = [5.0, 1.0]
        states = StateSeries("fridge", np.array([1, 0]))
        example = select_one_shot(self._series(values), {"fridge": states},
                                  window_size=2, example_length=5)
        assert len(example.aggregate_values) == 5
        assert example.states["fridge"] == [1, 0, 0, 0, 0]

    def test_truncates_to_example_length(self):
        values = [float(k) for k in range(20)]
        states = StateSeries("fridge", np.array([k % 2 for k in range(20)]))
        example = select_one_shot(self._series(values), {"fridge": states},
                                  window_size=20, example_length=10)
        assert len(example.aggregate_values) == 10

    def test_gap_windows_skipped(self):
        arr = np.array([5.0, 1.0, 5.0, 1.0])
        gaps = np.array([True, False, False, False])
        series = UniformSeries(0, arr, gaps)
        states = StateSeries("fridge", np.array([1, 0, 1, 0]))
        example = select_one_shot(series, {"fridge": states},
                                  window_size=2, example_length=2)
        assert example.states["fridge"] == [1, 0]
        assert example.aggregate_values == (5.0, 1.0)


def test_default_clock_wraps_midnight():
    stamps = default_clock(3, start="23:59:54")
    assert stamps == ("23:59:54", "00:00:00", "00:00:06")


def test_approx_token_count():
    assert approx_token_count("x" * 400) == 100
    assert approx_token_count("") == 1
