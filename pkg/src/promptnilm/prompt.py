"""Prompt assembly from composable components.

A prompt is built from fixed-order sections: Role, Task, Output Format, then
optional Prior Knowledge, one worked Example, Context from the previous
window, and finally the Input Data. Rendering is deterministic so full
prompts can be pinned as golden files, and `parse_prompt` recovers the
structure (window size, appliance list, input values, rendered power ranges)
from the text, which the offline mock backend relies on.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigMismatch, LengthMismatch, UnparseablePrompt
from .knowledge import ApplianceProfile, KnowledgeToggle, render_knowledge
from .preprocess import StateSeries, UniformSeries

ROLE_TEXT = (
    "You are an expert system specializing in Non-intrusive Load Monitoring (NILM). "
    "Your job is to analyze a sequence of aggregate active power readings and "
    "determine the ON (1) or OFF (0) status for each of the following appliances "
    "at every time step: {appliances}."
)

TASK_TEXT = (
    "Given an input sequence of exactly {window} aggregate power readings, use the "
    "prior knowledge and context below to infer the ON or OFF status for each "
    "appliance at each time step. Sampling cycle is 6 s."
)

TASK_TIMESTAMP_NOTE = (
    "Each reading is paired with its clock time (HH:mm:ss); appliance usage often "
    "depends on the time of day."
)

CONTEXT_LEAD = "The states predicted in the previous {steps} steps:"

# Worked example shipped as the default one-shot pair: the second appliance
# runs for the first five slots, everything else stays off.
DEFAULT_EXAMPLE_AGGREGATE = (
    597.540, 597.397, 597.752, 597.462, 437.508,
    169.120, 169.324, 169.130, 169.112, 169.404,
)
DEFAULT_EXAMPLE_ACTIVE_STATES = (1, 1, 1, 1, 1, 0, 0, 0, 0, 0)

_SECTION_HEADERS = (
    "Role",
    "Task",
    "Output Format",
    "Prior Knowledge",
    "Example Input",
    "Example Output",
    "Context",
    "Input Data",
)
_SECTION_RE = re.compile(
    r"^(%s)\.(?: |$)" % "|".join(re.escape(h) for h in _SECTION_HEADERS), re.M
)
_WINDOW_RE = re.compile(r"sequence of exactly (\d+) aggregate power readings")
_STATUS_KEY_RE = re.compile(r'"([A-Za-z0-9_]+)_status"')
_POWER_RANGE_RE = re.compile(r"^- Power Range: ([0-9.]+)-([0-9.]+) W$")
_CONTEXT_LINE_RE = re.compile(r"^([A-Za-z0-9_]+): (\[[01,]*\])$")


@dataclass(frozen=True)
class PromptConfig:
    """Component toggles plus window/context sizing for prompt assembly."""

    window_size: int
    appliance_names: tuple[str, ...]
    context_length: int = 0
    include_one_shot: bool = False
    include_knowledge: bool = False
    knowledge_toggle: KnowledgeToggle = field(default_factory=KnowledgeToggle)
    include_timestamps: bool = False
    include_context: bool = False
    explanation_mode: bool = False

    def __post_init__(self):
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if self.context_length < 0:
            raise ValueError("context_length must be >= 0")
        if self.include_context and self.context_length < 1:
            raise ValueError("include_context requires context_length >= 1")
        if not self.appliance_names:
            raise ValueError("appliance_names must be non-empty")
        if len(set(self.appliance_names)) != len(self.appliance_names):
            raise ValueError("appliance_names must be unique")


@dataclass(frozen=True)
class WindowInput:
    """One window of aggregate readings, optionally with clock timestamps."""

    aggregate_values: tuple[float, ...]
    timestamps: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ContextBlock:
    """Per-appliance state tails carried over from the previous window."""

    tails: dict[str, list[int]]

    def length(self) -> int:
        return len(next(iter(self.tails.values()))) if self.tails else 0


@dataclass(frozen=True)
class OneShotExample:
    """A worked input/output pair embedded in the prompt."""

    aggregate_values: tuple[float, ...]
    states: dict[str, list[int]]
    timestamps: tuple[str, ...] | None = None


@dataclass
class ParsedPrompt:
    """Structure recovered from a rendered prompt by `parse_prompt`."""

    window_size: int
    appliance_names: tuple[str, ...]
    aggregate_values: list[float]
    power_ranges: dict[str, tuple[float, float]]
    explanation_mode: bool
    context_states: dict[str, list[int]] | None


def format_power(value: float) -> str:
    """All power values render with 3 decimal places."""
    return f"{float(value):.3f}"


def render_states(states) -> str:
    return "[" + ",".join(str(int(s)) for s in states) + "]"


def _render_values(values) -> str:
    return "[" + ", ".join(format_power(v) for v in values) + "]"


def _render_timestamped(values, timestamps) -> str:
    entries = (
        '{"time": "%s", "power": %s}' % (t, format_power(v))
        for t, v in zip(timestamps, values)
    )
    return "[" + ", ".join(entries) + "]"


def _clock_seconds(stamp: str) -> int:
    h, m, s = stamp.split(":")
    return int(h) * 3600 + int(m) * 60 + int(s)


def _check_timestamps(timestamps, n: int) -> None:
    if len(timestamps) != n:
        raise ConfigMismatch(f"expected {n} timestamps, got {len(timestamps)}")
    for t in timestamps:
        if not re.fullmatch(r"\d{2}:\d{2}:\d{2}", t):
            raise ConfigMismatch(f"timestamp {t!r} is not HH:mm:ss")
    for a, b in zip(timestamps, timestamps[1:]):
        if (_clock_seconds(b) - _clock_seconds(a)) % 86400 != 6:
            raise ConfigMismatch(f"timestamps {a!r} -> {b!r} are not 6 s apart")


def _output_format_lines(config: PromptConfig) -> list[str]:
    keys = ", ".join(f'"{name}_status"' for name in config.appliance_names)
    lines = [
        "- Respond ONLY with a single JSON object.",
        f"- Keys must be exactly: {keys}.",
        f"- Each value is a list of exactly {config.window_size} integers (0 or 1).",
        "- Do NOT output any explanation, extra text, markdown, or code block, "
        "ONLY the JSON object.",
        "- If uncertain, make the best guess, but do NOT use any value other than 0 or 1.",
        f"- The output list for each appliance MUST have exactly "
        f"{config.window_size} elements.",
    ]
    if config.explanation_mode:
        explanation_keys = ", ".join(
            f'"{name}_explanation"' for name in config.appliance_names
        )
        lines.append(f"- Additionally include keys exactly: {explanation_keys}.")
        lines.append(
            "- Each explanation value is one short sentence justifying the inferred "
            "states, placed inside the JSON object."
        )
    return lines


def render_example(example: OneShotExample, include_timestamps: bool = False) -> str:
    """Render the Example Input / Example Output section pair."""
    n = len(example.aggregate_values)
    for name, states in example.states.items():
        if len(states) != n:
            raise LengthMismatch(
                f"example output for {name} has {len(states)} states, input has {n}"
            )
    if include_timestamps:
        timestamps = example.timestamps or default_clock(n)
        _check_timestamps(timestamps, n)
        payload = _render_timestamped(example.aggregate_values, timestamps)
    else:
        payload = _render_values(example.aggregate_values)
    output = (
        "{"
        + ", ".join(
            f'"{name}_status": {render_states(states)}'
            for name, states in example.states.items()
        )
        + "}"
    )
    return f"Example Input.\nAggregate Power: {payload}\n\nExample Output.\n{output}"


def render_context(context: ContextBlock) -> str:
    """One line per appliance, in the block's declared order."""
    steps = context.length()
    if steps == 0:
        return ""
    lines = [CONTEXT_LEAD.format(steps=steps)]
    lines.extend(f"{name}: {render_states(tail)}" for name, tail in context.tails.items())
    return "\n".join(lines)


def build_prompt(
    config: PromptConfig,
    window: WindowInput,
    context: ContextBlock | None = None,
    profiles: list[ApplianceProfile] | None = None,
    example: OneShotExample | None = None,
) -> str:
    """Assemble the full prompt text for one inference window.

    Sections appear in a fixed order; optional sections are controlled by the
    config toggles. `context` may be None under include_context for the first
    window of a series, where no previous prediction exists yet.
    """
    names = config.appliance_names
    if len(window.aggregate_values) != config.window_size:
        raise ConfigMismatch(
            f"window has {len(window.aggregate_values)} values, "
            f"config expects {config.window_size}"
        )
    if config.include_timestamps != (window.timestamps is not None):
        raise ConfigMismatch("timestamps must be present iff include_timestamps")
    if window.timestamps is not None:
        _check_timestamps(window.timestamps, config.window_size)
    if config.include_knowledge != (profiles is not None):
        raise ConfigMismatch("profiles must be supplied iff include_knowledge")
    if config.include_one_shot != (example is not None):
        raise ConfigMismatch("example must be supplied iff include_one_shot")
    if context is not None and not config.include_context:
        raise ConfigMismatch("context supplied but include_context is off")
    if context is not None:
        if set(context.tails) != set(names):
            raise ConfigMismatch("context appliances differ from configured appliances")
        for name, tail in context.tails.items():
            if len(tail) != config.context_length:
                raise ConfigMismatch(
                    f"context tail for {name} has {len(tail)} states, "
                    f"expected {config.context_length}"
                )
            if any(int(s) not in (0, 1) for s in tail):
                raise ConfigMismatch(f"context tail for {name} contains non-binary states")

    sections = []
    sections.append("Role. " + ROLE_TEXT.format(appliances=", ".join(names)))
    task = TASK_TEXT.format(window=config.window_size)
    if config.include_timestamps:
        task += " " + TASK_TIMESTAMP_NOTE
    sections.append("Task. " + task)
    sections.append("Output Format.\n" + "\n".join(_output_format_lines(config)))
    if config.include_knowledge:
        ordered = sorted(profiles, key=lambda p: names.index(p.name) if p.name in names else len(names))
        sections.append(
            "Prior Knowledge.\n" + render_knowledge(ordered, config.knowledge_toggle)
        )
    if config.include_one_shot:
        sections.append(render_example(example, config.include_timestamps))
    if config.include_context and context is not None:
        rendered = render_context(context)
        if rendered:
            sections.append("Context.\n" + rendered)
    if config.include_timestamps:
        payload = _render_timestamped(window.aggregate_values, window.timestamps)
    else:
        payload = _render_values(window.aggregate_values)
    sections.append("Input Data.\nAggregate Power: " + payload)
    return "\n\n".join(sections)


def split_messages(prompt_text: str) -> tuple[str, str]:
    """Split a rendered prompt into (system, user) chat messages.

    The system message carries only the Role sentence; everything else goes
    into the user message.
    """
    head, _, rest = prompt_text.partition("\n\n")
    if not head.startswith("Role. ") or not rest:
        raise UnparseablePrompt("prompt does not start with a Role section")
    return head[len("Role. "):], rest


def _split_sections(text: str) -> dict[str, str]:
    sections: dict[str, str] = {}
    matches = list(_SECTION_RE.finditer(text))
    for i, m in enumerate(matches):
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        sections[m.group(1)] = text[m.end():end].strip()
    return sections


def parse_prompt(text: str) -> ParsedPrompt:
    """Recover prompt structure from rendered text (round-trip of build_prompt)."""
    sections = _split_sections(text)
    if "Output Format" not in sections or "Input Data" not in sections:
        raise UnparseablePrompt("missing Output Format or Input Data section")

    window_match = _WINDOW_RE.search(sections.get("Task", ""))
    if not window_match:
        raise UnparseablePrompt("window size not found in Task section")
    window_size = int(window_match.group(1))

    names = tuple(_STATUS_KEY_RE.findall(sections["Output Format"]))
    if not names:
        raise UnparseablePrompt("no appliance status keys found in Output Format")

    payload = sections["Input Data"]
    if not payload.startswith("Aggregate Power: "):
        raise UnparseablePrompt("Input Data section lacks the aggregate payload")
    try:
        entries = json.loads(payload[len("Aggregate Power: "):])
    except ValueError as exc:
        raise UnparseablePrompt(f"aggregate payload is not valid JSON: {exc}") from exc
    values: list[float] = []
    for entry in entries:
        if isinstance(entry, dict):
            entry = entry.get("power")
        if not isinstance(entry, (int, float)) or not math.isfinite(entry):
            raise UnparseablePrompt("aggregate payload contains a non-numeric entry")
        values.append(float(entry))
    if len(values) != window_size:
        raise UnparseablePrompt(
            f"aggregate payload has {len(values)} values, Task declares {window_size}"
        )

    power_ranges: dict[str, tuple[float, float]] = {}
    if "Prior Knowledge" in sections:
        current = None
        for line in sections["Prior Knowledge"].splitlines():
            if line.endswith(":") and not line.startswith("-"):
                current = line[:-1]
                continue
            m = _POWER_RANGE_RE.match(line)
            if m and current is not None:
                power_ranges[current] = (float(m.group(1)), float(m.group(2)))

    context_states: dict[str, list[int]] | None = None
    if "Context" in sections:
        context_states = {}
        for line in sections["Context"].splitlines():
            m = _CONTEXT_LINE_RE.match(line)
            if m:
                context_states[m.group(1)] = [int(v) for v in json.loads(m.group(2))]

    return ParsedPrompt(
        window_size=window_size,
        appliance_names=names,
        aggregate_values=values,
        power_ranges=power_ranges,
        explanation_mode='_explanation"' in sections["Output Format"],
        context_states=context_states,
    )


def default_clock(n: int, start: str = "00:00:00") -> tuple[str, ...]:
    """n HH:mm:ss stamps, 6 s apart, wrapping at midnight."""
    base = _clock_seconds(start)
    out = []
    for k in range(n):
        total = (base + 6 * k) % 86400
        out.append(f"{total // 3600:02d}:{total % 3600 // 60:02d}:{total % 60:02d}")
    return tuple(out)


def default_example(appliance_names: tuple[str, ...]) -> OneShotExample:
    """The shipped worked example: second appliance ON for five slots."""
    active = 1 if len(appliance_names) > 1 else 0
    states = {
        name: list(DEFAULT_EXAMPLE_ACTIVE_STATES) if i == active else [0] * 10
        for i, name in enumerate(appliance_names)
    }
    return OneShotExample(aggregate_values=DEFAULT_EXAMPLE_AGGREGATE, states=states)


def select_one_shot(
    aggregate: UniformSeries,
    truth: dict[str, StateSeries],
    window_size: int,
    example_length: int = 10,
    rng=None,
) -> OneShotExample:
    """Pick a transition-rich window from history as the one-shot example.

    Scans non-overlapping gap-free windows of `window_size` slots, scores each
    by the number of state transitions across all appliances, and keeps the
    best (ties broken by `rng` when given, else the earliest). The winner is
    truncated or padded by repeating its last slot to `example_length`.
    """
    n_windows = len(aggregate) // window_size
    candidates: list[int] = []
    best_score = -1
    scores: dict[int, int] = {}
    for k in range(n_windows):
        lo, hi = k * window_size, (k + 1) * window_size
        if aggregate.gap_mask[lo:hi].any():
            continue
        score = 0
        for series in truth.values():
            window = series.states[lo:hi]
            score += int(np.count_nonzero(window[1:] != window[:-1]))
        scores[k] = score
        best_score = max(best_score, score)
    candidates = [k for k, s in scores.items() if s == best_score]
    if not candidates:
        raise ValueError("no gap-free window available for example selection")
    pick = rng.choice(candidates) if rng is not None else candidates[0]

    lo = pick * window_size
    values = [float(v) for v in aggregate.values[lo:lo + window_size]]
    states = {name: [int(s) for s in series.states[lo:lo + window_size]]
              for name, series in truth.items()}
    if len(values) >= example_length:
        values = values[:example_length]
        states = {name: arr[:example_length] for name, arr in states.items()}
    else:
        pad = example_length - len(values)
        values = values + [values[-1]] * pad
        states = {name: arr + [arr[-1]] * pad for name, arr in states.items()}
    return OneShotExample(aggregate_values=tuple(values), states=states)


def approx_token_count(text: str) -> int:
    """Crude ~4-characters-per-token estimate for cost projections."""
    return max(1, math.ceil(len(text) / 4))
