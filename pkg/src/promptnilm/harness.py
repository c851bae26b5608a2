"""Experiment orchestration: configuration, component ablations, window and
context sweeps, and full evaluations, with CSV reports plus a JSON mirror.

An experiment is described by a single JSON config (see ExperimentSpec).
Knowledge houses supply appliance profiles and the one-shot example; test
houses are evaluated without ever contributing knowledge, and the two sets
must stay disjoint unless overlap is explicitly allowed.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from . import metrics
from .client import Backend, BackendConfig, make_backend
from .driver import RunConfig, SeriesResult, run_series
from .errors import EmptyRun, PromptNilmError
from .ingest import layout_from_json, load_house, normalize_appliance_name
from .knowledge import (
    ApplianceProfile,
    KnowledgeToggle,
    extract_profile_pooled,
    read_profiles,
)
from .metrics import ScoreReport, build_report, confusion
from .preprocess import (
    ApplianceSpec,
    StateSeries,
    UniformSeries,
    aggregate_mains,
    backfill,
    common_grid,
    fill_gaps,
    resample_mean,
    threshold_states,
)
from .prompt import (
    ContextBlock,
    OneShotExample,
    PromptConfig,
    WindowInput,
    approx_token_count,
    build_prompt,
    default_clock,
    default_example,
    select_one_shot,
)

# The six prompt-component combinations of the component ablation.
ABLATION_COMBOS: list[tuple[str, frozenset[str]]] = [
    ("Base", frozenset()),
    ("Base+OE", frozenset({"OE"})),
    ("Base+OE+KI", frozenset({"OE", "KI"})),
    ("Base+OE+KI+TS", frozenset({"OE", "KI", "TS"})),
    ("Base+OE+KI+CT", frozenset({"OE", "KI", "CT"})),
    ("Base+OE+KI+TS+CT", frozenset({"OE", "KI", "TS", "CT"})),
]

DEFAULT_WINDOW_SWEEP = [20, 40, 60, 80, 100]
DEFAULT_CONTEXT_SWEEP = [10, 30, 50, 70, 90]
VALID_COMPONENTS = {"OE", "KI", "TS", "CT"}

# One day of 6-second slots: the desk-scale default evaluation segment.
DEFAULT_SEGMENT_SLOTS = 14_400


@dataclass
class ExperimentSpec:
    """Parsed experiment configuration (one JSON document)."""

    data_dir: Path
    knowledge_houses: list[str]
    test_houses: list[str]
    thresholds: dict[str, float]
    window_size: int = 100
    context_length: int = 10
    components: frozenset[str] = frozenset({"OE", "KI", "CT"})
    knowledge_toggle: KnowledgeToggle = field(default_factory=KnowledgeToggle)
    window_sweep: list[int] = field(default_factory=lambda: list(DEFAULT_WINDOW_SWEEP))
    context_sweep: list[int] = field(default_factory=lambda: list(DEFAULT_CONTEXT_SWEEP))
    segment_slots: int | None = DEFAULT_SEGMENT_SLOTS
    seed: int = 0
    backend: str = "mock"
    http: BackendConfig | None = None
    profiles_path: Path | None = None
    out_dir: Path = Path("out")
    cost_confirm_tokens: int = 250_000
    allow_house_overlap: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if self.context_length < 0:
            raise ValueError("context_length must be >= 0")
        unknown = self.components - VALID_COMPONENTS
        if unknown:
            raise ValueError(f"unknown prompt components: {sorted(unknown)}")
        if "CT" in self.components and self.context_length < 1:
            raise ValueError("CT component requires context_length >= 1")
        if not self.thresholds:
            raise ValueError("at least one appliance with a threshold is required")
        for name, value in self.thresholds.items():
            ApplianceSpec(name, value)  # validates the threshold
        for values, label in ((self.window_sweep, "window_sweep"),
                              (self.context_sweep, "context_sweep")):
            if any(v < 1 for v in values):
                raise ValueError(f"{label} values must be >= 1")
        if not self.test_houses:
            raise ValueError("at least one test house is required")
        if not self.knowledge_houses and self.profiles_path is None:
            raise ValueError("knowledge_houses or profiles_path must be provided")
        overlap = set(self.knowledge_houses) & set(self.test_houses)
        if overlap and not self.allow_house_overlap:
            raise ValueError(
                f"knowledge and test houses must be disjoint, both contain {sorted(overlap)}"
            )
        if self.backend not in ("mock", "http"):
            raise ValueError("backend must be 'mock' or 'http'")

    @property
    def appliance_names(self) -> tuple[str, ...]:
        return tuple(self.thresholds)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ExperimentSpec":
        base = Path(base_dir) if base_dir is not None else Path(".")

        def resolve(p):
            path = Path(p)
            return path if path.is_absolute() else base / path

        toggle_data = data.get("knowledge_toggle", {})
        toggle = KnowledgeToggle(
            include_power_range=bool(toggle_data.get("power_range", True)),
            include_duration=bool(toggle_data.get("duration", True)),
            include_pattern=bool(toggle_data.get("pattern", True)),
        )
        http = None
        if "http" in data:
            http = BackendConfig(**data["http"])
        thresholds = {
            normalize_appliance_name(name): float(value)
            for name, value in data["appliances"].items()
        }
        return cls(
            data_dir=resolve(data["data_dir"]),
            knowledge_houses=[str(h) for h in data.get("knowledge_houses", [])],
            test_houses=[str(h) for h in data.get("test_houses", [])],
            thresholds=thresholds,
            window_size=int(data.get("window_size", 100)),
            context_length=int(data.get("context_length", 10)),
            components=frozenset(data.get("components", ["OE", "KI", "CT"])),
            knowledge_toggle=toggle,
            window_sweep=[int(v) for v in data.get("window_sweep", DEFAULT_WINDOW_SWEEP)],
            context_sweep=[int(v) for v in data.get("context_sweep", DEFAULT_CONTEXT_SWEEP)],
            segment_slots=(
                int(data["segment_slots"]) if data.get("segment_slots") is not None
                else None if "segment_slots" in data else DEFAULT_SEGMENT_SLOTS
            ),
            seed=int(data.get("seed", 0)),
            backend=str(data.get("backend", "mock")),
            http=http,
            profiles_path=resolve(data["profiles_path"]) if data.get("profiles_path") else None,
            out_dir=resolve(data.get("out_dir", "out")),
            cost_confirm_tokens=int(data.get("cost_confirm_tokens", 250_000)),
            allow_house_overlap=bool(data.get("allow_house_overlap", False)),
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentSpec":
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(data, base_dir=path.parent)


@dataclass
class PreparedHouse:
    """One house on the common 6-second grid, ready for inference."""

    house_id: str
    aggregate: UniformSeries
    eval_aggregate: UniformSeries
    appliance_power: dict[str, UniformSeries]
    truth: dict[str, StateSeries]

    def clip(self, n_slots: int | None) -> "PreparedHouse":
        if n_slots is None or n_slots >= len(self.aggregate):
            return self
        def cut(series: UniformSeries) -> UniformSeries:
            return UniformSeries(
                series.start_timestamp, series.values[:n_slots], series.gap_mask[:n_slots]
            )
        return PreparedHouse(
            house_id=self.house_id,
            aggregate=cut(self.aggregate),
            eval_aggregate=cut(self.eval_aggregate),
            appliance_power={n: cut(s) for n, s in self.appliance_power.items()},
            truth={
                n: StateSeries(n, s.states[:n_slots]) for n, s in self.truth.items()
            },
        )


def prepare_house(
    spec: ExperimentSpec,
    house_id: str,
    require_all_appliances: bool = True,
) -> PreparedHouse:
    """Load, resample, backfill, aggregate, and threshold one house.

    The eval aggregate's gap mask is the union of the aggregate's own gaps
    and every appliance channel's gaps, so windows with undefined truth are
    skipped together with windows of missing aggregate data.
    """
    house_dir = spec.data_dir / f"house_{house_id}"
    layout = layout_from_json(house_dir / "layout.json")
    layout.validate()

    present = [n for n in spec.appliance_names if n in layout.appliance_channels]
    missing = [n for n in spec.appliance_names if n not in layout.appliance_channels]
    if require_all_appliances and missing:
        raise ValueError(f"house {house_id} lacks channels for {missing}")

    channels = load_house(house_dir, layout)
    grid_start, grid_end = common_grid(list(channels.values()))
    uniform = {
        ch: backfill(resample_mean(series, grid_start, grid_end), limit=1)
        for ch, series in channels.items()
    }
    aggregate = aggregate_mains([uniform[c] for c in layout.mains_channels], layout.region)

    appliance_power: dict[str, UniformSeries] = {}
    truth: dict[str, StateSeries] = {}
    union_gaps = aggregate.gap_mask.copy()
    for name in present:
        series = uniform[layout.appliance_channels[name]]
        appliance_power[name] = series
        union_gaps |= series.gap_mask
        truth[name] = threshold_states(
            fill_gaps(series), ApplianceSpec(name, spec.thresholds[name])
        )
    eval_aggregate = UniformSeries(
        aggregate.start_timestamp, aggregate.values.copy(), union_gaps
    )
    return PreparedHouse(
        house_id=house_id,
        aggregate=aggregate,
        eval_aggregate=eval_aggregate,
        appliance_power=appliance_power,
        truth=truth,
    )


@dataclass
class Materials:
    """Knowledge products shared by every configuration of an experiment."""

    profiles: list[ApplianceProfile]
    knowledge_houses: list[PreparedHouse]


def load_materials(spec: ExperimentSpec) -> Materials:
    """Extract (or load) appliance profiles and keep knowledge houses around
    for one-shot example selection."""
    houses = [
        prepare_house(spec, house_id, require_all_appliances=False)
        for house_id in spec.knowledge_houses
    ]
    if spec.profiles_path is not None:
        by_name = {p.name: p for p in read_profiles(spec.profiles_path)}
        missing = [n for n in spec.appliance_names if n not in by_name]
        if missing:
            raise ValueError(f"profile file lacks appliances {missing}")
        profiles = [by_name[n] for n in spec.appliance_names]
        return Materials(profiles=profiles, knowledge_houses=houses)

    profiles = []
    for name in spec.appliance_names:
        pairs = [
            (house.appliance_power[name], house.truth[name])
            for house in houses
            if name in house.appliance_power
        ]
        if not pairs:
            raise ValueError(f"appliance {name!r} is absent from every knowledge house")
        profiles.append(extract_profile_pooled(pairs, name=name))
    return Materials(profiles=profiles, knowledge_houses=houses)


def pick_example(
    spec: ExperimentSpec,
    materials: Materials,
    window_size: int,
) -> OneShotExample:
    """Choose the one-shot example from the first knowledge house.

    Falls back to the shipped default example when no knowledge data is
    available. Missing appliances are filled with all-OFF rows so the example
    always covers the configured appliance set.
    """
    if not materials.knowledge_houses:
        return default_example(spec.appliance_names)
    house = materials.knowledge_houses[0]
    try:
        example = select_one_shot(
            house.aggregate,
            house.truth,
            window_size=window_size,
            rng=random.Random(spec.seed),
        )
    except ValueError:
        return default_example(spec.appliance_names)
    n = len(example.aggregate_values)
    states = {
        name: example.states.get(name, [0] * n) for name in spec.appliance_names
    }
    return OneShotExample(aggregate_values=example.aggregate_values, states=states)


def make_prompt_config(
    spec: ExperimentSpec,
    components: frozenset[str],
    window_size: int | None = None,
    context_length: int | None = None,
    explanation_mode: bool = False,
) -> PromptConfig:
    use_context = "CT" in components
    return PromptConfig(
        window_size=window_size or spec.window_size,
        appliance_names=spec.appliance_names,
        context_length=(
            (context_length if context_length is not None else spec.context_length)
            if use_context else 0
        ),
        include_one_shot="OE" in components,
        include_knowledge="KI" in components,
        knowledge_toggle=spec.knowledge_toggle,
        include_timestamps="TS" in components,
        include_context=use_context,
        explanation_mode=explanation_mode,
    )


def run_configuration(
    spec: ExperimentSpec,
    tests: list[PreparedHouse],
    prompt_cfg: PromptConfig,
    backend: Backend,
    materials: Materials,
) -> tuple[ScoreReport, list[SeriesResult]]:
    """Evaluate one prompt configuration over every test house."""
    profiles = materials.profiles if prompt_cfg.include_knowledge else None
    example = (
        pick_example(spec, materials, prompt_cfg.window_size)
        if prompt_cfg.include_one_shot else None
    )

    counts: dict[str, metrics.ConfusionCounts] = {
        name: metrics.ConfusionCounts() for name in spec.appliance_names
    }
    outcomes = []
    results = []
    for house in tests:
        run_cfg = RunConfig(
            prompt=prompt_cfg,
            backend=backend,
            profiles=profiles,
            example=example,
            segment=house.house_id,
        )
        result = run_series(house.eval_aggregate, house.truth, run_cfg)
        slots = result.slot_indices()
        for name in spec.appliance_names:
            truth_slice = StateSeries(name, house.truth[name].states[slots])
            counts[name] = counts[name] + confusion(result.predictions[name], truth_slice)
        outcomes.extend(result.outcomes)
        results.append(result)
    if not outcomes:
        raise EmptyRun("no windows were processed in any test house")
    return build_report(counts, outcomes), results


@dataclass
class SweepRow:
    label: str
    window_size: int
    context_length: int
    report: ScoreReport | None = None
    prompt_tokens: int = 0
    completion_tokens: int = 0
    prompt_chars: int = 0
    error: str = ""


@dataclass
class SweepResult:
    axis: str
    appliances: list[str]
    rows: list[SweepRow]

    def to_csv(self, path: str | Path) -> None:
        header = (
            ["label", "window_size", "context_length", "precision", "recall", "f1"]
            + [f"f1_{name}" for name in self.appliances]
            + ["prompt_tokens", "completion_tokens", "prompt_chars",
               "misaligned_rate", "malformed_rate", "error"]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in self.rows:
                if row.report is None:
                    scores_part = ["", "", ""] + ["" for _ in self.appliances]
                    rates_part = ["", ""]
                else:
                    o = row.report.overall
                    scores_part = [f"{o.precision:.4f}", f"{o.recall:.4f}", f"{o.f1:.4f}"]
                    scores_part += [
                        f"{row.report.per_appliance[name].f1:.4f}"
                        for name in self.appliances
                    ]
                    rates_part = [
                        f"{row.report.rates.misaligned_rate:.4f}",
                        f"{row.report.rates.malformed_rate:.4f}",
                    ]
                writer.writerow(
                    [row.label, row.window_size, row.context_length]
                    + scores_part
                    + [row.prompt_tokens, row.completion_tokens, row.prompt_chars]
                    + rates_part
                    + [row.error]
                )

    def to_json(self, path: str | Path) -> None:
        data = {
            "axis": self.axis,
            "rows": [
                {
                    "label": row.label,
                    "window_size": row.window_size,
                    "context_length": row.context_length,
                    "report": metrics.report_to_dict(row.report) if row.report else None,
                    "prompt_tokens": row.prompt_tokens,
                    "completion_tokens": row.completion_tokens,
                    "prompt_chars": row.prompt_chars,
                    "error": row.error,
                }
                for row in self.rows
            ],
        }
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def prepare_tests(spec: ExperimentSpec) -> list[PreparedHouse]:
    return [
        prepare_house(spec, house_id).clip(spec.segment_slots)
        for house_id in spec.test_houses
    ]


def _execute_rows(
    spec: ExperimentSpec,
    tests: list[PreparedHouse],
    materials: Materials,
    backend: Backend,
    axis: str,
    settings: list[tuple[str, PromptConfig]],
) -> SweepResult:
    rows = []
    for label, prompt_cfg in settings:
        row = SweepRow(
            label=label,
            window_size=prompt_cfg.window_size,
            context_length=prompt_cfg.context_length,
        )
        try:
            report, results = run_configuration(spec, tests, prompt_cfg, backend, materials)
        except PromptNilmError as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        else:
            row.report = report
            row.prompt_tokens = sum(r.prompt_tokens for r in results)
            row.completion_tokens = sum(r.completion_tokens for r in results)
            # steady-state prompt size: the first window lacks context, so the
            # largest window prompt is the representative one
            row.prompt_chars = max(
                (t["prompt_chars"] for r in results for t in r.trace), default=0
            )
        rows.append(row)
    return SweepResult(axis=axis, appliances=list(spec.appliance_names), rows=rows)


def run_ablation(spec: ExperimentSpec, backend: Backend | None = None) -> SweepResult:
    """Evaluate the six prompt-component combinations on the test segment."""
    backend = backend or default_backend(spec)
    tests = prepare_tests(spec)
    materials = load_materials(spec)
    settings = [
        (label, make_prompt_config(spec, comps)) for label, comps in ABLATION_COMBOS
    ]
    return _execute_rows(spec, tests, materials, backend, "components", settings)


def run_sweep(spec: ExperimentSpec, axis: str, backend: Backend | None = None) -> SweepResult:
    """Sweep window size or context length at otherwise fixed parameters."""
    if axis not in ("window", "context"):
        raise ValueError("axis must be 'window' or 'context'")
    backend = backend or default_backend(spec)
    tests = prepare_tests(spec)
    materials = load_materials(spec)
    if axis == "window":
        settings = [
            (str(v), make_prompt_config(spec, spec.components, window_size=v))
            for v in spec.window_sweep
        ]
    else:
        if "CT" not in spec.components:
            raise ValueError("context sweep requires the CT component")
        settings = [
            (str(v), make_prompt_config(spec, spec.components, context_length=v))
            for v in spec.context_sweep
        ]
    return _execute_rows(spec, tests, materials, backend, axis, settings)


def run_eval(
    spec: ExperimentSpec, backend: Backend | None = None
) -> tuple[ScoreReport, list[SeriesResult]]:
    """Full evaluation at the configured components, window, and context."""
    backend = backend or default_backend(spec)
    tests = prepare_tests(spec)
    materials = load_materials(spec)
    prompt_cfg = make_prompt_config(spec, spec.components)
    return run_configuration(spec, tests, prompt_cfg, backend, materials)


def default_backend(spec: ExperimentSpec) -> Backend:
    return make_backend(spec.backend, spec.http)


def projected_prompt_tokens(
    spec: ExperimentSpec,
    tests: list[PreparedHouse],
    materials: Materials,
    prompt_cfgs: list[PromptConfig],
) -> int:
    """Upper-bound token estimate for a run, computed before any backend call."""
    total = 0
    for cfg in prompt_cfgs:
        windows = sum(len(house.eval_aggregate) // cfg.window_size for house in tests)
        if windows == 0:
            continue
        sample = tests[0].eval_aggregate
        values = tuple(
            0.0 if sample.gap_mask[i] else float(v)
            for i, v in enumerate(sample.values[:cfg.window_size])
        )
        window = WindowInput(
            aggregate_values=values,
            timestamps=default_clock(cfg.window_size) if cfg.include_timestamps else None,
        )
        profiles = materials.profiles if cfg.include_knowledge else None
        example = (
            pick_example(spec, materials, cfg.window_size)
            if cfg.include_one_shot else None
        )
        context = None
        if cfg.include_context:
            context = ContextBlock(
                {name: [0] * cfg.context_length for name in cfg.appliance_names}
            )
        text = build_prompt(cfg, window, context=context,
                            profiles=profiles, example=example)
        total += approx_token_count(text) * windows
    return total


def write_trace_jsonl(path: str | Path, results: list[SeriesResult]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for result in results:
            for row in result.trace:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
