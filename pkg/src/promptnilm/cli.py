"""Command-line entry point.

Subcommands mirror the pipeline stages: `preprocess` exports aligned series
for inspection, `extract-knowledge` writes appliance profiles, `ablate`,
`sweep`, and `eval` produce CSV/JSON reports, and `explain` runs a single
window in explanation mode and emits the rationale audit table.

Live HTTP runs above the configured token budget are refused unless
--confirm-cost is passed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .client import make_backend
from .driver import context_tail, run_series
from .errors import PromptNilmError
from .explain import audit_rationales, audit_to_markdown, explain_window, write_audit_csv
from .knowledge import write_profiles
from .metrics import write_report_csv, write_report_json
from .normalizer import WindowPrediction
from .preprocess import export_csv
from .prompt import WindowInput


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="experiment config JSON")
    sub.add_argument("--backend", choices=["mock", "http"],
                     help="override the config's backend selection")
    sub.add_argument("--out", help="output directory (default from config)")
    sub.add_argument("--confirm-cost", action="store_true",
                     help="allow live runs above the configured token budget")


def _load(args) -> tuple[harness.ExperimentSpec, Path]:
    spec = harness.ExperimentSpec.from_json(args.config)
    if args.backend:
        spec.backend = args.backend
        spec.validate()
    out_dir = Path(args.out) if args.out else spec.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    return spec, out_dir


def _backend_with_guardrail(spec, args, tests, materials, prompt_cfgs):
    backend = make_backend(spec.backend, spec.http)
    if spec.backend != "http":
        return backend
    projected = harness.projected_prompt_tokens(spec, tests, materials, prompt_cfgs)
    if projected > spec.cost_confirm_tokens and not args.confirm_cost:
        raise SystemExit(
            f"projected ~{projected} prompt tokens exceeds the configured budget of "
            f"{spec.cost_confirm_tokens}; re-run with --confirm-cost to proceed"
        )
    return backend


def cmd_preprocess(args) -> int:
    spec, out_dir = _load(args)
    house_ids = [args.house] if args.house else spec.test_houses
    for house_id in house_ids:
        house = harness.prepare_house(spec, house_id).clip(spec.segment_slots)
        path = out_dir / f"preprocessed_house_{house_id}.csv"
        export_csv(path, house.aggregate, house.truth)
        print(f"wrote {path} ({len(house.aggregate)} slots)")
    return 0


def cmd_extract_knowledge(args) -> int:
    spec, out_dir = _load(args)
    materials = harness.load_materials(spec)
    path = out_dir / "profiles.json"
    write_profiles(path, materials.profiles)
    for p in materials.profiles:
        print(f"{p.name}: standby {p.standby_power:.1f} W, "
              f"range {p.on_power_min:.1f}-{p.on_power_max:.1f} W, {p.usage_pattern}")
    print(f"wrote {path}")
    return 0


def cmd_ablate(args) -> int:
    spec, out_dir = _load(args)
    tests = harness.prepare_tests(spec)
    materials = harness.load_materials(spec)
    prompt_cfgs = [harness.make_prompt_config(spec, comps)
                   for _, comps in harness.ABLATION_COMBOS]
    backend = _backend_with_guardrail(spec, args, tests, materials, prompt_cfgs)
    result = harness.run_ablation(spec, backend)
    result.to_csv(out_dir / "ablation.csv")
    result.to_json(out_dir / "ablation.json")
    for row in result.rows:
        if row.report is None:
            print(f"{row.label}: FAILED ({row.error})")
        else:
            print(f"{row.label}: F1={row.report.overall.f1:.4f} "
                  f"(~{row.prompt_chars} prompt chars)")
    print(f"wrote {out_dir / 'ablation.csv'}")
    return 0


def cmd_sweep(args) -> int:
    spec, out_dir = _load(args)
    tests = harness.prepare_tests(spec)
    materials = harness.load_materials(spec)
    if args.axis == "window":
        prompt_cfgs = [harness.make_prompt_config(spec, spec.components, window_size=v)
                       for v in spec.window_sweep]
    else:
        prompt_cfgs = [harness.make_prompt_config(spec, spec.components, context_length=v)
                       for v in spec.context_sweep]
    backend = _backend_with_guardrail(spec, args, tests, materials, prompt_cfgs)
    result = harness.run_sweep(spec, args.axis, backend)
    csv_path = out_dir / f"sweep_{args.axis}.csv"
    result.to_csv(csv_path)
    result.to_json(out_dir / f"sweep_{args.axis}.json")
    for row in result.rows:
        status = f"F1={row.report.overall.f1:.4f}" if row.report else f"FAILED ({row.error})"
        print(f"{args.axis}={row.label}: {status}")
    print(f"wrote {csv_path}")
    return 0


def cmd_eval(args) -> int:
    spec, out_dir = _load(args)
    tests = harness.prepare_tests(spec)
    materials = harness.load_materials(spec)
    prompt_cfg = harness.make_prompt_config(spec, spec.components)
    backend = _backend_with_guardrail(spec, args, tests, materials, [prompt_cfg])
    report, results = harness.run_configuration(spec, tests, prompt_cfg, backend, materials)
    write_report_csv(out_dir / "eval.csv", report)
    write_report_json(out_dir / "eval.json", report)
    harness.write_trace_jsonl(out_dir / "eval_trace.jsonl", results)
    for name, s in report.per_appliance.items():
        print(f"{name}: P={s.precision:.4f} R={s.recall:.4f} F1={s.f1:.4f}")
    o = report.overall
    print(f"overall: P={o.precision:.4f} R={o.recall:.4f} F1={o.f1:.4f}")
    print(f"wrote {out_dir / 'eval.csv'}")
    return 0


def cmd_explain(args) -> int:
    spec, out_dir = _load(args)
    materials = harness.load_materials(spec)
    house = harness.prepare_house(spec, spec.test_houses[0]).clip(spec.segment_slots)
    prompt_cfg = harness.make_prompt_config(spec, spec.components, explanation_mode=True)
    w = prompt_cfg.window_size
    backend = _backend_with_guardrail(spec, args, [house], materials, [prompt_cfg])

    # Run preceding windows normally so the explained window gets real context.
    lo = args.window_index * w
    if lo + w > len(house.eval_aggregate) or house.eval_aggregate.gap_mask[lo:lo + w].any():
        raise SystemExit(f"window {args.window_index} is unavailable or contains gaps")
    context = None
    if prompt_cfg.include_context and args.window_index > 0:
        upstream = house.clip(lo)
        base_cfg = harness.make_prompt_config(spec, spec.components)
        result = run_series(upstream.eval_aggregate, upstream.truth, harness.RunConfig(
            prompt=base_cfg,
            backend=backend,
            profiles=materials.profiles if base_cfg.include_knowledge else None,
            example=(harness.pick_example(spec, materials, w)
                     if base_cfg.include_one_shot else None),
            segment=house.house_id,
        ))
        if result.window_starts and result.window_starts[-1] == lo - w:
            last = {name: list(series.states[-w:])
                    for name, series in result.predictions.items()}
            context = context_tail(WindowPrediction(states=last), prompt_cfg.context_length)

    window = WindowInput(
        aggregate_values=tuple(float(v) for v in house.eval_aggregate.values[lo:lo + w]),
        timestamps=None,
    )
    explained = explain_window(
        window, prompt_cfg, backend,
        profiles=materials.profiles if prompt_cfg.include_knowledge else None,
        example=(harness.pick_example(spec, materials, w)
                 if prompt_cfg.include_one_shot else None),
        context=context,
    )
    truth = {name: [int(s) for s in series.states[lo:lo + w]]
             for name, series in house.truth.items()}
    rows = audit_rationales(explained, truth, window)
    write_audit_csv(out_dir / "explain_audit.csv", rows)
    (out_dir / "explain_audit.md").write_text(audit_to_markdown(rows), encoding="utf-8")
    print(audit_to_markdown(rows))
    if explained.missing_rationales:
        print(f"missing rationales: {', '.join(explained.missing_rationales)}")
    print(f"wrote {out_dir / 'explain_audit.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptnilm",
        description="Prompt-driven appliance state detection from aggregate power.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="export aligned series to CSV")
    p.add_argument("--house", help="single house id (default: all test houses)")
    _add_common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("extract-knowledge", help="extract appliance profiles")
    _add_common(p)
    p.set_defaults(func=cmd_extract_knowledge)

    p = sub.add_parser("ablate", help="run the prompt-component ablation")
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="sweep window size or context length")
    p.add_argument("--axis", choices=["window", "context"], required=True)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="full evaluation at the configured prompt")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="explanation-mode run over one window")
    p.add_argument("--window-index", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_explain)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PromptNilmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
