"""Explanation mode: per-appliance natural-language rationales for one window.

Rationale prose is a human-review artifact. The audit table pairs each
claimed state with the ground truth and the model's own words; it asserts
structure only and makes no automated judgment of the prose.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .client import RawResponse
from .errors import ConfigMismatch
from .knowledge import ApplianceProfile
from .normalizer import NormalizationOutcome, WindowPrediction, normalize
from .prompt import ContextBlock, OneShotExample, PromptConfig, WindowInput, build_prompt


@dataclass
class ExplainedWindow:
    prediction: WindowPrediction
    rationales: dict[str, str]
    outcome: NormalizationOutcome
    missing_rationales: list[str]


@dataclass(frozen=True)
class AuditRow:
    appliance: str
    claimed_state: int
    true_state: int
    agreement: bool
    rationale: str


def explain_window(
    window: WindowInput,
    cfg: PromptConfig,
    backend: Callable[[str], RawResponse],
    profiles: list[ApplianceProfile] | None = None,
    example: OneShotExample | None = None,
    context: ContextBlock | None = None,
) -> ExplainedWindow:
    """Run one window with rationale capture enabled.

    The prediction is normalized exactly as in normal mode; rationales are
    kept verbatim, and appliances the model left without one are reported
    rather than treated as failures.
    """
    if not cfg.explanation_mode:
        raise ConfigMismatch("explain_window requires explanation_mode")
    prompt_text = build_prompt(cfg, window, context=context, profiles=profiles, example=example)
    response = backend(prompt_text)
    prediction, outcome = normalize(
        response.text, cfg.appliance_names, cfg.window_size, explanation_mode=True
    )
    rationales = prediction.explanations or {}
    missing = [name for name in cfg.appliance_names if name not in rationales]
    return ExplainedWindow(
        prediction=prediction,
        rationales=rationales,
        outcome=outcome,
        missing_rationales=missing,
    )


def audit_rationales(
    explained: ExplainedWindow,
    truth: dict[str, Sequence[int]],
    window: WindowInput,
) -> list[AuditRow]:
    """One audit row per appliance: claimed vs true window state plus prose.

    An appliance's window-level state is ON when any slot in the window is
    ON, matching how a reviewer reads a short snippet.
    """
    w = len(window.aggregate_values)
    rows: list[AuditRow] = []
    for name, states in explained.prediction.states.items():
        true_states = truth[name]
        if len(true_states) != w:
            raise ValueError(f"truth for {name} has {len(true_states)} slots, window has {w}")
        claimed = int(any(states))
        actual = int(any(int(s) for s in true_states))
        rows.append(AuditRow(
            appliance=name,
            claimed_state=claimed,
            true_state=actual,
            agreement=claimed == actual,
            rationale=explained.rationales.get(name, ""),
        ))
    return rows


def audit_to_markdown(rows: list[AuditRow]) -> str:
    lines = [
        "| appliance | claimed | truth | agrees | rationale |",
        "| --- | --- | --- | --- | --- |",
    ]
    for r in rows:
        rationale = r.rationale.replace("|", "\\|")
        lines.append(
            f"| {r.appliance} | {r.claimed_state} | {r.true_state} | "
            f"{'yes' if r.agreement else 'NO'} | {rationale} |"
        )
    return "\n".join(lines) + "\n"


def write_audit_csv(path: str | Path, rows: list[AuditRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["appliance", "claimed_state", "true_state", "agreement", "rationale"])
        for r in rows:
            writer.writerow([
                r.appliance, r.claimed_state, r.true_state,
                str(r.agreement).lower(), r.rationale,
            ])
