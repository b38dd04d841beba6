"""Displacement-error metrics and sorted-error exports.

ADE averages the Euclidean position error over the horizon; FDE is the
error at the final step. Multi-modal predictions score as the mode
closest to the ground truth (lowest ADE), independent of the mode
probabilities. Sorted-error tables order all windows by one reference
model's ADE so algorithms can be compared across the whole error
spectrum rather than by a single mean.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .multimodal import ModeSet


@dataclass(frozen=True)
class ErrorRecord:
    agent_id: str
    t0: float
    model: str
    ade: float
    fde: float
    mode_index: int

    def window_key(self) -> tuple:
        return (self.agent_id, self.t0)


@dataclass(frozen=True)
class SummaryRow:
    model: str
    mean_ade: float
    mean_fde: float
    n_windows: int


def ade_fde(pred_positions, gt_positions) -> tuple[float, float]:
    """Average and final displacement error between two equal-length
    position sequences of shape (n, 2)."""
    pred = np.asarray(pred_positions, dtype=float)
    gt = np.asarray(gt_positions, dtype=float)
    if pred.shape != gt.shape or pred.ndim != 2 or len(pred) < 1:
        raise ValueError(f"position shapes differ: {pred.shape} vs {gt.shape}")
    dx = pred[:, 0] - gt[:, 0]
    dy = pred[:, 1] - gt[:, 1]
    dist = np.sqrt(dx * dx + dy * dy)
    return float(dist.mean()), float(dist[-1])


def min_over_modes(modes: ModeSet, gt_positions) -> tuple[float, float, int]:
    """Score a mode set against the ground truth: (ade, fde, index) of
    the mode with minimal ADE; FDE comes from that same mode. Ties go
    to the lower mode index."""
    best = None
    for i, mode in enumerate(modes):
        a, f = ade_fde(mode.trace.positions, gt_positions)
        if best is None or a < best[0]:
            best = (a, f, i)
    return best


def summarize(records: Sequence[ErrorRecord]) -> list[SummaryRow]:
    """Per-model mean ADE/FDE. All models must cover the identical set
    of windows, otherwise the means would not be comparable."""
    if not records:
        raise ValueError("no records to summarize")
    per_model: dict[str, list[ErrorRecord]] = {}
    for r in records:
        per_model.setdefault(r.model, []).append(r)
    window_sets = {m: frozenset(r.window_key() for r in rs)
                   for m, rs in per_model.items()}
    reference = next(iter(window_sets.values()))
    for model, ws in window_sets.items():
        if ws != reference:
            raise ValueError(f"model {model} was evaluated on a different window set")
    return [SummaryRow(model=m,
                       mean_ade=float(np.mean([r.ade for r in rs])),
                       mean_fde=float(np.mean([r.fde for r in rs])),
                       n_windows=len(rs))
            for m, rs in sorted(per_model.items())]


def sorted_errors(records: Sequence[ErrorRecord],
                  reference_model: str) -> tuple[list[str], list[list]]:
    """Plot-ready sorted-error table.

    Windows are ordered by the reference model's ADE ascending; each
    row carries every model's ADE for that window in the fixed order.
    Returns (column names, rows) where columns are
    [rank, agent_id, t0, <model>...].
    """
    per_model: dict[str, dict[tuple, ErrorRecord]] = {}
    for r in records:
        per_model.setdefault(r.model, {})[r.window_key()] = r
    if reference_model not in per_model:
        raise KeyError(f"reference model {reference_model!r} not in records")
    ref = per_model[reference_model]
    for model, recs in per_model.items():
        if set(recs) != set(ref):
            raise ValueError(f"model {model} covers a different window set "
                             f"than {reference_model}")
    models = sorted(per_model)
    # stable ordering: ADE, then window key, so ties cannot reshuffle
    ordered = sorted(ref.values(), key=lambda r: (r.ade, r.window_key()))
    columns = ["rank", "agent_id", "t0", *models]
    rows = []
    for rank, r in enumerate(ordered):
        key = r.window_key()
        rows.append([rank, key[0], key[1],
                     *[per_model[m][key].ade for m in models]])
    return columns, rows
