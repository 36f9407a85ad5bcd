"""Tracking metrics: average overlap, success rate/AUC, center-error precision."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Box, center_distance, iou, normalized_center_distance

THRESHOLDS = np.arange(21) / 20.0
PRECISION_PX = 20.0
PRECISION_NORM = 0.2


def _check(preds, gts):
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions for {len(gts)} ground-truth boxes")
    if len(preds) == 0:
        raise ValueError("empty prediction list")


def _scored(preds, gts):
    """Drop the initialisation frame unless it is the only one."""
    _check(preds, gts)
    if len(preds) == 1:
        return list(preds), list(gts)
    return list(preds[1:]), list(gts[1:])


def overlaps(preds, gts) -> np.ndarray:
    p, g = _scored(preds, gts)
    return np.array([iou(a, b) for a, b in zip(p, g)])


def average_overlap(preds, gts) -> float:
    return float(overlaps(preds, gts).mean())


def _success(ious: np.ndarray, tau: float) -> float:
    return float(np.mean(ious > tau))


def success_rate(preds, gts, tau: float) -> float:
    if not 0.0 <= tau <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    return _success(overlaps(preds, gts), tau)


def success_curve(preds, gts, thresholds=THRESHOLDS) -> np.ndarray:
    ious = overlaps(preds, gts)
    return np.array([_success(ious, t) for t in thresholds])


def success_auc(preds, gts) -> float:
    return float(success_curve(preds, gts).mean())


def precision(preds, gts) -> tuple[float, float]:
    """(P at 20 px, P_norm at 0.2 of the gt diagonal), inclusive thresholds."""
    p, g = _scored(preds, gts)
    err = np.array([center_distance(a, b) for a, b in zip(p, g)])
    nerr = np.array([normalized_center_distance(a, b) for a, b in zip(p, g)])
    return float(np.mean(err <= PRECISION_PX)), float(np.mean(nerr <= PRECISION_NORM))


# -- reports -------------------------------------------------------------------
@dataclass
class SequenceScore:
    name: str
    frames: int
    ao: float
    sr50: float
    sr75: float
    auc: float
    p: float
    p_norm: float
    ms_per_frame: float | None = None


@dataclass
class EvalReport:
    sequences: list[SequenceScore] = field(default_factory=list)
    ious: np.ndarray = field(default_factory=lambda: np.zeros(0))
    center_err: np.ndarray = field(default_factory=lambda: np.zeros(0))
    norm_err: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def add(self, name: str, preds, gts, ms_per_frame: float | None = None) -> SequenceScore:
        p, g = _scored(preds, gts)
        ious = np.array([iou(a, b) for a, b in zip(p, g)])
        ce = np.array([center_distance(a, b) for a, b in zip(p, g)])
        ne = np.array([normalized_center_distance(a, b) for a, b in zip(p, g)])
        score = _score(name, ious, ce, ne, ms_per_frame)
        self.sequences.append(score)
        self.ious = np.concatenate([self.ious, ious])
        self.center_err = np.concatenate([self.center_err, ce])
        self.norm_err = np.concatenate([self.norm_err, ne])
        return score

    def overall(self) -> SequenceScore:
        """Pooled over every scored frame of every sequence."""
        if self.ious.size == 0:
            raise ValueError("no sequences in report")
        ms = [s.ms_per_frame for s in self.sequences if s.ms_per_frame is not None]
        return _score("ALL", self.ious, self.center_err, self.norm_err,
                      float(np.mean(ms)) if ms else None)

    def curve(self) -> np.ndarray:
        return np.array([_success(self.ious, t) for t in THRESHOLDS])

    @property
    def ao(self) -> float:
        return self.overall().ao

    def rows(self) -> list[SequenceScore]:
        return self.sequences + [self.overall()]

    def to_tsv(self) -> str:
        cols = ["sequence", "frames", "AO", "SR50", "SR75", "AUC", "P", "P_norm", "ms_per_frame"]
        lines = ["\t".join(cols)]
        for s in self.rows():
            ms = "" if s.ms_per_frame is None else repr(float(s.ms_per_frame))
            lines.append("\t".join([s.name, str(s.frames)]
                                   + [repr(float(v)) for v in (s.ao, s.sr50, s.sr75, s.auc,
                                                               s.p, s.p_norm)] + [ms]))
        return "\n".join(lines) + "\n"

    def curve_tsv(self) -> str:
        lines = ["threshold\trate"]
        lines += [f"{t!r}\t{r!r}" for t, r in zip(THRESHOLDS.tolist(), self.curve().tolist())]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        """Aligned columns, percentages with one decimal."""
        head = ["sequence", "frames", "AO", "SR0.5", "SR0.75", "AUC", "P", "P_norm", "ms/frame"]
        body = []
        for s in self.rows():
            ms = "-" if s.ms_per_frame is None else f"{s.ms_per_frame:.2f}"
            body.append([s.name, str(s.frames)]
                        + [f"{100 * v:.1f}" for v in (s.ao, s.sr50, s.sr75, s.auc, s.p, s.p_norm)]
                        + [ms])
        widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
        fmt = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w)  # noqa: E731
                                  for i, (c, w) in enumerate(zip(r, widths)))
        return "\n".join([fmt(head)] + [fmt(r) for r in body]) + "\n"


def _score(name, ious, ce, ne, ms) -> SequenceScore:
    auc = float(np.mean([_success(ious, t) for t in THRESHOLDS]))
    return SequenceScore(name, int(ious.size), float(ious.mean()), _success(ious, 0.5),
                         _success(ious, 0.75), auc, float(np.mean(ce <= PRECISION_PX)),
                         float(np.mean(ne <= PRECISION_NORM)), ms)


def evaluate(results: dict, gts: dict, times: dict | None = None) -> EvalReport:
    """Score name -> predicted boxes against name -> gt boxes, sorted by name."""
    report = EvalReport()
    for name in sorted(results):
        if name not in gts:
            raise KeyError(f"no ground truth for sequence {name!r}")
        report.add(name, results[name], gts[name], (times or {}).get(name))
    return report
