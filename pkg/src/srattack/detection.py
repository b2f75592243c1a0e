"""Detector-score evaluation: confusion counts, rate metrics, ROC curves, AUC.

Scores come from external detectors as fake-probabilities in [0, 1], keyed by
the manifest path of the (unattacked) source image.  Fake is the positive
class throughout: FNR counts fake samples classified as pristine.  The
operating point is score >= threshold => predicted fake, threshold 0.5 by
default, ties predicted fake.

Two evaluation setups are supported:
  attack_both      - the SR rows score every image from the attacked file;
  attack_fake_only - pristine records always come from the plain score file,
                     so the FPR column is bit-identical across SR/no-SR rows.
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

from .manifest import ManifestEntry, FAKE_METHODS

__all__ = [
    "ScoreRecord",
    "ConfusionCounts",
    "EvalRow",
    "read_scores",
    "confusion_at_threshold",
    "classification_metrics",
    "roc_curve",
    "auc",
    "setup_records",
    "evaluate_setup",
    "write_report_csv",
    "write_roc_csv",
]


@dataclass(frozen=True)
class ScoreRecord:
    image_id: str
    score: float  # fake-probability in [0, 1]
    label: str  # "pristine" | "fake"
    attacked: bool
    method: str

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1] for {self.image_id}")
        if self.label not in ("pristine", "fake"):
            raise ValueError(f"unknown label {self.label!r}")


class ConfusionCounts(NamedTuple):
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass
class EvalRow:
    model: str
    method: str
    sr: bool
    fnr: Optional[float]
    fpr: Optional[float]
    recall: Optional[float]
    precision: Optional[float]
    accuracy: float
    auc: float  # percentage, like the rates


def read_scores(path) -> dict[str, float]:
    """Parse a score CSV (`image_path,score` with header) into a dict."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such score file: {path}")
    scores: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header[:2]] != ["image_path", "score"]:
            raise ValueError(f"{path}: expected header 'image_path,score'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ValueError(f"{path}:{lineno}: malformed row {row!r}")
            image_path, raw = row[0], row[1]
            try:
                score = float(raw)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric score {raw!r}") from None
            if not 0.0 <= score <= 1.0:
                raise ValueError(f"{path}:{lineno}: score {score} outside [0, 1]")
            if image_path in scores:
                raise ValueError(f"{path}:{lineno}: duplicate score for {image_path}")
            scores[image_path] = score
    return scores


def confusion_at_threshold(records: Iterable[ScoreRecord], threshold: float = 0.5) -> ConfusionCounts:
    """Tally counts with fake positive; score >= threshold predicts fake."""
    tp = fp = tn = fn = 0
    n = 0
    for rec in records:
        n += 1
        predicted_fake = rec.score >= threshold
        actually_fake = rec.label == "fake"
        if predicted_fake and actually_fake:
            tp += 1
        elif predicted_fake:
            fp += 1
        elif actually_fake:
            fn += 1
        else:
            tn += 1
    if n == 0:
        raise ValueError("no records to threshold")
    return ConfusionCounts(tp, fp, tn, fn)


def classification_metrics(c: ConfusionCounts) -> dict:
    """Rates as percentages; undefined rates are None, never a silent 0.

    fnr = 100*fn/(tp+fn), fpr = 100*fp/(fp+tn), recall = 100*tp/(tp+fn),
    precision = 100*tp/(tp+fp), accuracy = 100*(tp+tn)/total.
    """
    total = c.tp + c.fp + c.tn + c.fn
    if total == 0:
        raise ValueError("empty confusion counts")
    pos = c.tp + c.fn
    neg = c.fp + c.tn
    pred_pos = c.tp + c.fp
    return {
        "fnr": 100.0 * c.fn / pos if pos else None,
        "fpr": 100.0 * c.fp / neg if neg else None,
        "recall": 100.0 * c.tp / pos if pos else None,
        "precision": 100.0 * c.tp / pred_pos if pred_pos else None,
        "accuracy": 100.0 * (c.tp + c.tn) / total,
    }


def roc_curve(records: Iterable[ScoreRecord]) -> list[tuple[float, float]]:
    """(fpr, tpr) points: thresholds swept over distinct scores descending,
    endpoints (0,0) and (1,1) included; nondecreasing in both coordinates."""
    recs = list(records)
    n_fake = sum(1 for r in recs if r.label == "fake")
    n_pristine = len(recs) - n_fake
    if n_fake == 0 or n_pristine == 0:
        raise ValueError("ROC needs at least one fake and one pristine record")
    by_score = sorted(recs, key=lambda r: -r.score)
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(by_score):
        s = by_score[i].score
        while i < len(by_score) and by_score[i].score == s:
            if by_score[i].label == "fake":
                tp += 1
            else:
                fp += 1
            i += 1
        points.append((fp / n_pristine, tp / n_fake))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return points


def auc(curve: list[tuple[float, float]]) -> float:
    """Trapezoidal area under an ROC curve, in [0, 1].

    Equals the tie-corrected pairwise probability
    P(score_fake > score_pristine) + 0.5 * P(equal).
    """
    if len(curve) < 2:
        raise ValueError("a curve needs at least two points")
    area = 0.0
    for (x0, y0), (x1, y1) in zip(curve, curve[1:]):
        if x1 < x0:
            raise ValueError("curve not sorted by fpr")
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def _lookup(scores: dict[str, float], entry: ManifestEntry, which: str) -> float:
    try:
        return scores[entry.path]
    except KeyError:
        raise ValueError(f"{which} score file has no entry for {entry.path}") from None


def _setup_methods(entries: list[ManifestEntry]) -> tuple[list[ManifestEntry], list[str]]:
    pristine = [e for e in entries if e.label == "pristine"]
    methods = []
    for e in entries:
        if e.label == "fake":
            if e.method not in FAKE_METHODS:
                raise ValueError(f"unknown forgery method {e.method!r} for {e.path}")
            if e.method not in methods:
                methods.append(e.method)
    if not pristine or not methods:
        raise ValueError("need both pristine entries and fake entries to evaluate")
    return pristine, sorted(methods)


def setup_records(
    entries: list[ManifestEntry],
    scores_plain: dict[str, float],
    scores_attacked: dict[str, float],
    setup: str,
    method: str,
    sr: bool,
) -> list[ScoreRecord]:
    """Score records for one (method, sr) cell under the given setup."""
    if setup not in ("attack_both", "attack_fake_only"):
        raise ValueError(f"unknown setup {setup!r}")
    records = []
    for e in entries:
        if e.label == "pristine":
            attacked = sr and setup == "attack_both"
            table = scores_attacked if attacked else scores_plain
            records.append(
                ScoreRecord(e.path, _lookup(table, e, "attacked" if attacked else "plain"),
                            "pristine", attacked, "none")
            )
        elif e.method == method:
            table = scores_attacked if sr else scores_plain
            records.append(
                ScoreRecord(e.path, _lookup(table, e, "attacked" if sr else "plain"),
                            "fake", sr, method)
            )
    return records


def evaluate_setup(
    entries: list[ManifestEntry],
    scores_plain: dict[str, float],
    scores_attacked: dict[str, float],
    setup: str,
    threshold: float = 0.5,
    model_tag: str = "detector",
) -> list[EvalRow]:
    """One (no-SR, SR) row pair per forgery method present in the entries.

    Both score files are keyed by the manifest (source) path; the attacked
    file holds the detector's scores on the attacked renditions.
    """
    _, methods = _setup_methods(entries)
    rows = []
    for method in methods:
        for sr in (False, True):
            records = setup_records(entries, scores_plain, scores_attacked, setup, method, sr)
            counts = confusion_at_threshold(records, threshold)
            m = classification_metrics(counts)
            rows.append(
                EvalRow(
                    model=model_tag,
                    method=method,
                    sr=sr,
                    fnr=m["fnr"],
                    fpr=m["fpr"],
                    recall=m["recall"],
                    precision=m["precision"],
                    accuracy=m["accuracy"],
                    auc=100.0 * auc(roc_curve(records)),
                )
            )
    return rows


def _cell(value) -> str:
    return "" if value is None else repr(value)


def write_report_csv(rows: list[EvalRow], path) -> None:
    """Full-precision EvalRow CSV (1-decimal presentation is the console's job)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["model", "method", "sr", "fnr", "fpr", "recall", "precision", "accuracy", "auc"])
        for r in rows:
            w.writerow(
                [r.model, r.method, int(r.sr), _cell(r.fnr), _cell(r.fpr), _cell(r.recall),
                 _cell(r.precision), repr(r.accuracy), repr(r.auc)]
            )


def write_roc_csv(curve: list[tuple[float, float]], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for fpr, tpr in curve:
            w.writerow([repr(fpr), repr(tpr)])
