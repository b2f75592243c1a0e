"""Experiment manifest construction, validation and sidecar-file parsing.

A manifest is the CSV inventory driving every batch operation:

    path,label,method,split,video_id,frame_idx,box_x,box_y,box_w,box_h

Frame trees are laid out as <root>/original/<video_id>/ for pristine frames
and <root>/<Method>/<video_id>/ for manipulated ones.  Building samples a
fixed number of frames per (video, class) without replacement; the RNG is
seeded per video from the run seed, so the result is a pure function of
(directory listing, split, seed) and does not depend on scan order.

Face boxes are produced externally (any face detector) and arrive either in
the manifest itself or in a sidecar CSV `path,x,y,w,h` with one box per image.
"""

import csv
import json
import logging
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .image import BoundingBox

__all__ = [
    "FAKE_METHODS",
    "METHODS",
    "PRISTINE_DIR",
    "ManifestEntry",
    "SplitSpec",
    "ValidationReport",
    "build_manifest",
    "validate_manifest",
    "read_boxes",
    "read_manifest",
    "write_manifest",
    "read_split",
    "attach_boxes",
]

log = logging.getLogger(__name__)

FAKE_METHODS = frozenset(
    {"Deepfakes", "Face2Face", "FaceShifter", "FaceSwap", "NeuralTextures"}
)
METHODS = FAKE_METHODS | {"none"}

# directory holding unmanipulated frame trees under the frame root
PRISTINE_DIR = "original"


@dataclass(frozen=True)
class ManifestEntry:
    path: str  # forward-slash path, relative to the frame root
    label: str  # "pristine" | "fake"
    method: str
    split: str  # "train" | "test"
    video_id: str
    frame_idx: int
    box: Optional[BoundingBox] = None

    def __post_init__(self):
        if self.label not in ("pristine", "fake"):
            raise ValueError(f"unknown label {self.label!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if (self.label == "pristine") != (self.method == "none"):
            raise ValueError(
                f"label/method mismatch: {self.label}/{self.method} for {self.path}"
            )
        if self.split not in ("train", "test"):
            raise ValueError(f"unknown split {self.split!r}")
        if self.frame_idx < 0:
            raise ValueError(f"negative frame index for {self.path}")


@dataclass(frozen=True)
class SplitSpec:
    train: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self):
        train = tuple(self.train)
        test = tuple(self.test)
        if not train or not test:
            raise ValueError("both split halves must be non-empty")
        overlap = set(train) & set(test)
        if overlap:
            raise ValueError(f"split halves overlap: {sorted(overlap)[:5]}")
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "test", test)


def read_split(path) -> SplitSpec:
    """Split JSON: {"train": [video ids], "test": [video ids]}."""
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict) or "train" not in data or "test" not in data:
        raise ValueError(f"{path}: split JSON needs 'train' and 'test' arrays")
    return SplitSpec(tuple(str(v) for v in data["train"]), tuple(str(v) for v in data["test"]))


def _frame_index(stem: str, position: int) -> int:
    return int(stem) if stem.isdigit() else position


def _sample_video(
    root: Path,
    class_dir: str,
    video_id: str,
    label: str,
    method: str,
    split: str,
    frames_per_video: int,
    seed: int,
) -> list[ManifestEntry]:
    video_dir = root / class_dir / video_id
    if not video_dir.is_dir():
        raise FileNotFoundError(f"missing video directory: {video_dir}")
    frames = sorted(p for p in video_dir.iterdir() if p.is_file())
    if not frames:
        raise FileNotFoundError(f"no frames in {video_dir}")
    if len(frames) < frames_per_video:
        log.warning(
            "%s has only %d frames (< %d); taking all", video_dir, len(frames), frames_per_video
        )
        chosen = frames
    else:
        rng = random.Random(f"{seed}/{class_dir}/{video_id}")
        chosen = rng.sample(frames, frames_per_video)
    entries = []
    frames_pos = {p: i for i, p in enumerate(frames)}
    for p in chosen:
        rel = p.relative_to(root).as_posix()
        entries.append(
            ManifestEntry(
                path=rel,
                label=label,
                method=method,
                split=split,
                video_id=video_id,
                frame_idx=_frame_index(p.stem, frames_pos[p]),
            )
        )
    return entries


def build_manifest(
    frame_root,
    split: SplitSpec,
    method: str,
    frames_per_video: int = 10,
    seed: int = 0,
) -> list[ManifestEntry]:
    """Sample a balanced pristine/fake manifest for one forgery method.

    For every video id in the split, frames_per_video frames are drawn
    uniformly without replacement from both the pristine tree and the method
    tree.  Output ordering is lexicographic by (split, class, video id, frame
    index), independent of directory scan order.
    """
    if method not in FAKE_METHODS:
        raise ValueError(f"unknown forgery method {method!r}")
    if frames_per_video < 1:
        raise ValueError("frames_per_video must be >= 1")
    root = Path(frame_root)
    entries: list[ManifestEntry] = []
    for split_name, video_ids in (("train", split.train), ("test", split.test)):
        for video_id in video_ids:
            entries.extend(
                _sample_video(root, PRISTINE_DIR, video_id, "pristine", "none",
                              split_name, frames_per_video, seed)
            )
            entries.extend(
                _sample_video(root, method, video_id, "fake", method,
                              split_name, frames_per_video, seed)
            )
    entries.sort(key=lambda e: (e.split, e.label, e.video_id, e.frame_idx, e.path))
    return entries


@dataclass
class ValidationReport:
    entry_count: int
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_manifest(entries: list[ManifestEntry], root=None) -> ValidationReport:
    """Check class balance per split, path existence (under root) and box coverage."""
    violations: list[str] = []
    per_split: dict[str, dict[str, int]] = {}
    boxless = 0
    for e in entries:
        counts = per_split.setdefault(e.split, {"pristine": 0, "fake": 0})
        counts[e.label] += 1
        if e.box is None:
            boxless += 1
        if root is not None:
            p = Path(root) / e.path
            if not p.exists():
                violations.append(f"missing file: {e.path}")
    for split_name, counts in sorted(per_split.items()):
        if counts["pristine"] != counts["fake"]:
            violations.append(
                f"{split_name} split unbalanced: {counts['pristine']} pristine "
                f"vs {counts['fake']} fake"
            )
    if boxless:
        violations.append(f"{boxless} of {len(entries)} entries have no face box")
    return ValidationReport(entry_count=len(entries), violations=violations)


def read_boxes(path) -> dict[str, BoundingBox]:
    """Box sidecar CSV `path,x,y,w,h`, one box per image; header optional."""
    boxes: dict[str, BoundingBox] = {}
    with open(path, newline="", encoding="utf-8") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            if lineno == 1 and row[0].strip().lower() == "path":
                continue
            if len(row) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 cells, got {len(row)}")
            key = row[0]
            try:
                x, y, w, h = (int(v) for v in row[1:])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer box cell in {row!r}") from None
            if key in boxes:
                raise ValueError(f"{path}:{lineno}: duplicate box for {key} (ambiguous face)")
            try:
                boxes[key] = BoundingBox(x, y, w, h)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return boxes


def attach_boxes(entries: list[ManifestEntry], boxes: dict[str, BoundingBox]) -> list[ManifestEntry]:
    """Return entries with boxes merged in by path (existing boxes overridden)."""
    return [replace(e, box=boxes[e.path]) if e.path in boxes else e for e in entries]


_HEADER = ["path", "label", "method", "split", "video_id", "frame_idx",
           "box_x", "box_y", "box_w", "box_h"]


def write_manifest(entries: list[ManifestEntry], path) -> None:
    """UTF-8, LF-terminated manifest CSV; box cells empty when absent."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(_HEADER)
        for e in entries:
            box_cells = [e.box.x, e.box.y, e.box.w, e.box.h] if e.box else ["", "", "", ""]
            w.writerow([e.path, e.label, e.method, e.split, e.video_id, e.frame_idx, *box_cells])


def read_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such manifest: {path}")
    entries = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != _HEADER:
            raise ValueError(f"{path}: unexpected manifest header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(_HEADER)} cells")
            box = None
            if any(cell.strip() for cell in row[6:10]):
                try:
                    x, y, w, h = (int(v) for v in row[6:10])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: malformed box cells") from None
                box = BoundingBox(x, y, w, h)
            try:
                entries.append(
                    ManifestEntry(
                        path=row[0],
                        label=row[1],
                        method=row[2],
                        split=row[3],
                        video_id=row[4],
                        frame_idx=int(row[5]),
                        box=box,
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return entries
