"""Video sequence datasets: manifest loading, mirroring, subject splits."""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import DatasetError

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".tif", ".tiff")


@dataclass
class Video:
    frames: np.ndarray  # (T, H, W) float
    label: str
    subject: str
    source: str = ""
    mirrored: bool = False
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.ndim != 3 or len(self.frames) == 0:
            raise DatasetError(f"video {self.source!r} must be a nonempty (T, H, W) stack")

    def __len__(self):
        return len(self.frames)

    @property
    def key(self):
        return f"{self.label}|{self.subject}|{self.source}|{int(self.mirrored)}"

    def flipped(self):
        return Video(self.frames[:, :, ::-1].copy(), self.label, self.subject, self.source, not self.mirrored)


@dataclass
class SequenceDataset:
    videos: list
    target: tuple = None  # (width, height)
    mirrored: bool = False
    report: list = field(default_factory=list)

    def __post_init__(self):
        if not self.videos:
            raise DatasetError("dataset is empty", self.report)

    def __len__(self):
        return len(self.videos)

    def __iter__(self):
        return iter(self.videos)

    @property
    def classes(self):
        return sorted({v.label for v in self.videos}, key=_natural_key)

    @property
    def subjects(self):
        return sorted({v.subject for v in self.videos}, key=_natural_key)

    def subset(self, subjects):
        keep = set(subjects)
        vids = [v for v in self.videos if v.subject in keep]
        return SequenceDataset(vids, self.target, self.mirrored, list(self.report))

    def with_mirrors(self):
        """Append a horizontally flipped copy of every sequence."""
        if self.mirrored:
            return self
        return SequenceDataset(self.videos + [v.flipped() for v in self.videos], self.target, True,
                               list(self.report))


def _natural_key(s):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", str(s))]


def split_subjects(dataset, train_subjects):
    """``(train, test)`` datasets partitioned by subject id."""
    train = [s for s in dataset.subjects if s in set(train_subjects)]
    test = [s for s in dataset.subjects if s not in set(train_subjects)]
    return dataset.subset(train), dataset.subset(test)


def read_frame(path, target=None):
    """8-bit grayscale image as float array, bilinearly resized to ``target = (width, height)``."""
    with Image.open(path) as im:
        im = im.convert("L")
        if target is not None and im.size != tuple(target):
            im = im.resize(tuple(target), Image.BILINEAR)
        return np.asarray(im, dtype=float)


def list_frames(directory):
    return sorted(f for f in os.listdir(directory) if f.lower().endswith(IMAGE_EXTENSIONS))


def load_frames(directory, target=None):
    names = list_frames(directory)
    return np.stack([read_frame(os.path.join(directory, n), target) for n in names]) if names else None


def parse_manifest(path):
    """``(label, subject, frame_dir)`` rows plus a list of malformed-line messages."""
    rows, problems = [], []
    base = os.path.dirname(os.path.abspath(path))
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(p.strip() for p in parts):
                problems.append(f"line {lineno}: expected label<TAB>subject<TAB>frame-directory")
                continue
            label, subject, d = (p.strip() for p in parts)
            rows.append((label, subject, d if os.path.isabs(d) else os.path.join(base, d), lineno))
    return rows, problems


def load_dataset(manifest, target=(200, 142), mirror=False, classes=None, strict=True):
    """Read every video listed in ``manifest``.

    ``target`` is ``(width, height)``; frames are stored as ``(height,
    width)`` arrays.  Problems (missing directories, empty or unreadable
    frames, labels outside ``classes``) are collected into an itemized
    report; with ``strict`` any problem raises :class:`DatasetError`,
    otherwise the affected videos are skipped.
    """
    if not os.path.isfile(manifest):
        raise DatasetError(f"manifest not found: {manifest}", [f"missing manifest {manifest}"])
    rows, report = parse_manifest(manifest)
    videos = []
    allowed = None if classes is None else set(classes)
    for label, subject, d, lineno in rows:
        where = f"line {lineno} ({d})"
        if allowed is not None and label not in allowed:
            report.append(f"{where}: unknown label {label!r}")
            continue
        if not os.path.isdir(d):
            report.append(f"{where}: frame directory missing")
            continue
        names = list_frames(d)
        if not names:
            report.append(f"{where}: no frames")
            continue
        frames = []
        for n in names:
            try:
                frames.append(read_frame(os.path.join(d, n), target))
            except (UnidentifiedImageError, OSError) as exc:
                report.append(f"{where}: unreadable frame {n} ({exc.__class__.__name__})")
                frames = None
                break
        if frames is None:
            continue
        if len({f.shape for f in frames}) != 1:
            report.append(f"{where}: frames differ in size")
            continue
        videos.append(Video(np.stack(frames), label, subject, os.path.relpath(d, os.path.dirname(os.path.abspath(manifest)))))
    if report and strict:
        raise DatasetError(f"{len(report)} problem(s) loading {manifest}:\n  " + "\n  ".join(report), report)
    if not videos:
        raise DatasetError(f"no usable videos in {manifest}", report)
    ds = SequenceDataset(videos, None if target is None else tuple(target), False, report)
    return ds.with_mirrors() if mirror else ds


def write_dataset(dataset, root, manifest_name="manifest.tsv", subjects=None):
    """Save frames as 8-bit PNGs under ``root`` and write a manifest.

    Frames are clipped to [0, 255] and rounded; ``subjects`` restricts which
    videos are listed.  Returns the manifest path.
    """
    os.makedirs(root, exist_ok=True)
    lines = []
    for v in dataset.videos:
        if subjects is not None and v.subject not in subjects:
            continue
        rel = v.source or f"{v.label}/{v.subject}"
        d = os.path.join(root, rel)
        os.makedirs(d, exist_ok=True)
        for t, f in enumerate(v.frames):
            Image.fromarray(np.clip(np.rint(f), 0, 255).astype(np.uint8)).save(os.path.join(d, f"frame_{t:04d}.png"))
        lines.append(f"{v.label}\t{v.subject}\t{rel}\n")
    path = os.path.join(root, manifest_name)
    with open(path, "w") as fh:
        fh.writelines(lines)
    return path
