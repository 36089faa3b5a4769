"""On-disk formats: dataset manifest, feature table and training config."""
from __future__ import annotations

import csv
import dataclasses
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import Grade, PatientSequence, check_uniform
from .train_eval import TrainConfig

IMAGE_SUFFIXES = (".pgm", ".png")
MANIFEST_HEADER = ["patient_id", "grade", "slice_dir"]


class ManifestError(ValueError):
    pass


class FeatureFileError(ValueError):
    pass


class ConfigKeyError(KeyError):
    def __init__(self, key: str, reason: str = "unknown config key"):
        self.key = key
        self.reason = reason
        super().__init__(key)

    def __str__(self):
        return f"{self.reason}: {self.key!r}"


def natural_key(name: str):
    return [int(tok) if tok.isdigit() else tok.lower() for tok in re.split(r"(\d+)", name)]


@dataclass
class ManifestRow:
    patient_id: str
    grade: Grade
    slice_dir: Path

    def slice_paths(self) -> list[Path]:
        files = [p for p in self.slice_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES]
        return sorted(files, key=lambda p: natural_key(p.name))


def read_manifest(path: str | os.PathLike, check_dirs: bool = True) -> list[ManifestRow]:
    """Rows of the manifest CSV; relative slice_dir entries resolve against
    the manifest's own directory."""
    path = Path(path)
    base = path.parent
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_HEADER:
            raise ManifestError(f"{path}: header must be {','.join(MANIFEST_HEADER)}, got {header}")
        rows, seen = [], set()
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != 3:
                raise ManifestError(f"{path}:{lineno}: expected 3 fields, got {len(rec)}")
            pid, grade, sdir = (f.strip() for f in rec)
            if pid in seen:
                raise ManifestError(f"{path}:{lineno}: duplicate patient_id {pid!r}")
            seen.add(pid)
            try:
                g = Grade.parse(grade)
            except ValueError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from None
            d = Path(sdir)
            if not d.is_absolute():
                d = base / d
            if check_dirs and not d.is_dir():
                raise ManifestError(f"{path}:{lineno}: slice directory {d} does not exist")
            rows.append(ManifestRow(pid, g, d))
    return rows


def write_manifest(path: str | os.PathLike, rows: list[ManifestRow]) -> None:
    base = Path(path).parent
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for r in rows:
            d = Path(r.slice_dir)
            try:
                d = d.relative_to(base)
            except ValueError:
                pass
            w.writerow([r.patient_id, r.grade.name, d.as_posix()])


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_features(path: str | os.PathLike, patients: list[PatientSequence]) -> None:
    """Text table, one row per (patient, slice), 17 significant digits."""
    _, d = check_uniform(patients)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["patient_id", "label", "slice_index"] + [f"f{i}" for i in range(d)]) + "\n")
        for pt in patients:
            for i, row in enumerate(pt.slices):
                fh.write(",".join([pt.patient_id, pt.label.name, str(i)] + [_fmt(v) for v in row]) + "\n")


def read_features(path: str | os.PathLike) -> list[PatientSequence]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:3] != ["patient_id", "label", "slice_index"]:
            raise FeatureFileError(f"{path}: bad header")
        d = len(header) - 3
        if d < 1 or header[3:] != [f"f{i}" for i in range(d)]:
            raise FeatureFileError(f"{path}: feature columns must be f0..f{{D-1}}")
        groups: dict[str, tuple[Grade, list]] = {}
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != d + 3:
                raise FeatureFileError(f"{path}:{lineno}: expected {d + 3} fields, got {len(rec)}")
            pid, label, idx = rec[0], Grade.parse(rec[1]), int(rec[2])
            grade, rows = groups.setdefault(pid, (label, []))
            if grade != label:
                raise FeatureFileError(f"{path}:{lineno}: patient {pid!r} has conflicting labels")
            if idx != len(rows):
                raise FeatureFileError(f"{path}:{lineno}: patient {pid!r} slice_index {idx}, expected {len(rows)}")
            rows.append([float(v) for v in rec[3:]])
    if not groups:
        raise FeatureFileError(f"{path}: no rows")
    patients = [PatientSequence(pid, g, np.array(rows)) for pid, (g, rows) in groups.items()]
    lengths = {p.length for p in patients}
    if len(lengths) != 1:
        raise FeatureFileError(f"{path}: patients have different slice counts {sorted(lengths)}")
    return patients


_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


def _parse_value(key: str, text: str):
    try:
        if key == "betas":
            parts = [float(t) for t in re.split(r"[,\s]+", text.strip("()[] ")) if t]
            if len(parts) != 2:
                raise ValueError
            return tuple(parts)
        if key in ("epochs", "lr_decay_epoch", "seed", "runs"):
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigKeyError(key, f"malformed value {text!r} for config key") from None


def parse_config(text: str, base: TrainConfig | None = None) -> TrainConfig:
    """Flat key=value lines; keys are TrainConfig field names. '#' starts a comment."""
    values = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigKeyError(line, "config line is not key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _CONFIG_FIELDS:
            raise ConfigKeyError(key)
        values[key] = _parse_value(key, val)
    return dataclasses.replace(base or TrainConfig(), **values)


def read_config(path: str | os.PathLike) -> TrainConfig:
    return parse_config(Path(path).read_text())


def write_config(path: str | os.PathLike, cfg: TrainConfig) -> None:
    lines = []
    for name in _CONFIG_FIELDS:
        v = getattr(cfg, name)
        text = ",".join(map(repr, v)) if name == "betas" else repr(v)
        lines.append(f"{name}={text}")
    Path(path).write_text("\n".join(lines) + "\n")
