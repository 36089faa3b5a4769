"""Per-slice feature extraction, patient sequences and the train/test split."""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import segmentation, transforms

log = logging.getLogger(__name__)

DEFAULT_SLICES = 30
FEATURE_MODES = ("mixed", "dwt", "dct", "raw")
RAW_SIDE = 16


class Grade(IntEnum):
    II = 0
    III = 1
    IV = 2

    @classmethod
    def parse(cls, text: str) -> "Grade":
        key = str(text).strip().upper()
        if key.startswith("GRADE"):
            key = key[5:].strip(" _-")
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown grade {text!r}; expected one of II, III, IV") from None


class InsufficientSlicesError(ValueError):
    def __init__(self, patient_id: str, have: int, need: int):
        self.patient_id = patient_id
        super().__init__(f"patient {patient_id!r} has {have} slices, need at least {need}")


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary parts (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def feature_length(mode: str, p: int, q: int) -> int:
    return {"mixed": p + q, "dwt": q, "dct": p, "raw": RAW_SIDE * RAW_SIDE}[mode]


def extract_slice_features(
    img: np.ndarray,
    p: int = 100,
    q: int = 64,
    seed: int = 0,
    mode: str = "mixed",
) -> np.ndarray:
    """K-means ROI -> masked image -> feature vector.

    mode selects the representation: the mixed C_p W_q transform (default),
    W_q or C_p alone, or "raw" (the masked ROI decimated to a 16 x 16 pixel
    grid, no transform).
    """
    if mode not in FEATURE_MODES:
        raise ValueError(f"unknown feature mode {mode!r}")
    roi = segmentation.segment_roi(img, seed=seed)
    if mode == "mixed":
        return transforms.mixed_transform(roi, p, q).vector()
    if mode == "dwt":
        return transforms.dwt_feature(roi, q)
    if mode == "dct":
        return transforms.dct_feature(roi, p)
    step_r, step_c = roi.shape[0] // RAW_SIDE, roi.shape[1] // RAW_SIDE
    return roi[step_r // 2 :: step_r, step_c // 2 :: step_c][:RAW_SIDE, :RAW_SIDE].ravel().copy()


@dataclass
class PatientSequence:
    patient_id: str
    label: Grade
    slices: np.ndarray  # (S, feature_dim)

    def __post_init__(self):
        self.label = Grade(self.label)
        self.slices = np.asarray(self.slices, dtype=np.float64)
        if self.slices.ndim != 2:
            raise ValueError(f"patient {self.patient_id!r}: slices must be (S, D), got {self.slices.shape}")

    @property
    def length(self) -> int:
        return self.slices.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.slices.shape[1]


def central_window(n: int, s: int) -> slice:
    start = (n - s) // 2
    return slice(start, start + s)


def build_sequence(
    slice_features,
    label: Grade,
    S: int = DEFAULT_SLICES,
    patient_id: str = "",
) -> PatientSequence:
    """Keep the S central slices, dropping floor((n-S)/2) from the front."""
    n = len(slice_features)
    if n < S:
        raise InsufficientSlicesError(patient_id, n, S)
    rows = [np.asarray(f, dtype=np.float64) for f in slice_features[central_window(n, S)]]
    dims = {r.shape for r in rows}
    if len(dims) != 1 or rows[0].ndim != 1:
        raise ValueError(f"patient {patient_id!r}: inconsistent feature shapes {sorted(dims)}")
    return PatientSequence(patient_id, Grade(label), np.stack(rows))


def check_uniform(patients: list[PatientSequence]) -> tuple[int, int]:
    """Return (S, D) shared by every patient, or raise."""
    if not patients:
        raise ValueError("no patients")
    shapes = {p.slices.shape for p in patients}
    if len(shapes) != 1:
        raise ValueError(f"patients have mixed (S, D) shapes: {sorted(shapes)}")
    ids = [p.patient_id for p in patients]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate patient ids")
    return shapes.pop()


@dataclass
class DatasetSplit:
    train: list[PatientSequence]
    test: list[PatientSequence]
    seed: int
    warnings: list[str] = field(default_factory=list)


def _largest_remainder(quotas: dict, total: int) -> dict:
    alloc = {g: math.floor(v) for g, v in quotas.items()}
    left = total - sum(alloc.values())
    order = sorted(quotas, key=lambda g: (-(quotas[g] - alloc[g]), g))
    for g in order[:left]:
        alloc[g] += 1
    return alloc


def split_dataset(
    patients: list[PatientSequence],
    test_fraction: float = 0.2,
    seed: int = 0,
) -> DatasetSplit:
    """Stratified, seeded patient-level split.

    The test set has round(test_fraction * N) patients, shared out over the
    grades by largest-remainder rounding.
    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if len(patients) < 2:
        raise ValueError("need at least 2 patients to split")
    check_uniform(patients)

    by_grade: dict[int, list[PatientSequence]] = {}
    for pt in sorted(patients, key=lambda p: p.patient_id):
        by_grade.setdefault(int(pt.label), []).append(pt)
    n_test = math.floor(test_fraction * len(patients) + 0.5)
    alloc = _largest_remainder({g: test_fraction * len(v) for g, v in by_grade.items()}, n_test)

    rng = np.random.default_rng(seed)
    train, test, warnings = [], [], []
    for g in sorted(by_grade):
        group = by_grade[g]
        perm = rng.permutation(len(group))
        k = alloc[g]
        if k == 0:
            msg = f"grade {Grade(g).name} gets no test patients ({len(group)} total)"
            log.warning(msg)
            warnings.append(msg)
        test.extend(group[i] for i in perm[:k])
        train.extend(group[i] for i in perm[k:])

    assert not {p.patient_id for p in train} & {p.patient_id for p in test}
    return DatasetSplit(train=train, test=test, seed=seed, warnings=warnings)


def stack(patients: list[PatientSequence]) -> tuple[np.ndarray, np.ndarray]:
    """(B, S, D) features and (B,) integer labels."""
    x = np.stack([p.slices for p in patients])
    y = np.array([int(p.label) for p in patients], dtype=np.intp)
    return x, y
