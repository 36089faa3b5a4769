"""Manifest -> per-patient feature sequences."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .dataio import ManifestRow
from .features import (
    DEFAULT_SLICES,
    InsufficientSlicesError,
    PatientSequence,
    central_window,
    derive_seed,
    extract_slice_features,
)
from .imaging import WORKING_SIZE, load_slice

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractSettings:
    p: int = 100
    q: int = 64
    slices: int = DEFAULT_SLICES
    seed: int = 0
    mode: str = "mixed"
    size: int = WORKING_SIZE


@dataclass
class ExtractResult:
    patients: list[PatientSequence]
    failures: dict[str, str] = field(default_factory=dict)


def _slice_job(args):
    path, settings, patient_id, index = args
    img = load_slice(path, settings.size)
    seed = derive_seed(settings.seed, patient_id, index)
    return extract_slice_features(img, settings.p, settings.q, seed=seed, mode=settings.mode)


def _jobs(paths: list[Path], patient_id: str, settings: ExtractSettings):
    if len(paths) < settings.slices:
        raise InsufficientSlicesError(patient_id, len(paths), settings.slices)
    # only the central window is kept, so only those slices are processed
    window = range(len(paths))[central_window(len(paths), settings.slices)]
    return [(paths[i], settings, patient_id, i) for i in window]


def extract_dataset(rows: list[ManifestRow], settings: ExtractSettings, workers: int = 1) -> ExtractResult:
    """Features for every patient; failing patients are collected, not raised."""
    result = ExtractResult([])
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for row in rows:
            try:
                jobs = _jobs(row.slice_paths(), row.patient_id, settings)
                feats = list(pool.map(_slice_job, jobs) if pool else map(_slice_job, jobs))
            except (OSError, ValueError) as exc:
                log.error("patient %s: %s", row.patient_id, exc)
                result.failures[row.patient_id] = str(exc)
                continue
            result.patients.append(PatientSequence(row.patient_id, row.grade, feats))
    finally:
        if pool:
            pool.shutdown()
    return result


def extract_patient(slice_paths: list[Path], patient_id: str, grade, settings: ExtractSettings) -> PatientSequence:
    feats = [_slice_job(j) for j in _jobs(list(slice_paths), patient_id, settings)]
    return PatientSequence(patient_id, grade, feats)
