"""Synthetic slice corpus standing in for the restricted MRI data.

Each slice is a dark background, a mid-grey elliptical "brain" and a bright
elliptical lesion carrying a sinusoidal texture. Lesion radius, brightness
and texture frequency depend on the grade; every patient gets its own
jitter, and the lesion grows and shrinks smoothly along the sequence.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import ManifestRow, write_manifest
from .features import Grade, derive_seed
from .imaging import save_pgm

SIZE = 256


@dataclass(frozen=True)
class GradeProfile:
    radius: float  # pixels, at the middle of the sequence
    intensity: float  # lesion brightness before texture/noise
    frequency: float  # texture cycles per pixel


PROFILES = {
    Grade.II: GradeProfile(radius=14.0, intensity=0.60, frequency=0.04),
    Grade.III: GradeProfile(radius=24.0, intensity=0.75, frequency=0.10),
    Grade.IV: GradeProfile(radius=34.0, intensity=0.90, frequency=0.18),
}
TEXTURE_AMPLITUDE = 0.06
NOISE_STD = 0.015
# lesions sit near a common site (row, col offset from the brain centre)
LESION_SITE = (-28.0, 24.0)
LESION_JITTER = 5.0
CENTER_JITTER = 3.0
RADIUS_JITTER = 0.05


@dataclass(frozen=True)
class PatientAnatomy:
    center: tuple[float, float]  # brain centre (row, col)
    axes: tuple[float, float]  # brain semi-axes (row, col)
    brain_level: float
    lesion_offset: tuple[float, float]
    radius: float
    aspect: float
    intensity: float
    frequency: float
    orientation: float
    phase: float


def draw_anatomy(grade: Grade, rng: np.random.Generator) -> PatientAnatomy:
    prof = PROFILES[Grade(grade)]
    return PatientAnatomy(
        center=tuple(128 + rng.uniform(-CENTER_JITTER, CENTER_JITTER, 2)),
        axes=(rng.uniform(105, 112), rng.uniform(92, 100)),
        brain_level=rng.uniform(0.28, 0.34),
        lesion_offset=tuple(np.add(LESION_SITE, rng.uniform(-LESION_JITTER, LESION_JITTER, 2))),
        radius=prof.radius * rng.uniform(1 - RADIUS_JITTER, 1 + RADIUS_JITTER),
        aspect=rng.uniform(0.75, 1.0),
        intensity=prof.intensity + rng.uniform(-0.03, 0.03),
        frequency=prof.frequency * rng.uniform(0.9, 1.1),
        orientation=rng.uniform(0, math.pi),
        phase=rng.uniform(0, 2 * math.pi),
    )


def render_slice(anat: PatientAnatomy, index: int, n_slices: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Returns (image in [0, 1], lesion mask)."""
    t = (index + 0.5) / n_slices
    bump = math.sin(math.pi * t)
    rows, cols = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)

    scale = 0.85 + 0.15 * bump
    cy, cx = anat.center
    brain = ((rows - cy) / (anat.axes[0] * scale)) ** 2 + ((cols - cx) / (anat.axes[1] * scale)) ** 2 <= 1.0

    r = anat.radius * (0.6 + 0.4 * bump)
    ly = cy + anat.lesion_offset[0] + 4.0 * (t - 0.5)
    lx = cx + anat.lesion_offset[1]
    lesion = ((rows - ly) / r) ** 2 + ((cols - lx) / (r * anat.aspect)) ** 2 <= 1.0
    lesion &= brain

    u = cols * math.cos(anat.orientation) + rows * math.sin(anat.orientation)
    texture = TEXTURE_AMPLITUDE * np.sin(2 * math.pi * anat.frequency * u + anat.phase + 3.0 * t)

    img = np.zeros((SIZE, SIZE))
    img[brain] = anat.brain_level
    img[lesion] = anat.intensity + texture[lesion]
    img[brain] += rng.normal(0.0, NOISE_STD, size=int(brain.sum()))
    return np.clip(img, 0.0, 1.0), lesion


def generate_corpus(
    out_dir: str | os.PathLike,
    per_grade: int,
    n_slices: int,
    seed: int = 0,
) -> list[ManifestRow]:
    """Write `per_grade` patients of each grade as PGM slices plus manifest.csv."""
    if per_grade < 1 or n_slices < 1:
        raise ValueError("per_grade and n_slices must be >= 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    n = 0
    for _ in range(per_grade):
        for grade in Grade:
            pid = f"pt{n:03d}"
            n += 1
            anat = draw_anatomy(grade, np.random.default_rng(derive_seed(seed, pid)))
            sdir = out / "slices" / pid
            sdir.mkdir(parents=True, exist_ok=True)
            for i in range(n_slices):
                img, _ = render_slice(anat, i, n_slices, np.random.default_rng(derive_seed(seed, pid, i)))
                save_pgm(sdir / f"slice_{i:03d}.pgm", img)
            rows.append(ManifestRow(pid, grade, sdir))
    write_manifest(out / "manifest.csv", rows)
    return rows
