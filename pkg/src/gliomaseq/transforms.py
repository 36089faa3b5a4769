"""Orthonormal Haar DWT, orthonormal DCT-II/III, zigzag selection and the
mixed DWT/DCT feature transform.

Subband naming: the first letter is the filter applied along rows
(horizontal), the second the filter applied along columns (vertical).
So `lh` is low-pass across each row and high-pass down each column.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_SQRT_HALF = math.sqrt(0.5)


@dataclass
class DwtLevel:
    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray


@dataclass
class DominantSelection:
    values: np.ndarray  # (p,)
    positions: list[tuple[int, int]]
    residual: np.ndarray


@dataclass
class MixedFeature:
    dct_part: np.ndarray
    dwt_part: np.ndarray

    @property
    def p(self) -> int:
        return len(self.dct_part)

    @property
    def q(self) -> int:
        return len(self.dwt_part)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.dct_part, self.dwt_part])


def _as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def haar_dwt2(m) -> DwtLevel:
    m = _as_matrix(m)
    rows, cols = m.shape
    if rows % 2 or cols % 2:
        raise ValueError(f"haar_dwt2 needs even dimensions, got {rows}x{cols}")
    # along rows: pair adjacent columns
    lo = (m[:, 0::2] + m[:, 1::2]) * _SQRT_HALF
    hi = (m[:, 0::2] - m[:, 1::2]) * _SQRT_HALF
    # then down columns: pair adjacent rows
    return DwtLevel(
        ll=(lo[0::2] + lo[1::2]) * _SQRT_HALF,
        lh=(lo[0::2] - lo[1::2]) * _SQRT_HALF,
        hl=(hi[0::2] + hi[1::2]) * _SQRT_HALF,
        hh=(hi[0::2] - hi[1::2]) * _SQRT_HALF,
    )


def haar_idwt2(level: DwtLevel) -> np.ndarray:
    bands = [_as_matrix(b) for b in (level.ll, level.lh, level.hl, level.hh)]
    shape = bands[0].shape
    if any(b.shape != shape for b in bands):
        raise ValueError(f"subband shapes differ: {[b.shape for b in bands]}")
    ll, lh, hl, hh = bands
    r, c = shape
    lo = np.empty((2 * r, c))
    hi = np.empty((2 * r, c))
    lo[0::2] = (ll + lh) * _SQRT_HALF
    lo[1::2] = (ll - lh) * _SQRT_HALF
    hi[0::2] = (hl + hh) * _SQRT_HALF
    hi[1::2] = (hl - hh) * _SQRT_HALF
    out = np.empty((2 * r, 2 * c))
    out[:, 0::2] = (lo + hi) * _SQRT_HALF
    out[:, 1::2] = (lo - hi) * _SQRT_HALF
    return out


def dwt2_approx(m, levels: int) -> np.ndarray:
    """Final LL band after `levels` Haar decompositions."""
    m = _as_matrix(m)
    if levels < 0:
        raise ValueError(f"levels must be >= 0, got {levels}")
    step = 2**levels
    if m.shape[0] % step or m.shape[1] % step:
        raise ValueError(f"{m.shape[0]}x{m.shape[1]} is not divisible by 2**{levels}")
    for _ in range(levels):
        m = haar_dwt2(m).ll
    return m if levels else m.copy()


@lru_cache(maxsize=None)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis, row k = c(k) cos(pi (2j+1) k / 2n)."""
    if n < 1:
        raise ValueError(f"DCT size must be >= 1, got {n}")
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * j + 1) * k / (2 * n))
    c *= math.sqrt(2.0 / n)
    c[0] = math.sqrt(1.0 / n)
    c.setflags(write=False)
    return c


def dct2(m) -> np.ndarray:
    m = _as_matrix(m)
    return dct_matrix(m.shape[0]) @ m @ dct_matrix(m.shape[1]).T


def idct2(m) -> np.ndarray:
    m = _as_matrix(m)
    return dct_matrix(m.shape[0]).T @ m @ dct_matrix(m.shape[1])


@lru_cache(maxsize=None)
def _zigzag(n: int) -> tuple[tuple[int, int], ...]:
    order = []
    for s in range(2 * n - 1):
        lo, hi = max(0, s - n + 1), min(s, n - 1)
        rows = range(lo, hi + 1)
        # even antidiagonals run bottom-left to top-right
        if s % 2 == 0:
            rows = reversed(rows)
        order.extend((r, s - r) for r in rows)
    return tuple(order)


def zigzag_order(n: int) -> list[tuple[int, int]]:
    """JPEG zigzag scan of an n x n grid: (0,0), (0,1), (1,0), (2,0), ..."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return list(_zigzag(n))


def select_dominant(coeffs, p: int, policy: str = "zigzag") -> DominantSelection:
    """Split coefficients into p kept values and a zeroed-out residual.

    policy="zigzag" keeps the first p positions of the zigzag scan (fixed
    support, the default). policy="magnitude" keeps the p largest |values|,
    ties broken by zigzag position.
    """
    coeffs = _as_matrix(coeffs)
    n, ncols = coeffs.shape
    if n != ncols:
        raise ValueError(f"coefficient matrix must be square, got {n}x{ncols}")
    if not 0 <= p <= n * n:
        raise ValueError(f"p={p} out of range for a {n}x{n} matrix")
    order = _zigzag(n)
    if policy == "zigzag":
        positions = list(order[:p])
    elif policy == "magnitude":
        rr, cc = np.array(order).T
        mags = np.abs(coeffs[rr, cc])
        picked = np.argsort(-mags, kind="stable")[:p]
        positions = [order[i] for i in picked]
    else:
        raise ValueError(f"unknown selection policy {policy!r}")
    residual = coeffs.copy()
    if p:
        rr, cc = np.array(positions).T
        values = coeffs[rr, cc].copy()
        residual[rr, cc] = 0.0
    else:
        values = np.zeros(0)
    return DominantSelection(values=values, positions=positions, residual=residual)


def _dwt_levels_for(side: int, q: int) -> int:
    q_side = math.isqrt(q)
    if q < 1 or q_side * q_side != q:
        raise ValueError(f"q={q} must be a positive perfect square")
    if side % q_side or (side // q_side) & (side // q_side - 1):
        raise ValueError(f"q={q}: side {q_side} must divide {side} by a power of two")
    return int(math.log2(side // q_side))


def mixed_transform(img, p: int = 100, q: int = 64, policy: str = "zigzag") -> MixedFeature:
    """Dominant DCT coefficients of the Haar LL band plus a deep-DWT summary of
    what is left over.

    Steps: one Haar level -> DCT of LL -> keep p coefficients -> inverse DCT of
    the residual -> Haar approximation down to sqrt(q) x sqrt(q).
    """
    img = _as_matrix(img)
    rows, cols = img.shape
    if rows != cols or rows % 2:
        raise ValueError(f"img must be square with even side, got {rows}x{cols}")
    side = rows // 2
    if not 0 <= p <= side * side:
        raise ValueError(f"p={p} out of range for a {side}x{side} LL band")
    levels = _dwt_levels_for(side, q)

    ll = haar_dwt2(img).ll
    sel = select_dominant(dct2(ll), p, policy=policy)
    residual = idct2(sel.residual)
    deep = dwt2_approx(residual, levels)
    return MixedFeature(dct_part=sel.values, dwt_part=deep.ravel())


def dwt_feature(img, q: int = 64) -> np.ndarray:
    """W_q alone: Haar approximation of the image down to sqrt(q) x sqrt(q)."""
    img = _as_matrix(img)
    return dwt2_approx(img, _dwt_levels_for(img.shape[0], q)).ravel()


def dct_feature(img, p: int = 100) -> np.ndarray:
    """C_p alone: first p zigzag coefficients of the image's DCT."""
    return select_dominant(dct2(img), p).values
