"""Single-layer LSTM with full backpropagation through time.

Gate rows in Wx, Wh and b are stacked in the order (i, f, g, o).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .layers import glorot_uniform


class StaleCacheError(RuntimeError):
    """A forward cache was used after the cell's weights changed."""


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmCell:
    Wx: np.ndarray  # (4h, d)
    Wh: np.ndarray  # (4h, h)
    b: np.ndarray  # (4h,)

    @classmethod
    def init(cls, d: int, h: int, rng: np.random.Generator, forget_bias: float = 1.0) -> "LstmCell":
        b = np.zeros(4 * h)
        b[h : 2 * h] = forget_bias
        return cls(glorot_uniform(rng, 4 * h, d), glorot_uniform(rng, 4 * h, h), b)

    @property
    def input_dim(self) -> int:
        return self.Wx.shape[1]

    @property
    def hidden(self) -> int:
        return self.Wh.shape[1]

    @property
    def n_params(self) -> int:
        return self.Wx.size + self.Wh.size + self.b.size

    def fingerprint(self) -> bytes:
        hsh = hashlib.blake2b(digest_size=16)
        for a in (self.Wx, self.Wh, self.b):
            hsh.update(np.ascontiguousarray(a).tobytes())
        return hsh.digest()


@dataclass
class LstmCache:
    x: np.ndarray  # (B, S, d)
    gates: np.ndarray  # (B, S, 4h) post-activation
    cs: np.ndarray  # (B, S+1, h), cs[:, 0] = c0
    hs: np.ndarray  # (B, S+1, h), hs[:, 0] = h0
    fingerprint: bytes
    batched: bool


def lstm_forward(cell: LstmCell, sequence: np.ndarray, h0=None, c0=None):
    """Run the recurrence over a (S, d) or (B, S, d) sequence.

    Returns (hs, (h_last, c_last), cache) where hs holds every hidden state,
    shaped (S, h) or (B, S, h) to match the input.
    """
    x = np.asarray(sequence, dtype=np.float64)
    batched = x.ndim == 3
    if not batched:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != cell.input_dim:
        raise ValueError(f"expected sequence (..., S, {cell.input_dim}), got {np.shape(sequence)}")
    B, S, _ = x.shape
    h = cell.hidden
    hs = np.zeros((B, S + 1, h))
    cs = np.zeros((B, S + 1, h))
    if h0 is not None:
        hs[:, 0] = np.broadcast_to(h0, (B, h))
    if c0 is not None:
        cs[:, 0] = np.broadcast_to(c0, (B, h))
    gates = np.empty((B, S, 4 * h))
    # input projections for all steps at once
    xw = x @ cell.Wx.T + cell.b
    for t in range(S):
        a = xw[:, t] + hs[:, t] @ cell.Wh.T
        ifo = sigmoid(a[:, np.r_[0 : 2 * h, 3 * h : 4 * h]])
        i, f, o = ifo[:, :h], ifo[:, h : 2 * h], ifo[:, 2 * h :]
        g = np.tanh(a[:, 2 * h : 3 * h])
        cs[:, t + 1] = f * cs[:, t] + i * g
        hs[:, t + 1] = o * np.tanh(cs[:, t + 1])
        gates[:, t, :h], gates[:, t, h : 2 * h] = i, f
        gates[:, t, 2 * h : 3 * h], gates[:, t, 3 * h :] = g, o
    cache = LstmCache(x, gates, cs, hs, cell.fingerprint(), batched)
    out = hs[:, 1:]
    last = (hs[:, -1].copy(), cs[:, -1].copy())
    if not batched:
        return out[0].copy(), (last[0][0], last[1][0]), cache
    return out.copy(), last, cache


def lstm_backward(cell: LstmCell, cache: LstmCache, dh_last=None, dhs=None) -> dict:
    """Exact BPTT gradients.

    dh_last is the loss gradient wrt the final hidden state; dhs optionally
    adds gradients wrt every hidden state. Returns a dict with keys
    Wx, Wh, b, x (same layout as the forward input), h0 and c0.
    """
    if cache.fingerprint != cell.fingerprint():
        raise StaleCacheError("LSTM weights changed since the forward pass")
    x, gates, cs, hs = cache.x, cache.gates, cache.cs, cache.hs
    B, S, _ = x.shape
    h = cell.hidden

    def _batch(a):
        a = np.asarray(a, dtype=np.float64)
        return a if cache.batched else a[None]

    dh = np.zeros((B, h)) if dh_last is None else _batch(dh_last).copy()
    dhs = None if dhs is None else _batch(dhs)
    dc = np.zeros((B, h))
    da = np.empty((B, S, 4 * h))
    for t in reversed(range(S)):
        if dhs is not None:
            dh = dh + dhs[:, t]
        i, f = gates[:, t, :h], gates[:, t, h : 2 * h]
        g, o = gates[:, t, 2 * h : 3 * h], gates[:, t, 3 * h :]
        tc = np.tanh(cs[:, t + 1])
        dc = dc + dh * o * (1.0 - tc**2)
        da[:, t, :h] = dc * g * i * (1.0 - i)
        da[:, t, h : 2 * h] = dc * cs[:, t] * f * (1.0 - f)
        da[:, t, 2 * h : 3 * h] = dc * i * (1.0 - g**2)
        da[:, t, 3 * h :] = dh * tc * o * (1.0 - o)
        dh = da[:, t] @ cell.Wh
        dc = dc * f

    da_flat = da.reshape(B * S, 4 * h)
    grads = {
        "Wx": da_flat.T @ x.reshape(B * S, -1),
        "Wh": da_flat.T @ hs[:, :-1].reshape(B * S, h),
        "b": da_flat.sum(axis=0),
        "x": da @ cell.Wx,
        "h0": dh,
        "c0": dc,
    }
    if not cache.batched:
        for key in ("x", "h0", "c0"):
            grads[key] = grads[key][0]
    return grads
