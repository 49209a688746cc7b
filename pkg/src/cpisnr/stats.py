"""Mergeable sample moments with partition-independent results.

Frames are grouped into fixed blocks by ``frame_index // block_size``. Each
complete block is summarised by a two-pass ``(count, mean, M2)``; blocks are
folded in block order with the pairwise update of Chan et al. Any partition
of frames across workers therefore finalises to bit-identical numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Moments:
    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "Moments":
        x = np.asarray(x)
        mean = x.mean(axis=0)
        d = x - mean
        return cls(x.shape[0], mean, np.einsum("i...,i...->...", d, d.conj()).real if np.iscomplexobj(d)
                   else np.einsum("i...,i...->...", d, d))

    def merge(self, other: "Moments") -> "Moments":
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + (delta * delta) * (self.count * other.count / n)
        return Moments(n, mean, m2)

    def variance(self, ddof: int = 1) -> np.ndarray:
        return self.m2 / (self.count - ddof)


@dataclass
class BlockMoments:
    """Accumulator keyed by frame block.

    ``add`` accepts any subset of frames; incomplete blocks are buffered until
    all their frames are present (or until :meth:`finalize`).
    """

    block_size: int = 256
    done: dict = field(default_factory=dict)
    pending: dict = field(default_factory=dict)

    def add(self, frame_indices, samples: np.ndarray) -> "BlockMoments":
        frame_indices = np.asarray(frame_indices)
        samples = np.asarray(samples)
        for b in np.unique(frame_indices // self.block_size):
            sel = (frame_indices // self.block_size) == b
            rows = self.pending.setdefault(int(b), {})
            for fi, row in zip(frame_indices[sel], samples[sel]):
                if int(fi) in rows or int(b) in self.done:
                    raise ValueError(f"frame {int(fi)} accumulated twice")
                rows[int(fi)] = row
            self._promote(int(b))
        return self

    def _promote(self, b: int):
        rows = self.pending.get(b)
        if rows is not None and len(rows) == self.block_size:
            self.done[b] = self._summarise(rows)
            del self.pending[b]

    @staticmethod
    def _summarise(rows: dict) -> Moments:
        keys = sorted(rows)
        return Moments.from_samples(np.stack([rows[k] for k in keys]))

    def merge(self, other: "BlockMoments") -> "BlockMoments":
        if other.block_size != self.block_size:
            raise ValueError("block sizes differ")
        out = BlockMoments(self.block_size, dict(self.done), {b: dict(r) for b, r in self.pending.items()})
        for b, m in other.done.items():
            if b in out.done or b in out.pending:
                raise ValueError(f"block {b} present in both accumulators")
            out.done[b] = m
        for b, rows in other.pending.items():
            if b in out.done:
                raise ValueError(f"block {b} present in both accumulators")
            mine = out.pending.setdefault(b, {})
            if set(mine) & set(rows):
                raise ValueError(f"frames of block {b} accumulated twice")
            mine.update(rows)
            out._promote(b)
        return out

    def finalize(self) -> Moments:
        parts = dict(self.done)
        for b, rows in self.pending.items():
            parts[b] = self._summarise(rows)
        if not parts:
            raise ValueError("no samples accumulated")
        order = sorted(parts)
        acc = parts[order[0]]
        for b in order[1:]:
            acc = acc.merge(parts[b])
        return acc
