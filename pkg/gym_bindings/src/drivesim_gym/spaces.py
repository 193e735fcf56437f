"""Minimal gym-style Box spaces (the gym package itself is not a dependency)."""

from __future__ import annotations

import numpy as np


class Box:
    """A bounded box of float32 values with the classic gym surface."""

    def __init__(self, low, high, shape: tuple[int, ...] | None = None):
        if shape is None:
            low_arr = np.asarray(low, dtype=np.float32)
            shape = low_arr.shape
        self.low = np.broadcast_to(np.asarray(low, dtype=np.float32), shape).copy()
        self.high = np.broadcast_to(np.asarray(high, dtype=np.float32), shape).copy()
        if not (self.low <= self.high).all():
            raise ValueError("Box requires low <= high everywhere")
        self.shape = tuple(shape)
        self.dtype = np.float32

    def sample(self, rng: np.random.Generator | None = None) -> np.ndarray:
        if rng is None:
            rng = np.random.default_rng()
        return rng.uniform(self.low, self.high).astype(np.float32)

    def contains(self, value) -> bool:
        arr = np.asarray(value, dtype=np.float32)
        return (arr.shape == self.shape
                and bool((arr >= self.low).all())
                and bool((arr <= self.high).all()))

    def __repr__(self) -> str:
        return f"Box(shape={self.shape}, low={self.low.min()}, high={self.high.max()})"
