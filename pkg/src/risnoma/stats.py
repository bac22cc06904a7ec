"""Mergeable sample statistics for the Monte Carlo engine."""

from __future__ import annotations

import math

import numpy as np

Z95 = 1.959963984540054


class RunningMoments:
    """Count, mean and centred second moment with an exact-order merge."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self, n: int = 0, mean: float = 0.0, m2: float = 0.0):
        self.n = n
        self.mean = mean
        self.m2 = m2

    @classmethod
    def of(cls, values) -> "RunningMoments":
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            return cls()
        mean = float(values.mean())
        return cls(values.size, mean, float(np.sum((values - mean) ** 2)))

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return self
        n = self.n + other.n
        d = other.mean - self.mean
        self.mean += d * other.n / n
        self.m2 += other.m2 + d * d * self.n * other.n / n
        self.n = n
        return self

    @property
    def var(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.var / self.n) if self.n else math.nan

    @property
    def ci95(self) -> float:
        return Z95 * self.stderr

    def __repr__(self) -> str:
        return f"RunningMoments(n={self.n}, mean={self.mean!r}, stderr={self.stderr!r})"
