"""Diagonalization operators d(Q): matrices to precision-shaped vectors."""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

VECTOR = "vector"
UNIFORM = "uniform"
BLOCK = "block"


@dataclass(frozen=True)
class Diagonalizer:
    """One of the three affine maps from N x N matrices to N-vectors.

    ``vector`` keeps the diagonal, ``uniform`` replaces it by its average and
    ``block`` averages the diagonal within each block of ``blocks``.
    All three depend on Q only through its diagonal, so :meth:`reduce` takes
    that diagonal directly.
    """

    kind: str = VECTOR
    blocks: tuple = ()

    def __post_init__(self):
        if self.kind not in (VECTOR, UNIFORM, BLOCK):
            raise ConfigError(f"unknown diagonalizer kind {self.kind!r}")
        if self.kind == BLOCK:
            if not self.blocks or any(int(b) <= 0 for b in self.blocks):
                raise ConfigError("block diagonalizer needs positive block sizes")
            object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))

    @classmethod
    def vector(cls):
        return cls(VECTOR)

    @classmethod
    def uniform(cls):
        return cls(UNIFORM)

    @classmethod
    def block(cls, sizes):
        return cls(BLOCK, tuple(sizes))

    @classmethod
    def from_name(cls, name, blocks=()):
        if name == BLOCK:
            return cls.block(blocks)
        return cls(name)

    def check_dim(self, n):
        if self.kind == BLOCK and sum(self.blocks) != n:
            raise ConfigError(f"block sizes {self.blocks} do not sum to N={n}")

    def reduce(self, qdiag):
        """Apply d(.) given the diagonal of Q."""
        qdiag = np.asarray(qdiag, dtype=float)
        if self.kind == VECTOR:
            return qdiag.copy()
        if self.kind == UNIFORM:
            return np.full_like(qdiag, qdiag.mean())
        self.check_dim(qdiag.size)
        out = np.empty_like(qdiag)
        start = 0
        for size in self.blocks:
            out[start:start + size] = qdiag[start:start + size].mean()
            start += size
        return out

    def __call__(self, q):
        return apply_diagonalizer(q, self)


def apply_diagonalizer(q, diag):
    """Apply ``diag`` to a full matrix or to a vector holding its diagonal."""
    q = np.asarray(q, dtype=float)
    if q.ndim == 2:
        if q.shape[0] != q.shape[1]:
            raise ConfigError("diagonalizer input must be square")
        q = np.diag(q)
    elif q.ndim != 1:
        raise ConfigError("diagonalizer input must be a matrix or a diagonal vector")
    return diag.reduce(q)
