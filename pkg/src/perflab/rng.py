"""Seed derivation for reproducible, order-independent random streams.

Every random draw in the package comes from a ``numpy.random.Generator``
backed by the counter-based Philox bit generator.  A stream is addressed by
``(master_seed, label, replicate)``; the label is hashed with BLAKE2b to a
64-bit integer and the triple is fed to ``numpy.random.SeedSequence``.  The
derivation is pure, so replicates can run in any order or process.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1


def label_key(label: str) -> int:
    """Stable 64-bit key for a stream label."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(master_seed: int, label: str, replicate: int = 0) -> int:
    """Return the 64-bit stream seed for ``(master_seed, label, replicate)``."""
    seq = np.random.SeedSequence([master_seed & MASK64, label_key(label), int(replicate)])
    lo, hi = seq.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


@dataclass(frozen=True)
class SeedPlan:
    """Master seed plus the derivation used to address independent streams.

    ``replicate`` selects the replicate-specific family of streams; use
    :meth:`for_replicate` to move between replicates and :meth:`child` to
    nest a namespace (e.g. one per sweep cell).
    """

    master_seed: int
    replicate: int = 0
    namespace: str = ""

    def _label(self, label: str) -> str:
        return f"{self.namespace}/{label}" if self.namespace else label

    def stream_seed(self, label: str) -> int:
        return derive_seed(self.master_seed, self._label(label), self.replicate)

    def rng(self, label: str) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.stream_seed(label)))

    def for_replicate(self, replicate: int) -> "SeedPlan":
        return SeedPlan(self.master_seed, replicate, self.namespace)

    def child(self, namespace: str) -> "SeedPlan":
        return SeedPlan(self.master_seed, self.replicate, self._label(namespace))

    def to_dict(self) -> dict:
        return {"master_seed": self.master_seed, "replicate": self.replicate, "namespace": self.namespace}


def as_generator(seed) -> np.random.Generator:
    """Accept a Generator, SeedPlan-derived int, or None-free integer seed."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(int(seed)))
