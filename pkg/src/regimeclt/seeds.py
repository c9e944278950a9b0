"""Deterministic RNG stream derivation.

Every stochastic routine in the package draws from a generator derived from a
(base seed, stream id) pair. Replicated experiments derive one independent
child stream per replicate index, so results are reproducible bit for bit and
do not depend on scheduling or batching order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SeedSpec:
    """Reproducible seed record: 64-bit base entropy plus a stream id."""

    base: int
    stream: int = 0

    def __post_init__(self) -> None:
        if not 0 <= int(self.base) < 2**64:
            raise ValueError("base seed must fit in 64 bits")
        if int(self.stream) < 0:
            raise ValueError("stream id must be nonnegative")

    def rng(self) -> np.random.Generator:
        """Generator for this stream."""
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.base, spawn_key=(self.stream,))
        )

    def replicate_rng(self, index: int) -> np.random.Generator:
        """Independent generator for one replicate of this stream."""
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.base, spawn_key=(self.stream, index))
        )

    def child(self, offset: int) -> "SeedSpec":
        """A sibling stream, used when one experiment needs several draws."""
        return SeedSpec(self.base, self.stream + offset)

    def to_json_dict(self) -> dict:
        return {"base": int(self.base), "stream": int(self.stream)}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SeedSpec":
        return cls(int(obj["base"]), int(obj.get("stream", 0)))
