"""Counter-based, splittable random streams

Every random draw in the toolkit is made from a generator derived from a master
seed and a tuple of stream indices, so results do not depend on evaluation order
or worker count.
"""

from typing import Union

import numpy as np

StreamKey = Union[int, str]


def _stream_index(key: StreamKey) -> int:
    """Map a stream key to a non-negative integer"""
    if isinstance(key, str):
        # stable across processes (no builtin hash randomisation)
        return int.from_bytes(key.encode("utf-8")[:8].ljust(8, b"\0"), "little")
    if key < 0:
        raise ValueError(f"stream index must be non-negative, got {key}")
    return int(key)


def _seed_sequence(master_seed: int, *stream: StreamKey) -> np.random.SeedSequence:
    if master_seed < 0:
        raise ValueError(f"seed must be non-negative, got {master_seed}")
    return np.random.SeedSequence(
        entropy=int(master_seed),
        spawn_key=tuple(_stream_index(key) for key in stream),
    )


def derive_seed(master_seed: int, *stream: StreamKey) -> int:
    """
    Derive a 64-bit sub-seed from a master seed and stream indices

    Args:
        master_seed: Non-negative master seed
        *stream: Stream indices (ints or short names)

    Returns:
        Derived seed in [0, 2**64)
    """
    state = _seed_sequence(master_seed, *stream).generate_state(1, dtype=np.uint64)
    return int(state[0])


def make_rng(master_seed: int, *stream: StreamKey) -> np.random.Generator:
    """Return a Philox-backed generator for the given stream"""
    return np.random.Generator(np.random.Philox(_seed_sequence(master_seed, *stream)))
