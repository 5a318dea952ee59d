"""Deterministic random-stream derivation.

Every random quantity in an experiment is drawn from a generator derived from a
single 64-bit master seed and a tuple of labels, e.g. ``("chain", "glauber", 4096)``.
String labels are mapped to 32-bit words with CRC-32, integers are used as-is
(split into 32-bit words when larger), and the resulting words become the
``spawn_key`` of a :class:`numpy.random.SeedSequence` whose entropy is the master
seed.  Any implementation reproducing ``SeedSequence(entropy=seed,
spawn_key=words)`` with PCG64 reproduces the streams.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label_words(label) -> list[int]:
    if isinstance(label, (bool, np.bool_)):
        return [int(label)]
    if isinstance(label, (int, np.integer)):
        value = int(label)
        if value < 0:
            raise ValueError("integer labels must be nonnegative")
        words = []
        while True:
            words.append(value & 0xFFFFFFFF)
            value >>= 32
            if value == 0:
                return words
    if isinstance(label, float):
        label = repr(label)
    return [zlib.crc32(str(label).encode("utf-8"))]


def seed_sequence(seed: int, *labels) -> np.random.SeedSequence:
    """Seed sequence for ``labels`` under the master ``seed``."""
    words: list[int] = []
    for label in labels:
        words.extend(_label_words(label))
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(words))


def derive_rng(seed: int, *labels) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *labels)))


def as_generator(rng=None) -> np.random.Generator:
    """Coerce an int seed, seed sequence, generator or None into a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(rng))
    return np.random.default_rng(rng)


def split_streams(rng) -> tuple[np.random.Generator, np.random.Generator]:
    """Split ``rng`` into a block-selection stream and a spin-update stream.

    The split depends only on the seed (or generator state), so two processes
    driven by the same ``rng`` value see the same block and spin streams.
    """
    if isinstance(rng, np.random.Generator):
        children = rng.spawn(2)
        return children[0], children[1]
    if isinstance(rng, np.random.SeedSequence):
        seq = rng
    else:
        seq = np.random.SeedSequence(rng)
    blocks, spins = seq.spawn(2)
    return (np.random.Generator(np.random.PCG64(blocks)),
            np.random.Generator(np.random.PCG64(spins)))
