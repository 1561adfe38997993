"""Named, counter-based random streams.

Every stochastic routine in the package draws from a stream derived from
(seed, *names) so that results are reproducible per seed and independent of
scheduling: two routines never share a stream, and adding parallelism cannot
reorder anyone's draws.  Streams use the Philox counter-based generator.
"""

import hashlib

import numpy as np


def _name_words(names):
    h = hashlib.blake2b(digest_size=16)
    for name in names:
        h.update(str(name).encode("utf-8"))
        h.update(b"\x1f")
    d = h.digest()
    return [int.from_bytes(d[i : i + 4], "little") for i in range(0, 16, 4)]


def substream(seed, *names):
    """Return a ``numpy.random.Generator`` for the stream (seed, *names)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + _name_words(names)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed, *names):
    """Stable 63-bit integer seed for the sub-task (seed, *names)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for name in names:
        h.update(b"\x1f")
        h.update(str(name).encode("utf-8"))
    return int.from_bytes(h.digest(), "little") >> 1
