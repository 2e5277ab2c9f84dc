"""Named random substreams derived from a single root seed."""

import zlib

import numpy as np


def substream(seed, name):
    """Return a Generator for the named substream of ``seed``.

    The same ``(seed, name)`` pair always yields the same stream, and
    distinct names give statistically independent streams.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), key]))
