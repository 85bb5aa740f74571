"""Named, splittable random streams on top of numpy's counter-based Philox.

Every stochastic operation in the pipeline takes an explicit stream, so two
runs with the same seed and the same op sequence draw identical values no
matter what other code runs in between. Streams are derived by hashing a
path of names under a root seed; deriving is cheap and order-independent.
"""

import hashlib

import numpy as np

__all__ = ["RngStream", "mix_seed"]


def _path_key(seed, path):
    """Hash (seed, name path) into a stable 128-bit Philox key."""
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(seed)).encode())
    for part in path:
        h.update(b"/")
        h.update(str(part).encode())
    d = h.digest()
    return np.array(
        [int.from_bytes(d[:8], "little"), int.from_bytes(d[8:], "little")],
        dtype=np.uint64,
    )


def mix_seed(seed, index):
    """Deterministically mix an integer index into a seed (e.g. per-utterance
    seeds derived from a corpus seed, identical whether generation runs
    serially or in parallel)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(8, "little", signed=True))
    h.update(int(index).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little") & 0x7FFFFFFFFFFFFFFF


class RngStream:
    """A named random stream. ``split(name)`` derives an independent child
    stream; ``generator()`` hands out a fresh Philox-backed Generator that
    always starts from the same state for a given (seed, path)."""

    def __init__(self, seed, _path=()):
        self.seed = int(seed)
        self.path = tuple(_path)
        self._gen = None

    def split(self, *names):
        return RngStream(self.seed, self.path + tuple(str(n) for n in names))

    def derive_seed(self):
        """A stable 63-bit integer seed for code that takes plain seeds."""
        key = _path_key(self.seed, self.path)
        return int(key[0]) & 0x7FFFFFFFFFFFFFFF

    def generator(self):
        """The stream's persistent Generator (created lazily, then stateful)."""
        if self._gen is None:
            self._gen = self.fresh()
        return self._gen

    def fresh(self):
        """A brand-new Generator at the stream's initial state."""
        return np.random.Generator(np.random.Philox(key=_path_key(self.seed, self.path)))

    # Convenience draws (forwarded to the persistent generator)

    def integers(self, low, high=None, size=None):
        return self.generator().integers(low, high=high, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator().uniform(low, high, size=size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator().normal(loc, scale, size=size)

    def random(self, size=None):
        return self.generator().random(size=size)

    def permutation(self, n):
        return self.generator().permutation(n)

    def choice(self, a, size=None, replace=True, p=None):
        return self.generator().choice(a, size=size, replace=replace, p=p)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={'/'.join(self.path)})"
