"""Seedable xoshiro256** generator.

One instance per world drives agent-visible randomness, node ids, and
test-mode port generation, so a fixed seed replays a run exactly and
identically on every platform.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1


def _splitmix64(state: int):
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    def __init__(self, seed: int = 0):
        self.seed(seed)

    def seed(self, seed: int):
        state = seed & MASK64
        s = []
        for _ in range(4):
            state, z = _splitmix64(state)
            s.append(z)
        self._s = s

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randrange needs n > 0")
        return int(self.random() * n)

    def bytes(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            out.extend(self.next_u64().to_bytes(8, "big"))
        return bytes(out[:n])

    def ident(self, length: int = 8) -> str:
        """Lowercase letter name in the platform's id shape."""
        letters = "abcdefghijklmnopqrstuvwxyz"
        return "".join(letters[self.randrange(26)] for _ in range(length))
