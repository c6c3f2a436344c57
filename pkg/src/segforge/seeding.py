"""Deterministic 64-bit seed derivation (SplitMix64 mixing)."""

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit mix of the input."""
    z = (state + _GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(base: int, *indices: int) -> int:
    """Mix a base seed with one or more indices into a fresh 64-bit seed.

    Each step is ``splitmix64(state + (index + 1) * gamma)``, so distinct
    index tuples give distinct seeds (the mix is a bijection per step).
    """
    state = base & _MASK64
    for idx in indices:
        state = splitmix64((state + ((idx + 1) * _GAMMA)) & _MASK64)
    return state
