"""Deterministic seed derivation for independent simulation streams.

Every random stream in the package is derived from one user-facing base
seed with `derive_seed`, a splitmix-style integer mix: each index is
folded into the state with the 64-bit golden-ratio increment and then
scrambled with the splitmix64 finalizer.  Derivation is a pure function
of (base_seed, indices), so any stream can be reproduced in isolation
and run order never matters.

Conventions used across the package:
  derive_seed(seed)                      population synthesis
  derive_seed(seed, scenario_idx, run)   one Monte Carlo replication
"""

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    # splitmix64 output function (Steele, Lea & Flood)
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(base_seed: int, *indices: int) -> int:
    """Fold ``indices`` into ``base_seed`` and return a 64-bit stream seed."""
    z = base_seed & _MASK
    for idx in indices:
        z = (z + (idx + 1) * _GOLDEN) & _MASK
        z = _mix64(z)
    return _mix64((z + _GOLDEN) & _MASK)
