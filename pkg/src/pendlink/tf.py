"""Rational continuous-time transfer functions in descending powers of s."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class TransferFunction:
    """H(s) = num(s)/den(s), coefficient lists in descending powers of s."""

    num: tuple
    den: tuple

    def __post_init__(self):
        num = tuple(float(c) for c in self.num)
        den = tuple(float(c) for c in self.den)
        if len(den) == 0 or den[0] == 0.0:
            raise InvalidInputError("denominator leading coefficient must be nonzero")
        if not all(np.isfinite(num)) or not all(np.isfinite(den)):
            raise InvalidInputError("transfer function coefficients must be finite")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __call__(self, s):
        """Evaluate H at complex frequency s (scalar or array)."""
        s = np.asarray(s, dtype=complex)
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        if len(self.num) < 2:
            return np.array([], dtype=complex)
        return np.roots(self.num)

    def cascade(self, other: "TransferFunction") -> "TransferFunction":
        return TransferFunction(
            tuple(np.polymul(self.num, other.num)),
            tuple(np.polymul(self.den, other.den)),
        )

    def dc_gain(self) -> float:
        if self.den[-1] == 0.0:
            return float("inf")
        return self.num[-1] / self.den[-1]


def unity() -> TransferFunction:
    return TransferFunction((1.0,), (1.0,))
