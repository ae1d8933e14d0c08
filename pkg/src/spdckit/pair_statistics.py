"""Statistical splitting of photon pairs between two lossy channels.

``N`` pairs give ``2N`` photons; each photon independently ends up on
channel A (probability ``x_a``), on channel B (``x_b``) or is lost. The joint
count distribution is therefore multinomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import ValidationError

MAX_PAIRS = 10

# Among leading-order coincidences from two independent pairs, the share
# that pairs photons from different pairs.
ACCIDENTAL_FRACTION = Fraction(2, 3)


@dataclass(frozen=True)
class SplitChannels:
    x_a: float
    x_b: float

    def __post_init__(self):
        if not (self.x_a >= 0 and self.x_b >= 0 and self.x_a + self.x_b <= 1 + 1e-15):
            raise ValidationError(
                f"need x_a, x_b >= 0 and x_a + x_b <= 1, got ({self.x_a!r}, {self.x_b!r})"
            )

    def swapped(self) -> "SplitChannels":
        return SplitChannels(self.x_b, self.x_a)


def splitting_pmf(n_pairs: int, ch: SplitChannels, n_a: int, n_b: int) -> float:
    """Probability of ``n_a`` photons on A and ``n_b`` on B from ``n_pairs`` pairs.

    Counts outside ``0 <= n_a + n_b <= 2 n_pairs`` have probability 0.
    """
    if int(n_pairs) != n_pairs or not 0 <= n_pairs <= MAX_PAIRS:
        raise ValidationError(f"n_pairs must be an integer in [0, {MAX_PAIRS}], got {n_pairs!r}")
    n_pairs, n_a, n_b = int(n_pairs), int(n_a), int(n_b)
    photons = 2 * n_pairs
    detected = n_a + n_b
    if n_a < 0 or n_b < 0 or detected > photons:
        return 0.0
    lost = photons - detected
    return (
        math.comb(photons, lost)
        * (1.0 - ch.x_a - ch.x_b) ** lost
        * math.comb(detected, n_a)
        * ch.x_a**n_a
        * ch.x_b**n_b
    )


def p_at_least_one(ch: SplitChannels, n_pairs: int = 1) -> float:
    """Probability that a single pair puts at least one photon on channel A."""
    if n_pairs != 1:
        raise ValidationError("closed form only available for a single pair")
    return ch.x_a * (2.0 - ch.x_a)


def p_coincidence_two_pairs(ch: SplitChannels) -> float:
    """Probability that two pairs put >= 1 photon on A and >= 1 photon on B.

    Sum of P2(3,1), P2(1,3), P2(2,2), P2(2,1), P2(1,2), P2(1,1); about
    ``12 x_a x_b`` for small transmissions.
    """
    xa, xb = ch.x_a, ch.x_b
    return (12 - 12 * (xa + xb) + 4 * (xa * xa + xb * xb) + 6 * xa * xb) * xa * xb


def p_coincidence_two_pairs_halved(ch: SplitChannels) -> float:
    """``[6 - 6(x_a+x_b) + 2(x_a^2+x_b^2) + 3 x_a x_b] x_a x_b`` (about ``6 x_a x_b``).

    This commonly quoted polynomial is exactly half of
    :func:`p_coincidence_two_pairs`: it carries the 1/2! weight of a Poisson
    pair doublet, so multiplying it by ``(p0 I1)^2`` rather than
    ``(p0 I1)^2 / 2`` gives the same accidental rate.
    """
    return 0.5 * p_coincidence_two_pairs(ch)


def accidental_fraction() -> Fraction:
    """Share of two-pair coincidences that involve photons of different pairs."""
    return ACCIDENTAL_FRACTION
