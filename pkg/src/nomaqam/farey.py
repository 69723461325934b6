"""Exact-arithmetic engine for punched Farey sequences.

The punched Farey sequence of order (K, L) is the ascending list of all
irreducible fractions n/m with numerator n <= L and denominator m <= K,
starting at 0/1 and ending at the infinite terminal 1/0.  It generalizes the
classical Farey sequence (K = L, restricted to [0, 1]) and the extended Farey
sequence (K = L, full ray) to asymmetric numerator/denominator bounds, which
is what two users with different constellation sizes need.

Everything in this module is exact: fractions are pairs of Python integers,
all comparisons cross-multiply, and floats entering `locate_interval` are
converted to their exact binary rational before comparing.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

from .errors import BothZero, BoundTooLarge, PropertyViolation

# Enumeration materializes (and sorts) one fraction candidate per (n, m) grid
# cell, so K*L is the memory/time driver.  Desk-scale designs use K, L below
# a few hundred; the cap just guards against typo-scale requests.
ENUMERATION_CAP = 4_000_000


@functools.total_ordering
@dataclass(frozen=True)
class Fraction:
    """Irreducible non-negative fraction; den == 0 encodes the terminal 1/0.

    Instances are expected to be constructed through `make_fraction`, which
    reduces to lowest terms.  Ordering cross-multiplies, so 1/0 compares
    greater than every finite fraction and no floats are involved.
    """

    num: int
    den: int

    def __post_init__(self) -> None:
        if self.num == 0 and self.den == 0:
            raise BothZero("fraction 0/0 is undefined")
        if self.num < 0 or self.den < 0:
            raise ValueError(f"fraction parts must be non-negative, got {self.num}/{self.den}")

    def __lt__(self, other: "Fraction") -> bool:
        return self.num * other.den < other.num * self.den

    def __str__(self) -> str:
        return f"{self.num}/{self.den}"

    @property
    def is_infinite(self) -> bool:
        return self.den == 0

    def reciprocal(self) -> "Fraction":
        """Swap numerator and denominator (maps 0/1 <-> 1/0)."""
        return Fraction(self.den, self.num)

    def __float__(self) -> float:
        return math.inf if self.den == 0 else self.num / self.den


def make_fraction(num: int, den: int) -> Fraction:
    """Build a fraction reduced to lowest terms.

    gcd(n, 0) = n, so (5, 0) reduces to the infinite terminal 1/0 and
    (0, 7) to 0/1.  Raises BothZero for (0, 0).
    """
    if num == 0 and den == 0:
        raise BothZero("fraction 0/0 is undefined")
    if num < 0 or den < 0:
        raise ValueError(f"fraction parts must be non-negative, got {num}/{den}")
    g = math.gcd(num, den)
    return Fraction(num // g, den // g)


@dataclass(frozen=True)
class PunchedFareySequence:
    """Ordered irreducible fractions n/m with n <= L, m <= K, from 0/1 to 1/0."""

    K: int
    L: int
    terms: tuple[Fraction, ...]

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __getitem__(self, idx):
        return self.terms[idx]

    def compact_str(self) -> str:
        """Single-line display form 'n/m n/m ...'."""
        return " ".join(str(f) for f in self.terms)

    def to_csv(self) -> str:
        """CSV serialization, one 'num,den' row per term, with header."""
        lines = ["num,den"]
        lines.extend(f"{f.num},{f.den}" for f in self.terms)
        return "\n".join(lines) + "\n"


def enumerate_punched_farey(K: int, L: int) -> PunchedFareySequence:
    """Enumerate the complete punched Farey sequence of order (K, L).

    Generates every irreducible pair and sorts it, which is trivially
    complete; the next-term recurrence is kept as an independent cross-check
    inside `verify_properties`.
    """
    if K < 1 or L < 1:
        raise ValueError(f"bounds must be >= 1, got K={K}, L={L}")
    if K * L > ENUMERATION_CAP:
        raise BoundTooLarge(
            f"K*L = {K * L} exceeds the enumeration cap {ENUMERATION_CAP}"
        )
    inner = [
        Fraction(n, m)
        for m in range(1, K + 1)
        for n in range(1, L + 1)
        if math.gcd(n, m) == 1
    ]
    inner.sort()
    terms = (Fraction(0, 1), *inner, Fraction(1, 0))
    return PunchedFareySequence(K=K, L=L, terms=terms)


def mediant(f1: Fraction, f2: Fraction) -> Fraction:
    """Mediant of two fractions f1 < f2.

    For adjacent sequence terms the raw component sums are already
    irreducible; for arbitrary arguments the result is reduced.
    """
    if not f1 < f2:
        raise ValueError(f"mediant requires f1 < f2, got {f1} and {f2}")
    return make_fraction(f1.num + f2.num, f1.den + f2.den)


def locate_interval(seq: PunchedFareySequence, ratio) -> int:
    """Index k of the half-open-left interval terms[k] < ratio <= terms[k+1].

    `ratio` may be a positive float (compared via its exact binary rational)
    or a finite positive Fraction.  Because the sequence spans (0, inf), any
    positive finite ratio lands in exactly one interval; a ratio equal to a
    sequence term maps to the interval that has it as right endpoint.
    """
    if isinstance(ratio, Fraction):
        p, q = ratio.num, ratio.den
    else:
        r = float(ratio)
        if not math.isfinite(r) or r <= 0.0:
            raise ValueError(f"ratio must be positive and finite, got {ratio!r}")
        p, q = r.as_integer_ratio()
    if p <= 0 or q <= 0:
        raise ValueError(f"ratio must be positive and finite, got {ratio!r}")

    terms = seq.terms
    lo, hi = 0, len(terms) - 1
    # invariant: terms[lo] < ratio <= terms[hi]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if terms[mid].num * q < p * terms[mid].den:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class PropertyReport:
    """Outcome of the structural property checks on one sequence."""

    K: int
    L: int
    num_terms: int
    pairs_checked: int
    triples_checked: int
    recurrence_verified: bool


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    """Extended Euclid: returns (g, x, y) with a*x + b*y = g = gcd(a, b)."""
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_x, x = x, old_x - q * x
        old_y, y = y, old_y - q * y
    return old_r, old_x, old_y


def _next_term(f: Fraction, K: int, L: int) -> Fraction:
    """Successor of `f` in the (K, L) sequence via the unimodular recurrence.

    Solves m1*n - m*n1 = 1 and takes the solution with the largest shift that
    keeps m <= K and n <= L; that solution is the immediate successor.
    """
    n1, m1 = f.num, f.den
    g, x, y = _egcd(m1, n1)
    assert g == 1, f"term {f} is not irreducible"
    n0, m0 = x, -y  # m1*n0 - m0*n1 = 1
    shifts = []
    if m1 > 0:
        shifts.append((K - m0) // m1)
    if n1 > 0:
        shifts.append((L - n0) // n1)
    r = min(shifts)
    n, m = n0 + r * n1, m0 + r * m1
    assert 0 <= n <= L and 0 <= m <= K
    return Fraction(n, m)


def verify_properties(seq: PunchedFareySequence) -> PropertyReport:
    """Check the adjacency identities of a punched Farey sequence.

    For every adjacent pair n1/m1 < n2/m2: the determinant m1*n2 - m2*n1
    equals 1; the mediant lies strictly inside the pair; if n1+n2 <= L then
    m1+m2 > K and if m1+m2 <= K then n1+n2 > L; the component sums are >= 1
    with equality exactly at the boundary pairs (0/1, 1/K) and (L/1, 1/0).
    Every consecutive triple satisfies the mediant identity, and the whole
    sequence is regenerated through the next-term recurrence as an
    independent cross-check of the sort-based enumeration.

    Raises PropertyViolation naming the offending pair or triple.  A failure
    is never expected on a sequence built by `enumerate_punched_farey`; it
    signals an implementation bug.
    """
    K, L, terms = seq.K, seq.L, seq.terms
    if len(terms) < 2:
        raise PropertyViolation(f"sequence of order ({K},{L}) has fewer than 2 terms")
    if terms[0] != Fraction(0, 1) or terms[-1] != Fraction(1, 0):
        raise PropertyViolation("sequence must start at 0/1 and end at 1/0")

    pairs = 0
    for f1, f2 in zip(terms, terms[1:]):
        n1, m1, n2, m2 = f1.num, f1.den, f2.num, f2.den
        if m1 * n2 - m2 * n1 != 1:
            raise PropertyViolation(f"pair ({f1}, {f2}): determinant != 1")
        med_n, med_d = n1 + n2, m1 + m2
        # strict containment n1/m1 < mediant < n2/m2, cross-multiplied
        if not (n1 * med_d < med_n * m1 and med_n * m2 < n2 * med_d):
            raise PropertyViolation(f"pair ({f1}, {f2}): mediant not interior")
        if med_n <= L and not med_d > K:
            raise PropertyViolation(f"pair ({f1}, {f2}): numerator sum <= L but denominator sum <= K")
        if med_d <= K and not med_n > L:
            raise PropertyViolation(f"pair ({f1}, {f2}): denominator sum <= K but numerator sum <= L")
        if med_n < 1 or med_d < 1:
            raise PropertyViolation(f"pair ({f1}, {f2}): component sum < 1")
        if med_n == 1 and (f1 != Fraction(0, 1) or f2 != Fraction(1, K)):
            raise PropertyViolation(f"pair ({f1}, {f2}): numerator sum 1 off the left boundary")
        if med_d == 1 and (f1 != Fraction(L, 1) or f2 != Fraction(1, 0)):
            raise PropertyViolation(f"pair ({f1}, {f2}): denominator sum 1 off the right boundary")
        pairs += 1

    triples = 0
    for f1, f2, f3 in zip(terms, terms[1:], terms[2:]):
        # middle equals the mediant of its neighbours (as a reduced value)
        if f2.num * (f1.den + f3.den) != f2.den * (f1.num + f3.num):
            raise PropertyViolation(f"triple ({f1}, {f2}, {f3}): middle is not the mediant")
        triples += 1

    current = terms[0]
    for expected in terms[1:]:
        successor = _next_term(current, K, L)
        if successor != expected:
            raise PropertyViolation(
                f"recurrence successor of {current} is {successor}, sequence has {expected}"
            )
        current = successor

    return PropertyReport(
        K=K,
        L=L,
        num_terms=len(terms),
        pairs_checked=pairs,
        triples_checked=triples,
        recurrence_verified=True,
    )
