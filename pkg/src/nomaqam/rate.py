"""Rate allocation between the two users under a sum-rate constraint.

With the sum-constellation size M = M1*M2 fixed, maximizing the optimal
minimum distance is equivalent to minimizing a piecewise function beta(M1)
of the split, parameterized only by the disparity ratio
lambda = P2 |h2|^2 / (P1 |h1|^2); concretely
beta = 3 P1 |h1|^2 / (2 d^2) for the optimal design's distance d.

`beta` evaluates that function, `optimal_rate_allocation` minimizes it over
power-of-2 splits via the four-candidate closed form (checked against
`enumerate_rate_allocations`, the exhaustive oracle), and
`asymptotic_rate_allocation` gives the high-rate approximation
M1 ~ sqrt(P1) |h1| / (sqrt(P2) |h2|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NotADivisor


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class RateProblem:
    """Sum PAM size M (power of 2, >= 2) and disparity ratio lambda > 0."""

    M: int
    lam: float

    def __post_init__(self) -> None:
        if self.M < 2 or not _is_power_of_two(self.M):
            raise ValueError(f"M must be a power of 2 with M >= 2, got {self.M}")
        if not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be positive and finite, got {self.lam}")


@dataclass(frozen=True)
class RateAllocation:
    """Chosen split M1*M2 = M with its beta value; source records whether it
    came from the exact minimization or the high-rate approximation."""

    M1: int
    M2: int
    beta: float
    source: str  # "optimal" | "asymptotic"


def gamma_breakpoints(prob: RateProblem) -> tuple[float, float, float]:
    """Region boundaries of beta over [1, M]; always 1 < g1 <= g2 <= g3 < M."""
    lam, M = prob.lam, prob.M
    M2 = float(M * M)
    g1 = math.sqrt((lam + 1.0) / (lam + 1.0 / M2))
    g2 = M * math.sqrt((math.sqrt((lam - 1.0) ** 2 + 4.0 * lam / M2) - (lam - 1.0)) / 2.0)
    g3 = math.sqrt((lam + M2) / (lam + 1.0))
    return g1, g2, g3


def beta(M1: int, prob: RateProblem) -> float:
    """Distance-equivalent objective at split M1 (down is better).

    Piecewise in M1: decreasing up to g1, increasing to g2, decreasing to
    g3, increasing to M, with the formulas agreeing at each boundary.
    """
    if not _is_power_of_two(M1) or M1 > prob.M:
        raise NotADivisor(f"M1 must be a power-of-2 divisor of {prob.M}, got {M1}")
    lam, M = prob.lam, prob.M
    g1, g2, g3 = gamma_breakpoints(prob)
    Msq = float(M * M)
    M1sq = float(M1 * M1)
    if M1 <= g1:
        return (Msq / M1sq - 1.0) / lam
    if M1 <= g2:
        return Msq - Msq / M1sq
    if M1 <= g3:
        return (Msq - M1sq) / lam
    return M1sq - 1.0


def enumerate_rate_allocations(prob: RateProblem) -> list[tuple[int, float]]:
    """beta at every power-of-2 split, ascending in M1 (exhaustive oracle)."""
    out = []
    M1 = 1
    while M1 <= prob.M:
        out.append((M1, beta(M1, prob)))
        M1 *= 2
    return out


def _clamp_pow2(M1: int, M: int) -> int:
    return min(max(M1, 1), M)


def optimal_rate_allocation(prob: RateProblem) -> RateAllocation:
    """Exact minimizer of beta over power-of-2 splits.

    Evaluates the four boundary-adjacent candidates (largest power below g1,
    first power above it, largest power below g3, first power above it); per
    the piecewise monotonicity these dominate every other split.  Candidates
    whose region condition fails keep an infinite sentinel.  Ties go to the
    smallest M1.
    """
    M = prob.M
    g1, g2, g3 = gamma_breakpoints(prob)
    e1 = math.floor(math.log2(g1))
    e2 = math.floor(math.log2(g2))
    e3 = math.floor(math.log2(g3))

    # candidate values go through the shared beta() so that agreement with
    # the enumeration oracle is bitwise, not merely up to formula rounding
    cands: list[tuple[float, int]] = []

    m11 = _clamp_pow2(2**e1, M)
    cands.append((beta(m11, prob), m11))

    m12 = _clamp_pow2(2 ** (e1 + 1), M)
    cands.append((beta(m12, prob) if e1 <= e2 + 1 else math.inf, m12))

    m13 = _clamp_pow2(2**e3, M)
    cands.append((beta(m13, prob) if e2 <= e3 + 1 else math.inf, m13))

    m14 = _clamp_pow2(2 ** (e3 + 1), M)
    cands.append((beta(m14, prob), m14))

    best_beta, best_m1 = min(cands, key=lambda c: (c[0], c[1]))
    return RateAllocation(M1=best_m1, M2=M // best_m1, beta=best_beta, source="optimal")


def asymptotic_rate_allocation(prob: RateProblem) -> RateAllocation:
    """High-rate approximation: place the coarse/fine split at the channel
    disparity, M1 ~ 1/sqrt(lambda), rounded to a power of 2 and clamped.

    The reported beta is the exact objective at the chosen split.
    """
    lam, M = prob.lam, prob.M
    if lam <= 1.0:
        e = math.floor(math.log2(1.0 / math.sqrt(lam)))
        M1 = min(2 ** (e + 1), M)
    else:
        e = math.floor(math.log2(M / math.sqrt(lam)))
        M1 = max(2**e, 1) if e >= 0 else 1
    return RateAllocation(M1=M1, M2=M // M1, beta=beta(M1, prob), source="asymptotic")


RATE_CSV_HEADER = "M,lambda,M1_opt,M2_opt,beta_opt,M1_asym,M2_asym,beta_asym"


def rate_csv_row(prob: RateProblem, opt: RateAllocation, asym: RateAllocation) -> str:
    """One CSV row matching RATE_CSV_HEADER."""
    return ",".join(
        [
            str(prob.M),
            f"{prob.lam:.12g}",
            str(opt.M1),
            str(opt.M2),
            f"{opt.beta:.12g}",
            str(asym.M1),
            str(asym.M2),
            f"{asym.beta:.12g}",
        ]
    )
