"""Monte Carlo link-level BER simulation for the two-user MAC.

Conventions (matching the design module): the system SNR is
rho = 1 / (2 sigma^2), so each real branch sees N(0, sigma^2) noise and the
complex noise variance is 2 sigma^2.  Rayleigh fading draws h ~ CN(0, 2 d^2),
i.e. real and imaginary parts i.i.d. N(0, d^2).  Transmitters pre-rotate
their symbols by -arg(h_k), which makes every per-branch link a real channel;
the engines below exploit that and work on magnitudes.

Schemes:

* ``noma``      - both users simultaneous with the optimal design weights;
                  detection is per-branch quantization on the regular sum
                  grid (equivalent to joint ML).
* ``tdma``      - users alternate slots with squared constellations at
                  unchanged instantaneous power; the channel draw is reused
                  across a frame's two slots (quasi-static).
* ``fdma``      - as tdma but simultaneous in half bands, so the per-user
                  noise variance is halved (a 3 dB shift).
* ``cr_noma``   - both users at full power with counter-rotated PSK sets and
                  exhaustive joint ML detection.

Reproducibility: every (scheme, SNR index, chunk index) triple gets its own
counter-based Philox substream derived from the config seed, so results are
a pure fold of per-chunk counts, identical no matter how chunks would be
scheduled.  The chunk size is a module constant.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .design import (
    ChannelRealization,
    ConstellationPair,
    DesignResult,
    PowerBudget,
    amplitude_cap,
    case_thresholds,
    pam_alphabet,
)
from .errors import ConfigInvalid, SilentUser

SCHEMES = ("noma", "tdma", "fdma", "cr_noma")
_SCHEME_IDS = {name: i for i, name in enumerate(SCHEMES)}

# symbols handled per RNG substream; fixed so that replays are bit-identical
_CHUNK = 1 << 16


def snr_to_sigma(snr_db: float) -> float:
    """Per-branch noise standard deviation for a system SNR in dB."""
    rho = 10.0 ** (snr_db / 10.0)
    return math.sqrt(1.0 / (2.0 * rho))


def wilson_halfwidth(errors: int, trials: int, z: float = 1.96) -> float:
    """Half-width of the Wilson score interval for an error proportion."""
    if trials <= 0:
        return 0.0
    p = errors / trials
    denom = 1.0 + z * z / trials
    return z / denom * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@functools.lru_cache(maxsize=None)
def _branch_tables(M: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(levels, gray labels, popcount table) for an M-level branch."""
    idx = np.arange(M)
    gray = idx ^ (idx >> 1)
    pop = np.array([bin(v).count("1") for v in range(M)], dtype=np.int64)
    levels = np.arange(-(M - 1), M, 2, dtype=float)
    return levels, gray, pop


def gray_labels(M: int) -> np.ndarray:
    """Reflected Gray code labels of the M ascending levels; adjacent levels
    differ in exactly one bit."""
    if not _is_power_of_two(M):
        raise ValueError(f"Gray labeling needs a power-of-2 size, got {M}")
    return _branch_tables(M)[1].copy()


def _quantize_levels(u: np.ndarray, M: int) -> np.ndarray:
    """Nearest-level indices for normalized branch values on the odd grid
    {-(M-1), ..., M-1}; saturates at the outer levels, midpoint ties go to
    the lower level."""
    return np.clip(np.ceil((u + (M - 2)) / 2.0), 0, M - 1).astype(np.int64)


@dataclass(frozen=True)
class SimConfig:
    """Everything one BER experiment needs; validated on construction."""

    snr_db_grid: tuple[float, ...]
    symbols_per_point: int
    seed: int
    schemes: tuple[str, ...] = ("noma", "tdma", "fdma")
    sizes: ConstellationPair = field(default_factory=lambda: ConstellationPair(4, 4))
    fading_vars: tuple[float, float] = (1.0, 1.0)
    powers: PowerBudget = field(default_factory=lambda: PowerBudget(1.0, 1.0))
    block_fading: int = 1
    psk_order: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "snr_db_grid", tuple(float(s) for s in self.snr_db_grid))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "fading_vars", tuple(float(v) for v in self.fading_vars))
        if not self.snr_db_grid or not all(math.isfinite(s) for s in self.snr_db_grid):
            raise ConfigInvalid("snr_db_grid must be a non-empty list of finite values")
        if int(self.symbols_per_point) < 1:
            raise ConfigInvalid("symbols_per_point must be >= 1")
        if not self.schemes:
            raise ConfigInvalid("at least one scheme is required")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigInvalid(f"unknown scheme {s!r}; valid: {SCHEMES}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigInvalid("duplicate scheme names")
        if not (_is_power_of_two(self.sizes.M1) and _is_power_of_two(self.sizes.M2)):
            raise ConfigInvalid("simulation sizes must be powers of 2 (bit labeling)")
        if self.sizes.M1 < 2 or self.sizes.M2 < 2:
            raise ConfigInvalid("simulation requires both users active (M >= 2)")
        if len(self.fading_vars) != 2 or not all(v > 0 for v in self.fading_vars):
            raise ConfigInvalid("fading_vars must be two positive variances")
        if self.block_fading < 1 or _CHUNK % self.block_fading != 0:
            raise ConfigInvalid(f"block_fading must be >= 1 and divide {_CHUNK}")
        if self.psk_order is not None and (
            self.psk_order < 4 or not _is_power_of_two(self.psk_order)
        ):
            raise ConfigInvalid("psk_order must be a power of 2, >= 4")

    @property
    def cr_psk_order(self) -> int:
        # matches the per-user spectral efficiency of the square-QAM design
        return self.psk_order if self.psk_order is not None else self.sizes.M1**2


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    bits_sent: int
    bit_errors: int
    ber: float
    wilson_halfwidth: float


@dataclass(frozen=True)
class BerCurve:
    scheme: str
    points: tuple[BerPoint, ...]


BER_CSV_HEADER = "scheme,snr_db,bits,errors,ber,ci_halfwidth"


def curves_to_csv(curves: list[BerCurve]) -> str:
    lines = [BER_CSV_HEADER]
    for curve in curves:
        for p in curve.points:
            lines.append(
                f"{curve.scheme},{p.snr_db:.10g},{p.bits_sent},{p.bit_errors},"
                f"{p.ber:.10g},{p.wilson_halfwidth:.10g}"
            )
    return "\n".join(lines) + "\n"


def sample_rayleigh(var2: float, rng: np.random.Generator, size=None):
    """Complex gain(s) with i.i.d. N(0, var2) real and imaginary parts, so
    E|h|^2 = 2*var2."""
    if not var2 > 0.0:
        raise ValueError("variance must be positive")
    scale = math.sqrt(var2)
    return rng.normal(0.0, scale, size=size) + 1j * rng.normal(0.0, scale, size=size)


def modulate_noma(s1, s1p, s2, s2p, design: DesignResult, channel: ChannelRealization):
    """Transmit symbols for one channel use (or arrays of uses).

    Each user scales its PAM pair by its design weight and pre-rotates by
    -arg(h_k) so the received contribution lands on the real/imaginary grid.
    """
    rot1 = np.exp(-1j * np.angle(channel.h1))
    rot2 = np.exp(-1j * np.angle(channel.h2))
    x1 = design.w1 * (np.asarray(s1) + 1j * np.asarray(s1p)) * rot1
    x2 = design.w2 * (np.asarray(s2) + 1j * np.asarray(s2p)) * rot2
    return x1, x2


def detect_noma(z, design: DesignResult, channel: ChannelRealization, sizes: ConstellationPair):
    """Quantization ML detection on the regular sum grid.

    Quantizes the real and imaginary branches independently to the nearest
    sum-constellation level and inverts the coarse/fine composition dictated
    by the design's gain ratio.  Identical to exhaustive joint ML because
    the optimal sum grid is regular.  Returns (s1, s1', s2, s2').
    """
    if design.gain_ratio is None:
        raise SilentUser("quantization detection requires both users active")
    M1, M2 = sizes.M1, sizes.M2
    a1 = channel.h1_abs * design.w1
    a2 = channel.h2_abs * design.w2
    coarse1 = design.gain_ratio > 1.0
    step = a2 if coarse1 else a1
    T = M1 * M2

    scalar = np.ndim(z) == 0
    za = np.atleast_1d(np.asarray(z, dtype=complex))
    out = []
    for u in (za.real / step, za.imag / step):
        t_idx = _quantize_levels(u, T)
        if coarse1:
            j1, j2 = t_idx // M2, t_idx % M2
        else:
            j2, j1 = t_idx // M1, t_idx % M1
        out.append((2 * j1 - (M1 - 1), 2 * j2 - (M2 - 1)))
    (s1, s2), (s1p, s2p) = out
    if scalar:
        return int(s1[0]), int(s1p[0]), int(s2[0]), int(s2p[0])
    return s1, s1p, s2, s2p


def _ml_indices(z: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Nearest candidate index per sample; ties resolve to the lowest index."""
    out = np.empty(z.size, dtype=np.int64)
    rows = max(1, (1 << 21) // max(points.size, 1))
    for start in range(0, z.size, rows):
        sl = slice(start, min(start + rows, z.size))
        d2 = np.abs(z[sl, None] - points[None, :]) ** 2
        out[sl] = np.argmin(d2, axis=1)
    return out


def detect_ml_joint(z, candidates):
    """Exhaustive nearest-point decision over an ordered candidate set.

    `candidates` is a sequence of (label, noise_free_point); the label of
    the closest point is returned (a list of labels for array input).
    """
    labels = [lab for lab, _ in candidates]
    points = np.asarray([pt for _, pt in candidates], dtype=complex)
    if points.size == 0:
        raise ValueError("candidate set must be non-empty")
    scalar = np.ndim(z) == 0
    za = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    idx = _ml_indices(za, points)
    if scalar:
        return labels[int(idx[0])]
    return [labels[int(i)] for i in idx]


def noma_candidates(
    design: DesignResult, channel: ChannelRealization, sizes: ConstellationPair
) -> list[tuple[tuple[int, int, int, int], complex]]:
    """All ((s1, s2, s1', s2'), point) pairs of the received sum grid, for
    use with `detect_ml_joint` as the quantizer's oracle."""
    a1 = channel.h1_abs * design.w1
    a2 = channel.h2_abs * design.w2
    A1, A2 = pam_alphabet(sizes.M1), pam_alphabet(sizes.M2)
    return [
        ((s1, s2, s1p, s2p), a1 * s1 + a2 * s2 + 1j * (a1 * s1p + a2 * s2p))
        for s1 in A1
        for s2 in A2
        for s1p in A1
        for s2p in A2
    ]


def _design_amplitudes(
    h1a: np.ndarray, h2a: np.ndarray, powers: PowerBudget, sizes: ConstellationPair
):
    """Vectorized optimal design: received per-step amplitudes (a1, a2), the
    fine grid half-spacing (= minimum distance), and the coarse-user mask."""
    M1, M2 = sizes.M1, sizes.M2
    t1, t2, t3 = case_thresholds(powers, sizes)
    h1t = amplitude_cap(powers.P1, M1) * h1a
    h2t = amplitude_cap(powers.P2, M2) * h2a
    r = h2a / h1a
    d = np.where(
        r <= t1, h2t, np.where(r <= t2, h1t / M2, np.where(r <= t3, h2t / M1, h1t))
    )
    coarse1 = r <= t2
    a1 = np.where(coarse1, M2 * d, d)
    a2 = np.where(coarse1, d, M1 * d)
    return a1, a2, d, coarse1


def _count_branch_errors(pop, gray, tx, rx) -> int:
    return int(pop[gray[tx] ^ gray[rx]].sum())


def _noma_block(rng, h1a, h2a, sigma, cfg: SimConfig) -> tuple[int, int]:
    M1, M2 = cfg.sizes.M1, cfg.sizes.M2
    n = h1a.size
    A1, G1, P1pop = _branch_tables(M1)
    A2, G2, P2pop = _branch_tables(M2)
    i1 = rng.integers(0, M1, size=n)
    i1p = rng.integers(0, M1, size=n)
    i2 = rng.integers(0, M2, size=n)
    i2p = rng.integers(0, M2, size=n)
    a1, a2, step, coarse1 = _design_amplitudes(h1a, h2a, cfg.powers, cfg.sizes)
    ny = rng.normal(0.0, sigma, size=n)
    nyp = rng.normal(0.0, sigma, size=n)
    y = a1 * A1[i1] + a2 * A2[i2] + ny
    yp = a1 * A1[i1p] + a2 * A2[i2p] + nyp

    T = M1 * M2
    errors = 0
    for u, tx1, tx2 in ((y / step, i1, i2), (yp / step, i1p, i2p)):
        t_idx = _quantize_levels(u, T)
        j1 = np.where(coarse1, t_idx // M2, t_idx % M1)
        j2 = np.where(coarse1, t_idx % M2, t_idx // M1)
        errors += _count_branch_errors(P1pop, G1, tx1, j1)
        errors += _count_branch_errors(P2pop, G2, tx2, j2)
    bits = n * 2 * ((M1.bit_length() - 1) + (M2.bit_length() - 1))
    return bits, errors


def _single_user_qam_slot(rng, ha, sigma, P, M) -> tuple[int, int]:
    """One user alone sending M^4-QAM (M^2 levels per branch) at power P."""
    L = M * M
    A, G, POP = _branch_tables(L)
    n = ha.size
    iI = rng.integers(0, L, size=n)
    iQ = rng.integers(0, L, size=n)
    nI = rng.normal(0.0, sigma, size=n)
    nQ = rng.normal(0.0, sigma, size=n)
    scale = amplitude_cap(P, L) * ha
    errors = 0
    for idx, noise in ((iI, nI), (iQ, nQ)):
        y = scale * A[idx] + noise
        j = _quantize_levels(y / scale, L)
        errors += _count_branch_errors(POP, G, idx, j)
    bits = n * 2 * (L.bit_length() - 1)
    return bits, errors


def _tdma_block(rng, h1a, h2a, sigma, cfg: SimConfig) -> tuple[int, int]:
    # one array element = one two-slot frame; the fading draw is shared by
    # both slots (quasi-static), noise is fresh per slot
    b1, e1 = _single_user_qam_slot(rng, h1a, sigma, cfg.powers.P1, cfg.sizes.M1)
    b2, e2 = _single_user_qam_slot(rng, h2a, sigma, cfg.powers.P2, cfg.sizes.M2)
    return b1 + b2, e1 + e2


def _fdma_block(rng, h1a, h2a, sigma, cfg: SimConfig) -> tuple[int, int]:
    # both users in parallel half bands: per-user noise variance is halved
    sf = sigma / math.sqrt(2.0)
    b1, e1 = _single_user_qam_slot(rng, h1a, sf, cfg.powers.P1, cfg.sizes.M1)
    b2, e2 = _single_user_qam_slot(rng, h2a, sf, cfg.powers.P2, cfg.sizes.M2)
    return b1 + b2, e1 + e2


@functools.lru_cache(maxsize=None)
def _psk_tables(N: int, P1: float, P2: float):
    k = np.arange(N)
    e1 = math.sqrt(P1) * np.exp(2j * math.pi * k / N)
    e2 = math.sqrt(P2) * np.exp(1j * (2.0 * math.pi * k + math.pi) / N)
    # flattened candidate factors in label order c = k1 * N + k2
    return e1, e2, np.repeat(e1, N), np.tile(e2, N)


def _cr_block(rng, h1a, h2a, sigma, cfg: SimConfig) -> tuple[int, int]:
    N = cfg.cr_psk_order
    _, G, POP = _branch_tables(N)
    e1, e2, E1c, E2c = _psk_tables(N, cfg.powers.P1, cfg.powers.P2)
    n = h1a.size
    k1 = rng.integers(0, N, size=n)
    k2 = rng.integers(0, N, size=n)
    nr = rng.normal(0.0, sigma, size=n)
    ni = rng.normal(0.0, sigma, size=n)
    z = h1a * e1[k1] + h2a * e2[k2] + nr + 1j * ni

    # candidate grid varies per symbol through the fading amplitudes
    chat = np.empty(n, dtype=np.int64)
    rows = max(1, (1 << 21) // (N * N))
    for start in range(0, n, rows):
        sl = slice(start, min(start + rows, n))
        pts = h1a[sl, None] * E1c[None, :] + h2a[sl, None] * E2c[None, :]
        chat[sl] = np.argmin(np.abs(z[sl, None] - pts) ** 2, axis=1)
    k1hat, k2hat = chat // N, chat % N
    errors = _count_branch_errors(POP, G, k1, k1hat)
    errors += _count_branch_errors(POP, G, k2, k2hat)
    bits = n * 2 * (N.bit_length() - 1)
    return bits, errors


_ENGINES = {
    "noma": _noma_block,
    "tdma": _tdma_block,
    "fdma": _fdma_block,
    "cr_noma": _cr_block,
}


def _scheme_units(scheme: str, symbols: int) -> int:
    # tdma frames and fdma symbol pairs each span two channel uses
    if scheme in ("tdma", "fdma"):
        return (symbols + 1) // 2
    return symbols


def run_scheme_symbol(
    scheme: str,
    rng: np.random.Generator,
    channel: ChannelRealization,
    snr_db: float,
    config: SimConfig,
) -> tuple[int, int]:
    """Simulate one atomic unit of a scheme on a given channel draw.

    For noma/fdma/cr_noma this is one channel use; for tdma it is one
    two-slot frame reusing the draw for both slots.  Returns
    (bits_sent, bit_errors).
    """
    if scheme not in _ENGINES:
        raise ConfigInvalid(f"unknown scheme {scheme!r}; valid: {SCHEMES}")
    sigma = snr_to_sigma(snr_db)
    h1a = np.array([channel.h1_abs])
    h2a = np.array([channel.h2_abs])
    return _ENGINES[scheme](rng, h1a, h2a, sigma, config)


def _substream(seed: int, scheme: str, snr_idx: int, chunk_idx: int) -> np.random.Generator:
    entropy = [seed & 0xFFFFFFFFFFFFFFFF, _SCHEME_IDS[scheme], snr_idx, chunk_idx]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def _draw_fading(rng, cfg: SimConfig, count: int):
    B = cfg.block_fading
    nblocks = -(-count // B)
    h1 = np.abs(sample_rayleigh(cfg.fading_vars[0], rng, nblocks))
    h2 = np.abs(sample_rayleigh(cfg.fading_vars[1], rng, nblocks))
    return np.repeat(h1, B)[:count], np.repeat(h2, B)[:count]


def simulate_ber(config: SimConfig) -> list[BerCurve]:
    """Run every (scheme, SNR) cell of the experiment.

    Fresh fading per unit (or per block_fading units), random Gray-mapped
    symbols, per-cell error counts with Wilson confidence half-widths.
    Deterministic given the seed regardless of chunk scheduling.
    """
    curves = []
    for scheme in config.schemes:
        engine = _ENGINES[scheme]
        points = []
        for snr_idx, snr_db in enumerate(config.snr_db_grid):
            sigma = snr_to_sigma(snr_db)
            remaining = _scheme_units(scheme, config.symbols_per_point)
            bits_total = 0
            errors_total = 0
            chunk_idx = 0
            while remaining > 0:
                count = min(_CHUNK, remaining)
                rng = _substream(config.seed, scheme, snr_idx, chunk_idx)
                h1a, h2a = _draw_fading(rng, config, count)
                b, e = engine(rng, h1a, h2a, sigma, config)
                bits_total += b
                errors_total += e
                remaining -= count
                chunk_idx += 1
            points.append(
                BerPoint(
                    snr_db=snr_db,
                    bits_sent=bits_total,
                    bit_errors=errors_total,
                    ber=errors_total / bits_total,
                    wilson_halfwidth=wilson_halfwidth(errors_total, bits_total),
                )
            )
        curves.append(BerCurve(scheme=scheme, points=tuple(points)))
    return curves
