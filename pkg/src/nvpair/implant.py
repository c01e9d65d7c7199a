"""Monte Carlo model of N2 dimer implantation and NV-N pair formation.

The molecule breaks on impact and each N atom, carrying half the dimer
energy, comes to rest at an independent Gaussian position around the mean
range. Straggle is isotropic and follows a power law in the per-atom energy.

Random numbers come from counter-based Philox streams keyed by the seed and
addressed by (domain, chunk index). Samples are processed in fixed chunks, so
any thread count gives bit-identical output.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special, stats

from .errors import CalibrationError, InvalidArgument

E0_KEV = 7.0
CHUNK = 1 << 16
THRESHOLDS_NM = (1.5, 2.0, 3.0)
_DOMAIN_POSITIONS = 1
_DOMAIN_CONVERSION = 2
# per-atom straggle at 7 keV that puts 1.5 % of 14 keV pairs below 2 nm
CALIBRATED_STRAGGLE_NM = 3.6324807771


@dataclass(frozen=True)
class ImplantParams:
    dimer_energy: float = 14.0  # keV
    straggle_long: float = CALIBRATED_STRAGGLE_NM  # nm at E0 per atom
    straggle_lat: float = CALIBRATED_STRAGGLE_NM
    range_e0: float = 11.0  # mean depth at E0, nm
    exponent: float = 1.0
    conversion_prob: float = 0.01
    conversion_prob_cold: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not self.dimer_energy > 0:
            raise InvalidArgument("dimer_energy must be positive")
        if not (self.straggle_long > 0 and self.straggle_lat > 0):
            raise InvalidArgument("straggle constants must be positive")
        if self.range_e0 < 0:
            raise InvalidArgument("range_e0 must be >= 0")
        for name in ("conversion_prob", "conversion_prob_cold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidArgument(f"{name} must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgument("seed must be a 64-bit unsigned integer")

    @property
    def atom_energy(self) -> float:
        return self.dimer_energy / 2.0

    def _scale(self) -> float:
        return (self.atom_energy / E0_KEV) ** self.exponent

    @property
    def sigma_long(self) -> float:
        return self.straggle_long * self._scale()

    @property
    def sigma_lat(self) -> float:
        return self.straggle_lat * self._scale()

    @property
    def mean_range(self) -> float:
        return self.range_e0 * self._scale()

    def replace(self, **changes) -> "ImplantParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class PairSample:
    r1: np.ndarray
    r2: np.ndarray
    spacing: float


@dataclass
class SpacingHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    n_total: int
    fractions_below: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "bin_edges_nm": [float(x) for x in self.bin_edges],
            "counts": [int(c) for c in self.counts],
            "n_total": int(self.n_total),
            "fractions_below": {f"{k:g}": float(v) for k, v in self.fractions_below.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpacingHistogram":
        return cls(np.asarray(d["bin_edges_nm"], dtype=float), np.asarray(d["counts"], dtype=np.int64),
                   int(d["n_total"]), {float(k): float(v) for k, v in d["fractions_below"].items()})


def stream(seed: int, chunk: int, domain: int = _DOMAIN_POSITIONS) -> np.random.Generator:
    """Generator for one chunk; the counter, not a seed hash, selects the block."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, chunk, domain]))


def sample_pair(params: ImplantParams, rng: np.random.Generator) -> PairSample:
    sig = np.array([params.sigma_lat, params.sigma_lat, params.sigma_long])
    mean = np.array([0.0, 0.0, params.mean_range])
    r1 = mean + sig * rng.standard_normal(3)
    r2 = mean + sig * rng.standard_normal(3)
    return PairSample(r1, r2, float(np.linalg.norm(r1 - r2)))


def _chunk_spacings(params: ImplantParams, chunk: int, count: int) -> np.ndarray:
    rng = stream(params.seed, chunk)
    sig = np.array([params.sigma_lat, params.sigma_lat, params.sigma_long])
    z = rng.standard_normal((count, 2, 3)) * sig
    return np.linalg.norm(z[:, 0] - z[:, 1], axis=1)


def _chunks(n: int):
    return [(k, min(CHUNK, n - k * CHUNK)) for k in range((n + CHUNK - 1) // CHUNK)]


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("NVPAIR_THREADS", "1"))
    if threads < 1:
        raise InvalidArgument("threads must be >= 1")
    return threads


def _map_chunks(fn, n: int, threads: int | None):
    jobs = _chunks(n)
    threads = resolve_threads(threads)
    if threads == 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def spacing_samples(params: ImplantParams, n: int, threads: int | None = None) -> np.ndarray:
    """All ``n`` pair spacings in sample order."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    parts = _map_chunks(lambda k, c: _chunk_spacings(params, k, c), n, threads)
    return np.concatenate(parts)


def spacing_distribution(params: ImplantParams, n: int, bin_width: float = 0.25,
                         max_spacing: float = 30.0, thresholds=THRESHOLDS_NM,
                         threads: int | None = None) -> SpacingHistogram:
    """Histogram of intra-pair spacings and fractions below each threshold.

    Spacings beyond ``max_spacing`` land in the last bin so counts always sum
    to ``n``.
    """
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    if not (bin_width > 0 and max_spacing > bin_width):
        raise InvalidArgument("need 0 < bin_width < max_spacing")
    edges = np.arange(0.0, max_spacing + bin_width / 2, bin_width)
    thresholds = sorted(float(t) for t in thresholds)

    def work(k, c):
        s = _chunk_spacings(params, k, c)
        counts, _ = np.histogram(np.minimum(s, edges[-1] - 1e-12), bins=edges)
        below = np.array([np.count_nonzero(s < t) for t in thresholds], dtype=np.int64)
        return counts.astype(np.int64), below

    parts = _map_chunks(work, n, threads)
    counts = np.sum([p[0] for p in parts], axis=0)
    below = np.sum([p[1] for p in parts], axis=0)
    return SpacingHistogram(edges, counts, n, {t: int(b) / n for t, b in zip(thresholds, below)})


def fraction_within(sigma_diff: float, threshold: float) -> float:
    """P(|d| < threshold) for an isotropic 3-D Gaussian with per-axis sigma.

    The spacing is Maxwell distributed with scale ``sigma_diff``.
    """
    if sigma_diff <= 0 or threshold < 0:
        raise InvalidArgument("sigma must be positive and threshold non-negative")
    u = threshold / sigma_diff
    return float(special.erf(u / np.sqrt(2)) - np.sqrt(2 / np.pi) * u * np.exp(-u * u / 2))


def maxwell_median(sigma_diff: float) -> float:
    return float(stats.maxwell.median(scale=sigma_diff))


@dataclass(frozen=True)
class StraggleCalibration:
    sigma_diff: float  # per-axis sigma of the pair difference at the given energy
    straggle_e0: float  # per-atom straggle constant at E0
    target_fraction: float
    threshold: float
    energy: float


def calibrate_straggle(target_fraction: float, threshold: float = 2.0, energy: float = 14.0,
                       exponent: float = 1.0, bracket=(1e-3, 1e3), tol: float = 1e-7) -> StraggleCalibration:
    """Per-atom straggle that gives ``target_fraction`` of pairs below ``threshold``.

    Bisection on the per-axis sigma of the difference; the within-threshold
    fraction decreases monotonically in sigma.
    """
    if not 0 < target_fraction < 0.5:
        raise InvalidArgument("target_fraction must lie in (0, 0.5)")
    if not (threshold > 0 and energy > 0):
        raise InvalidArgument("threshold and energy must be positive")
    lo, hi = bracket
    f_lo, f_hi = fraction_within(lo, threshold), fraction_within(hi, threshold)
    if not f_hi <= target_fraction <= f_lo:
        raise CalibrationError(f"target {target_fraction} outside [{f_hi:.3g}, {f_lo:.3g}] for the bracket")
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if fraction_within(mid, threshold) > target_fraction:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1 < tol:
            break
    sigma = np.sqrt(lo * hi)
    if abs(fraction_within(sigma, threshold) - target_fraction) > 1e-4:
        raise CalibrationError("bisection did not reach the target fraction")
    per_atom = sigma / np.sqrt(2.0)
    straggle_e0 = per_atom / ((energy / 2.0) / E0_KEV) ** exponent
    return StraggleCalibration(float(sigma), float(straggle_e0), target_fraction, threshold, energy)


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n < 1 or not 0 <= k <= n:
        raise InvalidArgument("need n >= 1 and 0 <= k <= n")
    z = stats.norm.ppf(0.5 + confidence / 2)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return float(max(0.0, centre - half)), float(min(1.0, centre + half))


@dataclass(frozen=True)
class ConversionYield:
    n_pairs: int
    n_dimers: int
    fraction: float
    ci95: tuple[float, float]
    prob: float


def conversion_yield(params: ImplantParams, n: int, cold: bool = False,
                     threads: int | None = None) -> ConversionYield:
    """Bernoulli conversion of ``n`` implanted dimers into NV-N pairs."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    prob = params.conversion_prob_cold if cold else params.conversion_prob

    def work(k, c):
        rng = stream(params.seed, k, _DOMAIN_CONVERSION)
        return int(np.count_nonzero(rng.random(c) < prob))

    hits = int(sum(_map_chunks(work, n, threads)))
    return ConversionYield(hits, n, hits / n, wilson_interval(hits, n), prob)
