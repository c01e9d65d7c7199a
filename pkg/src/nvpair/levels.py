"""Field sweeps of eigenlevels, anticrossing search and ESR spectrum synthesis."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import BracketingError, InvalidArgument, UndefinedPolarization
from .linalg import eigh
from .spin import (
    SpinSystemConfig,
    basis_index,
    basis_labels,
    build_hamiltonian,
    embedded_operators,
    field_axis,
    format_label,
)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
TIE_TOL = 1e-6


@dataclass
class LevelSweep:
    b_values: np.ndarray
    levels: np.ndarray  # (n_fields, dim), ascending per row
    labels: list  # per field, per level: product-basis label tuple
    overlaps: np.ndarray  # weight of the assigned label in each eigenvector

    def branch(self, label) -> np.ndarray:
        """Energy curve followed by one diabatic label (NaN where absent)."""
        out = np.full(len(self.b_values), np.nan)
        for k, labs in enumerate(self.labels):
            for j, lab in enumerate(labs):
                if lab == label:
                    out[k] = self.levels[k, j]
        return out


@dataclass
class SpectrumLine:
    frequency: float  # MHz
    intensity: float
    from_state: tuple
    to_state: tuple

    def as_row(self) -> dict:
        return {
            "freq_mhz": self.frequency,
            "intensity": self.intensity,
            "from_state": format_label(self.from_state),
            "to_state": format_label(self.to_state),
        }


@dataclass
class Spectrum:
    lines: list
    grid: np.ndarray
    amplitude: np.ndarray
    linewidth: float
    population_weights: np.ndarray
    labels: list = field(default_factory=list)


def _field_config(config: SpinSystemConfig, b: float) -> SpinSystemConfig:
    return config.with_field(tuple(b * field_axis(config)))


def _assign_labels(v: np.ndarray, labels, previous=None):
    """Label each eigenvector by its dominant product state.

    Each basis state is used once (greedy by weight); near-ties are resolved
    in favour of the label the same level carried at the previous field.
    """
    weights = np.abs(v) ** 2  # (basis, level)
    dim = weights.shape[0]
    assigned = [None] * dim
    overlap = np.zeros(dim)
    free_basis = set(range(dim))
    order = np.argsort(-weights.max(axis=0), kind="stable")
    for level in order:
        candidates = sorted(free_basis, key=lambda b: -weights[b, level])
        best = candidates[0]
        if previous is not None and len(candidates) > 1:
            tied = [b for b in candidates if weights[best, level] - weights[b, level] < TIE_TOL]
            prev = previous[level]
            for b in tied:
                if labels[b] == prev:
                    best = b
                    break
        assigned[level] = labels[best]
        overlap[level] = weights[best, level]
        free_basis.discard(best)
    return assigned, overlap


def sweep_levels(config: SpinSystemConfig, b_min: float, b_max: float, n: int) -> LevelSweep:
    """Eigenlevels along the configured field axis for ``n`` field points."""
    if n < 2 or not b_min < b_max:
        raise InvalidArgument("sweep needs n >= 2 and b_min < b_max")
    b_values = np.linspace(b_min, b_max, n)
    labels = basis_labels(config)
    levels, tags, overlaps = [], [], []
    previous = None
    for b in b_values:
        w, v = eigh(build_hamiltonian(_field_config(config, b)))
        assigned, overlap = _assign_labels(v, labels, previous)
        levels.append(w)
        tags.append(assigned)
        overlaps.append(overlap)
        previous = assigned
    return LevelSweep(b_values, np.array(levels), tags, np.array(overlaps))


def branch_gap(config: SpinSystemConfig, branch_pair, b: float) -> float:
    """Gap between the two eigenstates carrying most weight on the two labels."""
    ia = basis_index(config, branch_pair[0])
    ib = basis_index(config, branch_pair[1])
    w, v = eigh(build_hamiltonian(_field_config(config, b)))
    weight = np.abs(v[ia]) ** 2 + np.abs(v[ib]) ** 2
    k1, k2 = np.argsort(-weight, kind="stable")[:2]
    return float(abs(w[k1] - w[k2]))


def golden_section(f, lo: float, hi: float, tol: float):
    """Minimise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def find_lac(config: SpinSystemConfig, branch_pair=((0, 0.5), (-1, -0.5)), b_lo: float = 400.0,
             b_hi: float = 620.0, tol: float = 1e-8):
    """Field (G) of minimal gap between two diabatic branches and that gap (MHz).

    The default branch pair is |0,+1/2> / |-1,-1/2> of the NV-N system. The
    golden-section tolerance defaults far below the 0.01 G needed so that an
    uncoupled crossing resolves to a gap below 1e-6 MHz.
    """
    if not b_lo < b_hi:
        raise InvalidArgument("b_lo must be below b_hi")

    def gap(b):
        return branch_gap(config, branch_pair, b)

    b_lac, min_gap = golden_section(gap, b_lo, b_hi, tol)
    g_lo, g_hi = gap(b_lo), gap(b_hi)
    if not (g_lo > min_gap and g_hi > min_gap) or b_lac - b_lo < 2 * tol or b_hi - b_lac < 2 * tol:
        raise BracketingError(
            f"no interior gap minimum in [{b_lo}, {b_hi}] G "
            f"(gap {g_lo:.4g} / {g_hi:.4g} MHz at the ends, {min_gap:.4g} inside)"
        )
    return b_lac, min_gap


def default_populations(config: SpinSystemConfig, nv_spin: int = 0) -> np.ndarray:
    """NV optically pumped into ms=0, every other spin unpolarised."""
    labels = basis_labels(config)
    p = np.array([1.0 if lab[nv_spin] == 0 else 0.0 for lab in labels])
    return p / p.sum()


def pair_populations(p4) -> np.ndarray:
    """Expand a 4-state NV{0,-1} x N{+1/2,-1/2} vector onto the 6-state pair basis."""
    p4 = np.asarray(p4, dtype=float)
    if p4.shape != (4,):
        raise InvalidArgument("expected populations of |0,+1/2>, |0,-1/2>, |-1,+1/2>, |-1,-1/2>")
    return np.concatenate([[0.0, 0.0], p4])


def lorentzian(grid, center, fwhm, height=1.0):
    half = 0.5 * fwhm
    return height * half**2 / ((np.asarray(grid) - center) ** 2 + half**2)


def esr_spectrum(
    config: SpinSystemConfig,
    linewidth: float,
    populations=None,
    drive_spin: int = 0,
    grid=None,
    n_points: int = 4001,
    merge_tol: float = 1e-6,
    rel_cutoff: float = 1e-6,
) -> Spectrum:
    """Optically detected ESR lines and their Lorentzian-broadened sum.

    Intensity of a line i -> f is ``|<f|Sx(drive)|i>|^2 * |p_i - p_f|``.
    ``populations`` are given per product-basis state and carried by the
    eigenstate holding that diabatic label.
    Lines closer than ``merge_tol`` MHz are merged; the merged line keeps
    the labels of its strongest member. Each line contributes a Lorentzian
    of FWHM ``linewidth`` whose peak height equals its intensity.
    """
    if not linewidth > 0:
        raise InvalidArgument("linewidth must be positive")
    if not 0 <= drive_spin < len(config.spins):
        raise InvalidArgument(f"drive_spin {drive_spin} out of range")
    labels = basis_labels(config)
    if populations is None:
        populations = default_populations(config)
    populations = np.asarray(populations, dtype=float)
    if populations.shape != (config.dim,) or np.any(populations < 0):
        raise InvalidArgument(f"populations must be {config.dim} non-negative numbers")

    w, v = eigh(build_hamiltonian(config))
    dominant, _ = _assign_labels(v, labels)
    index = {lab: k for k, lab in enumerate(labels)}
    p_eig = np.array([populations[index[lab]] for lab in dominant])
    sx = embedded_operators(config)[drive_spin][0]
    m = v.conj().T @ sx @ v
    raw = []
    for i in range(config.dim):
        for f in range(i + 1, config.dim):
            freq = w[f] - w[i]
            inten = abs(m[f, i]) ** 2 * abs(p_eig[i] - p_eig[f])
            if freq > 0:
                raw.append((freq, inten, i, f))
    top = max((r[1] for r in raw), default=0.0)
    raw = [r for r in raw if top > 0 and r[1] > rel_cutoff * top]
    raw.sort(key=lambda r: r[0])

    lines = []
    for freq, inten, i, f in raw:
        if lines and freq - lines[-1][0] < merge_tol:
            last = lines[-1]
            keep = (i, f) if inten > last[2] else last[3]
            lines[-1] = ((last[0] * last[1] + freq * inten) / (last[1] + inten), last[1] + inten,
                         max(inten, last[2]), keep)
        else:
            lines.append((freq, inten, inten, (i, f)))
    spectrum_lines = [
        SpectrumLine(freq, inten, dominant[i], dominant[f]) for freq, inten, _, (i, f) in lines
    ]

    if grid is None:
        if spectrum_lines:
            lo = min(ln.frequency for ln in spectrum_lines) - 10 * linewidth
            hi = max(ln.frequency for ln in spectrum_lines) + 10 * linewidth
        else:
            lo, hi = 0.0, 10 * linewidth
        grid = np.linspace(lo, hi, n_points)
    grid = np.asarray(grid, dtype=float)
    amplitude = np.zeros_like(grid)
    for ln in spectrum_lines:
        amplitude += lorentzian(grid, ln.frequency, linewidth, ln.intensity)
    return Spectrum(spectrum_lines, grid, amplitude, linewidth, populations, labels)


def _nv_transition(line: SpectrumLine, nv_spin: int, partner: int):
    a, b = line.from_state, line.to_state
    others_same = all(a[k] == b[k] for k in range(len(a)) if k != nv_spin)
    if not others_same:
        return None
    ms = {a[nv_spin], b[nv_spin]}
    if ms != {Fraction(0), Fraction(-1)}:
        return None
    return a[partner]


def doublet_intensities(spectrum: Spectrum, nv_spin: int = 0, partner: int = 1):
    """Intensities ``(I_A, I_A*)`` of the NV ms=0 <-> -1 doublet.

    A is the component with the partner N spin in m=-1/2, A* the one with
    m=+1/2. Lines split further by nuclear spins are summed per component.
    A component absent from the line list has intensity 0.
    """
    i_a = i_astar = 0.0
    for line in spectrum.lines:
        m = _nv_transition(line, nv_spin, partner)
        if m == Fraction(-1, 2):
            i_a += line.intensity
        elif m == Fraction(1, 2):
            i_astar += line.intensity
    return i_a, i_astar


def doublet_frequencies(spectrum: Spectrum, nv_spin: int = 0, partner: int = 1):
    """Intensity-weighted frequencies ``(f_A, f_A*)`` of the ms=0 <-> -1 doublet."""
    acc = {Fraction(-1, 2): [0.0, 0.0], Fraction(1, 2): [0.0, 0.0]}
    for line in spectrum.lines:
        m = _nv_transition(line, nv_spin, partner)
        if m in acc:
            acc[m][0] += line.frequency * line.intensity
            acc[m][1] += line.intensity
    out = []
    for m in (Fraction(-1, 2), Fraction(1, 2)):
        total = acc[m][1]
        out.append(acc[m][0] / total if total > 0 else float("nan"))
    return tuple(out)


def doublet_splitting(config: SpinSystemConfig, linewidth: float = 1.0) -> float:
    """|f_A* - f_A| from the ESR spectrum with default populations."""
    f_a, f_astar = doublet_frequencies(esr_spectrum(config, linewidth))
    return abs(f_astar - f_a)


def polarization_from_intensities(i_a: float, i_astar: float) -> float:
    """``P = (I_A* - I_A) / (I_A* + I_A)``."""
    if i_a < 0 or i_astar < 0:
        raise InvalidArgument("intensities must be non-negative")
    total = i_a + i_astar
    if total == 0:
        raise UndefinedPolarization("both doublet intensities are zero")
    return (i_astar - i_a) / total
