"""Pulse sequences, Hahn-echo envelope modulation and T2 fitting.

States are density matrices in the product basis. The frame rotates at a
drive frequency for every pulsed two-level submanifold; free evolution is
the exact lab-frame propagator re-expressed in that frame, so refocusing and
echo modulation frequencies follow the full eigenstructure. Finite pulses
use the rotating-wave Hamiltonian (terms that oscillate at the frame
frequencies dropped) plus the drive term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import FitFailure, InvalidArgument
from .linalg import eigh, propagator, propagator_from_eig
from .spin import SpinSystemConfig, basis_labels, build_hamiltonian, embed, level_projector

SECULAR_TOL = 1e-6  # MHz


@dataclass(frozen=True)
class Target:
    """Two-level submanifold ``(m_a, m_b)`` of spin ``spin`` addressed by a pulse."""

    spin: int
    levels: tuple = (0, -1)

    def __post_init__(self):
        la, lb = (Fraction(x).limit_denominator(2) for x in self.levels)
        if la == lb:
            raise InvalidArgument("a pulse target needs two distinct levels")
        object.__setattr__(self, "levels", (la, lb))


NV_TARGET = Target(0, (0, -1))
N_TARGET = Target(1, (Fraction(1, 2), Fraction(-1, 2)))


@dataclass(frozen=True)
class Pulse:
    kind: str  # "rotation" | "delay"
    axis: Optional[str] = None
    angle: float = 0.0  # rad
    duration: float = 0.0  # ns for rotations (0 = ideal)
    delay_us: float = 0.0
    targets: tuple = (NV_TARGET,)

    def __post_init__(self):
        if self.kind == "delay":
            if self.axis is not None or self.angle != 0.0:
                raise InvalidArgument("a delay carries no axis or angle")
            if not np.isfinite(self.delay_us):
                raise InvalidArgument("delay must be finite")
        elif self.kind == "rotation":
            if self.axis not in ("x", "y"):
                raise InvalidArgument(f"rotation axis must be 'x' or 'y', got {self.axis!r}")
            if self.duration < 0 or not np.isfinite(self.duration):
                raise InvalidArgument("pulse duration must be >= 0 ns")
            if not self.targets:
                raise InvalidArgument("rotation needs at least one target")
        else:
            raise InvalidArgument(f"unknown pulse kind {self.kind!r}")

    @property
    def drive_amplitude(self) -> float:
        """Rabi frequency in MHz, ``angle / (2 pi duration)``."""
        if self.kind != "rotation" or self.duration == 0:
            return float("inf")
        return self.angle / (2 * np.pi * self.duration * 1e-3)


def rotation(angle: float, axis: str = "x", targets=(NV_TARGET,), duration_ns: float = 0.0) -> Pulse:
    return Pulse("rotation", axis=axis, angle=angle, duration=duration_ns, targets=tuple(targets))


def delay(t_us: float) -> Pulse:
    return Pulse("delay", delay_us=t_us)


@dataclass
class EchoCurve:
    tau: np.ndarray  # us
    amplitude: np.ndarray

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.amplitude = np.asarray(self.amplitude, dtype=float)
        if self.tau.shape != self.amplitude.shape or self.tau.ndim != 1:
            raise InvalidArgument("tau and amplitude must be 1-D and of equal length")


@dataclass
class ModulationSpectrum:
    freq: np.ndarray  # MHz
    magnitude: np.ndarray
    peaks: list  # (frequency, magnitude), strongest first
    bin_width: float


@dataclass
class FitResult:
    t2: float  # us
    amplitude0: float
    baseline: float
    residual: float
    iterations: int
    diagnostics: dict = field(default_factory=dict)


class _Frame:
    """Rotating frame and cached propagators for one spin system."""

    def __init__(self, config: SpinSystemConfig, targets: Sequence[Target], drive_frequencies=None):
        self.config = config
        self.h = build_hamiltonian(config)
        self.w, self.v = eigh(self.h)
        self.labels = basis_labels(config)
        self.dim = config.dim
        drive_frequencies = dict(drive_frequencies or {})
        self.g = np.zeros(self.dim)
        self.frequencies = {}
        for target in targets:
            if target in self.frequencies:
                continue
            self._check_target(target)
            f = drive_frequencies.get(target)
            if f is None:
                f = self.default_frequency(target)
            self.frequencies[target] = f
            self.g += f * self._level_mask(target.spin, target.levels[1])
        self._rotations = {}
        self._pulse_props = {}
        self._h_rwa = None

    def _check_target(self, target: Target):
        n = len(self.config.spins)
        if not 0 <= target.spin < n:
            raise InvalidArgument(f"unknown pulse target spin {target.spin}")
        allowed = self.config.spins[target.spin].m_values
        if any(m not in allowed for m in target.levels):
            raise InvalidArgument(f"levels {target.levels} do not exist on spin {target.spin}")

    def _level_mask(self, spin: int, m) -> np.ndarray:
        return np.array([1.0 if lab[spin] == m else 0.0 for lab in self.labels])

    def default_frequency(self, target: Target) -> float:
        """Mean diagonal energy of level b minus that of level a (doublet centre)."""
        diag = self.h.diagonal().real
        ma = self._level_mask(target.spin, target.levels[0]).astype(bool)
        mb = self._level_mask(target.spin, target.levels[1]).astype(bool)
        return float(diag[mb].mean() - diag[ma].mean())

    def free(self, t0: float, dt: float) -> np.ndarray:
        """Rotating-frame propagator from absolute time ``t0`` to ``t0 + dt``."""
        u = propagator_from_eig(self.w, self.v, dt)
        left = np.exp(2j * np.pi * self.g * (t0 + dt))
        right = np.exp(-2j * np.pi * self.g * t0)
        return left[:, None] * u * right[None, :]

    def _two_level(self, target: Target):
        sp = self.config.spins[target.spin]
        ia = sp.m_values.index(target.levels[0])
        ib = sp.m_values.index(target.levels[1])
        d = sp.multiplicity
        x = np.zeros((d, d), dtype=complex)
        y = np.zeros((d, d), dtype=complex)
        x[ia, ib] = x[ib, ia] = 1.0
        y[ia, ib] = -1j
        y[ib, ia] = 1j
        return ia, ib, embed(x, target.spin, self.config.dims), embed(y, target.spin, self.config.dims), x, y

    def ideal(self, pulse: Pulse) -> np.ndarray:
        key = (pulse.axis, pulse.angle, pulse.targets)
        if key not in self._rotations:
            u = np.eye(self.dim, dtype=complex)
            phi = 0.0 if pulse.axis == "x" else np.pi / 2
            for target in pulse.targets:
                ia, ib, _, _, x, y = self._two_level(target)
                d = x.shape[0]
                r = np.eye(d, dtype=complex)
                n_sigma = np.cos(phi) * x + np.sin(phi) * y
                block = np.zeros((d, d))
                block[ia, ia] = block[ib, ib] = 1.0
                r = r - block + np.cos(pulse.angle / 2) * block - 1j * np.sin(pulse.angle / 2) * n_sigma
                u = embed(r, target.spin, self.config.dims) @ u
            self._rotations[key] = u
        return self._rotations[key]

    def rwa_hamiltonian(self) -> np.ndarray:
        if self._h_rwa is None:
            keep = np.abs(self.g[:, None] - self.g[None, :]) < SECULAR_TOL
            self._h_rwa = np.where(keep, self.h, 0.0) - np.diag(self.g)
        return self._h_rwa

    def finite(self, pulse: Pulse) -> np.ndarray:
        key = (pulse.axis, pulse.angle, pulse.duration, pulse.targets)
        if key not in self._pulse_props:
            phi = 0.0 if pulse.axis == "x" else np.pi / 2
            nu1 = pulse.drive_amplitude
            h = self.rwa_hamiltonian().copy()
            for target in pulse.targets:
                _, _, xf, yf, _, _ = self._two_level(target)
                h = h + nu1 * 0.5 * (np.cos(phi) * xf + np.sin(phi) * yf)
            self._pulse_props[key] = propagator(h, pulse.duration * 1e-3)
        return self._pulse_props[key]


def _initial_density(config: SpinSystemConfig, initial) -> np.ndarray:
    if initial is None:
        rho = level_projector(config, 0, 0)
        return rho / np.trace(rho).real
    arr = np.asarray(initial, dtype=complex)
    if arr.ndim == 1:
        if arr.shape != (config.dim,):
            raise InvalidArgument(f"initial state must have {config.dim} amplitudes")
        if abs(np.linalg.norm(arr) - 1.0) > 1e-9:
            raise InvalidArgument("initial state is not normalized")
        return np.outer(arr, arr.conj())
    if arr.shape != (config.dim, config.dim):
        raise InvalidArgument("initial density matrix has the wrong shape")
    if abs(np.trace(arr).real - 1.0) > 1e-9:
        raise InvalidArgument("initial density matrix must have unit trace")
    return arr


def _readout_operator(config: SpinSystemConfig, readout) -> np.ndarray:
    if readout is None:
        return level_projector(config, 0, 0)
    if isinstance(readout, tuple) and len(readout) == 2 and np.ndim(readout[0]) == 0:
        return level_projector(config, readout[0], readout[1])
    op = np.asarray(readout, dtype=complex)
    if op.shape != (config.dim, config.dim):
        raise InvalidArgument("readout projector has the wrong shape")
    return op


def _sequence_targets(sequence) -> list[Target]:
    out = []
    for p in sequence:
        if p.kind == "rotation":
            out.extend(t for t in p.targets if t not in out)
    return out


def evolve(config: SpinSystemConfig, sequence, initial=None, drive_frequencies=None, frame=None):
    """Final rotating-frame density matrix after ``sequence``."""
    frame = frame or _Frame(config, _sequence_targets(sequence), drive_frequencies)
    rho = _initial_density(config, initial)
    t = 0.0
    for pulse in sequence:
        if pulse.kind == "delay":
            u = frame.free(t, pulse.delay_us)
            t += pulse.delay_us
        elif pulse.duration == 0:
            u = frame.ideal(pulse)
        else:
            u = frame.finite(pulse)
            t += pulse.duration * 1e-3
        rho = u @ rho @ u.conj().T
    return rho


def simulate_sequence(config: SpinSystemConfig, sequence, initial=None, readout=None,
                      drive_frequencies=None) -> float:
    """Expectation of ``readout`` (default: NV ms=0 population) after the sequence."""
    rho = evolve(config, sequence, initial, drive_frequencies)
    return float(np.trace(_readout_operator(config, readout) @ rho).real)


def _partner_target(config: SpinSystemConfig) -> Optional[Target]:
    if len(config.spins) > 1 and config.spins[1].multiplicity == 2:
        return N_TARGET
    return None


def hahn_sequence(tau1: float, tau2: float, pulse_mode: str = "ideal", pi2_ns: float = 15.0,
                  pi_ns: float = 30.0, refocus_targets=(NV_TARGET,)) -> list[Pulse]:
    """``pi/2 - tau1 - pi - tau2 - pi/2`` on the NV, all pulses about x.

    ``tau1`` and ``tau2`` run between pulse centres, so finite pulses eat
    into the free-evolution delays and the sequence keeps its total length.
    """
    if pulse_mode not in ("ideal", "finite"):
        raise InvalidArgument("pulse_mode must be 'ideal' or 'finite'")
    d2, d1 = (pi2_ns, pi_ns) if pulse_mode == "finite" else (0.0, 0.0)
    overlap = 0.5 * (d1 + d2) * 1e-3
    if min(tau1, tau2) < overlap - 1e-12:
        raise InvalidArgument(f"pulse separation must be at least {overlap * 1e3:g} ns for these pulses")
    return [
        rotation(np.pi / 2, "x", (NV_TARGET,), d2),
        delay(max(tau1 - overlap, 0.0)),
        rotation(np.pi, "x", tuple(refocus_targets), d1),
        delay(max(tau2 - overlap, 0.0)),
        rotation(np.pi / 2, "x", (NV_TARGET,), d2),
    ]


def hahn_echo_curve(
    config: SpinSystemConfig,
    tau_list,
    pulse_mode: str = "ideal",
    t2_envelope=None,
    partner_flip: bool = True,
    tau1: Optional[float] = None,
    pi2_ns: float = 15.0,
    pi_ns: float = 30.0,
    drive_frequencies=None,
) -> EchoCurve:
    """Echo amplitude (ms=0 readout) versus pulse separation.

    With ``partner_flip`` the refocusing pulse also inverts the N electron
    spin, so the secular NV-N coupling survives the echo and modulates it at
    the doublet splitting. ``tau1`` fixes the first delay (asymmetric
    variant); by default both delays equal ``tau``. ``t2_envelope`` is
    ``(T2_us, n)`` for a multiplicative ``exp(-(2 tau / T2)^n)``.
    """
    tau = np.asarray(tau_list, dtype=float)
    if tau.ndim != 1 or np.any(tau < 0) or np.any(np.diff(tau) < 0):
        raise InvalidArgument("tau values must be >= 0 and ascending")
    refocus = [NV_TARGET]
    partner = _partner_target(config)
    if partner_flip and partner is not None:
        refocus.append(partner)
    probe = hahn_sequence(1.0, 1.0, pulse_mode, pi2_ns, pi_ns, refocus)
    frame = _Frame(config, _sequence_targets(probe), drive_frequencies)
    readout = _readout_operator(config, None)
    amp = np.empty(len(tau))
    for k, t in enumerate(tau):
        seq = hahn_sequence(t if tau1 is None else tau1, t, pulse_mode, pi2_ns, pi_ns, refocus)
        rho = evolve(config, seq, frame=frame)
        amp[k] = np.trace(readout @ rho).real
    if t2_envelope is not None:
        t2, n = t2_envelope
        amp = amp * np.exp(-((2 * tau / t2) ** n))
    return EchoCurve(tau, amp)


def _parabolic_peak(mag: np.ndarray, i: int):
    a, b, c = mag[i - 1], mag[i], mag[i + 1]
    denom = a - 2 * b + c
    if denom == 0:
        return float(i), float(b)
    offset = 0.5 * (a - c) / denom
    return i + offset, b - 0.25 * (a - c) * offset


def eseem_spectrum(curve: EchoCurve, pad_factor: int = 4, peak_threshold: float = 0.1,
                   time_axis: str = "tau") -> ModulationSpectrum:
    """Magnitude spectrum of the mean-subtracted, zero-padded echo modulation.

    ``time_axis="tau"`` uses the pulse separation as time variable, for which
    the NV-N modulation appears at the ESR doublet splitting; ``"2tau"`` uses
    the total evolution time. Peaks are local maxima above
    ``peak_threshold`` times the largest non-DC magnitude, refined by
    parabolic interpolation.
    """
    tau = curve.tau
    if len(tau) < 16:
        raise InvalidArgument("ESEEM analysis needs at least 16 samples")
    steps = np.diff(tau)
    if np.any(steps <= 0) or np.max(np.abs(steps - steps.mean())) > 1e-9 * max(steps.mean(), 1e-300):
        raise InvalidArgument("tau grid must be uniform")
    if time_axis not in ("tau", "2tau"):
        raise InvalidArgument("time_axis must be 'tau' or '2tau'")
    dt = steps.mean() * (2.0 if time_axis == "2tau" else 1.0)
    y = curve.amplitude - curve.amplitude.mean()
    n_pad = int(pad_factor) * len(y)
    mag = np.abs(np.fft.rfft(y, n=n_pad))
    freq = np.fft.rfftfreq(n_pad, d=dt)
    bin_width = freq[1]
    top = mag[1:].max() if len(mag) > 1 else 0.0
    peaks = []
    if top > 0:
        for i in range(1, len(mag) - 1):
            if mag[i] > mag[i - 1] and mag[i] >= mag[i + 1] and mag[i] >= peak_threshold * top:
                x, h = _parabolic_peak(mag, i)
                peaks.append((float(x * bin_width), float(h)))
    peaks.sort(key=lambda p: -p[1])
    return ModulationSpectrum(freq, mag, peaks, bin_width)


def synthetic_decay(tau, t2: float = 350.0, amplitude0: float = 0.5, baseline: float = 0.5,
                    noise: float = 0.0, seed: Optional[int] = None) -> EchoCurve:
    """``baseline + amplitude0 * exp(-2 tau / T2)`` plus uniform noise in ``[-noise, noise]``."""
    tau = np.asarray(tau, dtype=float)
    amp = baseline + amplitude0 * np.exp(-2 * tau / t2)
    if noise:
        rng = np.random.default_rng(np.uint64(seed if seed is not None else 0))
        amp = amp + rng.uniform(-noise, noise, size=tau.shape)
    return EchoCurve(tau, amp)


def fit_exponential_decay(curve: EchoCurve, max_iter: int = 100, n_seeds: int = 60) -> FitResult:
    """Least-squares fit of ``a + b exp(-2 tau / T2)``.

    The decay time is seeded from a log-spaced grid (with ``a`` and ``b``
    solved linearly at each grid value) and refined by Gauss-Newton with
    step halving.
    """
    tau, y = curve.tau, curve.amplitude
    if len(tau) < 5:
        raise InvalidArgument("need at least 5 points to fit a decay")
    if np.ptp(y) == 0:
        raise FitFailure("constant curve carries no decay", {"n": len(y)})
    span = np.ptp(tau)
    if span <= 0:
        raise FitFailure("tau values do not span an interval", {"n": len(y)})

    def linear(t2):
        basis = np.column_stack([np.ones_like(tau), np.exp(-2 * tau / t2)])
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        r = y - basis @ coef
        return coef, float(r @ r)

    grid = np.geomspace(span / 100, span * 100, n_seeds)
    fits = [linear(t2) for t2 in grid]
    best = int(np.argmin([f[1] for f in fits]))
    (a, b), cost = fits[best]
    theta = np.array([a, b, np.log(grid[best])])  # fit log T2 to keep it positive

    def residual(p):
        return y - (p[0] + p[1] * np.exp(-2 * tau * np.exp(-p[2])))

    r = residual(theta)
    cost = float(r @ r)
    converged = False
    for it in range(1, max_iter + 1):
        e = np.exp(-2 * tau * np.exp(-theta[2]))
        jac = np.column_stack([np.ones_like(tau), e, theta[1] * e * 2 * tau * np.exp(-theta[2])])
        step, *_ = np.linalg.lstsq(jac, r, rcond=None)
        lam = 1.0
        while lam > 1e-10:
            trial = theta + lam * step
            rt = residual(trial)
            ct = float(rt @ rt)
            if ct <= cost:
                break
            lam *= 0.5
        else:
            converged = True  # no descent direction left: at the minimum
            break
        small = np.all(np.abs(lam * step) <= 1e-12 + 1e-10 * np.abs(theta))
        theta, r, cost = trial, rt, ct
        if small:
            converged = True
            break
    diagnostics = {"iterations": it, "cost": cost, "seed_t2": float(grid[best]), "theta": theta.tolist()}
    t2 = float(np.exp(theta[2]))
    if not converged or not np.isfinite(t2) or theta[1] == 0:
        raise FitFailure("Gauss-Newton did not converge", diagnostics)
    if t2 > 1e3 * span or t2 < 1e-3 * span:
        raise FitFailure(f"fitted T2 = {t2:.4g} us is outside the resolvable range", diagnostics)
    return FitResult(t2, float(theta[1]), float(theta[0]), cost, it, diagnostics)
