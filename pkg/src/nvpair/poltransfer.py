"""Rate-equation model of NV -> N cross-polarisation near the anticrossing.

State order (NV ms, N m): |0,+1/2>, |0,-1/2>, |-1,+1/2>, |-1,-1/2>. Rates are
in MHz (per microsecond). Channels:

* optical pumping |-1,m> -> |0,m> at ``gamma_opt`` (N spin conserved)
* NV spin-lattice exchange 0 <-> -1 at ``gamma_sl_nv``
* N spin-lattice exchange +1/2 <-> -1/2 at ``gamma_sl_n``
* flip-flop |0,+1/2> <-> |-1,-1/2> at ``W = delta * S(detuning)``

The NV ms=+1 level is left out: near the anticrossing it sits ~2.9 GHz away.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import DegenerateModelError, InvalidArgument

log = logging.getLogger(__name__)

STATES = ("|0,+1/2>", "|0,-1/2>", "|-1,+1/2>", "|-1,-1/2>")
# spin-lattice placeholder from the 1.2 ms room-temperature T1
GAMMA_SL_PLACEHOLDER = 1.0 / 1200.0


@dataclass(frozen=True)
class RateParams:
    delta: float = 13.0  # dipolar coupling, MHz
    gamma_opt: float = 1.0  # optical pumping into ms=0
    gamma_sl_nv: float = GAMMA_SL_PLACEHOLDER
    gamma_sl_n: float = GAMMA_SL_PLACEHOLDER
    gamma_deph_nv_dark: float = 1.25
    optical_broadening: float = 1.0  # c in gamma_deph_nv = dark + c * gamma_opt
    gamma_deph_n: float = 1.25
    d_fs: float = 2870.0
    gamma_e: float = 2.8025
    overlap_variant: str = "outside"  # "outside": 1/(1+|x|)^2, "inside": 1/(1+x^2)

    def __post_init__(self):
        for name in ("gamma_opt", "gamma_sl_nv", "gamma_sl_n", "gamma_deph_nv_dark",
                     "optical_broadening", "gamma_deph_n"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise InvalidArgument(f"{name} must be a finite rate >= 0, got {value}")
        if not self.delta > 0:
            raise InvalidArgument("delta must be positive")
        if self.overlap_variant not in ("outside", "inside"):
            raise InvalidArgument("overlap_variant must be 'outside' or 'inside'")

    @property
    def gamma_deph_nv(self) -> float:
        return self.gamma_deph_nv_dark + self.optical_broadening * self.gamma_opt

    @property
    def b_resonance(self) -> float:
        return self.d_fs / (2 * self.gamma_e)

    def replace(self, **changes) -> "RateParams":
        return replace(self, **changes)


@dataclass
class PopulationVector:
    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if np.any(self.p < 0) or abs(self.p.sum() - 1.0) > 1e-9:
            raise InvalidArgument("populations must be non-negative and sum to 1")

    def __getitem__(self, k):
        return self.p[k]


def detuning(b: float, params: RateParams) -> float:
    """NV (0 <-> -1) minus N transition frequency for an on-axis field, MHz."""
    if np.any(np.asarray(b) < 0):
        raise InvalidArgument("field must be >= 0")
    return params.d_fs - 2.0 * params.gamma_e * np.asarray(b, dtype=float)


def overlap_integral(params: RateParams, d) -> np.ndarray:
    """Lineshape overlap ``S`` for detuning ``d`` (MHz).

    With ``x = delta*|d| / (2 gamma_N gamma_NV)`` the default reading is
    ``1/(1+x)^2``; ``overlap_variant="inside"`` gives ``1/(1+x^2)``.
    """
    gn, gnv = params.gamma_deph_n, params.gamma_deph_nv
    if gn <= 0 or gnv <= 0:
        raise InvalidArgument("dephasing rates must be positive")
    x = params.delta * np.abs(d) / (2.0 * gn * gnv)
    if params.overlap_variant == "inside":
        return 1.0 / (1.0 + x * x)
    return 1.0 / (1.0 + x) ** 2


def flipflop_rate(params: RateParams, d) -> np.ndarray:
    return params.delta * overlap_integral(params, d)


def rate_matrix(params: RateParams, w: float) -> np.ndarray:
    """Generator ``Q`` with ``dp/dt = Q p`` (columns sum to zero)."""
    q = np.zeros((4, 4))

    def add(src, dst, rate):
        q[dst, src] += rate
        q[src, src] -= rate

    add(2, 0, params.gamma_opt)
    add(3, 1, params.gamma_opt)
    for a, b in ((0, 2), (1, 3)):
        add(a, b, params.gamma_sl_nv)
        add(b, a, params.gamma_sl_nv)
    for a, b in ((0, 1), (2, 3)):
        add(a, b, params.gamma_sl_n)
        add(b, a, params.gamma_sl_n)
    add(0, 3, w)
    add(3, 0, w)
    return q


def solve_stationary(q: np.ndarray) -> np.ndarray:
    """Stationary distribution of a rate generator.

    A unique stationary state is found by a direct solve of ``Q p = 0`` with
    one row replaced by normalisation. When the chain has several closed
    classes the limit reached from the uniform distribution is returned.
    """
    n = q.shape[0]
    if not np.any(q):
        raise DegenerateModelError("all rates are zero; no steady state is selected")
    sv = np.linalg.svd(q, compute_uv=False)
    nullity = int(np.sum(sv <= 1e-12 * sv[0]))
    if nullity == 1:
        a = q.copy()
        a[-1, :] = 1.0
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        p = np.linalg.solve(a, rhs)
    else:
        rates = np.abs(q[~np.eye(n, dtype=bool)])
        slowest = rates[rates > 0].min()
        p = scipy.linalg.expm(q * (200.0 / slowest)) @ np.full(n, 1.0 / n)
    if np.any(p < -1e-12):
        raise DegenerateModelError(f"negative steady-state population {p.min():.3e}")
    if np.any(p < 0):
        log.warning("clamping tiny negative populations %s", p[p < 0])
        p = np.clip(p, 0.0, None)
    return p / p.sum()


def steady_state(params: RateParams, b: float) -> PopulationVector:
    w = float(flipflop_rate(params, detuning(b, params)))
    return PopulationVector(solve_stationary(rate_matrix(params, w)))


def forward_integrate(q: np.ndarray, p0=None, t_end: float = None, dt: float = None) -> np.ndarray:
    """Explicit RK4 stepping of ``dp/dt = Q p``; an oracle for the direct solve.

    The RK4 step is linear, so ``N`` steps equal the step matrix raised to
    ``N``; the power is taken by repeated squaring to keep long runs cheap.
    """
    n = q.shape[0]
    p0 = np.full(n, 1.0 / n) if p0 is None else np.asarray(p0, dtype=float)
    rates = np.abs(q[~np.eye(n, dtype=bool)])
    rates = rates[rates > 0]
    if t_end is None:
        t_end = 100.0 / rates.min()
    if dt is None:
        dt = 0.2 / np.max(np.abs(np.diag(q)))
    steps = int(np.ceil(t_end / dt))
    dt = t_end / steps
    eye = np.eye(n)
    k = dt * q
    step = eye + k + k @ k / 2 + k @ k @ k / 6 + k @ k @ k @ k / 24
    out = np.eye(n)
    base = step
    while steps:
        if steps & 1:
            out = base @ out
        base = base @ base
        steps >>= 1
    return out @ p0


def polarization(p) -> float:
    """``P = (I_A* - I_A)/(I_A* + I_A)`` with I_A* ~ p|0,+1/2>, I_A ~ p|0,-1/2>."""
    p = np.asarray(p)
    total = p[0] + p[1]
    return float((p[0] - p[1]) / total) if total > 0 else 0.0


def polarization_curve(params: RateParams, b_list):
    b = np.asarray(b_list, dtype=float)
    if b.size == 0:
        raise InvalidArgument("b_list must not be empty")
    pol = np.array([polarization(steady_state(params, x).p) for x in b])
    return b, pol


@dataclass(frozen=True)
class NuclearParams:
    epsilon: float = 0.05  # nuclear-flip branching of the flip-flop
    gamma_nuc: float = 5e-5  # 15N relaxation between mI = +-1/2, MHz

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise InvalidArgument("epsilon must lie in [0, 1]")
        if self.gamma_nuc < 0:
            raise InvalidArgument("gamma_nuc must be >= 0")


def nuclear_rate_matrix(params: RateParams, nuc: NuclearParams, b: float, hyperfine_split: float):
    """Eight-state generator over (NV ms, N m, 15N mI), index ``4*k + e``.

    ``e`` indexes the electronic state as in ``STATES``; ``k`` = 0 for
    mI=+1/2 and 1 for mI=-1/2. Manifold mI=+1/2 sees detuning
    ``d - split/2`` and mI=-1/2 sees ``d + split/2``. A fraction ``epsilon``
    of forward flip-flops in the mI=-1/2 manifold also flips the nucleus up,
    which pumps the nucleus into mI=+1/2 against ``gamma_nuc``.
    """
    d = float(detuning(b, params))
    q = np.zeros((8, 8))
    for k, sign in ((0, -1.0), (1, 1.0)):
        w = float(flipflop_rate(params, d + sign * hyperfine_split / 2))
        q[4 * k:4 * k + 4, 4 * k:4 * k + 4] = rate_matrix(params, w)
        if k == 1 and nuc.epsilon > 0:
            src, same, flipped = 4 + 0, 4 + 3, 0 + 3
            q[same, src] -= nuc.epsilon * w
            q[flipped, src] += nuc.epsilon * w
    for e in range(4):
        for a, b_ in ((e, 4 + e), (4 + e, e)):
            q[b_, a] += nuc.gamma_nuc
            q[a, a] -= nuc.gamma_nuc
    return q


def nuclear_polarization_model(params: RateParams, hyperfine_split: float, b_list,
                               nuclear: NuclearParams = None):
    """Per-component (mI=+1/2, mI=-1/2) ESR intensities versus field.

    A component's intensity is the population of its nuclear manifold times
    the overall NV contrast p(ms=0) - p(ms=-1), so an unpolarised nucleus
    and a fully pumped NV give 0.5 per component.
    """
    if not hyperfine_split > 0:
        raise InvalidArgument("hyperfine_split must be positive")
    nuclear = nuclear or NuclearParams()
    b = np.asarray(b_list, dtype=float)
    if b.size == 0:
        raise InvalidArgument("b_list must not be empty")
    out = np.empty((b.size, 2))
    for k, x in enumerate(b):
        p = solve_stationary(nuclear_rate_matrix(params, nuclear, x, hyperfine_split)).reshape(2, 4)
        contrast = (p[:, 0] + p[:, 1] - p[:, 2] - p[:, 3]).sum()
        out[k] = p.sum(axis=1) * contrast
    return b, out[:, 0], out[:, 1]
