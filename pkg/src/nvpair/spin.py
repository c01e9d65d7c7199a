"""Spin operators, interaction tensors and the coupled-spin Hamiltonian.

Units are MHz for energies, Gauss for fields, nm for distances. The
Hamiltonian of a spin system is

    H = sum_k gamma_k B.S_k + sum_k S_k.D_k.S_k + sum_(i,j) S_i.T_ij.S_j

with each term embedded in the product space by Kronecker products. For the
NV-N pair, spin 0 is the NV centre (S=1) and spin 1 the substitutional
nitrogen (S=1/2); optional nuclear spins follow.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .errors import CapacityError, InvalidArgument
from .linalg import eigh

MAX_DIM = 36
SYMMETRY_RTOL = 1e-12

# 14N nuclear gyromagnetic ratio (MHz/G), negative in the H = gamma B.S sign convention
GAMMA_N14 = -3.077e-4
GAMMA_N15 = 4.316e-4
# substitutional-N (P1) 14N hyperfine, axial about a <111> bond
P1_A_PARALLEL = 114.0
P1_A_PERP = 81.3
# 15N hyperfine of the NV centre itself (magnitudes)
NV15_A_PARALLEL = 3.03
NV15_A_PERP = 3.65

# Pair vector used for the "reference" NV-N geometry: perpendicular to the
# NV axis, where the secular coupling equals d/r^3 and the double-flip
# matrix element behind the anticrossing is non-zero.
REFERENCE_PAIR_DIRECTION = (1.0, 0.0, 0.0)
TETRAHEDRAL_TILT = float(np.arccos(-1.0 / 3.0))


@dataclass(frozen=True)
class PhysicalConstants:
    gamma_e: float = 2.8025  # MHz/G
    gamma_c13: float = 1.0705e-3  # MHz/G
    d0_ee: float = 52.04  # MHz nm^3
    d0_en: Optional[float] = None  # MHz nm^3, derived when omitted

    def __post_init__(self):
        for name in ("gamma_e", "gamma_c13", "d0_ee", "d0_en"):
            value = getattr(self, name)
            if name == "d0_en" and value is None:
                value = self.d0_ee * self.gamma_c13 / self.gamma_e
                object.__setattr__(self, "d0_en", value)
            if not (np.isfinite(value) and value > 0):
                raise InvalidArgument(f"{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class SpinSpecies:
    label: str
    s: float
    gamma: float  # MHz/G, signed

    def __post_init__(self):
        two_s = 2 * self.s
        if abs(two_s - round(two_s)) > 1e-12 or round(two_s) not in (1, 2, 3):
            raise InvalidArgument(f"spin {self.label!r}: s must be 1/2, 1 or 3/2, got {self.s}")

    @property
    def multiplicity(self) -> int:
        return int(round(2 * self.s)) + 1

    @property
    def m_values(self) -> list[Fraction]:
        """Magnetic quantum numbers in basis order (+s first)."""
        s = Fraction(int(round(2 * self.s)), 2)
        return [s - k for k in range(self.multiplicity)]


class InteractionTensor:
    """Real symmetric 3x3 tensor in MHz (read-only)."""

    __slots__ = ("m",)

    def __init__(self, m):
        m = np.array(m, dtype=float)
        if m.shape != (3, 3):
            raise InvalidArgument(f"interaction tensor must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidArgument("interaction tensor has non-finite entries")
        scale = max(np.max(np.abs(m)), 1e-300)
        if np.max(np.abs(m - m.T)) > SYMMETRY_RTOL * scale:
            raise InvalidArgument("interaction tensor must be symmetric")
        m.setflags(write=False)
        self.m = m

    def __repr__(self):
        return f"InteractionTensor({self.m.tolist()})"

    def scaled(self, factor: float) -> "InteractionTensor":
        return InteractionTensor(self.m * factor)


@dataclass(frozen=True)
class SpinSystemConfig:
    spins: tuple
    b_field: tuple = (0.0, 0.0, 0.0)
    zero_field: dict = field(default_factory=dict)
    couplings: tuple = ()
    positions: Optional[tuple] = None
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        object.__setattr__(self, "spins", tuple(self.spins))
        object.__setattr__(self, "couplings", tuple(tuple(c) for c in self.couplings))
        b = np.asarray(self.b_field, dtype=float)
        if b.shape != (3,) or not np.all(np.isfinite(b)):
            raise InvalidArgument("b_field must be a finite 3-vector (Gauss)")
        object.__setattr__(self, "b_field", tuple(float(x) for x in b))
        n = len(self.spins)
        if n == 0:
            raise InvalidArgument("a spin system needs at least one spin")
        for k, tensor in self.zero_field.items():
            if not 0 <= k < n:
                raise InvalidArgument(f"zero_field index {k} out of range")
            if not isinstance(tensor, InteractionTensor):
                raise InvalidArgument(f"zero_field[{k}] must be an InteractionTensor")
        seen = set()
        for i, j, tensor in self.couplings:
            if i == j or not (0 <= i < n and 0 <= j < n):
                raise InvalidArgument(f"bad coupling indices ({i}, {j})")
            if not isinstance(tensor, InteractionTensor):
                raise InvalidArgument(f"coupling ({i}, {j}) must be an InteractionTensor")
            key = frozenset((i, j))
            if key in seen:
                raise InvalidArgument(f"duplicate coupling between spins {i} and {j}")
            seen.add(key)
        if self.positions is not None and len(self.positions) != n:
            raise InvalidArgument("positions must give one entry (or None) per spin")

    @property
    def dims(self) -> list[int]:
        return [sp.multiplicity for sp in self.spins]

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def with_field(self, b_field) -> "SpinSystemConfig":
        return replace(self, b_field=tuple(b_field))

    def effective_couplings(self) -> list[tuple[int, int, InteractionTensor]]:
        """Explicit couplings plus point-dipole tensors for positioned pairs."""
        out = list(self.couplings)
        if self.positions is None:
            return out
        explicit = {frozenset((i, j)) for i, j, _ in self.couplings}
        n = len(self.spins)
        for i in range(n):
            for j in range(i + 1, n):
                if frozenset((i, j)) in explicit:
                    continue
                ri, rj = self.positions[i], self.positions[j]
                if ri is None or rj is None:
                    continue
                tensor, _ = dipolar_tensor(
                    np.subtract(rj, ri), self.spins[i].gamma, self.spins[j].gamma, self.constants
                )
                out.append((i, j, tensor))
        return out

    def scaled_couplings(self, factor: float) -> "SpinSystemConfig":
        couplings = [(i, j, t.scaled(factor)) for i, j, t in self.effective_couplings()]
        return replace(self, couplings=tuple(couplings), positions=None)


def spin_operators(s: float):
    """Return ``(Sx, Sy, Sz)`` for spin ``s`` in the |m=+s>, ..., |m=-s> basis."""
    two_s = 2 * s
    if not np.isfinite(two_s) or abs(two_s - round(two_s)) > 1e-12 or round(two_s) < 1:
        raise InvalidArgument(f"spin quantum number must be a positive half-integer, got {s}")
    s = round(two_s) / 2
    m = s - np.arange(int(round(two_s)) + 1)
    sz = np.diag(m).astype(complex)
    # <m+1|S+|m> sits just above the diagonal in this ordering
    sp = np.diag(np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    sx = 0.5 * (sp + sp.conj().T)
    sy = -0.5j * (sp - sp.conj().T)
    return sx, sy, sz


def dipolar_tensor(r_vec, gamma1: float, gamma2: float, constants: PhysicalConstants = None):
    """Point-dipole coupling tensor ``(d/r^3)(I - 3 rr^T)`` and its scale ``d/r^3``.

    ``d`` is ``d0_ee`` rescaled by ``gamma1*gamma2/gamma_e**2``.
    """
    constants = constants or PhysicalConstants()
    r_vec = np.asarray(r_vec, dtype=float)
    if r_vec.shape != (3,) or not np.all(np.isfinite(r_vec)):
        raise InvalidArgument("r_vec must be a finite 3-vector")
    r = float(np.linalg.norm(r_vec))
    if r == 0.0:
        raise InvalidArgument("dipolar tensor undefined for coincident spins")
    n = r_vec / r
    d = constants.d0_ee * gamma1 * gamma2 / constants.gamma_e**2
    scale = d / r**3
    m = scale * (np.eye(3) - 3.0 * np.outer(n, n))
    return InteractionTensor(0.5 * (m + m.T)), scale


def axial_tensor(parallel: float, perpendicular: float, axis=(0.0, 0.0, 1.0)) -> InteractionTensor:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    nn = np.outer(axis, axis)
    return InteractionTensor(perpendicular * (np.eye(3) - nn) + parallel * nn)


def zfs_tensor(d_fs: float, axis=(0.0, 0.0, 1.0)) -> InteractionTensor:
    """Axial fine-structure tensor giving ``D_fs * Sz^2`` about ``axis``."""
    return axial_tensor(d_fs, 0.0, axis)


def embed(op: np.ndarray, k: int, dims: Sequence[int]) -> np.ndarray:
    mats = [op if i == k else np.eye(d) for i, d in enumerate(dims)]
    return reduce(np.kron, mats)


def embedded_operators(config: SpinSystemConfig) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    dims = config.dims
    return [tuple(embed(o, k, dims) for o in spin_operators(sp.s)) for k, sp in enumerate(config.spins)]


def _check_capacity(config: SpinSystemConfig):
    if config.dim > MAX_DIM:
        raise CapacityError(f"Hilbert dimension {config.dim} exceeds the supported maximum {MAX_DIM}")


def build_hamiltonian(config: SpinSystemConfig) -> np.ndarray:
    """Dense Hamiltonian in MHz for the configured spins, field and couplings."""
    _check_capacity(config)
    ops = embedded_operators(config)
    b = np.asarray(config.b_field)
    h = np.zeros((config.dim, config.dim), dtype=complex)
    for k, sp in enumerate(config.spins):
        h += sp.gamma * sum(b[a] * ops[k][a] for a in range(3))
    for k, tensor in config.zero_field.items():
        h += _bilinear(ops[k], tensor.m, ops[k])
    for i, j, tensor in config.effective_couplings():
        h += _bilinear(ops[i], tensor.m, ops[j])
    return 0.5 * (h + h.conj().T)


def _bilinear(left, m, right) -> np.ndarray:
    out = 0
    for a in range(3):
        for b in range(3):
            if m[a, b] != 0.0:
                out = out + m[a, b] * (left[a] @ right[b])
    return out


def basis_labels(config: SpinSystemConfig) -> list[tuple[Fraction, ...]]:
    """Product-basis labels (m_0, m_1, ...) in Kronecker order."""
    labels = [()]
    for sp in config.spins:
        labels = [lab + (m,) for lab in labels for m in sp.m_values]
    return labels


def format_label(label) -> str:
    parts = []
    for m in label:
        m = Fraction(m).limit_denominator(2)
        if m.denominator == 1:
            parts.append(str(int(m)))
        else:
            parts.append(("+" if m > 0 else "-") + f"{abs(m.numerator)}/{m.denominator}")
    return "|" + ",".join(parts) + ">"


def parse_label(label) -> tuple[Fraction, ...]:
    """Accept a tuple of numbers or a string like ``"|0,+1/2>"``."""
    if isinstance(label, str):
        items = label.strip().strip("|<>").split(",")
        return tuple(Fraction(x.strip()) for x in items)
    return tuple(Fraction(x).limit_denominator(2) for x in label)


def basis_index(config: SpinSystemConfig, label) -> int:
    target = parse_label(label)
    labels = basis_labels(config)
    if target not in labels:
        raise InvalidArgument(f"basis label {label!r} does not exist in this spin system")
    return labels.index(target)


def level_projector(config: SpinSystemConfig, spin: int, m) -> np.ndarray:
    """Diagonal projector onto product states with spin ``spin`` in level ``m``."""
    m = Fraction(m).limit_denominator(2)
    diag = np.array([1.0 if lab[spin] == m else 0.0 for lab in basis_labels(config)])
    return np.diag(diag).astype(complex)


def energy_levels(config: SpinSystemConfig):
    return eigh(build_hamiltonian(config))


def nv_n_pair(
    d_fs: float = 2870.0,
    b_gauss: float = 40.0,
    b_direction=(0.0, 0.0, 1.0),
    r_nm: Optional[float] = 1.5,
    r_direction=REFERENCE_PAIR_DIRECTION,
    coupled: bool = True,
    constants: Optional[PhysicalConstants] = None,
    gamma_nv: Optional[float] = None,
    gamma_n: Optional[float] = None,
    n14_on_n: bool = False,
    n15_on_nv: bool = False,
    p1_axis=None,
) -> SpinSystemConfig:
    """NV (spin 0) plus substitutional N (spin 1) with the NV axis along z.

    ``n14_on_n`` adds the nitrogen's own 14N nucleus with an axial hyperfine
    tensor along a tilted <111> bond; ``n15_on_nv`` adds the NV's 15N.
    """
    constants = constants or PhysicalConstants()
    gnv = constants.gamma_e if gamma_nv is None else gamma_nv
    gn = constants.gamma_e if gamma_n is None else gamma_n
    spins = [SpinSpecies("NV", 1.0, gnv), SpinSpecies("N", 0.5, gn)]
    couplings = []
    if coupled and r_nm is not None:
        direction = np.asarray(r_direction, dtype=float)
        tensor, _ = dipolar_tensor(r_nm * direction / np.linalg.norm(direction), gnv, gn, constants)
        couplings.append((0, 1, tensor))
    zero_field = {0: zfs_tensor(d_fs)}
    if n14_on_n:
        if p1_axis is None:
            p1_axis = (np.sin(TETRAHEDRAL_TILT), 0.0, np.cos(TETRAHEDRAL_TILT))
        spins.append(SpinSpecies("14N", 1.0, GAMMA_N14))
        couplings.append((1, len(spins) - 1, axial_tensor(P1_A_PARALLEL, P1_A_PERP, p1_axis)))
    if n15_on_nv:
        spins.append(SpinSpecies("15N", 0.5, GAMMA_N15))
        couplings.append((0, len(spins) - 1, axial_tensor(NV15_A_PARALLEL, NV15_A_PERP)))
    b = np.asarray(b_direction, dtype=float)
    b = b_gauss * b / np.linalg.norm(b)
    return SpinSystemConfig(
        spins=tuple(spins),
        b_field=tuple(b),
        zero_field=zero_field,
        couplings=tuple(couplings),
        constants=constants,
    )


def field_axis(config: SpinSystemConfig) -> np.ndarray:
    b = np.asarray(config.b_field)
    norm = np.linalg.norm(b)
    return np.array([0.0, 0.0, 1.0]) if norm == 0 else b / norm
