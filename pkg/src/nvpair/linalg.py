"""Dense Hermitian eigensolver and unitary propagators for small spin spaces.

Matrices are plain complex ``numpy`` arrays. The eigensolver is a cyclic
Jacobi method in round-robin ("tournament") ordering: every step rotates
``n/2`` disjoint index pairs at once, so one step is a single unitary
similarity ``A <- G^H A G`` and the whole sweep vectorises.

Energies are in MHz and times in microseconds, so a propagator is
``exp(-2j*pi*H*t)``.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import InvalidArgument

HERMITIAN_RTOL = 1e-10
UNITARY_ATOL = 1e-10
_MAX_SWEEPS = 60


def hermitian_defect(a: np.ndarray) -> float:
    """Return ``max|A - A^H| / max|A|`` (0 for the zero matrix)."""
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - a.conj().T)) / scale)


def is_hermitian(a: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    return a.ndim == 2 and a.shape[0] == a.shape[1] and hermitian_defect(a) < rtol


def is_unitary(u: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    eye = np.eye(u.shape[0])
    return float(np.max(np.abs(u.conj().T @ u - eye))) < atol


def _check_hermitian(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidArgument(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgument("matrix has non-finite entries")
    defect = hermitian_defect(a)
    if defect >= HERMITIAN_RTOL:
        raise InvalidArgument(f"matrix is not Hermitian (relative defect {defect:.3e})")
    return a


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings of ``range(n)`` such that each pair appears once per sweep."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for k in range(m // 2):
            i, j = players[k], players[m - 1 - k]
            if i < n and j < n:
                p.append(min(i, j))
                q.append(max(i, j))
        rounds.append((np.array(p, dtype=int), np.array(q, dtype=int)))
        # circle method: keep the first player fixed, rotate the rest
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(a, tol: float = 1e-14, max_sweeps: int = _MAX_SWEEPS):
    """Eigen-decomposition of a Hermitian matrix by parallel cyclic Jacobi.

    Returns ``(w, v)`` with ascending real eigenvalues ``w`` and the
    orthonormal eigenvectors as the columns of ``v``.
    """
    a = _check_hermitian(a)
    n = a.shape[0]
    a = np.array(0.5 * (a + a.conj().T))
    v = np.eye(n, dtype=complex)
    if n == 1:
        return a.real.diagonal().copy(), v

    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), v
    rounds = _round_robin(n)
    offdiag = ~np.eye(n, dtype=bool)

    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(a[offdiag]) ** 2))
        if off <= tol * norm:
            break
        for p, q in rounds:
            apq = a[p, q]
            mag = np.abs(apq)
            active = mag > 1e-300
            if not np.any(active):
                continue
            app = a[p, p].real
            aqq = a[q, q].real
            safe = np.where(active, mag, 1.0)
            theta = (aqq - app) / (2.0 * safe)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(theta == 0.0, 1.0, t)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            phase = np.where(active, np.conj(apq) / safe, 1.0)  # exp(-i arg a_pq)
            c = np.where(active, c, 1.0)
            s = np.where(active, s, 0.0)

            g = np.eye(n, dtype=complex)
            g[p, p] = c
            g[p, q] = s
            g[q, p] = -s * phase
            g[q, q] = c * phase
            a = g.conj().T @ a @ g
            v = v @ g
        a = 0.5 * (a + a.conj().T)

    w = a.real.diagonal().copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigh(a):
    """Hermitian eigensolver used throughout the package (cyclic Jacobi)."""
    return jacobi_eigh(a)


def propagator(h, t: float) -> np.ndarray:
    """Unitary ``exp(-2j*pi*H*t)`` for ``H`` in MHz and ``t`` in microseconds."""
    if not np.isfinite(t):
        raise InvalidArgument("evolution time must be finite")
    w, v = eigh(h)
    return propagator_from_eig(w, v, t)


def propagator_from_eig(w: np.ndarray, v: np.ndarray, t: float) -> np.ndarray:
    return (v * np.exp(-2j * np.pi * w * t)) @ v.conj().T


def dump_matrix(a) -> str:
    """Debug dump: JSON array-of-arrays of ``[re, im]`` pairs."""
    a = np.asarray(a, dtype=complex)
    return json.dumps([[[float(z.real), float(z.imag)] for z in row] for row in a])


def load_matrix(text: str) -> np.ndarray:
    rows = json.loads(text)
    return np.array([[complex(re, im) for re, im in row] for row in rows])
