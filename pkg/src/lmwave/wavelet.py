"""Periodized Daubechies wavelets with pointwise evaluation.

The random-design coefficient estimators need ``psi_jk(t_i)`` at arbitrary,
non-dyadic locations.  The unperiodized scaling function and mother wavelet
are computed once on the dyadic grid ``2**-K`` by the cascade algorithm
(exact values at dyadic rationals, obtained by iterating the two-scale
relation from the integer values), and every query is answered by linear
interpolation in that table.

Periodization on [0, 1) is

    psi^per_jk(t) = sum_l 2**(j/2) psi(2**j (t + l) - k),

so ``psi^per_jk`` integrates to zero and ``phi^per_00`` is identically 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, sqrt
from typing import Callable

import numpy as np

from .errors import ConfigError

__all__ = [
    "WaveletBasis",
    "daubechies_filter",
    "cascade",
    "build_basis",
    "eval_psi",
    "eval_phi",
    "level_analysis",
    "level_synthesis",
    "quadrature_coefficient",
    "gram_matrix",
]

MAX_VANISHING_MOMENTS = 10


def daubechies_filter(vanishing_moments: int) -> np.ndarray:
    """Extremal-phase Daubechies low-pass filter, normalized to sum sqrt(2).

    Obtained by spectral factorization of the Daubechies polynomial
    ``P(y) = sum_{k<N} C(N-1+k, k) y**k`` with ``y = sin^2(w/2)``, keeping
    the roots inside the unit circle.

    Parameters
    ----------
    vanishing_moments : int
        Number ``N`` of vanishing moments; the filter has ``2N`` taps.

    Returns
    -------
    h : ndarray, shape (2N,)
    """
    n = int(vanishing_moments)
    if n < 1 or n > MAX_VANISHING_MOMENTS:
        raise ConfigError(
            f"vanishing_moments must be in 1..{MAX_VANISHING_MOMENTS}, got {vanishing_moments}"
        )
    if n == 1:
        return np.array([1.0, 1.0]) / sqrt(2.0)
    daub_poly = [comb(n - 1 + k, k) for k in range(n)]
    y_roots = np.roots(daub_poly[::-1])
    z_roots = []
    for y in y_roots:
        # z + 1/z = 2 - 4y; one root of each reciprocal pair lies inside the circle
        pair = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        z_roots.append(pair[np.argmin(np.abs(pair))])
    h = np.poly(z_roots)
    for _ in range(n):
        h = np.convolve(h, [1.0, 1.0])
    h = np.real(h)
    return h * sqrt(2.0) / h.sum()


def _integer_values(h: np.ndarray) -> np.ndarray:
    # phi(k) = sqrt(2) sum_n h_n phi(2k - n), k = 0..L-1, normalized to sum 1
    L = len(h)
    A = np.zeros((L, L))
    for k in range(L):
        for m in range(L):
            n = 2 * k - m
            if 0 <= n < L:
                A[k, m] = sqrt(2.0) * h[n]
    w, v = np.linalg.eig(A)
    vec = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    return vec / vec.sum()


def _refine(prev: np.ndarray, coeffs: np.ndarray, level: int, support: int) -> np.ndarray:
    """One dyadic refinement: values on step 2**-level from phi on step 2**-(level-1)."""
    step_prev = 2 ** (level - 1)
    out = np.zeros(support * 2**level + 1)
    m = np.arange(out.size)
    for n, c in enumerate(coeffs):
        idx = m - n * step_prev
        ok = (idx >= 0) & (idx < prev.size)
        out[ok] += sqrt(2.0) * c * prev[idx[ok]]
    return out


def cascade(h: np.ndarray, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact dyadic values of the scaling function and wavelet.

    Parameters
    ----------
    h : ndarray
        Orthonormal low-pass filter of length ``L``; support is ``[0, L-1]``.
    depth : int
        Resolution: values are returned at ``m / 2**depth``.

    Returns
    -------
    phi, psi : ndarray, shape ((L-1) * 2**depth + 1,)
    """
    h = np.asarray(h, dtype=float)
    L = len(h)
    support = L - 1
    g = np.array([(-1) ** n * h[L - 1 - n] for n in range(L)])
    if L == 2:
        # Haar: right-continuous indicator; the integer eigenproblem is degenerate
        phi = np.zeros(2)
        phi[0] = 1.0
    else:
        phi = _integer_values(h)
    prev = phi
    for level in range(1, depth + 1):
        prev, phi = phi, _refine(phi, h, level, support)
    psi = _refine(prev, g, depth, support) if depth >= 1 else np.zeros_like(phi)
    return phi, psi


@dataclass(frozen=True, eq=False)
class WaveletBasis:
    """Periodized Daubechies basis backed by cascade tables.

    Attributes
    ----------
    family : str
        Always ``"db"``.
    vanishing_moments : int
    table_depth : int
        Table resolution is ``2**-table_depth``.
    filter : ndarray
        Low-pass filter ``h``.
    eval_table_phi, eval_table_psi : ndarray
        Unperiodized ``phi`` and ``psi`` at ``m / 2**table_depth`` on
        ``[0, support_length]``.
    """

    family: str
    vanishing_moments: int
    table_depth: int
    filter: np.ndarray
    eval_table_phi: np.ndarray
    eval_table_psi: np.ndarray

    @property
    def support_length(self) -> int:
        return 2 * self.vanishing_moments - 1

    @property
    def interpolation(self) -> str:
        # Haar is piecewise constant; linear interpolation would smear its jumps
        return "constant" if self.vanishing_moments == 1 else "linear"

    @property
    def name(self) -> str:
        return f"{self.family}{self.vanishing_moments}"

    def table_grid(self) -> np.ndarray:
        return np.arange(self.eval_table_phi.size) / 2.0**self.table_depth

    def __repr__(self) -> str:
        return f"WaveletBasis({self.name}, table_depth={self.table_depth})"


@lru_cache(maxsize=16)
def build_basis(vanishing_moments: int = 3, table_depth: int = 14) -> WaveletBasis:
    """Construct (and cache) the periodized Daubechies basis ``db<N>``."""
    if not 1 <= int(vanishing_moments) <= MAX_VANISHING_MOMENTS:
        raise ConfigError(
            f"unsupported vanishing_moments={vanishing_moments}; "
            f"expected 1..{MAX_VANISHING_MOMENTS}"
        )
    if not 8 <= int(table_depth) <= 20:
        raise ConfigError(f"table_depth must be in 8..20, got {table_depth}")
    h = daubechies_filter(vanishing_moments)
    phi, psi = cascade(h, table_depth)
    for arr in (h, phi, psi):
        arr.setflags(write=False)
    return WaveletBasis(
        family="db",
        vanishing_moments=int(vanishing_moments),
        table_depth=int(table_depth),
        filter=h,
        eval_table_phi=phi,
        eval_table_psi=psi,
    )


def _check_points(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.size and (np.any(~np.isfinite(t)) or t.min() < 0.0 or t.max() >= 1.0):
        raise ValueError("evaluation points must lie in [0, 1)")
    return t


def _check_level(j: int) -> int:
    j = int(j)
    if j < 0:
        raise ValueError(f"level must be >= 0, got {j}")
    return j


def _wrapped(basis: WaveletBasis, table: np.ndarray, j: int, t: np.ndarray):
    """Table values and shift indices for every lattice term touching ``t``.

    For ``2**j t = fl + fr`` the only nonzero terms of the periodized sum are
    ``psi(fr + s)``, ``s = 0..S-1``, and each belongs to shift
    ``k = (fl - s) mod 2**j``.  Returns ``vals, ks`` of shape ``(S, len(t))``.
    """
    u = t * 2.0**j
    fl = np.floor(u)
    fr = u - fl
    fl = fl.astype(np.int64)
    K = basis.table_depth
    pos = fr * 2.0**K
    i0 = np.floor(pos).astype(np.int64)
    S = basis.support_length
    offs = (np.arange(S, dtype=np.int64) * 2**K)[:, None]
    lo = table[i0[None, :] + offs]
    if basis.interpolation == "linear":
        w = pos - i0
        hi = table[i0[None, :] + offs + 1]
        vals = lo + w[None, :] * (hi - lo)
    else:
        vals = lo
    ks = (fl[None, :] - np.arange(S, dtype=np.int64)[:, None]) % (2**j)
    return vals * 2.0 ** (j / 2.0), ks


def _eval(basis: WaveletBasis, table: np.ndarray, j: int, k: int, t) -> np.ndarray:
    j = _check_level(j)
    if not 0 <= int(k) < 2**j:
        raise ValueError(f"shift k={k} out of range for level j={j}")
    t = _check_points(t)
    flat = np.atleast_1d(t).ravel()
    vals, ks = _wrapped(basis, table, j, flat)
    out = np.where(ks == int(k), vals, 0.0).sum(axis=0)
    return out.reshape(t.shape) if t.ndim else out[0]


def eval_psi(basis: WaveletBasis, j: int, k: int, t):
    """Periodized wavelet ``psi^per_jk`` at ``t`` (scalar or array in [0, 1))."""
    return _eval(basis, basis.eval_table_psi, j, k, t)


def eval_phi(basis: WaveletBasis, j: int, k: int, t):
    """Periodized scaling function ``phi^per_jk`` at ``t``.

    ``phi^per_00`` is the constant 1 and is returned as such.
    """
    if _check_level(j) == 0:
        if int(k) != 0:
            raise ValueError(f"shift k={k} out of range for level j=0")
        t = _check_points(t)
        return np.ones_like(t) if t.ndim else 1.0
    return _eval(basis, basis.eval_table_phi, j, k, t)


def _table(basis: WaveletBasis, kind: str) -> np.ndarray:
    if kind == "psi":
        return basis.eval_table_psi
    if kind == "phi":
        return basis.eval_table_phi
    raise ValueError(f"kind must be 'psi' or 'phi', got {kind!r}")


def level_analysis(basis: WaveletBasis, j: int, t, weights, kind: str = "psi") -> np.ndarray:
    """``sum_i weights_i * psi^per_jk(t_i)`` for every shift ``k`` at level ``j``.

    Accumulation follows the order of ``t``; callers that need results
    independent of observation order must present the points in a fixed
    order.
    """
    j = _check_level(j)
    t = _check_points(t).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if weights.shape != t.shape:
        raise ValueError("weights and points must have the same length")
    nk = 2**j
    if kind == "phi" and j == 0:
        return np.array([weights.sum()])
    vals, ks = _wrapped(basis, _table(basis, kind), j, t)
    out = np.zeros(nk)
    for s in range(vals.shape[0]):
        out += np.bincount(ks[s], weights=weights * vals[s], minlength=nk)
    return out


def level_synthesis(basis: WaveletBasis, j: int, t, coeffs, kind: str = "psi") -> np.ndarray:
    """``sum_k coeffs_k * psi^per_jk(t)`` evaluated at every point of ``t``."""
    j = _check_level(j)
    t = _check_points(t)
    shape = t.shape
    t = t.ravel()
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (2**j,):
        raise ValueError(f"expected {2**j} coefficients at level {j}, got {coeffs.shape}")
    if kind == "phi" and j == 0:
        return np.full(shape, coeffs[0])
    vals, ks = _wrapped(basis, _table(basis, kind), j, t)
    return (vals * coeffs[ks]).sum(axis=0).reshape(shape)


def quadrature_coefficient(
    basis: WaveletBasis,
    fn: Callable[[np.ndarray], np.ndarray],
    j: int,
    k: int,
    grid_size: int | None = None,
    kind: str = "psi",
) -> float:
    """Trapezoid approximation of ``int_0^1 fn(t) psi^per_jk(t) dt``.

    On the periodic interval the trapezoid rule is the plain grid mean.  The
    grid is offset by half a step, ``(i + 1/2) / grid_size``, so that no node
    falls on a Haar jump.  ``grid_size`` defaults to ``2**(j + 12)`` and
    must be at least ``2**(j + 8)``.
    """
    j = _check_level(j)
    if grid_size is None:
        grid_size = 2 ** (j + 12)
    if grid_size < 2 ** (j + 8):
        raise ValueError(f"grid_size must be >= 2**(j+8) = {2 ** (j + 8)}")
    t = (np.arange(grid_size) + 0.5) / grid_size
    evaluate = eval_psi if kind == "psi" else eval_phi
    return float(np.mean(np.asarray(fn(t), dtype=float) * evaluate(basis, j, k, t)))


def basis_functions(basis: WaveletBasis, max_level: int, t) -> np.ndarray:
    """Rows ``phi_00, psi_00, psi_10, psi_11, ...`` for levels ``j < max_level``."""
    t = _check_points(t)
    rows = [eval_phi(basis, 0, 0, t)]
    for j in range(max_level):
        for k in range(2**j):
            rows.append(eval_psi(basis, j, k, t))
    return np.vstack(rows)


def gram_matrix(basis: WaveletBasis, max_level: int, grid_size: int = 2**16) -> np.ndarray:
    """Quadrature Gram matrix of ``phi_00`` and all ``psi_jk`` with ``j < max_level``."""
    t = np.arange(grid_size) / grid_size
    V = basis_functions(basis, max_level, t)
    return V @ V.T / grid_size
