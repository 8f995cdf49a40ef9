"""Moment-constrained polynomial smoothing kernels for derivative estimation.

A kernel of order (L, j) on support [lo, hi] is a polynomial K satisfying

    integral_lo^hi t^l K(t) dt = (-1)^j j!   if l == j,   0 otherwise,

for l = 0 .. L-1, with K and K' vanishing at both endpoints so the
zero-extension is C^1. We write K(t) = (t - lo)^2 (hi - t)^2 p(t) and solve
for the minimal-degree p in exact rational arithmetic, so the moment
constraints hold to machine precision in the returned float coefficients.

Interior kernels live on [-1, 1]. Near the left boundary of the data
interval the same system is solved on [-1, rho] with rho = (distance to
boundary) / bandwidth; right-boundary kernels are the reflections
K~(t) = (-1)^j K(-t) of the left ones.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "SmoothingKernel",
    "make_kernel",
    "make_boundary_kernel",
    "eval_kernel",
]

_RHO_DECIMALS = 6


@dataclass(frozen=True)
class SmoothingKernel:
    """Polynomial kernel of order (L, j) on a fixed support interval.

    coeffs are ascending powers of t and define the kernel inside the open
    support; the kernel is zero outside and at the endpoints. norm2 is the
    exact integral of K^2 over the support, converted to float.

    coeffs_exact carries the same polynomial in exact rational arithmetic.
    The moment system is solved exactly, and for the most ill-conditioned
    boundary kernels (small rho, high j) the float64 monomial coefficients
    alone cannot represent the solution to the full constraint accuracy, so
    exact verification must go through coeffs_exact.
    """

    L: int
    j: int
    support: tuple[float, float]
    coeffs: tuple[float, ...]
    norm2: float
    coeffs_exact: tuple[Fraction, ...] = field(repr=False, default=())
    support_exact: tuple[Fraction, Fraction] = field(repr=False, default=())

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, t):
        return eval_kernel(self, t)

    def antiderivative(self) -> np.ndarray:
        """Float coefficients of the primitive with value 0 at the left endpoint."""
        c = np.asarray(self.coeffs, dtype=float)
        prim = np.concatenate(([0.0], c / np.arange(1, c.size + 1)))
        lo = self.support[0]
        prim[0] = -np.polynomial.polynomial.polyval(lo, prim)
        return prim

    def reflected(self) -> "SmoothingKernel":
        """The right-edge variant K~(t) = (-1)^j K(-t) on the mirrored support."""
        sgn = -1.0 if self.j % 2 else 1.0
        co = tuple(sgn * c * (-1.0) ** i for i, c in enumerate(self.coeffs))
        lo, hi = self.support
        co_exact = tuple(
            c if (self.j + i) % 2 == 0 else -c
            for i, c in enumerate(self.coeffs_exact)
        )
        elo, ehi = self.support_exact
        return SmoothingKernel(
            self.L, self.j, (-hi, -lo), co, self.norm2, co_exact, (-ehi, -elo)
        )


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        for k, bk in enumerate(b):
            out[i + k] += ai * bk
    return out


def _poly_integral(coeffs, lo: Fraction, hi: Fraction) -> Fraction:
    total = Fraction(0)
    lo_pow, hi_pow = lo, hi
    for i, c in enumerate(coeffs):
        total += c * (hi_pow - lo_pow) / (i + 1)
        lo_pow *= lo
        hi_pow *= hi
    return total


def _power_moments(coeffs, lo: Fraction, hi: Fraction, pmax: int):
    """table[p] = integral of t^p * poly(coeffs) over [lo, hi] for p = 0..pmax.

    Every entry of the moment system is such an integral, so tabulating by
    total power replaces the per-entry quadrature with a lookup.
    """
    npow = pmax + len(coeffs) + 1
    lo_pow = [Fraction(1)]
    hi_pow = [Fraction(1)]
    for _ in range(npow):
        lo_pow.append(lo_pow[-1] * lo)
        hi_pow.append(hi_pow[-1] * hi)
    table = []
    for p in range(pmax + 1):
        total = Fraction(0)
        for i, c in enumerate(coeffs):
            k = p + i + 1
            total += c * (hi_pow[k] - lo_pow[k]) / k
        table.append(total)
    return table


def _solve_exact(rows, rhs, ncols):
    """Solve a possibly over/under-determined exact linear system.

    Gaussian elimination over Fractions. Returns a solution vector (free
    variables pinned to zero) or None when the system is inconsistent.
    """
    m = [list(row) + [r] for row, r in zip(rows, rhs)]
    nrows = len(m)
    pivot_cols = []
    row = 0
    for col in range(ncols):
        pivot = None
        for rr in range(row, nrows):
            if m[rr][col] != 0:
                pivot = rr
                break
        if pivot is None:
            continue
        m[row], m[pivot] = m[pivot], m[row]
        pv = m[row][col]
        m[row] = [v / pv for v in m[row]]
        for rr in range(nrows):
            if rr != row and m[rr][col] != 0:
                factor = m[rr][col]
                m[rr] = [v - factor * w for v, w in zip(m[rr], m[row])]
        pivot_cols.append(col)
        row += 1
        if row == nrows:
            break
    for rr in range(row, nrows):
        if all(v == 0 for v in m[rr][:ncols]) and m[rr][ncols] != 0:
            return None
    sol = [Fraction(0)] * ncols
    for rr, col in enumerate(pivot_cols):
        sol[col] = m[rr][ncols]
    return sol


@functools.lru_cache(maxsize=None)
def _build_kernel(L: int, j: int, rho_num: int, rho_den: int) -> SmoothingKernel:
    lo = Fraction(-1)
    hi = Fraction(rho_num, rho_den)
    # envelope (t - lo)^2 (hi - t)^2 enforces double zeros at both endpoints
    env = _poly_mul(
        _poly_mul([-lo, Fraction(1)], [-lo, Fraction(1)]),
        _poly_mul([hi, Fraction(-1)], [hi, Fraction(-1)]),
    )
    targets = [Fraction(0)] * L
    sign = -1 if j % 2 else 1
    targets[j] = Fraction(sign * math.factorial(j))

    # minimal-degree search: grow the polynomial factor until the exact
    # moment system becomes consistent (guaranteed at degree L - 1 since the
    # envelope-weighted Gram matrix of monomials is nonsingular)
    m_top = L + 1
    env_mom = _power_moments(env, lo, hi, L - 1 + m_top)
    for m_deg in range(m_top + 1):
        # entry (l, i) is the moment of envelope * t^(i + l)
        rows = [[env_mom[i + l] for i in range(m_deg + 1)] for l in range(L)]
        sol = _solve_exact(rows, targets, m_deg + 1)
        if sol is None:
            continue
        kc = _poly_mul(env, sol)
        # defensive re-check of every constraint in exact arithmetic
        for l in range(L):
            shifted = [Fraction(0)] * l + kc
            assert _poly_integral(shifted, lo, hi) == targets[l]
        norm2 = _poly_integral(_poly_mul(kc, kc), lo, hi)
        return SmoothingKernel(
            L=L,
            j=j,
            support=(float(lo), float(hi)),
            coeffs=tuple(float(c) for c in kc),
            norm2=float(norm2),
            coeffs_exact=tuple(kc),
            support_exact=(lo, hi),
        )
    raise RuntimeError(f"no kernel of order ({L}, {j}) found")  # pragma: no cover


def make_kernel(L: int, j: int) -> SmoothingKernel:
    """Interior kernel of order (L, j) on [-1, 1]."""
    return make_boundary_kernel(L, j, 1.0)


def make_boundary_kernel(L: int, j: int, rho: float) -> SmoothingKernel:
    """Left-boundary kernel of order (L, j) on [-1, rho], rho in (0, 1].

    rho = 1 reproduces the interior kernel. Results are memoized with rho
    rounded to 1e-6.
    """
    if not isinstance(L, (int, np.integer)) or not isinstance(j, (int, np.integer)):
        raise TypeError("L and j must be integers")
    if not 0 <= j < L:
        raise ValueError(f"need 0 <= j < L, got (L, j) = ({L}, {j})")
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    rho_num = round(rho * 10**_RHO_DECIMALS)
    return _build_kernel(int(L), int(j), rho_num, 10**_RHO_DECIMALS)


def eval_kernel(k: SmoothingKernel, t):
    """Evaluate the kernel; exactly zero outside the open support."""
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    lo, hi = k.support
    inside = (arr > lo) & (arr < hi)
    out = np.zeros_like(arr)
    if np.any(inside):
        out[inside] = np.polynomial.polynomial.polyval(
            arr[inside], np.asarray(k.coeffs)
        )
    return float(out[0]) if scalar else out
