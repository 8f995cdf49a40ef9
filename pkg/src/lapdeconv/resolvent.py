"""Laplace-domain rational algebra for explicit deconvolution.

Given a convolution kernel with rational transform g~(s) = num(s)/den(s),
the observed curve q = g * f satisfies an explicit inversion formula

    f(t) = B_r^{-1} ( q^{(r)}(t) - sum_j b_j q^{(r-1-j)}(t)
                      - int_0^t q(t-x) phi1^{(r)}(x) dx )

where r = deg(den) - deg(num), B_r is the ratio of leading coefficients,
and the constants b_j and the exponential-polynomial kernel phi1 come from
the partial-fraction decomposition of

    phi~(s) = (s^r g~(s) - B_r) / (s^r g~(s)).

This module computes that decomposition. All arithmetic is complex; user
facing outputs (a0, b, phi1 values) are real with an asserted tolerance on
the imaginary residue. Polynomials in scope have degree <~ 10, so
companion-matrix root finding with one Newton polish step is adequate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Polynomial",
    "RationalLaplaceKernel",
    "PoleTerm",
    "ResolventDecomposition",
    "rational_kernel",
    "phi_tilde",
    "decompose",
    "phi1_eval",
    "evaluate_decomposition",
    "exp_poly_coefficients",
    "exp_poly_decomposition",
    "exp_poly_kernel",
    "pole_multiset",
    "partial_fraction_terms",
    "polished_roots",
]

_TRIM_REL = 1e-12
_CLUSTER_RADIUS = 1e-6
_COPRIME_TOL = 1e-8
_REALNESS_TOL = 1e-8


class Polynomial:
    """Dense polynomial with ascending complex coefficients.

    Trailing coefficients below 1e-12 of the largest magnitude are trimmed
    on construction, so degree == len(coeffs) - 1 is meaningful.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        scale = float(np.max(np.abs(c)))
        if scale > 0.0:
            keep = np.nonzero(np.abs(c) >= _TRIM_REL * scale)[0]
            c = c[: keep[-1] + 1]
        else:
            c = np.zeros(1, dtype=complex)
        self.coeffs = c

    @classmethod
    def from_roots(cls, roots) -> "Polynomial":
        c = np.array([1.0 + 0.0j])
        for z in np.atleast_1d(np.asarray(roots, dtype=complex)):
            c = np.convolve(c, np.array([-z, 1.0 + 0.0j]))
        return cls(c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs.size == 1 and self.coeffs[0] == 0.0

    def __call__(self, s):
        return np.polynomial.polynomial.polyval(s, self.coeffs)

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0.0])
        return Polynomial(self.coeffs[1:] * np.arange(1, self.coeffs.size))

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return Polynomial(np.convolve(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * other)

    __rmul__ = __mul__

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(self.coeffs.size, other.coeffs.size)
        c = np.zeros(n, dtype=complex)
        c[: self.coeffs.size] += self.coeffs
        c[: other.coeffs.size] += other.coeffs
        return Polynomial(c)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (other * (-1.0))

    def shifted(self, s0: complex) -> "Polynomial":
        """Coefficients of p(u + s0) as a polynomial in u (Taylor shift)."""
        desc = self.coeffs[::-1].copy()
        n = desc.size
        out = np.empty(n, dtype=complex)
        for k in range(n):
            # synthetic division of desc by (s - s0); remainder is the
            # k-th Taylor coefficient at s0
            for i in range(1, desc.size):
                desc[i] += s0 * desc[i - 1]
            out[k] = desc[-1]
            desc = desc[:-1]
        return Polynomial(out)

    def deflate(self, root: complex) -> "Polynomial":
        """Quotient after synthetic division by (s - root)."""
        desc = self.coeffs[::-1].copy()
        for i in range(1, desc.size):
            desc[i] += root * desc[i - 1]
        if desc.size == 1:
            return Polynomial([0.0])
        return Polynomial(desc[:-1][::-1])

    def real_coeffs(self, tol: float = _REALNESS_TOL) -> np.ndarray:
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        resid = float(np.max(np.abs(self.coeffs.imag)))
        if resid > tol * scale:
            raise ValueError(f"imaginary residue {resid:.3e} exceeds tolerance")
        return self.coeffs.real.copy()

    def __repr__(self) -> str:  # pragma: no cover
        return f"Polynomial({np.array2string(self.coeffs, precision=6)})"


def polished_roots(p: Polynomial) -> np.ndarray:
    """Roots via the companion matrix, then one Newton polish step each."""
    if p.degree == 0:
        return np.array([], dtype=complex)
    r = np.roots(p.coeffs[::-1])
    dp = p.derivative()
    val = np.atleast_1d(p(r))
    der = np.atleast_1d(dp(r))
    ok = np.abs(der) > 0
    r = np.array(r, dtype=complex)
    r[ok] -= val[ok] / der[ok]
    return r


def _single_linkage(roots: np.ndarray, radius: float) -> list[list[complex]]:
    """Single-linkage clustering of complex points at the given radius."""
    pts = list(roots)
    k = len(pts)
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(k):
        for m in range(i + 1, k):
            if abs(pts[i] - pts[m]) <= radius:
                parent[find(i)] = find(m)
    groups: dict[int, list[complex]] = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(pts[i])
    ordered = sorted(
        groups.values(),
        key=lambda g: (min(z.real for z in g), min(z.imag for z in g)),
    )
    return ordered


def _verified_cluster(p: Polynomial, members: list[complex], radius: float, out: list):
    """Accept a candidate multiplicity-m cluster or split it recursively.

    An m-fold root of p is a simple root of the (m-1)-th derivative, so the
    cluster center is refined by ordinary Newton on that derivative; unlike
    Newton on p itself this is not limited by the eps^(1/m) noise floor of
    evaluating p near a multiple root. The candidate is accepted when all
    Taylor coefficients of p below order m vanish at noise level there.
    Genuinely separate roots accidentally linked by the generous radius
    fail that test and are re-clustered at a tighter radius.
    """
    m = len(members)
    c = sum(members) / m
    if m == 1:
        out.append((c, 1, 0.0))
        return
    low_der = p
    for _ in range(m - 1):
        low_der = low_der.derivative()
    next_der = low_der.derivative()
    for _ in range(40):
        der = next_der(c)
        if abs(der) == 0.0:
            break
        step = low_der(c) / der
        c -= step
        if abs(step) <= 1e-15 * max(1.0, abs(c)):
            break
    taylor = p.shifted(c).coeffs
    top = float(np.max(np.abs(taylor)))
    low = float(np.max(np.abs(taylor[:m]))) if m <= taylor.size else 0.0
    if low <= 1e-7 * top:
        out.append((c, m, low / top if top > 0.0 else 0.0))
        return
    for sub in _single_linkage(np.asarray(members), radius / 16.0):
        _verified_cluster(p, sub, radius / 16.0, out)


def pole_multiset(p: Polynomial, warn: bool = True) -> list[tuple[complex, int]]:
    """Roots of p grouped into (center, multiplicity) pairs.

    Companion-matrix estimates of an m-fold root scatter like eps^(1/m),
    so clustering starts from a radius generous enough for the highest
    multiplicity the degree allows and each candidate group is verified
    against the polynomial itself before being accepted.
    """
    roots = polished_roots(p)
    if roots.size == 0:
        return []
    deg = p.degree
    scale = max(1.0, float(np.max(np.abs(roots))))
    eps = float(np.finfo(float).eps)
    radius = scale * max(_CLUSTER_RADIUS, 8.0 * eps ** (1.0 / deg))
    out: list[tuple[complex, int, float]] = []
    for grp in _single_linkage(roots, radius):
        _verified_cluster(p, grp, radius, out)
    if warn and any(mult > 1 and quality > 1e-11 for _, mult, quality in out):
        warnings.warn(
            "nearby roots merged into a higher-multiplicity pole",
            RuntimeWarning,
            stacklevel=3,
        )
    out.sort(key=lambda t: (round(t[0].real, 9), round(t[0].imag, 9)))
    return [(c, mult) for c, mult, _ in out]


def _series_div(num: np.ndarray, den: np.ndarray, order: int) -> np.ndarray:
    """First `order` Taylor coefficients of num/den around 0; den[0] != 0."""
    if abs(den[0]) == 0.0:
        raise ZeroDivisionError("series division by a series with zero constant term")
    out = np.zeros(order, dtype=complex)
    for m in range(order):
        acc = num[m] if m < num.size else 0.0
        top = min(m, den.size - 1)
        for k in range(1, top + 1):
            acc -= den[k] * out[m - k]
        out[m] = acc / den[0]
    return out


def partial_fraction_terms(num: Polynomial, poles) -> list[tuple[complex, np.ndarray]]:
    """Partial fractions of num(s) / prod_l (s - s_l)^{alpha_l}.

    poles is a list of (s_l, alpha_l) with distinct centers; the numerator
    degree must be smaller than sum(alpha_l). Returns, per pole, the
    coefficient list c with

        F(s) = sum_l sum_i c[l][i] / (s - s_l)^(i+1).
    """
    total = sum(alpha for _, alpha in poles)
    if num.degree >= total and not num.is_zero:
        raise ValueError("partial fractions require a proper rational function")
    out = []
    for idx, (s_l, alpha) in enumerate(poles):
        rest = Polynomial([1.0])
        for k, (s_m, alpha_m) in enumerate(poles):
            if k == idx:
                continue
            rest = rest * Polynomial.from_roots([s_m] * alpha_m)
        nt = num.shifted(s_l).coeffs
        dt = rest.shifted(s_l).coeffs
        taylor = _series_div(nt, dt, alpha)
        out.append((s_l, taylor[::-1].copy()))
    return out


@dataclass(frozen=True)
class RationalLaplaceKernel:
    """Convolution kernel described by its rational Laplace transform."""

    num: Polynomial
    den: Polynomial
    r: int
    B_r: float
    description: str = ""
    stable: bool = True

    def transform(self, s):
        """Evaluate g~(s) = num(s)/den(s)."""
        return self.num(s) / self.den(s)


def rational_kernel(num, den, description: str = "") -> RationalLaplaceKernel:
    """Validate and package a rational transform num(s)/den(s).

    Requires r = deg(den) - deg(num) >= 1 (the kernel must vanish to order
    r - 1 at zero with a nonzero r-th derivative there, which is what makes
    the inversion formula explicit). Zeros of the numerator with
    nonnegative real part make the resolvent kernel grow exponentially;
    that is recorded in the stability flag and warned about, not rejected.
    """
    pnum = num if isinstance(num, Polynomial) else Polynomial(num)
    pden = den if isinstance(den, Polynomial) else Polynomial(den)
    if pnum.is_zero:
        raise ValueError("numerator must be nonzero")
    if pden.is_zero:
        raise ValueError("denominator must be nonzero")
    r = pden.degree - pnum.degree
    if r < 1:
        raise ValueError(
            f"deg(den) - deg(num) = {r}; the transform must be strictly proper "
            "(r >= 1) for the inversion formula to exist"
        )
    b_r = pnum.coeffs[-1] / pden.coeffs[-1]
    if abs(b_r.imag) > _REALNESS_TOL * max(1.0, abs(b_r)):
        raise ValueError("leading-coefficient ratio B_r must be real")
    nroots = polished_roots(pnum)
    droots = polished_roots(pden)
    scale = max(
        1.0,
        max((abs(z) for z in nroots), default=0.0),
        max((abs(z) for z in droots), default=0.0),
    )
    for zn in nroots:
        if droots.size and np.min(np.abs(droots - zn)) < _COPRIME_TOL * scale:
            raise ValueError(
                "numerator and denominator share a root (within 1e-8); "
                "reduce the fraction first"
            )
    stable = bool(np.all(nroots.real < 0.0)) if nroots.size else True
    if not stable:
        warnings.warn(
            "numerator has zeros with nonnegative real part: the resolvent "
            "kernel phi grows exponentially and the inversion is numerically "
            "unstable at large t",
            RuntimeWarning,
            stacklevel=2,
        )
    return RationalLaplaceKernel(
        num=pnum,
        den=pden,
        r=r,
        B_r=float(b_r.real),
        description=description,
        stable=stable,
    )


def phi_tilde(g: RationalLaplaceKernel) -> tuple[Polynomial, Polynomial]:
    """The transform phi~(s) = (s^r g~(s) - B_r) / (s^r g~(s)) as num, den.

    Returned as polynomials (s^r num - B_r den, s^r num) with any common
    factor at s = 0 cancelled (one is guaranteed whenever den(0) = 0).
    The result is strictly proper or identically zero.
    """
    shifted_num = Polynomial(
        np.concatenate([np.zeros(g.r, dtype=complex), g.num.coeffs])
    )
    n = shifted_num - Polynomial(g.den.coeffs * g.B_r)
    d = shifted_num
    if n.is_zero:
        return n, d
    # cancel common powers of s
    nscale = float(np.max(np.abs(n.coeffs)))
    while (
        d.coeffs.size > 1
        and abs(d.coeffs[0]) == 0.0
        and abs(n.coeffs[0]) <= _TRIM_REL * nscale
    ):
        n = Polynomial(n.coeffs[1:]) if n.coeffs.size > 1 else Polynomial([0.0])
        d = Polynomial(d.coeffs[1:])
        if n.is_zero:
            break
    return n, d


@dataclass(frozen=True)
class PoleTerm:
    """One pole s_l of phi~ away from the origin, with its coefficients.

    a[i] multiplies x^i e^{s_l x} / i! in phi1; equivalently it is the
    coefficient of (s - s_l)^{-(i+1)} in the partial fraction expansion.
    """

    s: complex
    alpha: int
    a: tuple[complex, ...]


@dataclass(frozen=True)
class ResolventDecomposition:
    """Partial-fraction data of phi~ plus the derived inversion constants.

    a0[j] is the coefficient of t^j/j! in the polynomial part of phi;
    b[j] multiplies q^{(r-1-j)} in the inversion formula; poles carry the
    exponential part phi1.
    """

    a0: np.ndarray
    poles: tuple[PoleTerm, ...]
    b: np.ndarray
    r: int
    B_r: float

    @property
    def has_phi1(self) -> bool:
        return len(self.poles) > 0


def _pole_sort_key(term: PoleTerm):
    return (round(term.s.real, 9), round(abs(term.s.imag), 9), -term.s.imag)


def _symmetrize_conjugates(terms: list[PoleTerm], radius: float) -> list[PoleTerm]:
    """Enforce exact conjugate pairing of complex poles."""
    out: list[PoleTerm] = []
    used = [False] * len(terms)
    for i, t in enumerate(terms):
        if used[i]:
            continue
        if abs(t.s.imag) <= radius:
            s_real = complex(t.s.real, 0.0)
            out.append(PoleTerm(s_real, t.alpha, t.a))
            used[i] = True
            continue
        partner = None
        for k in range(i + 1, len(terms)):
            if used[k]:
                continue
            if (
                terms[k].alpha == t.alpha
                and abs(terms[k].s - t.s.conjugate()) <= 2 * radius
            ):
                partner = k
                break
        if partner is None:
            raise ValueError(
                "complex pole without a conjugate partner; the input "
                "transform does not have real coefficients"
            )
        used[i] = used[partner] = True
        p = terms[partner]
        s_sym = (t.s + p.s.conjugate()) / 2.0
        a_sym = tuple(
            (ai + pi.conjugate()) / 2.0 for ai, pi in zip(t.a, p.a)
        )
        out.append(PoleTerm(s_sym, t.alpha, a_sym))
        out.append(
            PoleTerm(s_sym.conjugate(), t.alpha, tuple(ai.conjugate() for ai in a_sym))
        )
    out.sort(key=_pole_sort_key)
    return out


def decompose(g: RationalLaplaceKernel) -> ResolventDecomposition:
    """Full pole decomposition of phi~ and the inversion constants b_j.

    The pole at the origin (order r, reduced when den(0) = 0 cancels part
    of it) yields a0; every zero s_l of the numerator of g~ contributes an
    exponential term. b_j combines both:

        b_j = a0[j] + sum_l sum_{i <= min(j, alpha_l - 1)}
              C(j, i) a_{l,i} s_l^{j - i}.
    """
    n, d = phi_tilde(g)
    r = g.r
    if n.is_zero:
        return ResolventDecomposition(
            a0=np.zeros(r),
            poles=(),
            b=np.zeros(r),
            r=r,
            B_r=g.B_r,
        )
    # structural pole order at the origin after cancellation
    r0 = 0
    while r0 < d.coeffs.size and abs(d.coeffs[r0]) == 0.0:
        r0 += 1
    num_part = Polynomial(d.coeffs[r0:])

    clustered = pole_multiset(num_part, warn=True)
    scale = max(1.0, max((abs(z) for z, _ in clustered), default=0.0))
    radius = _CLUSTER_RADIUS * scale
    # a zero of g~ at the origin would collide with the structural pole
    poles = [(complex(0.0), r0)]
    for center, mult in clustered:
        if abs(center) <= radius:
            poles[0] = (complex(0.0), r0 + mult)
        else:
            poles.append((center, mult))

    terms = partial_fraction_terms(_normalize_num(n, num_part), poles)

    a0 = np.zeros(r, dtype=complex)
    pole_terms: list[PoleTerm] = []
    for (s_l, alpha), (_, coeffs) in zip(poles, terms):
        if s_l == 0.0:
            take = min(alpha, r)
            a0[:take] = coeffs[:take]
        else:
            pole_terms.append(PoleTerm(s_l, alpha, tuple(coeffs)))

    pole_terms = _symmetrize_conjugates(pole_terms, radius)

    b = np.zeros(r, dtype=complex)
    for j in range(r):
        acc = a0[j]
        for term in pole_terms:
            for i in range(min(j, term.alpha - 1) + 1):
                acc += math.comb(j, i) * term.a[i] * term.s ** (j - i)
        b[j] = acc

    a0_real = _assert_real(a0, "a0")
    b_real = _assert_real(b, "b")
    return ResolventDecomposition(
        a0=a0_real,
        poles=tuple(pole_terms),
        b=b_real,
        r=r,
        B_r=g.B_r,
    )


def _normalize_num(n: Polynomial, num_part: Polynomial) -> Polynomial:
    """Scale the numerator so the denominator is monic over its root set."""
    lead = num_part.coeffs[-1]
    return Polynomial(n.coeffs / lead)


def _assert_real(values: np.ndarray, label: str) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(values))) if values.size else 0.0)
    resid = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if resid > _REALNESS_TOL * scale:
        raise ValueError(
            f"{label} has imaginary residue {resid:.3e} beyond tolerance; "
            "the input transform is not real"
        )
    return values.real.copy()


def phi1_eval(d: ResolventDecomposition, x, deriv: int = 0):
    """Evaluate phi1^{(deriv)} at x (scalar or array), real output.

    phi1(x) = sum_l sum_j a_{l,j} x^j e^{s_l x} / j!; each derivative acts
    in closed form through the product rule, so no numerical
    differentiation is involved.
    """
    if deriv < 0:
        raise ValueError("derivative order must be nonnegative")
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    total = np.zeros(xs.shape, dtype=complex)
    m = deriv
    for term in d.poles:
        poly = np.zeros(term.alpha, dtype=complex)
        for jj, a_lj in enumerate(term.a):
            for i in range(min(m, jj) + 1):
                poly[jj - i] += a_lj * math.comb(m, i) * term.s ** (m - i) / math.factorial(jj - i)
        total += np.polynomial.polynomial.polyval(xs, poly) * np.exp(term.s * xs)
    scale = np.maximum(1.0, np.abs(total))
    resid = float(np.max(np.abs(total.imag) / scale)) if total.size else 0.0
    if resid > 1e-10:
        raise ValueError(f"phi1 imaginary residue {resid:.3e} beyond tolerance")
    out = total.real
    return float(out[0]) if scalar else out


def evaluate_decomposition(d: ResolventDecomposition, s):
    """Evaluate phi~ from its decomposition at complex s (round-trip check)."""
    ss = np.asarray(s, dtype=complex)
    out = np.zeros(ss.shape, dtype=complex)
    for j, a in enumerate(d.a0):
        out = out + a / ss ** (j + 1)
    for term in d.poles:
        for i, a in enumerate(term.a):
            out = out + a / (ss - term.s) ** (i + 1)
    return out


def exp_poly_kernel(a: float, rho, r: int, description: str = "") -> RationalLaplaceKernel:
    """Rational kernel for the shifted-basis parametric family

        g~(s) = P(s) / (s + a)^{k + r},   P(s) = sum_j rho[j] (s + a)^{k - j},

    with rho[0] = 1 and k = len(rho) - 1.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1 or rho.size < 1:
        raise ValueError("rho must be a nonempty 1-d sequence")
    if abs(rho[0] - 1.0) > 1e-12:
        raise ValueError("the family is normalized so that rho[0] = 1")
    if r < 1:
        raise ValueError("r must be >= 1")
    k = rho.size - 1
    pz = Polynomial(rho[::-1].astype(complex))
    num = pz.shifted(a)
    den = Polynomial.from_roots([-a] * (k + r))
    return rational_kernel(num.real_coeffs(), den.real_coeffs(), description)


def exp_poly_coefficients(a: float, rho, r: int):
    """Coefficients of the shifted-basis inversion for the parametric family

        g~(s) = P(s) / (s + a)^{k + r},   P(s) = sum_j rho[j] (s + a)^{k - j},

    with rho[0] = 1 and P having k distinct roots. Returns (alpha, beta,
    roots): alpha are the polynomial-part coefficients in the (s + a)
    basis via the quotient recursion, beta the simple-pole residues

        beta_l = (s_l + a)^{k + r} / prod_{m != l} (s_l - s_m).
    """
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1 or rho.size < 1:
        raise ValueError("rho must be a nonempty 1-d sequence")
    if abs(rho[0] - 1.0) > 1e-12:
        raise ValueError("the family is normalized so that rho[0] = 1")
    if r < 1:
        raise ValueError("r must be >= 1")
    k = rho.size - 1

    alpha = np.zeros(r + 1)
    alpha[r] = 1.0
    for l in range(1, r + 1):
        acc = 0.0
        for j in range(max(0, l - k), l):
            acc += alpha[r - j] * rho[l - j]
        alpha[r - l] = -acc

    # P in the plain s basis: coefficients in z = s + a, then shift
    pz = Polynomial(rho[::-1].astype(complex))
    ps = pz.shifted(a)
    roots = polished_roots(ps)
    if roots.size != k:
        raise ValueError("failed to locate all k roots of P")
    if k >= 2:
        dists = [
            abs(roots[i] - roots[m])
            for i in range(k)
            for m in range(i + 1, k)
        ]
        scale = max(1.0, float(np.max(np.abs(roots))))
        if min(dists) <= _CLUSTER_RADIUS * scale:
            raise ValueError(
                "P has (numerically) repeated roots; use the general "
                "decompose() path which handles multiplicities"
            )
    beta = np.empty(k, dtype=complex)
    for l in range(k):
        prod = 1.0 + 0.0j
        for m in range(k):
            if m != l:
                prod *= roots[l] - roots[m]
        beta[l] = (roots[l] + a) ** (k + r) / prod
    return alpha, beta, roots


def exp_poly_decomposition(a: float, rho, r: int) -> ResolventDecomposition:
    """ResolventDecomposition built from the shifted-basis coefficients.

    Independent of decompose(): the estimator here is assembled from the
    quotient recursion (alpha) and residues (beta), then mapped onto the
    (a0, poles, b) representation:

        b[r-1-l]   = - sum_{j=l}^{r} C(j, l) a^{j-l} alpha[j]
        a_{l,0}    = - beta_l / s_l^r
        a0[j]      =   b[j] - sum_l a_{l,0} s_l^j.
    """
    alpha, beta, roots = exp_poly_coefficients(a, rho, r)
    k = roots.size

    b = np.zeros(r, dtype=complex)
    for l in range(r):
        acc = 0.0
        for j in range(l, r + 1):
            acc += math.comb(j, l) * a ** (j - l) * alpha[j]
        b[r - 1 - l] = -acc

    if np.any(np.abs(roots) < 1e-12):
        raise ValueError("P has a root at the origin; the family is degenerate there")
    a_l0 = -beta / roots**r

    a0 = np.zeros(r, dtype=complex)
    for j in range(r):
        a0[j] = b[j] - np.sum(a_l0 * roots**j)

    terms = [
        PoleTerm(complex(roots[l]), 1, (complex(a_l0[l]),)) for l in range(k)
    ]
    scale = max(1.0, float(np.max(np.abs(roots))) if k else 0.0)
    terms = _symmetrize_conjugates(terms, _CLUSTER_RADIUS * scale)
    return ResolventDecomposition(
        a0=_assert_real(a0, "a0"),
        poles=tuple(terms),
        b=_assert_real(b, "b"),
        r=r,
        B_r=1.0,
    )
