"""Kernel estimation of a smooth signal and its derivatives from noisy samples.

Implements a Priestley-Chao type estimator with moment-vanishing polynomial
kernels, plus a data-driven global bandwidth selector that compares estimates
across a geometric bandwidth grid and keeps the largest bandwidth that is
statistically indistinguishable from all smaller ones.
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .kernels import SmoothingKernel, make_boundary_kernel, make_kernel

__all__ = [
    "AdaptationError",
    "BandwidthGrid",
    "DerivativeEstimate",
    "DesignWeights",
    "EstimationError",
    "LepskiConfig",
    "NoisySample",
    "estimate_derivative",
    "estimate_sigma",
    "lepski_select",
    "pc_estimate",
]

# Boundary kernels are parameterized by the relative distance to the nearer
# endpoint. At the exact endpoint that distance is 0, where the one-sided
# limit of the kernel family is still well defined; we approach it with a
# small positive floor instead of constructing the degenerate case.
_RHO_MIN = 1e-3


class EstimationError(RuntimeError):
    """An estimate cannot be formed from the given design and bandwidth."""


class AdaptationError(EstimationError):
    """Adaptive bandwidth selection is impossible for the given noise level."""


@dataclass(frozen=True)
class NoisySample:
    """Noisy observations y_i = q(t_i) + sigma*eps_i on a design in [0, T].

    The design is deterministic with the convention t_0 = 0, so the first
    spacing is t_1 - 0. ``mesh_mu`` stores the mesh ratio
    max_i (t_i - t_{i-1}) * n / T computed at ingestion; it is finite for
    every valid design and equals 1 for the equispaced one.
    """

    times: np.ndarray
    values: np.ndarray
    T: float
    sigma: float
    mesh_mu: float = field(init=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.shape != times.shape:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if times.size < 2:
            raise ValueError("need at least two observations")
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError("T must be positive and finite")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("times and values must be finite")
        if np.any(np.diff(times) < 0):
            raise ValueError("times must be sorted in increasing order")
        if times[0] < 0 or times[-1] > self.T * (1 + 1e-12):
            raise ValueError("times must lie in [0, T]")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ValueError("sigma must be a nonnegative finite number")
        gaps = np.diff(times, prepend=0.0)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "mesh_mu", float(np.max(gaps) * times.size / self.T))

    @property
    def n(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class BandwidthGrid:
    """Geometric bandwidth grid a^0 > a^-1 > ... > a^-J for derivative order j."""

    j: int
    a: float
    levels: np.ndarray

    @classmethod
    def build(cls, j: int, a: float, n: int, sigma: float, T: float) -> "BandwidthGrid":
        """Grid depth J = floor(log_a(n / (sigma^2 T^2)) / (2j+1)), clamped at 0.

        Raises AdaptationError when sigma^2 T^2 >= n (the depth formula turns
        nonpositive) or sigma == 0 (it diverges): in either case the caller
        must supply a fixed bandwidth instead of adapting.
        """
        if j < 0:
            raise ValueError("derivative order j must be nonnegative")
        if a <= 1.0:
            raise ValueError("grid ratio a must exceed 1")
        if sigma == 0.0:
            raise AdaptationError(
                "sigma = 0 gives an unbounded bandwidth grid; adaptive selection "
                "is impossible, supply a fixed bandwidth instead"
            )
        if sigma * sigma * T * T >= n:
            raise AdaptationError(
                "sigma^2*T^2 >= n leaves no room for a bandwidth grid; adaptive "
                "selection is impossible at this noise level, supply a fixed "
                "bandwidth or collect more samples"
            )
        depth = math.floor(math.log(n / (sigma * sigma * T * T), a) / (2 * j + 1))
        depth = max(depth, 0)
        levels = float(a) ** (-np.arange(depth + 1, dtype=float))
        return cls(j=int(j), a=float(a), levels=levels)


@dataclass(frozen=True)
class LepskiConfig:
    """Tuning constants for the adaptive bandwidth selector.

    C is the comparison constant; when None it defaults to mu * ||K_j||
    with the kernel norm integrated exactly, the smallest sufficient value.
    threshold_mult 3.0 is the empirically tuned multiplier; 4.0 is the
    conservative theoretical one. ``weights`` picks how observation weights
    are formed: "cell" integrates the kernel over the observation cells,
    "point" uses the classical spacing-scaled point evaluations.
    """

    a: float = 1.2
    C: float | None = None
    mu: float = 1.0
    threshold_mult: float = 3.0
    comparison_grid_size: int | None = None
    weights: str = "cell"
    probe_tol: float = 0.1


@dataclass(frozen=True)
class DerivativeEstimate:
    """Estimated j-th derivative of the signal on an evaluation grid."""

    j: int
    grid: np.ndarray
    values: np.ndarray
    bandwidth: float
    kernel_order: int

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise EstimationError("estimate produced non-finite values")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)


def _cell_edges(times: np.ndarray) -> np.ndarray:
    """Partition of [0, t_n] into one cell per observation, split at midpoints."""
    edges = np.empty(times.size + 1)
    edges[0] = 0.0
    edges[1:-1] = 0.5 * (times[:-1] + times[1:])
    edges[-1] = times[-1]
    return edges


def _kernel_for_point(t: float, T: float, lam: float, j: int, L: int) -> SmoothingKernel:
    # The relative endpoint distance is quantized to the 1e-3 grid so that
    # boundary-kernel construction (exact rational arithmetic, done once per
    # distinct parameter) is shared across bandwidths and evaluation grids.
    # The kernel varies smoothly in rho and vanishes at its support edge, so
    # the quantization error is negligible against the estimation error.
    dl = t
    dr = T - t
    if dl < lam:
        return make_boundary_kernel(L, j, max(round(dl / lam, 3), _RHO_MIN))
    if dr < lam:
        return make_boundary_kernel(L, j, max(round(dr / lam, 3), _RHO_MIN)).reflected()
    return make_kernel(L, j)


def _cell_rows(ts: np.ndarray, edges: np.ndarray, lam: float, j: int,
               ker: SmoothingKernel) -> np.ndarray:
    """Cell-integrated weight rows: row k holds lam^{-(j+1)} * int_cell_i K((t_k-u)/lam) du."""
    prim = ker.antiderivative()
    lo, hi = ker.support
    U = (ts[:, None] - edges[None, :]) / lam
    np.clip(U, lo, hi, out=U)
    B = np.polynomial.polynomial.polyval(U, prim)
    return (B[:, :-1] - B[:, 1:]) / lam**j


def _point_rows(ts: np.ndarray, times: np.ndarray, gaps: np.ndarray, lam: float,
                j: int, ker: SmoothingKernel) -> np.ndarray:
    """Point-evaluated weight rows: row k holds K((t_k-t_i)/lam) * gap_i / lam^{j+1}."""
    U = (ts[:, None] - times[None, :]) / lam
    lo, hi = ker.support
    inside = (U > lo) & (U < hi)
    K = np.zeros_like(U)
    if np.any(inside):
        K[inside] = np.polynomial.polynomial.polyval(
            U[inside], np.asarray(ker.coeffs)
        )
    return K * gaps[None, :] / lam ** (j + 1)


def _weight_matrix(times: np.ndarray, T: float, grid: np.ndarray, j: int, L: int,
                   lam: float, weights: str) -> np.ndarray:
    """Design matrix W with (W @ y)[k] the estimate of q^(j) at grid[k].

    Interior evaluation points share a single kernel and are handled in one
    vectorized block; points within lam of an endpoint each get the boundary
    kernel for their own relative distance (right edge reflected).
    """
    grid = np.asarray(grid, dtype=float)
    if weights not in ("cell", "point"):
        raise ValueError("weights must be 'cell' or 'point'")
    W = np.zeros((grid.size, times.size))
    interior = (grid >= lam) & (grid <= T - lam)
    if weights == "cell":
        edges = _cell_edges(times)
        if np.any(interior):
            W[interior] = _cell_rows(grid[interior], edges, lam, j, make_kernel(L, j))
        for k in np.nonzero(~interior)[0]:
            ker = _kernel_for_point(float(grid[k]), T, lam, j, L)
            W[k] = _cell_rows(grid[k : k + 1], edges, lam, j, ker)[0]
    else:
        gaps = np.diff(times, prepend=0.0)
        if np.any(interior):
            W[interior] = _point_rows(grid[interior], times, gaps, lam, j, make_kernel(L, j))
        for k in np.nonzero(~interior)[0]:
            ker = _kernel_for_point(float(grid[k]), T, lam, j, L)
            W[k] = _point_rows(grid[k : k + 1], times, gaps, lam, j, ker)[0]
    return W


def _banded_apply(times: np.ndarray, grid: np.ndarray, lam: float, j: int,
                  ker: SmoothingKernel, weights: str, V: np.ndarray) -> np.ndarray:
    """W @ V for interior evaluation points without forming the dense W.

    Only observations within one bandwidth of an evaluation point carry
    weight, so the work per row is the local band, not the whole design.
    All rows share the interior kernel; callers must pre-restrict the grid.
    """
    n = times.size
    if weights == "cell":
        edges = _cell_edges(times)
        s = np.searchsorted(edges, grid - lam, side="right") - 1
        e = np.searchsorted(edges, grid + lam, side="left") + 1
        np.clip(s, 0, edges.size - 1, out=s)
        np.clip(e, 1, edges.size, out=e)
        width = int(np.max(e - s))
        idx = s[:, None] + np.arange(width)[None, :]
        np.clip(idx, 0, edges.size - 1, out=idx)
        U = (grid[:, None] - edges[idx]) / lam
        lo, hi = ker.support
        np.clip(U, lo, hi, out=U)
        B = np.polynomial.polynomial.polyval(U, ker.antiderivative())
        band = (B[:, :-1] - B[:, 1:]) / lam**j
        cols = np.minimum(idx[:, :-1], n - 1)
    else:
        gaps = np.diff(times, prepend=0.0)
        s = np.searchsorted(times, grid - lam, side="right")
        e = np.searchsorted(times, grid + lam, side="left")
        np.clip(s, 0, max(n - 1, 0), out=s)
        width = max(int(np.max(e - s)), 1)
        offsets = np.arange(width)
        # columns past a row's own window are padding; index clipping would
        # alias them onto the last observation, so mask them out explicitly
        pad = offsets[None, :] >= (e - s)[:, None]
        idx = s[:, None] + offsets[None, :]
        np.clip(idx, 0, n - 1, out=idx)
        U = (grid[:, None] - times[idx]) / lam
        lo, hi = ker.support
        inside = (U > lo) & (U < hi) & ~pad
        K = np.zeros_like(U)
        if np.any(inside):
            K[inside] = np.polynomial.polynomial.polyval(
                U[inside], np.asarray(ker.coeffs)
            )
        band = K * gaps[idx] / lam ** (j + 1)
        cols = idx
    out = np.zeros((grid.size, V.shape[1]))
    for m in range(band.shape[1]):
        out += band[:, m, None] * V[cols[:, m]]
    return out


class DesignWeights:
    """Thread-safe memo of weight matrices for one fixed observation design.

    Monte-Carlo replications share the design, so every bandwidth/grid
    combination is built once and reused across runs and threads.
    """

    def __init__(self, times: np.ndarray, T: float):
        self.times = np.ascontiguousarray(times, dtype=float)
        self.T = float(T)
        self._lock = threading.Lock()
        self._store: dict = {}

    @staticmethod
    def _grid_key(grid: np.ndarray) -> tuple:
        digest = hashlib.blake2b(grid.tobytes(), digest_size=16).hexdigest()
        return (grid.size, digest)

    def weight_matrix(self, j: int, L: int, lam: float, grid: np.ndarray,
                      weights: str = "cell") -> np.ndarray:
        grid = np.ascontiguousarray(grid, dtype=float)
        key = (int(j), int(L), round(float(lam), 12), weights, self._grid_key(grid))
        with self._lock:
            W = self._store.get(key)
        if W is None:
            W = _weight_matrix(self.times, self.T, grid, j, L, lam, weights)
            with self._lock:
                W = self._store.setdefault(key, W)
        return W


def _check_windows(times: np.ndarray, grid: np.ndarray, lam: float) -> np.ndarray:
    """Count observations in the open window (t - lam, t + lam) per grid point."""
    lo = np.searchsorted(times, grid - lam, side="right")
    hi = np.searchsorted(times, grid + lam, side="left")
    return hi - lo


def pc_estimate(data: NoisySample, j: int, L: int, lam: float, grid,
                *, weights: str = "cell",
                design: DesignWeights | None = None) -> DerivativeEstimate:
    """Weighted-sum estimate of q^(j) at the given bandwidth.

    Each value is a kernel-weighted combination of the observations, with the
    kernel swapped for the matching boundary variant within one bandwidth of
    either endpoint. The map y -> estimate is exactly linear.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("evaluation grid must be nonempty")
    if not (0 <= j < L):
        raise ValueError("need 0 <= j < L")
    if not (0.0 < lam <= data.T / 2):
        raise ValueError("bandwidth must satisfy 0 < lam <= T/2")
    if np.any(_check_windows(data.times, grid, lam) == 0):
        raise EstimationError(
            "bandwidth %g leaves an empty observation window at some evaluation "
            "points; increase the bandwidth or the sample size" % lam
        )
    if design is None:
        W = _weight_matrix(data.times, data.T, grid, j, L, lam, weights)
    else:
        W = design.weight_matrix(j, L, lam, grid, weights)
    return DerivativeEstimate(
        j=j, grid=grid, values=W @ data.values, bandwidth=float(lam), kernel_order=L
    )


def _comparison_grid(n: int, T: float, cfg: LepskiConfig) -> np.ndarray:
    size = cfg.comparison_grid_size
    if size is None:
        size = max(4 * n, 2000)
    return np.linspace(0.0, T, int(size))


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros(x.size)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def _probe_error(P: np.ndarray, x: np.ndarray, j: int, L: int, T: float) -> float:
    """Worst relative error of the design weights over the monomial probes.

    Column m of P holds the estimated j-th derivative of (t/T)^m on the grid
    x; the truth is m!/(m-j)! x^(m-j) / T^m for m >= j and zero below. Each
    error is measured against its probe's own scale, floored at the generic
    output scale j!/T^j so the annihilation checks stay meaningful.
    """
    base = math.factorial(j) / T**j
    worst = 0.0
    for m in range(L):
        if m >= j:
            truth = (math.factorial(m) // math.factorial(m - j)) / T**m * x ** (m - j)
            scale = max(float(np.max(np.abs(truth))), base)
        else:
            truth = 0.0
            scale = base
        err = float(np.max(np.abs(P[:, m] - truth)))
        worst = max(worst, err / scale)
    return worst


def _lepski_batch(times: np.ndarray, T: float, V: np.ndarray, sigma: float,
                  j: int, L: int, cfg: LepskiConfig):
    """Adaptive bandwidth per column of the observation matrix V (n x R).

    Returns (lam_hat (R,), selected_index (R,), details dict). Admissibility
    of a bandwidth level is a property of the design alone: the level must
    fit in half the interval, every comparison-grid window in its interior
    zone must contain an observation, and the design weights there must
    realize the kernel's defining action on every monomial it controls
    (the j-th derivative of t^m for m < L) within the probe tolerance.
    Distances between estimates are integrated over the interior zone of
    the larger bandwidth, where neither estimate is boundary-affected.
    """
    n = times.size
    grid_obj = BandwidthGrid.build(j, cfg.a, n, sigma, T)
    levels = grid_obj.levels
    cgrid = _comparison_grid(n, T, cfg)
    if cfg.C is not None:
        C = float(cfg.C)
    else:
        C = cfg.mu * math.sqrt(make_kernel(L, j).norm2)
    ker = make_kernel(L, j)
    # Probe columns (t/T)^m for every monomial degree the kernel controls.
    # Checking only m = j would pass designs that reproduce t^j by symmetry
    # while mangling the remaining moment conditions at small bandwidths.
    Vp = np.concatenate([V, (times[:, None] / T) ** np.arange(L)], axis=1)

    spans: list[tuple[int, int] | None] = [None] * levels.size
    estimates: list[np.ndarray | None] = [None] * levels.size
    tweights: list[np.ndarray | None] = [None] * levels.size
    best_bad = None
    for li, lam in enumerate(levels):
        if lam > T / 2:
            continue
        i0 = int(np.searchsorted(cgrid, lam - 1e-12, side="left"))
        i1 = int(np.searchsorted(cgrid, T - lam + 1e-12, side="right"))
        if i1 - i0 < 2:
            continue
        # windows must be nonempty on the whole interval, endpoints included,
        # so that the selected level remains usable on a full [0, T] grid
        if np.any(_check_windows(times, cgrid[i0:i1], lam) == 0):
            continue
        if np.any(_check_windows(times, np.array([0.0, T]), lam) == 0):
            continue
        Ep = _banded_apply(times, cgrid[i0:i1], lam, j, ker, cfg.weights, Vp)
        rel = _probe_error(Ep[:, -L:], cgrid[i0:i1], j, L, T)
        if rel <= cfg.probe_tol:
            spans[li] = (i0, i1)
            estimates[li] = Ep[:, :-L]
            tweights[li] = _trapezoid_weights(cgrid[i0:i1])
        elif best_bad is None or rel < best_bad[0]:
            best_bad = (rel, li, (i0, i1), Ep[:, :-L], _trapezoid_weights(cgrid[i0:i1]))
    admissible = [i for i, s in enumerate(spans) if s is not None]
    if not admissible and best_bad is not None:
        # No level passes every probe (coarse designs at high j); estimating
        # at the least-biased level beats refusing outright.
        _, li, span, E, tw = best_bad
        spans[li], estimates[li], tweights[li] = span, E, tw
        admissible = [li]
    if not admissible:
        raise EstimationError(
            "no admissible bandwidth level for j=%d: the design is too sparse "
            "for every level of the grid" % j
        )

    R = V.shape[1]
    selected = np.full(R, -1, dtype=int)
    noise_scale = cfg.threshold_mult * C * C * sigma * sigma * T * T / n
    for ci in admissible:
        ok = selected < 0
        if not np.any(ok):
            break
        i0c, i1c = spans[ci]
        Ec = estimates[ci]
        tw = tweights[ci]
        for hi in admissible:
            if hi <= ci:
                continue
            h = levels[hi]
            i0h, _ = spans[hi]
            Eh = estimates[hi][i0c - i0h : i1c - i0h]
            diff2 = (Ec - Eh) ** 2
            dist2 = tw @ diff2
            ok &= dist2 <= noise_scale / h ** (2 * j + 1)
            if not np.any(ok):
                break
        selected[ok & (selected < 0)] = ci
    selected[selected < 0] = admissible[-1]
    lam_hat = levels[selected]
    details = {
        "levels": levels,
        "admissible": admissible,
        "selected_index": selected,
        "C": C,
        "hmin": (sigma * sigma * T * T / n) ** (1.0 / (2 * j + 1)),
        "comparison_grid_size": cgrid.size,
    }
    return lam_hat, selected, details


def lepski_select(data: NoisySample, j: int, L: int,
                  cfg: LepskiConfig | None = None,
                  *, return_details: bool = False):
    """Largest bandwidth whose estimate stays within the noise-level threshold
    of every smaller-bandwidth estimate on the grid; falls back to the
    smallest admissible level when none passes."""
    cfg = cfg or LepskiConfig()
    lam_hat, _, details = _lepski_batch(
        data.times, data.T, data.values[:, None], data.sigma, j, L, cfg
    )
    lam = float(lam_hat[0])
    if return_details:
        return lam, details
    return lam


def estimate_derivative(data: NoisySample, j: int, L: int,
                        cfg: LepskiConfig | None = None, grid=None,
                        *, design: DesignWeights | None = None) -> DerivativeEstimate:
    """Adaptive-bandwidth estimate of q^(j): select, then evaluate."""
    cfg = cfg or LepskiConfig()
    if grid is None:
        grid = np.linspace(0.0, data.T, 1024)
    lam = lepski_select(data, j, L, cfg)
    return pc_estimate(data, j, L, lam, grid, weights=cfg.weights, design=design)


def estimate_sigma(data: NoisySample) -> float:
    """First-difference noise scale estimate, provided as plumbing only.

    sigma_hat^2 = sum (y_i - y_{i-1})^2 / (2(n-1)); valid when the signal
    varies slowly across neighboring design points. The estimators here
    treat sigma as known; use this when no external value is available.
    """
    d = np.diff(data.values)
    return float(np.sqrt(np.sum(d * d) / (2.0 * (data.n - 1))))
