"""Norms used to monitor the iteration.

L-infinity is measured as a grid maximum on an oversampled collocation
grid, so every reported value is a certified lower bound on the true
norm. The X-norm stacks L-infinity of the field and of its two images
under the even rational multipliers. Homogeneous Sobolev norms come
straight from coefficients. Holder regularity is tracked two ways: a
dyadic-block (Besov-type) proxy, which is the canonical number, and a
brute-force difference quotient over random point pairs as a
cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridBudgetExceeded
from .fields import TorusField, good_grid, to_grid
from .multipliers import require_mean_zero, riesz_odd


def _linf_with_grid(f: TorusField, oversample: int, grid_cap=None):
    """Grid max and the grid actually used. When a cap is given the
    oversampling degrades one notch at a time down to the minimal
    alias-free grid before giving up."""
    if oversample < 2:
        raise ValueError(f"oversample must be >= 2, got {oversample}")
    K = f.band
    if K == 0:
        return abs(f.coeffs[0, 0].real), 1
    minimal = 2 * K + 2
    candidates = [good_grid(s * minimal) for s in range(oversample, 1, -1)]
    candidates.append(minimal)
    for N in candidates:
        if grid_cap is None or N <= grid_cap:
            vals = to_grid(f, N).values
            return float(np.abs(vals).max()), N
    raise GridBudgetExceeded(
        f"band {K} needs a {minimal}-point axis, cap is {grid_cap}")


def linf(f: TorusField, oversample: int = 4, grid_cap=None) -> float:
    """Max of |f| over an oversampled collocation grid (a lower bound
    on the true sup)."""
    val, _ = _linf_with_grid(f, oversample, grid_cap)
    return val


def x_norm(q: TorusField, oversample: int = 4, grid_cap=None) -> float:
    """‖q‖∞ + ‖m_1 q‖∞ + ‖m_2 q‖∞ with the even rational multipliers."""
    require_mean_zero(q, "x_norm")
    total = linf(q, oversample, grid_cap)
    for j in (1, 2):
        total += linf(riesz_odd(q, j), oversample, grid_cap)
    return total


def sobolev(f: TorusField, s: float) -> float:
    """Homogeneous Sobolev norm (sum over k != 0 of |k|^{2s} |c(k)|^2)^{1/2}.
    Negative s requires a mean-zero field."""
    s = float(s)
    if s < 0:
        require_mean_zero(f, f"sobolev s={s:g}")
    K = f.band
    k = np.arange(-K, K + 1, dtype=np.float64)
    kn = np.hypot(*np.meshgrid(k, k, indexing="ij"))
    mask = kn > 0
    if not mask.any():
        return 0.0
    w = kn[mask] ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs[mask]) ** 2)))


@dataclass(frozen=True)
class DyadicBlock:
    """Spectral annulus: j = 0 holds |k| <= 1, j >= 1 holds
    2^{j-1} < |k| <= 2^j; together they partition the lattice."""

    j: int
    part: TorusField


def dyadic_blocks(f: TorusField) -> list[DyadicBlock]:
    """Split f into its dyadic annuli (empty blocks are skipped)."""
    K = f.band
    k = np.arange(-K, K + 1, dtype=np.float64)
    kn = np.hypot(*np.meshgrid(k, k, indexing="ij"))
    jmax = 0 if K == 0 else max(0, math.ceil(math.log2(math.hypot(K, K))))
    out = []
    for j in range(jmax + 1):
        if j == 0:
            mask = kn <= 1.0
        else:
            mask = (kn > 2.0 ** (j - 1)) & (kn <= 2.0 ** j)
        c = np.where(mask, f.coeffs, 0.0)
        if not np.any(c):
            continue
        out.append(DyadicBlock(j=j, part=TorusField(c, check=False).trim()))
    return out


def holder_besov(f: TorusField, alpha: float, oversample: int = 4,
                 grid_cap=None) -> float:
    """C^alpha proxy: sup_j 2^{j alpha} ‖block_j f‖∞ over the dyadic
    blocks. Requires 0 < alpha < 1."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    best = 0.0
    for blk in dyadic_blocks(f):
        best = max(best, 2.0 ** (blk.j * alpha) * linf(blk.part, oversample, grid_cap))
    return best


def _eval_points(f: TorusField, pts: np.ndarray) -> np.ndarray:
    """Direct evaluation of f at arbitrary points, vectorized over
    points via two small matmuls."""
    K = f.band
    k = np.arange(-K, K + 1, dtype=np.float64)
    e1 = np.exp(1j * pts[:, 0:1] * k[None, :])
    e2 = np.exp(1j * pts[:, 1:2] * k[None, :])
    return np.real(np.sum((e1 @ f.coeffs) * e2, axis=1))


def holder_quotient(f: TorusField, alpha: float, samples: int = 200,
                    seed: int = 1234) -> float:
    """Brute-force C^alpha estimate: max over random point pairs of
    |f(x)-f(y)| / dist(x,y)^alpha (torus distance) plus ‖f‖∞."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-np.pi, np.pi, size=(samples, 2))
    y = rng.uniform(-np.pi, np.pi, size=(samples, 2))
    fx = _eval_points(f, x)
    fy = _eval_points(f, y)
    d = np.abs(x - y)
    d = np.minimum(d, 2.0 * np.pi - d)
    dist = np.hypot(d[:, 0], d[:, 1])
    ok = dist > 0
    quot = float(np.max(np.abs(fx - fy)[ok] / dist[ok] ** alpha)) if ok.any() else 0.0
    return quot + linf(f)


@dataclass
class NormReport:
    """Bundle of the standard measurements for one field."""

    linf: float
    xnorm: float
    grid_used: int
    sobolev: dict = field(default_factory=dict)
    holder_besov: dict = field(default_factory=dict)
    holder_quotient: dict = field(default_factory=dict)


def norm_report(f: TorusField, sobolev_orders=(), alphas=(),
                oversample: int = 4, grid_cap=None,
                quotient_samples: int = 200) -> NormReport:
    val, grid = _linf_with_grid(f, oversample, grid_cap)
    rep = NormReport(linf=val, xnorm=x_norm(f, oversample, grid_cap), grid_used=grid)
    for s in sobolev_orders:
        rep.sobolev[float(s)] = sobolev(f, s)
    for a in alphas:
        rep.holder_besov[float(a)] = holder_besov(f, a, oversample, grid_cap)
        rep.holder_quotient[float(a)] = holder_quotient(f, a, quotient_samples)
    return rep
