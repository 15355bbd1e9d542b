"""Standalone verifiers for the identities behind the construction.

Four groups:

* the stationarity pairing against single-mode test functions (the
  bookkeeping identity relating the quadratic flux, dissipation, and
  the stress against the Laplacian of the test function),
* the exact per-wavenumber symbol identity
      sum_j (l_j.k)(l_j_perp.k) m_j(k) = |k|^2,
* measured-constant monitors for the smoothing estimates (Riesz log
  bound, shifted-operator bounds, commutator Sobolev bound), reported
  as empirical ratios, never asserted as theorems,
* the feasibility arithmetic on the parameter exponents.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np

from .fields import TorusField, inner, random_field
from .multipliers import (
    DIRECTIONS,
    L1,
    L2,
    directional_grad,
    lambda_s,
    modulate,
    riesz,
    riesz_commutator,
    riesz_odd_symbol,
    rperp_grad_commutator,
    t_op,
)
from .norms import linf, sobolev


@dataclass(frozen=True)
class ResidualReport:
    """Stationarity pairing against one test mode.

    total = nonlinear + dissipation + pressure; for an iteration state
    this vanishes, and the distance to a true weak solution is exactly
    |pressure|.
    """

    test_mode: tuple
    phase: str
    nonlinear: float
    dissipation: float
    pressure: float
    total: float


def _test_function(k, phase: str) -> TorusField:
    band = max(abs(k[0]), abs(k[1]), 1)
    amp = 0.5 if phase == "cos" else -0.5j
    if k == (0, 0):
        # cos degenerates to the constant 1, sin to 0
        return TorusField.constant(1.0 if phase == "cos" else 0.0)
    return TorusField.from_modes(band, {tuple(k): amp})


def weak_residual(theta: TorusField, q, nu: float, gamma: float,
                  psi_modes) -> list:
    """Pairings for each requested mode, cos and sin phases.

        nonlinear   = (1/2) <Lambda^{-1/2} theta, Lambda^{1/2} [Rperp, grad psi] theta>
        dissipation = nu <Lambda^{-1/2} theta, Lambda^{gamma+1/2} psi>
        pressure    = <q, Lambda^2 psi>    (0 when no stress is supplied)

    q enters through Lambda^2 = -Laplacian, so a state carrying the
    relaxed relation exactly has total = 0 for every mode.
    """
    reports = []
    th_half = lambda_s(theta, -0.5)
    for k in psi_modes:
        k = (int(k[0]), int(k[1]))
        for phase in ("cos", "sin"):
            psi = _test_function(k, phase)
            if psi.max_abs_coeff() == 0.0:
                reports.append(ResidualReport(k, phase, 0.0, 0.0, 0.0, 0.0))
                continue
            com = rperp_grad_commutator(psi, theta)
            nl = 0.5 * inner(th_half, lambda_s(com, 0.5))
            diss = nu * inner(th_half, lambda_s(psi, gamma + 0.5)) if nu else 0.0
            pres = inner(q, lambda_s(psi, 2.0)) if q is not None else 0.0
            reports.append(ResidualReport(k, phase, nl, diss, pres,
                                          nl + diss + pres))
    return reports


def check_algebraic(kmax: int) -> float:
    """Max over 0 < |k|_inf <= kmax of
    |sum_j (l_j.k)(l_j_perp.k) m_j(k) - |k|^2|."""
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    k = np.arange(-kmax, kmax + 1, dtype=np.float64)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    total = np.zeros_like(k1)
    for j, l in ((1, L1), (2, L2)):
        ldk = (l.n1 * k1 + l.n2 * k2) / l.d
        lp = l.perp
        lpdk = (lp.n1 * k1 + lp.n2 * k2) / lp.d
        total = total + ldk * lpdk * riesz_odd_symbol(j, k1, k2)
    defect = np.abs(total - (k1 * k1 + k2 * k2))
    defect[kmax, kmax] = 0.0
    return float(defect.max())


def check_support(f: TorusField, radius: float) -> float:
    """Largest coefficient magnitude beyond |k| > radius."""
    K = f.band
    k = np.arange(-K, K + 1, dtype=np.float64)
    kn = np.hypot(*np.meshgrid(k, k, indexing="ij"))
    outside = kn > radius
    if not outside.any():
        return 0.0
    return float(np.abs(f.coeffs[outside]).max())


def leibniz_residual(a: TorusField, lam5: int, l) -> float:
    """Relative defect of the splitting of Lambda applied to a
    modulated wave:

        Lambda(a cos(p.x)) = lam5 a cos + ((l.grad)a) sin
                             + (T1 a) cos + (T2 a) sin,  p = lam5 l.
    """
    p = l.wave(lam5)
    g = modulate(a, p, "cos")
    direct = lambda_s(g, 1.0)
    rebuilt = (float(lam5) * g
               + modulate(directional_grad(a, l), p, "sin")
               + modulate(t_op(a, 1, lam5, l), p, "cos")
               + modulate(t_op(a, 2, lam5, l), p, "sin"))
    scale = direct.max_abs_coeff()
    if scale == 0.0:
        return 0.0
    return (direct - rebuilt).max_abs_coeff() / scale


def commutator_ratio(trials: int, band_phi: int, band_theta: int,
                     seed: int = 0) -> dict:
    """Empirical constant in the commutator smoothing bound

        ‖[R_j, phi] theta‖_{H^{1/2}} <= C ‖phi‖_{H^3} ‖theta‖_{H^{-1/2}}

    over seeded random pairs; returns max and median of the observed
    ratios (both j)."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(trials):
        phi = random_field(band_phi, rng, mean_zero=True)
        theta = random_field(band_theta, rng, mean_zero=True)
        denom = sobolev(phi, 3.0) * sobolev(theta, -0.5)
        if denom == 0.0:
            continue
        best = max(sobolev(riesz_commutator(phi, theta, j), 0.5) for j in (1, 2))
        ratios.append(best / denom)
    return {
        "max": max(ratios) if ratios else 0.0,
        "median": statistics.median(ratios) if ratios else 0.0,
        "trials": len(ratios),
    }


def log_bound_ratio(mu: int, trials: int, seed: int = 0,
                    oversample: int = 2) -> float:
    """Max over seeded band-mu fields of ‖R_j a‖∞ / (‖a‖∞ log mu)."""
    rng = np.random.default_rng(seed)
    best = 0.0
    lg = math.log(mu)
    for _ in range(trials):
        a = random_field(mu, rng, mean_zero=True)
        na = linf(a, oversample)
        if na == 0.0:
            continue
        for j in (1, 2):
            best = max(best, linf(riesz(a, j), oversample) / (na * lg))
    return best


def t_bound_ratios(lam: int, mu: int, trials: int, seed: int = 0,
                   oversample: int = 2) -> tuple:
    """Max over seeded band-mu fields of the shifted-operator ratios
    ‖T1 a‖∞ / (mu^2/lam ‖a‖∞) and ‖T2 a‖∞ / (mu^3/lam^2 ‖a‖∞),
    maxed over both directions."""
    rng = np.random.default_rng(seed)
    b1 = b2 = 0.0
    s1 = mu * mu / lam
    s2 = mu ** 3 / lam ** 2
    for _ in range(trials):
        a = random_field(mu, rng, mean_zero=True)
        na = linf(a, oversample)
        if na == 0.0:
            continue
        for l in DIRECTIONS:
            b1 = max(b1, linf(t_op(a, 1, lam, l), oversample) / (s1 * na))
            b2 = max(b2, linf(t_op(a, 2, lam, l), oversample) / (s2 * na))
    return b1, b2


@dataclass(frozen=True)
class FeasibilityReport:
    """Sign checks on the channel exponents and the parameter windows."""

    alpha: float
    exponents: dict
    verdicts: dict
    constraints: dict

    @property
    def all_pass(self) -> bool:
        return all(self.verdicts.values()) and all(self.constraints.values())


def feasibility(params) -> FeasibilityReport:
    """Pure exponent arithmetic; invalid parameters yield fail verdicts,
    never exceptions. `params` needs attributes b, beta, gamma, eps0."""
    b = float(params.b)
    beta = float(params.beta)
    gamma = float(params.gamma)
    eps0 = float(params.eps0)
    alpha = 0.5 + beta / (2.0 * b) - eps0
    exps = {
        "mismatch": (b - 1.0) * (beta - 1.0),
        "transport": 1.0 - alpha - beta / 2.0 - b / 2.0 + b * beta,
        "dissipation": gamma - 1.5 + beta - beta / (2.0 * b),
        "regularity": alpha - 0.5 - beta / (2.0 * b),
    }
    verdicts = {name: val < 0.0 for name, val in exps.items()}
    constraints = {
        "beta_range": 0.0 < beta < min(1.0 / 3.0, 3.0 - 2.0 * gamma),
        "gamma_range": 0.0 < gamma < 1.5,
        "b_range": b > 1.0,
        "alpha_window": 0.5 <= alpha < 0.5 + min(1.0 / 6.0, 1.5 - gamma),
    }
    return FeasibilityReport(alpha=alpha, exponents=exps, verdicts=verdicts,
                             constraints=constraints)


def report(check: str, params: dict, max_defect: float, tolerance: float) -> dict:
    """Uniform check-report shape for JSON emission."""
    return {
        "check": check,
        "params": params,
        "maxDefect": max_defect,
        "tolerance": tolerance,
        "pass": bool(max_defect <= tolerance),
    }
