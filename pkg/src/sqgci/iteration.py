"""The iteration: amplitudes, perturbation, error channels, driver.

Each step takes a state (f_leq, q) satisfying the relaxed relation

    Lambda(f_leq) grad_perp(f_leq) = nu Lambda^{gamma-1} grad(f_leq)
                                     + grad(q) + perp-gradient part

and adds a modulated two-direction perturbation

    f_next = sum_j lowpass(a_j_perfect, mu) cos(5 lambda_next l_j . x)

whose quadratic self-interaction cancels grad(q) to leading order. The
new stress splits into five channels (two projection mismatches, the
oscillatory remainder, the transport cross terms, and dissipation),
each band-limited and evaluated exactly; only the pointwise square root
inside the amplitudes leaves a spectral tail, which is logged.

All equalities modulo perp-gradients are checked after applying the
inverse divergence, where they become exact identities of scalar
fields.

Frequency ladder: lambda_n = ceil(lambda0^(b^n)) evaluated in extended
precision (values within 1e-9 relative of an integer snap to it before
the ceiling), r_n = lambda_n^(-beta), mu_next = sqrt(lambda_n *
lambda_next).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .errors import GridBudgetExceeded, SeparationViolated
from .fields import TorusField, VectorField, multiply, random_field, sqrt_pointwise
from .multipliers import (
    DIRECTIONS,
    L1,
    L2,
    directional_grad,
    fat_lowpass,
    grad_perp,
    inv_div,
    lambda_s,
    lowpass,
    modulate,
    riesz_odd,
    t_op,
)
from .norms import holder_besov, linf, sobolev, x_norm

SUPPORT_RTOL = 1e-13


@dataclass(frozen=True)
class IterationParams:
    lambda0: int
    b: float
    beta: float
    nu: float
    gamma: float
    c0: float = 2.0
    eps0: float = 0.01
    steps: int = 1
    oversample: int = 4
    separation: str = "warn"

    def validate(self) -> list:
        """Collect every violated constraint (empty list = valid)."""
        p = []
        if int(self.lambda0) != self.lambda0 or self.lambda0 < 2:
            p.append(f"lambda0 must be an integer >= 2, got {self.lambda0}")
        if not self.b > 1.0:
            p.append(f"b must be > 1, got {self.b}")
        if not 0.0 < self.gamma < 1.5:
            p.append(f"gamma must lie in (0, 3/2), got {self.gamma}")
        beta_cap = min(1.0 / 3.0, 3.0 - 2.0 * self.gamma)
        if not 0.0 < self.beta < beta_cap:
            p.append(f"beta must lie in (0, min(1/3, 3-2*gamma)) = (0, {beta_cap:g}), "
                     f"got {self.beta}")
        if self.nu < 0.0:
            p.append(f"nu must be >= 0, got {self.nu}")
        if self.c0 < 2.0:
            p.append(f"c0 must be >= 2, got {self.c0}")
        if self.eps0 <= 0.0:
            p.append(f"eps0 must be > 0, got {self.eps0}")
        elif self.b > 1.0 and not self.eps0 < self.beta / (2.0 * self.b):
            p.append(f"need alpha > 1/2, i.e. eps0 < beta/(2b) = "
                     f"{self.beta / (2.0 * self.b):g}, got eps0 = {self.eps0}")
        if self.steps < 0:
            p.append(f"steps must be >= 0, got {self.steps}")
        if self.oversample < 2:
            p.append(f"oversample must be >= 2, got {self.oversample}")
        if self.separation not in ("strict48", "warn"):
            p.append(f"separation must be strict48 or warn, got {self.separation!r}")
        return p

    @property
    def alpha(self) -> float:
        return 0.5 + self.beta / (2.0 * self.b) - self.eps0


def lambda_at(lambda0: int, b: float, n: int) -> int:
    """lambda_n = ceil(lambda0^(b^n)); 50-digit evaluation, values within
    1e-9 relative of an integer snap down before the ceiling."""
    if n == 0:
        return int(lambda0)
    with mp.workdps(50):
        x = mp.power(lambda0, mp.power(mp.mpf(b), n))
        near = mp.nint(x)
        if near >= 1 and abs(x - near) <= mp.mpf("1e-9") * x:
            return int(near)
        return int(mp.ceil(x))


@dataclass(frozen=True)
class DerivedScales:
    n: int
    lambda_n: int
    lambda_next: int
    r_n: float
    r_next: float
    mu_next: float
    alpha: float


def scales_for(params: IterationParams, n: int) -> DerivedScales:
    lam_n = lambda_at(params.lambda0, params.b, n)
    lam_1 = lambda_at(params.lambda0, params.b, n + 1)
    return DerivedScales(
        n=n,
        lambda_n=lam_n,
        lambda_next=lam_1,
        r_n=lam_n ** (-params.beta),
        r_next=lam_1 ** (-params.beta),
        mu_next=math.sqrt(lam_n * lam_1),
        alpha=params.alpha,
    )


@dataclass
class StepState:
    n: int
    f_leq: TorusField
    q: TorusField


def _out_of_band(f: TorusField, radius: float) -> float:
    K = f.band
    k = np.arange(-K, K + 1, dtype=np.float64)
    kn = np.hypot(*np.meshgrid(k, k, indexing="ij"))
    outside = kn > radius
    if not outside.any():
        return 0.0
    return float(np.abs(f.coeffs[outside]).max())


def perfect_amplitude(q: TorusField, r_n: float, lambda_next: int, c0: float,
                      j: int, oversample: int = 4, kout=None):
    """Amplitude 2 sqrt(r_n/(5 lambda_next)) sqrt(c0 + m_j q / r_n) for
    direction j, truncated at kout (band of q by default). Returns the
    field and the sqrt alias report. NotPositive propagates when the
    radicand dips below zero, i.e. the induction bound ‖q‖_X <= r_n
    failed."""
    radicand = TorusField.constant(c0) + riesz_odd(q, j) * (1.0 / r_n)
    root, alias = sqrt_pointwise(radicand, oversample=oversample, kout=kout)
    scale = 2.0 * math.sqrt(r_n / (5.0 * lambda_next))
    return root * scale, alias


@dataclass
class Perturbation:
    f_next: TorusField
    a: tuple            # truncated amplitudes, one per direction
    a_perfect: tuple    # pre-truncation amplitudes (band kout)
    alias_tail: float


def build_f_next(q: TorusField, scales: DerivedScales, c0: float = 2.0,
                 oversample: int = 4, kout=None) -> Perturbation:
    """Perturbation at frequency 5*lambda_next along both directions.

    The amplitudes keep only frequencies below mu_next, so the result is
    supported in the annulus 5*lambda_next -/+ mu_next.
    """
    lam5 = 5 * scales.lambda_next
    if kout is None:
        kout = math.ceil(4.0 * scales.mu_next)
    ap = []
    als = []
    for j in (1, 2):
        amp, alias = perfect_amplitude(q, scales.r_n, scales.lambda_next, c0,
                                       j, oversample, kout)
        ap.append(amp)
        als.append(alias.tail)
    a = tuple(lowpass(amp, scales.mu_next) for amp in ap)
    f = TorusField.zero()
    for amp, l in zip(a, DIRECTIONS):
        f = f + modulate(amp, l.wave(lam5), "cos")
    f = TorusField(f.coeffs, mean_zero=True)
    return Perturbation(f_next=f, a=a, a_perfect=tuple(ap), alias_tail=max(als))


def leibniz_terms(a: TorusField, lam5: int, l):
    """The three correction fields in

        Lambda(a cos(lam5 l.x)) = lam5 a cos + ((l.grad)a) sin
                                  + (T1 a) cos + (T2 a) sin.
    """
    return (directional_grad(a, l),
            t_op(a, 1, lam5, l),
            t_op(a, 2, lam5, l))


def _scaled_perp(f: TorusField, l, scale: float) -> VectorField:
    lp = l.perp
    return VectorField(f * (scale * lp.n1 / lp.d), f * (scale * lp.n2 / lp.d))


def nonlinear_flux(f: TorusField, g: TorusField) -> VectorField:
    """Lambda(f) grad_perp(g), products exact."""
    lf = lambda_s(f, 1.0)
    gp = grad_perp(g)
    return VectorField(multiply(lf, gp.comp1), multiply(lf, gp.comp2))


def assemble_main(a1: TorusField, a2: TorusField, lam5: int) -> VectorField:
    """-(lam5/4) sum_l ((l.grad)(a_l^2)) l_perp."""
    out = VectorField(TorusField.zero(), TorusField.zero())
    for a, l in ((a1, L1), (a2, L2)):
        d = directional_grad(multiply(a, a), l)
        out = out + _scaled_perp(d, l, -0.25 * lam5)
    return out


def assemble_nonosc(a1: TorusField, a2: TorusField, lam5: int) -> VectorField:
    """-(lam5/2) sum_l (T2 a_l) a_l l_perp + (1/2) sum_l (T1 a_l) grad_perp(a_l)."""
    out = VectorField(TorusField.zero(), TorusField.zero())
    for a, l in ((a1, L1), (a2, L2)):
        t1a = t_op(a, 1, lam5, l)
        t2a = t_op(a, 2, lam5, l)
        out = out + _scaled_perp(multiply(t2a, a), l, -0.5 * lam5)
        gp = grad_perp(a)
        out = out + VectorField(multiply(t1a, gp.comp1) * 0.5,
                                multiply(t1a, gp.comp2) * 0.5)
    return out


def _mod2(g: TorusField, pa, pb, ta: str, tb: str) -> TorusField:
    """g(x) trig_a(pa.x) trig_b(pb.x) expanded by product-to-sum."""
    ps = (pa[0] + pb[0], pa[1] + pb[1])
    pd = (pa[0] - pb[0], pa[1] - pb[1])
    if (ta, tb) == ("sin", "sin"):
        return 0.5 * (modulate(g, pd, "cos") - modulate(g, ps, "cos"))
    if (ta, tb) == ("sin", "cos"):
        return 0.5 * (modulate(g, ps, "sin") + modulate(g, pd, "sin"))
    if (ta, tb) == ("cos", "sin"):
        return 0.5 * (modulate(g, ps, "sin") - modulate(g, pd, "sin"))
    if (ta, tb) == ("cos", "cos"):
        return 0.5 * (modulate(g, ps, "cos") + modulate(g, pd, "cos"))
    raise ValueError(f"bad trig pair {(ta, tb)!r}")


def assemble_osc(a1: TorusField, a2: TorusField, lam5: int) -> VectorField:
    """The six oscillatory families left after removing the mean
    (non-oscillatory) part of the quadratic self-interaction.

    With s_l = (l.grad)a_l + T2 a_l and c_l = T1 a_l, p_l = lam5*l:

        (1/2) sum_l s_l (lam5 a_l l_perp cos(2 p_l.x) + grad_perp(a_l) sin(2 p_l.x))
      - (1/2) sum_l c_l (lam5 a_l l_perp sin(2 p_l.x) - grad_perp(a_l) cos(2 p_l.x))
      - lam5 sum_{l != l'} s_l a_l' l'_perp sin(p_l.x) sin(p_l'.x)
      +      sum_{l != l'} s_l grad_perp(a_l') sin(p_l.x) cos(p_l'.x)
      - lam5 sum_{l != l'} c_l a_l' l'_perp cos(p_l.x) sin(p_l'.x)
      +      sum_{l != l'} c_l grad_perp(a_l') cos(p_l.x) cos(p_l'.x)
    """
    amps = (a1, a2)
    waves = tuple(l.wave(lam5) for l in DIRECTIONS)
    s = []
    c = []
    for a, l in zip(amps, DIRECTIONS):
        s.append(directional_grad(a, l) + t_op(a, 2, lam5, l))
        c.append(t_op(a, 1, lam5, l))
    out = VectorField(TorusField.zero(), TorusField.zero())
    for i, l in enumerate(DIRECTIONS):
        a = amps[i]
        p2 = (2 * waves[i][0], 2 * waves[i][1])
        gp = grad_perp(a)
        sa = multiply(s[i], a)
        ca = multiply(c[i], a)
        out = out + _scaled_perp(modulate(sa, p2, "cos"), l, 0.5 * lam5)
        out = out + VectorField(modulate(multiply(s[i], gp.comp1), p2, "sin") * 0.5,
                                modulate(multiply(s[i], gp.comp2), p2, "sin") * 0.5)
        out = out + _scaled_perp(modulate(ca, p2, "sin"), l, -0.5 * lam5)
        out = out + VectorField(modulate(multiply(c[i], gp.comp1), p2, "cos") * 0.5,
                                modulate(multiply(c[i], gp.comp2), p2, "cos") * 0.5)
    for i in (0, 1):
        for ip in (0, 1):
            if i == ip:
                continue
            lq = DIRECTIONS[ip]
            pa, pb = waves[i], waves[ip]
            gpp = grad_perp(amps[ip])
            sa = multiply(s[i], amps[ip])
            ca = multiply(c[i], amps[ip])
            out = out + _scaled_perp(_mod2(sa, pa, pb, "sin", "sin"), lq, -float(lam5))
            out = out + VectorField(_mod2(multiply(s[i], gpp.comp1), pa, pb, "sin", "cos"),
                                    _mod2(multiply(s[i], gpp.comp2), pa, pb, "sin", "cos"))
            out = out + _scaled_perp(_mod2(ca, pa, pb, "cos", "sin"), lq, -float(lam5))
            out = out + VectorField(_mod2(multiply(c[i], gpp.comp1), pa, pb, "cos", "cos"),
                                    _mod2(multiply(c[i], gpp.comp2), pa, pb, "cos", "cos"))
    return out


def q_m1(a1p: TorusField, a2p: TorusField, q: TorusField,
         scales: DerivedScales) -> TorusField:
    """Projection-mismatch stress from truncating the amplitudes at
    mu_next. Needs the pre-truncation amplitudes out to band 4*mu_next.

        -(5/4) lambda_next sum_j invdiv( l_j_perp (l_j.grad)
            fat_lowpass( -2 a_j_p * hi_j + hi_j^2, mu ) ),
        hi_j = a_j_p - lowpass(a_j_p, mu).

    The defining identity invdiv(main on truncated a) + q - q_m1 = 0
    holds exactly (sqrt tail aside) when band(q) <= 2*mu_next.
    """
    mu = scales.mu_next
    out = VectorField(TorusField.zero(), TorusField.zero())
    for ap, l in ((a1p, L1), (a2p, L2)):
        hi = ap - lowpass(ap, mu)
        g = multiply(ap, hi) * (-2.0) + multiply(hi, hi)
        g = fat_lowpass(g, mu)
        out = out + _scaled_perp(directional_grad(g, l), l, 1.0)
    return inv_div(out * (-1.25 * scales.lambda_next))


def q_m2(a1: TorusField, a2: TorusField, lam5: int) -> TorusField:
    return inv_div(assemble_nonosc(a1, a2, lam5))


def q_m3(a1: TorusField, a2: TorusField, lam5: int) -> TorusField:
    return inv_div(assemble_osc(a1, a2, lam5))


def q_t(f_next: TorusField, f_leq: TorusField) -> TorusField:
    """Transport stress invdiv(Lambda(f_next) grad_perp(f_leq)
    + Lambda(f_leq) grad_perp(f_next))."""
    v = nonlinear_flux(f_next, f_leq) + nonlinear_flux(f_leq, f_next)
    return inv_div(v)


def q_d(f_next: TorusField, nu: float, gamma: float) -> TorusField:
    """Dissipation stress -nu Lambda^(gamma-1) f_next."""
    if nu == 0.0:
        return TorusField.zero()
    return lambda_s(f_next, gamma - 1.0) * (-nu)


def make_base(params: IterationParams, seed: int = 0, kind: str = "zero") -> StepState:
    """Base state at n = 0.

    "zero" is the trivial pair. "synthetic" draws a seeded random f0 at
    band 2*lambda0 and pairs it with the exactly consistent stress
    q0 = invdiv(Lambda f0 grad_perp f0) - nu Lambda^(gamma-1) f0,
    rescaling f0 by halves until ‖q0‖_X <= r0/16 so the first step has
    a genuinely nonconstant amplitude problem to solve.
    """
    if kind == "zero":
        return StepState(n=0, f_leq=TorusField.zero(), q=TorusField.zero())
    if kind != "synthetic":
        raise ValueError(f"base kind must be zero or synthetic, got {kind!r}")
    rng = np.random.default_rng(seed)
    f0 = random_field(2 * int(params.lambda0), rng, mean_zero=True)
    f0 = f0 * (1.0 / max(f0.max_abs_coeff(), 1e-300))
    flux_part = inv_div(nonlinear_flux(f0, f0))
    diss_part = lambda_s(f0, params.gamma - 1.0)
    r0 = float(params.lambda0) ** (-params.beta)
    h = 1.0
    for _ in range(200):
        q0 = flux_part * (h * h) - diss_part * (params.nu * h)
        if x_norm(q0) <= r0 / 16.0:
            break
        h *= 0.5
    else:
        raise ArithmeticError("could not scale the synthetic base into budget")
    return StepState(n=0, f_leq=f0 * h, q=q0)


def _rel_linf(num: TorusField, denom: float, oversample: int, grid_cap) -> float:
    top = linf(num, oversample, grid_cap)
    if denom == 0.0:
        return 0.0 if top == 0.0 else math.inf
    return top / denom


def step(state: StepState, params: IterationParams, grid_cap: int = 4096):
    """One full iteration step. Returns (new state, ledger row dict).

    The row records the X-norm of every channel, the master residual
    (the full relaxed relation after inverse divergence), the
    channel-sum cross-check against the directly evaluated quadratic
    flux, regularity monitors, and the sqrt alias tail.
    """
    sc = scales_for(params, state.n)
    sep_ok = 48 * sc.lambda_n <= sc.lambda_next
    if not sep_ok and params.separation == "strict48":
        raise SeparationViolated(
            f"48*lambda_n = {48 * sc.lambda_n} > lambda_next = {sc.lambda_next}")

    lam5 = 5 * sc.lambda_next
    band_f1 = lam5 + math.ceil(sc.mu_next)
    need = 4 * band_f1 + 2  # master-residual product grid
    if need > grid_cap:
        raise GridBudgetExceeded(
            f"step {state.n} needs a {need}-point axis for band {2 * band_f1}, "
            f"cap is {grid_cap}")

    pert = build_f_next(state.q, sc, params.c0, params.oversample)
    f1 = pert.f_next
    a1, a2 = pert.a

    qm1 = q_m1(pert.a_perfect[0], pert.a_perfect[1], state.q, sc)
    qm2 = q_m2(a1, a2, lam5)
    qm3 = q_m3(a1, a2, lam5)
    qt = q_t(f1, state.f_leq)
    qd = q_d(f1, params.nu, params.gamma)
    q_next = qm1 + qm2 + qm3 + qt + qd

    f_total = state.f_leq + f1
    for fld, radius, name in ((f_total, 6.0 * sc.lambda_next, "f"),
                              (q_next, 12.0 * sc.lambda_next, "q")):
        leak = _out_of_band(fld, radius)
        top = fld.max_abs_coeff()
        if top > 0.0 and leak > SUPPORT_RTOL * top:
            raise ArithmeticError(
                f"{name} support leak {leak:.3e} beyond |k| <= {radius:g} "
                f"(max coeff {top:.3e})")

    os = params.oversample
    denom = max(linf(state.q, os, grid_cap), linf(q_next, os, grid_cap))
    if denom == 0.0:
        # zero-stress step (free-wave stacking): measure cancellation
        # against the flux product scale instead of 0/0
        gp = grad_perp(f1)
        denom = linf(lambda_s(f1, 1.0), os, grid_cap) * max(
            linf(gp.comp1, os, grid_cap), linf(gp.comp2, os, grid_cap))
    direct_all = inv_div(nonlinear_flux(f1, f1)
                         + nonlinear_flux(state.f_leq, f1)
                         + nonlinear_flux(f1, state.f_leq))
    diss = lambda_s(f1, params.gamma - 1.0) * params.nu if params.nu else TorusField.zero()
    master = _rel_linf(direct_all + state.q - q_next - diss, denom, os, grid_cap)

    direct_new = inv_div(nonlinear_flux(f1, f1)) + state.q
    decomp = _rel_linf((qm1 + qm2 + qm3) - direct_new, denom, os, grid_cap)

    xq = x_norm(q_next, os, grid_cap)
    row = {
        "n": state.n,
        "lambda_n": sc.lambda_n,
        "lambda_next": sc.lambda_next,
        "r_n": sc.r_n,
        "r_next": sc.r_next,
        "mu_next": sc.mu_next,
        "alpha": sc.alpha,
        "xnorm": {
            "qM1": x_norm(qm1, os, grid_cap),
            "qM2": x_norm(qm2, os, grid_cap),
            "qM3": x_norm(qm3, os, grid_cap),
            "qT": x_norm(qt, os, grid_cap),
            "qD": x_norm(qd, os, grid_cap) if params.nu else 0.0,
            "q_next": xq,
        },
        "ratio_q_over_r": xq / sc.r_next,
        "master_residual": master,
        "decomp_residual": decomp,
        "holder_besov_f": holder_besov(f_total, sc.alpha, os, grid_cap),
        "partial_sum_reg": _partial_sum_reg(params, state.n + 1),
        "separation_ok": sep_ok,
        "alias_tail": pert.alias_tail,
    }
    return StepState(n=state.n + 1, f_leq=f_total, q=q_next), row


def _partial_sum_reg(params: IterationParams, upto: int) -> float:
    """sum over m = 1..upto of lambda_m^(alpha - 1/2 - beta/(2b)),
    the regularity budget (exponent = -eps0)."""
    e = params.alpha - 0.5 - params.beta / (2.0 * params.b)
    return sum(lambda_at(params.lambda0, params.b, m) ** e
               for m in range(1, upto + 1))


@dataclass
class RunResult:
    theta: TorusField
    f: TorusField
    q: TorusField
    rows: list
    series: dict


def run(params: IterationParams, seed: int = 0, base: str = "zero",
        grid_cap: int = 4096, start: StepState | None = None,
        rows: list | None = None) -> RunResult:
    """Drive `steps` iterations from the base state (or a resumed
    state). theta = Lambda(f)."""
    state = start if start is not None else make_base(params, seed, base)
    rows = [] if rows is None else list(rows)
    while state.n < params.steps:
        state, row = step(state, params, grid_cap)
        rows.append(row)
    theta = lambda_s(state.f_leq, 1.0)
    if params.steps >= 1 and not sobolev(theta, -0.5) > 0.0:
        raise ArithmeticError("iterate collapsed to zero")
    series = {
        "form": "f = sum_n sum_j lowpass(2 sqrt(r_n/(5 lambda_next)) "
                "sqrt(c0 + m_j q_n / r_n), mu_next) cos(5 lambda_next l_j . x)",
        "directions": [{"l": l.vec, "l_perp": l.perp.vec} for l in DIRECTIONS],
        "lambdas": [lambda_at(params.lambda0, params.b, m)
                    for m in range(params.steps + 1)],
        "steps": params.steps,
        "base": base,
        "seed": seed,
    }
    return RunResult(theta=theta, f=state.f_leq, q=state.q, rows=rows, series=series)


def params_hash(params: IterationParams, seed: int, base: str) -> str:
    """Stable digest of everything that determines a run's outputs
    (excluding steps, which resume may extend)."""
    payload = {
        "lambda0": params.lambda0, "b": params.b, "beta": params.beta,
        "nu": params.nu, "gamma": params.gamma, "c0": params.c0,
        "eps0": params.eps0, "oversample": params.oversample,
        "separation": params.separation, "seed": seed, "base": base,
    }
    blob = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(blob.encode("ascii")).hexdigest()[:16]
