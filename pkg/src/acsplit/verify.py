"""Named property checks for the operator identities and bounds used by the schemes.

Each check returns a :class:`CheckResult` with the measured worst case, the
bound it is compared with, and the margin ``bound - measured`` (positive
means pass).  ``run_checks`` collects them into one table; the CLI
``verify`` subcommand prints that table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from . import nonlinear
from .analysis import (
    l6_polynomial,
    mc_rate_study,
    semigroup_bound_scan,
    semigroup_gap_scalar,
    smoothing_constant,
    build_problem,
)
from .config import RunConfig
from .noise import (
    apply_r_half_to_increment,
    coarsen,
    make_covariance,
    operator_bound_q_a_r,
    sample_path,
)
from .schemes import (
    backward_euler_step,
    em_perturbed_step,
    split_step,
    split_step_be_form_residual,
    be_residual,
    BESolver,
)
from .spectral import (
    a_k_symbol,
    m_symbol,
    make_basis,
    perturbed_semigroup,
    r_half_symbol,
    semigroup,
)


@dataclass
class CheckResult:
    name: str
    group: str
    passed: bool
    measured: float
    bound: float
    detail: str = ""
    lower: bool = False  # the bound is a floor rather than a ceiling

    @property
    def margin(self) -> float:
        return self.measured - self.bound if self.lower else self.bound - self.measured

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag}  {self.group:<10} {self.name:<44} measured={self.measured:.3e} "
                f"bound={self.bound:.3e}  {self.detail}")


def _result(name, group, measured, bound, detail="", strict=False):
    measured = float(measured)
    ok = measured < bound if strict else measured <= bound
    return CheckResult(name, group, bool(ok and math.isfinite(measured)), measured, float(bound), detail)


def random_fields(basis, n, rng, decay=1.0, scale=(0.1, 3.0)):
    """Random band-limited fields, ``c_m ~ a N(0,1) / m^decay`` with ``a`` log-uniform."""
    m = np.arange(1, basis.n_modes + 1)
    amp = np.exp(rng.uniform(np.log(scale[0]), np.log(scale[1]), size=(n, 1)))
    return amp * rng.standard_normal((n, basis.n_modes)) / m**decay


def _grid_inner(basis, u, v):
    """Collocation quadrature of ``<u, v>`` for nodal arrays."""
    return basis.cell * np.sum(u * v, axis=-1)


# -- spectral -----------------------------------------------------------------


def check_spectral(seed=1):
    rng = np.random.default_rng(seed)
    out = []
    b = make_basis(64)
    E = b.functions()
    gram = b.cell * E @ E.T
    out.append(_result("basis orthonormality (quadrature)", "spectral",
                       np.max(np.abs(gram - np.eye(b.n_modes))), 1e-10))
    v = rng.standard_normal((20, b.n_modes))
    err = np.max(np.abs(b.to_spectral(b.to_nodal(v)) - v)) / np.max(np.abs(v))
    out.append(_result("nodal/spectral round trip", "spectral", err, 1e-12))

    lam = np.logspace(0, 6, 200)[:, None]
    t = np.logspace(-6, 0, 200)[None, :]
    worst = 0.0
    for alpha in (0.0, 0.5, 1.0):
        ratio = lam**alpha * np.exp(-lam * t) / (smoothing_constant(alpha) * t ** (-alpha))
        worst = max(worst, float(ratio.max()))
    out.append(_result("smoothing bound lam^a e^{-lam t} <= C_a t^-a", "spectral", worst, 1 + 1e-12))

    ks = np.logspace(-4, 0, 60)[None, :]
    worst = 0.0
    for s in (0, 1, 2):
        lhs = lam / (1 + 0.5 * ks * lam)
        rhs = 2.0 * ks ** (-0.5 * s) * lam ** (0.5 * (2 - s))
        worst = max(worst, float((lhs / rhs).max()))
    out.append(_result("Yosida interpolation bound (C=2)", "spectral", worst, 1 + 1e-12))

    k1 = np.array([0.0, 1e-3, 0.1, 0.5, 1.0])
    worst = 0.0
    for a in k1:
        for c in k1[k1 <= a]:
            lhs = r_half_symbol(lam, a) - r_half_symbol(lam, c)
            rhs = 0.5 * (c - a) * lam * r_half_symbol(lam, a) * r_half_symbol(lam, c)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    out.append(_result("resolvent difference identity", "spectral", worst, 1e-14))

    ak = a_k_symbol(lam, ks)
    y = lam / (1 + 0.5 * ks * lam)
    viol = max(float(np.max(0.5 * y - ak)), float(np.max(ak - y)))
    out.append(_result("A_k sandwich y/2 <= A_k <= y", "spectral", viol / float(y.max()), 1e-15))

    lam0 = np.linspace(0.0, 1e6, 20001)[:, None]
    kk = np.linspace(1e-3, 1.0, 100)[None, :]
    mr = m_symbol(lam0, kk) * r_half_symbol(lam0, kk)
    viol = max(float(np.max(0.5 - mr)), float(np.max(mr - 1.0)))
    out.append(_result("M_k R_{k/2} symbol in [1/2, 1]", "spectral", viol, 0.0))

    contr = []
    for sym in (r_half_symbol(lam, ks), np.exp(-lam * t), semigroup(0.3)(lam),
                perturbed_semigroup(0.1, 0.3)(lam)):
        contr.append(max(float(np.max(sym - 1.0)), float(np.max(-sym))))
    out.append(_result("R, E, E_k symbols in [0, 1]", "spectral", max(contr), 0.0))
    return out


# -- nonlinear ----------------------------------------------------------------


def check_nonlinear(ks=(0.1, 0.01), beta=1.0, n_pairs=1000, seed=2):
    rng = np.random.default_rng(seed)
    b = make_basis(32)
    ac = nonlinear.AllenCahn(b, beta)
    out = []
    x = random_fields(b, n_pairs, rng)
    y = random_fields(b, n_pairs, rng)
    dxy = np.linalg.norm(x - y, axis=-1)

    s = np.concatenate([np.linspace(-50, 50, 2001), rng.standard_normal(2000) * 10])
    worst_res, monotone = 0.0, True
    for k in ks:
        t = nonlinear.jk_scalar(s, k, beta)
        res = np.abs(t + k * nonlinear.f_pointwise(t, beta) - s) / (1 + np.abs(s))
        worst_res = max(worst_res, float(res.max()))
        order = np.argsort(s)
        monotone &= bool(np.all(np.diff(t[order]) >= 0))
    out.append(_result("J_k scalar residual / (1+|s|)", "nonlinear", worst_res, 1e-12,
                       "monotone" if monotone else "NOT monotone"))
    out[-1].passed &= monotone

    fx, fy = ac.f(x), ac.f(y)
    osl = -np.sum((fx - fy) * (x - y), axis=-1) / dxy**2
    out.append(_result("one-sided Lipschitz of f", "nonlinear",
                       float(np.max(osl)), beta**2 + 1e-9))

    for k in ks:
        tag = f"k={k:g}"
        jx, jy = ac.jk(x, k), ac.jk(y, k)
        fkx, fky = ac.fk(x, k), ac.fk(y, k)
        ident = np.max(np.linalg.norm(x - jx - k * fkx, axis=-1))
        out.append(_result(f"x - J_k x = k f_k(x) [{tag}]", "nonlinear", ident, 1e-10))

        lhs, rhs = ac.yosida_decomposition(x, k)
        out.append(_result(f"Yosida decomposition [{tag}]", "nonlinear",
                           np.max(np.linalg.norm(lhs - rhs, axis=-1)), 1e-9))

        C = nonlinear.lipschitz_constant(k, beta)
        lip_j = np.max(np.linalg.norm(jx - jy, axis=-1) / dxy)
        out.append(_result(f"J_k Lipschitz <= C(k) [{tag}]", "lipschitz", lip_j,
                           C * (1 + 1e-6)))
        h1_ratio = np.max(b.norm_s(jx, 1) / b.norm_s(x, 1))
        out.append(_result(f"J_k H1 growth <= C(k) [{tag}]", "lipschitz", h1_ratio,
                           C * (1 + 1e-6)))

        lip_f = np.max(np.linalg.norm(fkx - fky, axis=-1) / dxy)
        out.append(_result(f"f_k Lipschitz <= 1/k [{tag}]", "nonlinear", lip_f,
                           (1 / k) * (1 + 1e-6)))
        Fx, Fy = ac.big_fk(x, k), ac.big_fk(y, k)
        lip_F = np.max(np.linalg.norm(Fx - Fy, axis=-1) / dxy)
        out.append(_result(f"F_k Lipschitz <= 1/k [{tag}]", "nonlinear", lip_F,
                           (1 / k) * (1 + 1e-6)))

        osc = nonlinear.one_sided_constant(k, beta)
        os_f = np.max(-np.sum((fkx - fky) * (x - y), axis=-1) / dxy**2)
        os_F = np.max(-np.sum((Fx - Fy) * (x - y), axis=-1) / dxy**2)
        out.append(_result(f"f_k one-sided constant [{tag}]", "nonlinear", os_f, osc + 1e-9))
        out.append(_result(f"F_k one-sided constant [{tag}]", "nonlinear", os_F, osc + 1e-9))

        nx2 = np.sum(x * x, axis=-1)
        nx1 = b.norm_s(x, 1) ** 2
        d0 = max(np.max(-np.sum(fkx * x, axis=-1) / nx2), np.max(-np.sum(Fx * x, axis=-1) / nx2))
        d1 = max(np.max(-b.inner_s(fkx, x, 1) / nx1), np.max(-b.inner_s(Fx, x, 1) / nx1))
        out.append(_result(f"dissipativity in H [{tag}]", "nonlinear", d0, osc + 1e-9))
        out.append(_result(f"dissipativity in H^1 [{tag}]", "nonlinear", d1, osc + 1e-6))

    # F_alpha / F_beta decomposition for two different steps
    ka, kb = ks[0], ks[-1] if len(ks) > 1 else ks[0] / 2
    lam = b.eigenvalues
    ra, rb = r_half_symbol(lam, ka), r_half_symbol(lam, kb)
    fa = ac.fk(ra * x, ka)
    fb = ac.fk(rb * y, kb)
    lhs = np.sum((ac.big_fk(x, ka) - ac.big_fk(y, kb)) * (x - y), axis=-1)
    rhs = (np.sum((fa - fb) * (ra * x - rb * y), axis=-1)
           - np.sum(fa * (ra - rb) * y, axis=-1)
           + np.sum(fb * (ra - rb) * x, axis=-1))
    scale = 1 + np.abs(lhs)
    out.append(_result("F_alpha/F_beta decomposition", "nonlinear",
                       np.max(np.abs(lhs - rhs) / scale), 1e-9))
    return out


def check_l6(grid_points=2001, n_random=100_000, C=18.0, seed=3):
    out = []
    g = np.linspace(-10, 10, grid_points)
    worst = np.inf
    for i in range(0, grid_points, 256):
        t = g[i : i + 256, None]
        worst = min(worst, float(np.min(l6_polynomial(t, g[None, :], C))))
    rng = np.random.default_rng(seed)
    t, s = rng.standard_normal((2, n_random)) * np.exp(rng.uniform(-3, 3, (2, n_random)))
    scale = (t * t + s * s) ** 2
    worst_r = float(np.min(l6_polynomial(t, s, C) / scale))
    out.append(CheckResult("P_C(t,s) >= 0 on grid", "nonlinear", worst >= 0, -worst, 0.0,
                           f"C={C:g}, {grid_points}^2 points, C^2-17C-2={C*C-17*C-2:g}"))
    out.append(CheckResult("P_C(t,s) >= 0 random pairs", "nonlinear", worst_r >= 0, -worst_r, 0.0,
                           f"min P/(t^2+s^2)^2 = {worst_r:.3f}"))
    return out


# -- noise --------------------------------------------------------------------


def check_noise(seed=4, n_increments=10_000):
    out = []
    b = make_basis(64)
    cov = make_covariance(2.0, 1.0, b)
    ks = np.concatenate([[0.0], np.logspace(-6, 1, 50)])
    lhs = max(operator_bound_q_a_r(cov, b, k) for k in ks)
    out.append(_result("||Q^1/2 A^1/2 R|| <= ||A^1/2 Q^1/2||_HS", "noise", lhs, cov.hs_a_half))

    path = sample_path(cov, 1.0, 64, seed, samples=3)
    two = coarsen(coarsen(path, 2), 2).increments
    four = coarsen(path, 4).increments
    manual = path.fine.reshape(3, 16, 4, b.n_modes)
    manual = ((manual[:, :, 0] + manual[:, :, 1]) + manual[:, :, 2]) + manual[:, :, 3]
    bitwise = np.array_equal(two, four) and np.array_equal(four, manual)
    out.append(CheckResult("coarsening telescopes bitwise", "noise", bitwise,
                           0.0 if bitwise else 1.0, 0.0))

    k = 0.01
    p = sample_path(cov, k * n_increments, n_increments, seed + 1)
    y = apply_r_half_to_increment(p.increments, k, b)
    sq = np.sum(y * y, axis=-1)
    expected = k * cov.hs_r_half_sq(b, k)
    se = sq.std(ddof=1) / math.sqrt(sq.size)
    z = abs(sq.mean() - expected) / se
    out.append(_result("E||R dW||^2 = k ||R Q^1/2||_HS^2", "noise", z, 3.0,
                       f"mean={sq.mean():.4e} expected={expected:.4e} (in standard errors)"))

    var = p.increments.var(axis=0, ddof=1) / (k * cov.q)
    out.append(_result("per-mode increment variance / (k q_m)", "noise",
                       float(np.max(np.abs(var - 1.0))), 0.06, "10^4 increments per mode"))
    return out


# -- schemes ------------------------------------------------------------------


def check_schemes(ks=(0.1, 0.05, 0.01), beta=1.0, n_states=100, seed=5):
    rng = np.random.default_rng(seed)
    b = make_basis(64)
    ac = nonlinear.AllenCahn(b, beta)
    cov = make_covariance(2.0, 1.0, b)
    out = []
    X = random_fields(b, n_states, rng, decay=1.5)
    worst = 0.0
    for k in ks:
        dW = random_fields(b, n_states, rng, decay=2.0, scale=(1e-3, 1e-1))
        worst = max(worst, float(np.max(np.linalg.norm(
            split_step(ac, X, dW, k) - em_perturbed_step(ac, X, dW, k), axis=-1))))
    out.append(_result("split-step == EM on perturbed equation", "schemes", worst, 1e-10,
                       f"{n_states} states x {len(ks)} steps"))

    k, N = 0.05, 20
    path = sample_path(cov, k * N, N, seed, samples=4)
    Xj = random_fields(b, 4, rng, decay=1.5)
    worst = 0.0
    for j in range(N):
        dW = path.increments[:, j]
        Xn = split_step(ac, Xj, dW, k)
        worst = max(worst, float(np.max(np.linalg.norm(
            split_step_be_form_residual(ac, Xj, Xn, dW, k), axis=-1))))
        Xj = Xn
    out.append(_result("split-step satisfies rearranged BE form", "schemes", worst, 1e-9))

    lam = b.eigenvalues
    amp = 1e-8
    X0 = amp * np.ones(b.n_modes)
    Xn = X0.copy()
    lin = nonlinear.AllenCahn(b, 0.0)
    for _ in range(10):
        Xn = split_step(lin, Xn, 0.0, 0.05)
    expect = X0 * r_half_symbol(lam, 0.05) ** 20
    out.append(_result("linear exactness (10 steps, beta=0)", "schemes",
                       np.max(np.abs(Xn - expect)) / amp, 1e-12))

    Xs = random_fields(b, 20, rng, decay=1.5)
    dW = random_fields(b, 20, rng, decay=2.0, scale=(1e-3, 1e-1))
    Xb, its = backward_euler_step(ac, Xs, dW, 0.05, BESolver())
    res = np.max(np.linalg.norm(be_residual(ac, Xb, Xs + dW, 0.05), axis=-1))
    out.append(_result("backward Euler certified residual", "schemes", res, 1e-10,
                       f"{its} iterations"))
    return out


# -- analysis -----------------------------------------------------------------


def semigroup_error_constants(points=(200, 50, 50), refine=2):
    """Grid-maximised constants for each (s, r) on a grid and its refinement."""
    pairs = [(0, 0), (1, 0), (1, 1), (2, 0), (2, 2)]

    def grids(nl, nk, nt):
        return (np.logspace(0, 6, nl), np.logspace(-4, 0, nk), np.logspace(-8, 0, nt))

    coarse = grids(*points)
    fine = grids(*(refine * p for p in points))
    return {sr: (semigroup_bound_scan(*sr, *coarse), semigroup_bound_scan(*sr, *fine))
            for sr in pairs}


def check_analysis():
    out = []
    for (s, r), (c0, c1) in semigroup_error_constants().items():
        change = abs(c1 - c0) / c0
        ok = math.isfinite(c0) and math.isfinite(c1) and change < 0.10
        out.append(CheckResult(f"semigroup error constant (s,r)=({s},{r})", "analysis", ok,
                               change, 0.10, f"C={c0:.4f} -> {c1:.4f}"))
    mpmath.mp.dps = 50
    lam, k, t = 10, mpmath.mpf("0.1"), 1
    exact = (mpmath.exp(-lam * t) - 1 / (1 + k * lam / 2)
             * mpmath.exp(-lam * t * (1 + k * lam / 4) / (1 + k * lam / 2) ** 2))
    val = semigroup_gap_scalar(10.0, 0.1, 1.0)
    out.append(_result("semigroup error kernel vs 50-digit arithmetic", "analysis",
                       abs(val - float(exact)) / abs(float(exact)), 1e-13))
    return out


def check_study(cfg: RunConfig):
    """Monte Carlo checks on one coupled rate study."""
    rep = mc_rate_study(cfg)
    out = []
    for name, key in (("split-step strong rate", "split_step_slope"),
                      ("backward Euler strong rate", "backward_euler_slope")):
        slope = rep.extra[key]
        out.append(CheckResult(name, "study", slope is not None and slope >= 0.45,
                               slope if slope is not None else float("nan"), 0.45,
                               "slope of rms sup error, lower bound", lower=True))
    gs = rep.be_ss_gap_slope
    out.append(CheckResult("BE vs split-step squared gap rate", "study",
                           gs is not None and gs >= 0.9, gs if gs is not None else float("nan"),
                           0.9, "slope, lower bound", lower=True))
    out.append(CheckResult("reference self-consistency", "study",
                           bool(rep.reference.get("reliable", True)),
                           max(rep.reference.get("relative_change", [0.0])), 0.10))
    moments = rep.moment_table  # coarse to fine
    sup = [m["mean_sup_h1_sq"] for m in moments]
    var = max(abs(b / a - 1) for a, b in zip(sup, sup[1:])) if len(sup) > 1 else 0.0
    out.append(_result("sup_j ||X^j||_1^2 stable across levels", "study", var, 0.10))
    h2 = [m["mean_sum_k_h2_sq"] for m in moments]
    growth = max(b / a for a, b in zip(h2, h2[1:])) if len(h2) > 1 else 1.0
    out.append(_result("sum_j k ||X^j||_2^2 bounded as k -> 0", "study", growth, 1.1,
                       "max finer/coarser ratio"))
    gaps = rep.interp_gap
    if len(gaps) > 1:
        ratio = gaps[-2]["mean_gap_sq"] / gaps[-1]["mean_gap_sq"]
        out.append(CheckResult("interpolant gap halves with k", "study",
                               1.6 <= ratio <= 2.6, ratio, 2.6,
                               f"finest pair ratio, band [1.6, 2.6]"))
    return out, rep


def run_checks(cfg: RunConfig | None = None, ks=(0.1, 0.01), include_study=True):
    cfg = cfg or RunConfig()
    beta = cfg.nonlinearity.beta
    ks = tuple(ks) + ((cfg.k_max,) if cfg.k_max not in ks else ())
    results = []
    results += check_spectral()
    results += check_nonlinear(ks=ks, beta=beta)
    results += check_l6()
    results += check_noise()
    results += check_schemes(beta=beta)
    results += check_analysis()
    if include_study:
        results += check_study(cfg)[0]
    return results
