"""Strong-error estimation on coupled paths, rate fits, and scalar bound checks."""
from __future__ import annotations

import copy
import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .nonlinear import AllenCahn
from .noise import make_covariance, sample_path, NoisePath
from .schemes import BESolver, SchemeConfig, Trajectory, run
from .spectral import EigenBasis, a_k_symbol, make_basis, r_half_symbol


# -- per-trajectory statistics ----------------------------------------------


def strong_error(coarse, fine, stride: int):
    """``sup_n ||X^n_coarse - X^{n stride}_fine||`` (one sample per batch entry).

    Accepts trajectories or raw state arrays ``(*batch, N + 1, n_modes)``.
    """
    a = coarse.states if isinstance(coarse, Trajectory) else np.asarray(coarse)
    b = fine.states if isinstance(fine, Trajectory) else np.asarray(fine)
    N = a.shape[-2] - 1
    if stride < 1 or b.shape[-2] - 1 != stride * N:
        raise ValueError(
            f"fine trajectory has {b.shape[-2] - 1} steps, expected {stride} x {N}"
        )
    diff = a - b[..., ::stride, :]
    return np.max(np.sqrt(np.sum(diff * diff, axis=-1)), axis=-1)


def moment_report(traj: Trajectory, basis: EigenBasis, p: int = 1):
    """``(sup_j ||X^j||_1^{2p}, sum_j k ||X^j||_2^2)`` per sample."""
    lam = basis.eigenvalues
    sq = traj.states**2
    h1 = np.sum(lam * sq, axis=-1)
    h2 = np.sum(lam**2 * sq, axis=-1)
    return np.max(h1, axis=-1) ** p, traj.k * np.sum(h2, axis=-1)


def _partial_brownian(path: NoisePath, stride: int):
    """Running sums of fine increments inside each coarse step.

    ``out[..., j, o]`` is ``W(t_j + o k_fine) - W(t_j)`` for ``o = 0..stride-1``.
    """
    fine = path.fine
    blocks = fine.reshape(*fine.shape[:-2], fine.shape[-2] // stride, stride, fine.shape[-1])
    out = np.zeros_like(blocks)
    out[..., 1:, :] = np.cumsum(blocks[..., :-1, :], axis=-2)
    return out


def interp_gap_stats(
    ac: AllenCahn, traj: Trajectory, path: NoisePath, probes, seed=0, per_sample=False
):
    """Monte Carlo statistics of the gap between the two interpolants.

    ``probes`` is either a probe count (drawn independently per sample,
    uniformly on the fine noise grid of ``[0, T)``) or an integer array of
    fine-grid indices broadcastable to ``(*batch, n_probes)``.  Returns
    ``(mean ||X_hat - X_bar||^2, T * mean ||X_hat - X_bar||_1^2)``; the
    second value estimates the time integral of the H^1 gap.  With
    ``per_sample`` the probe means are returned per batch entry instead.
    """
    states = traj.states
    batch = states.shape[:-2]
    stride = int(round(traj.k / path.k_fine))
    if stride * traj.N != path.N_fine:
        raise ValueError("trajectory grid is not a coarsening of the noise grid")
    if np.isscalar(probes):
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, path.N_fine, size=batch + (int(probes),))
    else:
        idx = np.broadcast_to(np.asarray(probes, dtype=int), batch + (np.shape(probes)[-1],))
    lam = ac.basis.eigenvalues
    k = traj.k
    j = idx // stride
    off = idx - j * stride
    Xj = np.take_along_axis(states, j[..., None], axis=-2)
    partial = _partial_brownian(path, stride)
    flat = partial.reshape(*batch, -1, partial.shape[-1])
    dW = np.take_along_axis(flat, (j * stride + off)[..., None], axis=-2)
    tau = (off * path.k_fine)[..., None]
    drift = a_k_symbol(lam, k) * Xj + ac.big_fk(Xj, k)
    gap = -tau * drift + r_half_symbol(lam, k) * dW
    l2 = np.sum(gap**2, axis=-1)
    h1 = np.sum(lam * gap**2, axis=-1)
    T = traj.k * traj.N
    if per_sample:
        return l2.mean(axis=-1), T * h1.mean(axis=-1)
    return _mean(l2), T * _mean(h1)


def _mean(values) -> float:
    values = np.asarray(values, dtype=float).ravel()
    return math.fsum(values) / values.size


def _stderr(values) -> float:
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 2:
        return 0.0
    m = _mean(values)
    return math.sqrt(math.fsum((values - m) ** 2) / (values.size - 1) / values.size)


def fit_slope(ks, values):
    """Least-squares slope of ``log(values)`` against ``log(ks)``; ``None`` if degenerate."""
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    if ks.size < 2 or np.any(values <= 0) or not np.all(np.isfinite(values)):
        return None
    if np.ptp(np.log(ks)) == 0:
        return None
    slope, _ = np.polyfit(np.log(ks), np.log(values), 1)
    return float(slope)


# -- Monte Carlo rate study -------------------------------------------------


@dataclass
class LevelStats:
    N: int
    k: float
    mean_sq_sup_error: float
    stderr: float
    samples: int

    @property
    def rms(self) -> float:
        return math.sqrt(self.mean_sq_sup_error)


@dataclass
class ErrorReport:
    scheme: str
    levels: list
    fitted_slope: float | None
    be_ss_gap: list
    be_ss_gap_slope: float | None
    moment_table: list
    interp_gap: list
    reference: dict
    config_hash: str
    seeds: list
    samples: int
    degenerate: bool = False
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def write(self, out_dir, stem="convergence") -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        json_path = out / f"{stem}.json"
        json_path.write_text(self.to_json())
        csv_path = out / f"{stem}_levels.csv"
        with open(csv_path, "w", newline="") as fh:
            fh.write(f"# config_hash={self.config_hash} seeds={' '.join(map(str, self.seeds))}\n")
            w = csv.writer(fh)
            w.writerow(["k", "mean_sq_sup_error", "stderr", "samples"])
            for lv in self.levels:
                w.writerow([repr(lv.k), repr(lv.mean_sq_sup_error), repr(lv.stderr), lv.samples])
        return [json_path, csv_path]


def _chunk_worker(args):
    cfg_dict, sample_ids = args
    return _run_chunk(RunConfig.from_dict(cfg_dict), sample_ids)


def build_problem(cfg: RunConfig):
    """Basis, nonlinearity, covariance and initial value described by ``cfg``."""
    d = cfg.domain
    basis = make_basis(d.n_modes, d.L, d.kappa, d.padding)
    ac = AllenCahn(basis, cfg.nonlinearity.beta)
    cov = make_covariance(
        cfg.noise.gamma, cfg.noise.mu, basis, allow_inadmissible=cfg.noise.allow_inadmissible
    )
    X0 = basis.zeros()
    c = np.asarray(cfg.initial.coefficients, dtype=float)
    X0[: c.size] = c
    return basis, ac, cov, X0


def _run_chunk(cfg: RunConfig, sample_ids):
    basis, ac, cov, X0 = build_problem(cfg)
    T, N_ref = cfg.time.T, cfg.time.N_ref
    N_fine = 2 * N_ref if cfg.study.reference_check else N_ref
    path = sample_path(cov, T, N_fine, cfg.noise.seed, samples=list(sample_ids))
    solver = BESolver(cfg.be_solver.tolerance, cfg.be_solver.max_iter)
    beta = cfg.nonlinearity.beta

    def traj(N, scheme):
        return run(ac, X0, path.coarsen(N_fine // N), SchemeConfig(T, N, beta, scheme, solver))

    ref = traj(N_ref, "split_step")
    ref2 = traj(N_fine, "split_step") if cfg.study.reference_check else None
    out = {"err": [], "err2": [], "err_ss": [], "err_be": [], "gap": [], "sup_h1": [],
           "sum_h2": [], "ig": [], "ig1": [], "be_iter": []}
    scheme = cfg.scheme_name
    for level, N in enumerate(cfg.time.ladder):
        ss = traj(N, "split_step")
        be = traj(N, "backward_euler")
        test = {"split_step": ss, "backward_euler": be}.get(scheme) or traj(N, scheme)
        out["err"].append(strong_error(test, ref, N_ref // N) ** 2)
        if ref2 is not None:
            out["err2"].append(strong_error(test, ref2, N_fine // N) ** 2)
        out["err_ss"].append(strong_error(ss, ref, N_ref // N) ** 2)
        out["err_be"].append(strong_error(be, ref, N_ref // N) ** 2)
        out["gap"].append(strong_error(be, ss, 1) ** 2)
        sup_h1, sum_h2 = moment_report(test, basis, 1)
        out["sup_h1"].append(sup_h1)
        out["sum_h2"].append(sum_h2)
        # probe times: one independent stream per sample, shared across levels
        idx = np.stack([
            np.random.default_rng([cfg.noise.seed, s, 0x9A9]).integers(0, N_fine, cfg.study.probes)
            for s in sample_ids
        ])
        g, g1 = interp_gap_stats(ac, ss, path, probes=idx, per_sample=True)
        out["ig"].append(g)
        out["ig1"].append(g1)
        out["be_iter"].append(int(be.diagnostics["be_iterations"].max()))
    return {key: np.asarray(v) for key, v in out.items()}


def mc_rate_study(cfg: RunConfig) -> ErrorReport:
    """Coupled-path strong-error study over the step ladder of ``cfg``.

    Every sample draws one noise path on the finest grid; the split-step
    scheme at ``N_ref`` steps on that path is the reference.  Each ladder
    level runs the scheme under test, split-step and backward Euler on the
    coarsened path.  When ``study.reference_check`` is on, the noise is drawn
    at ``2 N_ref`` and errors are also measured against a reference with
    half the step, to flag reference bias.
    """
    cfg.validate()
    M = cfg.noise.samples
    ladder = sorted(cfg.time.ladder)
    cfg_sorted = copy.deepcopy(cfg)
    cfg_sorted.time.ladder = ladder
    ids = list(range(M))
    workers = min(cfg.study.workers, M)
    if workers > 1:
        chunks = [ids[i::workers] for i in range(workers)]
        chunks = [sorted(c) for c in chunks if c]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_chunk_worker, [(cfg_sorted.to_dict(), c) for c in chunks]))
        order = np.argsort(np.concatenate(chunks))
        per = {}
        for key in parts[0]:
            if key == "be_iter":
                per[key] = np.max([p[key] for p in parts], axis=0)
            else:
                per[key] = np.concatenate([p[key] for p in parts], axis=-1)[..., order]
    else:
        per = _run_chunk(cfg_sorted, ids)

    ks = [cfg.time.T / N for N in ladder]
    levels = [
        LevelStats(N, k, _mean(per["err"][i]), _stderr(per["err"][i]), M)
        for i, (N, k) in enumerate(zip(ladder, ks))
    ]
    gaps = [
        LevelStats(N, k, _mean(per["gap"][i]), _stderr(per["gap"][i]), M)
        for i, (N, k) in enumerate(zip(ladder, ks))
    ]
    degenerate = len(ladder) < 2 or any(lv.mean_sq_sup_error <= 0 for lv in levels)
    slope = None if degenerate else fit_slope(ks, [lv.rms for lv in levels])
    gap_slope = fit_slope(ks, [g.mean_sq_sup_error for g in gaps])

    moments = [
        {"N": N, "k": k, "mean_sup_h1_sq": _mean(per["sup_h1"][i]),
         "mean_sum_k_h2_sq": _mean(per["sum_h2"][i]), "max_be_iterations": int(per["be_iter"][i])}
        for i, (N, k) in enumerate(zip(ladder, ks))
    ]
    interp = [
        {"N": N, "k": k, "mean_gap_sq": _mean(per["ig"][i]), "stderr": _stderr(per["ig"][i]),
         "h1_gap_integral": _mean(per["ig1"][i])}
        for i, (N, k) in enumerate(zip(ladder, ks))
    ]
    reference = {"N_ref": cfg.time.N_ref, "k_ref": cfg.time.T / cfg.time.N_ref}
    if cfg.study.reference_check:
        rms2 = [math.sqrt(_mean(per["err2"][i])) for i in range(len(ladder))]
        changes = [
            abs(b - lv.rms) / lv.rms if lv.rms > 0 else 0.0 for lv, b in zip(levels, rms2)
        ]
        reference.update(
            {"halved_rms": rms2, "relative_change": changes,
             "reliable": bool(all(c < 0.10 for c in changes))}
        )
    extra = {
        name: fit_slope(ks, [math.sqrt(_mean(per[key][i])) for i in range(len(ladder))])
        for name, key in (("split_step_slope", "err_ss"), ("backward_euler_slope", "err_be"))
    }
    return ErrorReport(
        scheme=cfg.scheme_name,
        levels=levels,
        fitted_slope=slope,
        be_ss_gap=gaps,
        be_ss_gap_slope=gap_slope,
        moment_table=moments,
        interp_gap=interp,
        reference=reference,
        config_hash=cfg.config_hash(),
        seeds=cfg.seeds,
        samples=M,
        degenerate=degenerate,
        extra=extra,
    )


# -- deterministic scalar bounds -------------------------------------------


def semigroup_gap_scalar(lam, k, t):
    """``e^{-lam t} - e^{-t A_k(lam)} / (1 + k lam / 2)`` (elementwise).

    Written as ``-e^{-lam t} expm1(lam t k lam g - log1p(k lam / 2))`` with
    ``g(x) = (3 + x) / (4 (1 + x/2)^2)`` to avoid cancellation for small k.
    """
    lam, k, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (lam, k, t)))
    if np.any(lam < 0) or np.any(k < 0) or np.any(t < 0):
        raise ValueError("lambda, k and t must be non-negative")
    x = k * lam
    g = (3.0 + x) / (4.0 * (1.0 + 0.5 * x) ** 2)
    expo = lam * t * x * g - np.log1p(0.5 * x)
    with np.errstate(over="ignore", invalid="ignore"):
        small = -np.exp(-lam * t) * np.expm1(np.minimum(expo, 1.0))
    # away from the cancellation regime the plain difference is exact enough
    direct = np.exp(-lam * t) - np.exp(-t * lam * (1.0 + 0.25 * x) / (1.0 + 0.5 * x) ** 2) / (1.0 + 0.5 * x)
    out = np.where(expo < 1.0, small, direct)
    return out if out.ndim else float(out)


def semigroup_bound_scan(s, r, lam_grid, k_grid, t_grid, chunk=64):
    """Max over the grids of ``|F(t)| / (k^{s/2} t^{-r/2} lam^{(s-r)/2})``."""
    if r > s:
        raise ValueError(f"need r <= s, got r={r}, s={s}")
    if not 0 <= r <= s <= 2:
        raise ValueError("need 0 <= r <= s <= 2")
    lam = np.asarray(lam_grid, dtype=float)[:, None, None]
    t = np.asarray(t_grid, dtype=float)[None, None, :]
    if np.any(lam <= 0) or np.any(t <= 0) or np.any(np.asarray(k_grid) <= 0):
        raise ValueError("grids must be positive")
    best = 0.0
    ks = np.asarray(k_grid, dtype=float)
    for i in range(0, ks.size, chunk):
        k = ks[i : i + chunk][None, :, None]
        F = np.abs(semigroup_gap_scalar(lam, k, t))
        denom = k ** (0.5 * s) * t ** (-0.5 * r) * lam ** (0.5 * (s - r))
        best = max(best, float(np.max(F / denom)))
    return best


def l6_polynomial(t, s, C=18.0):
    """``C (t^2 + t s + s^2)^2 - (t - s)^4``."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    return C * (t * t + t * s + s * s) ** 2 - (t - s) ** 4


def l6_constant_admissible(C: float) -> bool:
    return C > 2 and C * C - 17 * C - 2 >= 0


def smoothing_constant(alpha: float) -> float:
    """``sup_{x >= 0} x^alpha e^{-x}`` = ``(alpha / e)^alpha`` (1 for alpha = 0)."""
    return 1.0 if alpha == 0 else (alpha / math.e) ** alpha
