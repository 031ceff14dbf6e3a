"""Time steppers: split-step, its Euler-Maruyama form, and backward Euler.

States are coefficient arrays ``(*batch, n_modes)``; a batch axis lets many
Monte Carlo samples advance in lock-step.  Trajectories store every state,
shape ``(*batch, N + 1, n_modes)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nonlinear import AllenCahn, ConvergenceError, check_step, f_pointwise, f_prime
from .noise import NoisePath
from .spectral import a_k_symbol, r_half_symbol

SCHEMES = ("split_step", "em_perturbed", "backward_euler")


class StepFailure(RuntimeError):
    """A time step could not be completed; carries the step index."""

    def __init__(self, message, step=None, diagnostics=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class BESolver:
    tolerance: float = 1e-10
    max_iter: int = 200


@dataclass(frozen=True)
class SchemeConfig:
    T: float
    N: int
    beta: float = 1.0
    scheme: str = "split_step"
    be_solver: BESolver = field(default_factory=BESolver)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.N < 1 or int(self.N) != self.N:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        check_step(self.k, self.beta)

    @property
    def k(self) -> float:
        return self.T / self.N


# -- single steps ------------------------------------------------------------


def split_step(ac: AllenCahn, X, dW, k: float):
    """``Y = R X; Z = J_k Y; X+ = R (Z + dW)`` with ``R = (I + k/2 A)^-1``."""
    r = r_half_symbol(ac.basis.eigenvalues, k)
    z = ac.jk(r * X, k)
    return r * (z + dW)


def em_perturbed_step(ac: AllenCahn, X, dW, k: float):
    """Explicit Euler step for the perturbed equation: ``X - k A_k X - k F_k(X) + R dW``."""
    lam = ac.basis.eigenvalues
    X = np.asarray(X, dtype=float)
    return X - k * a_k_symbol(lam, k) * X - k * ac.big_fk(X, k) + r_half_symbol(lam, k) * dW


def split_step_be_form_residual(ac: AllenCahn, X_prev, X_next, dW, k: float):
    """Residual of the split-step recursion rearranged in backward-Euler form.

    ``X^j - X^{j-1} + k A X^j - k/2 A (X^j - X^{j-1} + k/2 A R X^{j-1})
    + k f_k(R X^{j-1}) - dW``; zero up to round-off for split-step iterates.
    """
    lam = ac.basis.eigenvalues
    r = r_half_symbol(lam, k)
    lhs = (
        X_next
        - X_prev
        + k * lam * X_next
        - 0.5 * k * lam * (X_next - X_prev + 0.5 * k * lam * r * X_prev)
        + k * ac.fk(r * X_prev, k)
    )
    return lhs - dW


def be_residual(ac: AllenCahn, X, rhs, k: float, fX=None):
    lam = ac.basis.eigenvalues
    fX = ac.f(X) if fX is None else fX
    return (1.0 + k * lam) * X + k * fX - rhs


def backward_euler_step(ac: AllenCahn, X_prev, dW, k: float, solver: BESolver = BESolver()):
    """Solve ``X + k A X + k f(X) = X_prev + dW`` by fixed-point iteration.

    ``X <- (I + k A)^-1 (rhs - k f(X))`` starting from ``X_prev``.  Each sample
    escalates on its own: if its residual shrinks by less than 10% in a sweep
    it is under-relaxed with weight 0.5; if the residual grows, or stalls
    again after relaxation, it continues from its best iterate with the
    shifted sweep
    ``X <- (I + k A + k s)^-1 (rhs - k f(X) + k s X)``, ``s = max f'`` on the
    nodes, which contracts with factor ``k (s + beta^2) / (1 + k s) < 1``.
    Returns ``(X, iterations)``; the residual norm of every sample is below
    ``solver.tolerance`` on return.
    """
    check_step(k, ac.beta)
    b = ac.basis
    lam = b.eigenvalues
    rhs = np.asarray(X_prev, dtype=float) + dW
    X = np.broadcast_to(np.asarray(X_prev, dtype=float), rhs.shape).copy()
    inv = 1.0 / (1.0 + k * lam)
    batch = X.shape[:-1]
    omega = np.ones(batch + (1,))
    shifted = np.zeros(batch, dtype=bool)
    best_X, best = X.copy(), np.full(batch, np.inf)
    prev = None
    for it in range(solver.max_iter + 1):
        u = b.to_nodal(X)
        fX = b.to_spectral(f_pointwise(u, ac.beta))
        with np.errstate(over="ignore", invalid="ignore"):
            res = np.linalg.norm((1.0 + k * lam) * X + k * fX - rhs, axis=-1)
        res = np.where(np.isfinite(res), res, np.inf)
        if np.all(res <= solver.tolerance):
            return X, it
        if it == solver.max_iter:
            break
        improved = res < best
        best = np.where(improved, res, best)
        best_X = np.where(improved[..., None], X, best_X)
        if prev is not None:
            grew = (res > prev) & ~shifted
            stalled = (res > 0.9 * prev) & (res > solver.tolerance) & ~grew & ~shifted
            shifted |= stalled & (omega[..., 0] < 1.0)
            omega = np.where(stalled[..., None], 0.5, omega)
            if np.any(grew):
                shifted |= grew
                X = np.where(grew[..., None], best_X, X)
                u = b.to_nodal(X)
                fX = b.to_spectral(f_pointwise(u, ac.beta))
                res = np.where(grew, best, res)
            omega = np.where(shifted[..., None], 1.0, omega)
        prev = res
        plain = inv * (rhs - k * fX)
        X_new = X + omega * (plain - X)
        if np.any(shifted):
            s = np.maximum(f_prime(u, ac.beta).max(axis=-1), 0.0)[..., None]
            X_shift = (rhs - k * fX + k * s * X) / (1.0 + k * lam + k * s)
            X_new = np.where(shifted[..., None], X_shift, X_new)
        X = X_new
    if not np.all(np.isfinite(res)):
        raise StepFailure("non-finite residual in backward Euler solve",
                          diagnostics={"iterations": solver.max_iter})
    raise StepFailure(
        f"backward Euler solve did not converge in {solver.max_iter} iterations",
        diagnostics={"residual": float(np.max(res)), "iterations": solver.max_iter},
    )


# -- trajectories ------------------------------------------------------------


@dataclass
class Trajectory:
    states: np.ndarray  # (*batch, N + 1, n_modes)
    k: float
    scheme: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.states.shape[-2] - 1

    @property
    def times(self) -> np.ndarray:
        return self.k * np.arange(self.N + 1)

    def __len__(self):
        return self.N + 1


def run(ac: AllenCahn, X0, path: NoisePath, cfg: SchemeConfig) -> Trajectory:
    """Advance ``X0`` over ``path`` with the scheme named in ``cfg``.

    The path level must match ``cfg.N``; ``X0`` broadcasts against the
    path's batch axes.
    """
    if path.N != cfg.N:
        raise ValueError(f"noise path has {path.N} steps, config asks for {cfg.N}")
    if not np.isclose(path.k, cfg.k, rtol=1e-12, atol=0):
        raise ValueError(f"noise step {path.k} does not match k={cfg.k}")
    check_step(cfg.k, ac.beta)
    dW = path.increments
    batch = dW.shape[:-2]
    k = cfg.k
    lam = ac.basis.eigenvalues
    states = np.empty(batch + (cfg.N + 1, ac.basis.n_modes))
    states[..., 0, :] = np.broadcast_to(np.asarray(X0, dtype=float), batch + (ac.basis.n_modes,))
    iters = np.zeros(cfg.N, dtype=int) if cfg.scheme == "backward_euler" else None
    X = states[..., 0, :]
    for j in range(cfg.N):
        try:
            if cfg.scheme == "split_step":
                X = split_step(ac, X, dW[..., j, :], k)
            elif cfg.scheme == "em_perturbed":
                X = em_perturbed_step(ac, X, dW[..., j, :], k)
            else:
                X, iters[j] = backward_euler_step(ac, X, dW[..., j, :], k, cfg.be_solver)
        except StepFailure as exc:
            raise StepFailure(str(exc), step=j, diagnostics=exc.diagnostics) from exc
        except ConvergenceError as exc:
            raise StepFailure(str(exc), step=j) from exc
        states[..., j + 1, :] = X
    diag = {
        "h1_norm": np.sqrt(np.sum(lam * states**2, axis=-1)),
        "h2_norm": np.sqrt(np.sum(lam**2 * states**2, axis=-1)),
    }
    if iters is not None:
        diag["be_iterations"] = iters
    return Trajectory(states=states, k=k, scheme=cfg.scheme, diagnostics=diag)


# -- interpolants ------------------------------------------------------------


def _locate(traj: Trajectory, t: float):
    T = traj.k * traj.N
    if not -1e-12 * T <= t <= T * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {T}]")
    j = min(int(np.floor(t / traj.k + 1e-9)), traj.N)
    return j


def interp_bar(traj: Trajectory, t: float):
    """Piecewise constant interpolant: ``X^j`` on ``[t_j, t_{j+1})``."""
    return traj.states[..., _locate(traj, t), :]


def interp_hat(ac: AllenCahn, traj: Trajectory, path: NoisePath, t: float):
    """Continuous stochastic interpolant on ``[t_j, t_{j+1})``.

    ``X^j - (t - t_j) (A_k X^j + F_k(X^j)) + R_{k/2} (W(t) - W(t_j))``.
    ``t`` must be a node of the path's finest grid so that ``W(t)`` is known.
    """
    j = _locate(traj, t)
    n_t = int(round(t / path.k_fine))
    if abs(n_t * path.k_fine - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"t={t} is not a node of the noise grid (k_fine={path.k_fine})")
    stride = int(round(traj.k / path.k_fine))
    if abs(stride * path.k_fine - traj.k) > 1e-12 * traj.k:
        raise ValueError("trajectory step is not a multiple of the noise grid step")
    Xj = traj.states[..., j, :]
    if n_t == j * stride:
        return Xj.copy()
    lam = ac.basis.eigenvalues
    k = traj.k
    tau = t - j * k
    dW = path.increment_between(j * stride, n_t)
    return Xj - tau * (a_k_symbol(lam, k) * Xj + ac.big_fk(Xj, k)) + r_half_symbol(lam, k) * dW
