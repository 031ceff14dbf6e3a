"""Allen-Cahn drift ``f(u) = u^3 - beta^2 u`` and its resolvent family.

``J_k = (I + k f)^-1`` is pointwise: at every collocation node we solve the
monotone cubic ``t + k (t^3 - beta^2 t) = s``.  The Nemytskii maps are
evaluated on the padded grid of the basis and projected back onto the
retained modes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import EigenBasis, r_half_symbol


class ConvergenceError(RuntimeError):
    """A nonlinear solve exhausted its iteration budget."""


def f_pointwise(u, beta: float):
    u = np.asarray(u, dtype=float)
    return u * (u * u - beta * beta)


def f_prime(u, beta: float):
    u = np.asarray(u, dtype=float)
    return 3.0 * u * u - beta * beta


def lipschitz_constant(k: float, beta: float) -> float:
    """Lipschitz constant ``1/sqrt(1 - 2 k beta^2)`` of ``J_k`` in H and H^1."""
    return 1.0 / np.sqrt(1.0 - 2.0 * k * beta * beta)


def one_sided_constant(k: float, beta: float) -> float:
    """One-sided Lipschitz / dissipativity constant of ``f_k`` and ``F_k``."""
    return beta * beta / (1.0 - 2.0 * k * beta * beta)


def check_step(k: float, beta: float) -> None:
    if k < 0:
        raise ValueError(f"step size must be non-negative, got {k}")
    if not 2.0 * k * beta * beta < 1.0:
        raise ValueError(f"step k={k} violates 2 k beta^2 < 1 for beta={beta}")


def jk_scalar(s, k: float, beta: float, *, rtol=1e-12, atol=1e-13, max_iter=200):
    """Unique real root ``t`` of ``t + k (t^3 - beta^2 t) = s`` (elementwise).

    Safeguarded Newton: iterates stay inside a bracket that is shrunk with
    the sign of the residual; a Newton step leaving the bracket is replaced
    by bisection.  The starting bracket ``[0, s / (1 - k beta^2)]`` always
    contains the root because ``g' >= 1 - k beta^2 > 0``.
    """
    if k < 0:
        raise ValueError(f"step size must be non-negative, got {k}")
    if not k * beta * beta < 1.0:
        raise ValueError(f"k beta^2 = {k * beta * beta} >= 1: cubic is not monotone")
    s = np.asarray(s, dtype=float)
    if k == 0.0:
        return s.copy()

    c1 = 1.0 - k * beta * beta
    far = s / c1
    lo = np.minimum(0.0, far)
    hi = np.maximum(0.0, far)
    t = s.copy()
    tol = atol + rtol * np.abs(s)
    for _ in range(max_iter):
        g = c1 * t + k * t**3 - s
        done = np.abs(g) <= tol
        if done.all():
            return t
        hi = np.where(g > 0, t, hi)
        lo = np.where(g < 0, t, lo)
        newton = t - g / (c1 + 3.0 * k * t * t)
        inside = (newton > lo) & (newton < hi)
        t = np.where(done, t, np.where(inside, newton, 0.5 * (lo + hi)))
    g = c1 * t + k * t**3 - s
    bad = ~(np.abs(g) <= tol)
    raise ConvergenceError(
        f"cubic resolvent failed at {int(bad.sum())} points "
        f"(max residual {np.nanmax(np.abs(g)):.3e}, k={k}, beta={beta})"
    )


@dataclass(frozen=True)
class AllenCahn:
    """The nonlinearity bound to a spectral basis.

    All maps take and return coefficient arrays (batch axes allowed).
    ``k_max``, when given, is the admissible step ceiling ``k_0``.
    """

    basis: EigenBasis
    beta: float = 1.0
    k_max: float | None = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if self.k_max is not None:
            check_step(self.k_max, self.beta)

    def _check(self, k):
        check_step(k, self.beta)
        if self.k_max is not None and k > self.k_max:
            raise ValueError(f"step k={k} exceeds k_max={self.k_max}")

    def lipschitz_constant(self, k: float) -> float:
        return lipschitz_constant(k, self.beta)

    def one_sided_constant(self, k: float) -> float:
        return one_sided_constant(k, self.beta)

    def f(self, v):
        """Galerkin projection of ``f`` evaluated at the nodes of ``v``."""
        b = self.basis
        return b.to_spectral(f_pointwise(b.to_nodal(v), self.beta))

    def jk(self, v, k: float):
        self._check(k)
        b = self.basis
        return b.to_spectral(jk_scalar(b.to_nodal(v), k, self.beta))

    def fk(self, v, k: float):
        """Yosida approximation ``f_k = f o J_k``."""
        self._check(k)
        b = self.basis
        z = jk_scalar(b.to_nodal(v), k, self.beta)
        return b.to_spectral(f_pointwise(z, self.beta))

    def big_fk(self, v, k: float):
        """Smoothed map ``F_k(x) = R_{k/2} f_k(R_{k/2} x)``."""
        r = r_half_symbol(self.basis.eigenvalues, k)
        return r * self.fk(r * np.asarray(v, dtype=float), k)

    def yosida_decomposition(self, v, k: float):
        """Both sides of ``x - J_k(R x) = (k/2) A R x + k f_k(R x)``.

        Returns ``(lhs, rhs)``; they agree up to the projection round-off.
        """
        self._check(k)
        lam = self.basis.eigenvalues
        rx = r_half_symbol(lam, k) * np.asarray(v, dtype=float)
        lhs = v - self.jk(rx, k)
        rhs = 0.5 * k * lam * rx + k * self.fk(rx, k)
        return lhs, rhs
