"""Dirichlet-Laplacian eigenbasis on (0, L) and the diagonal operator family.

Fields are plain numpy arrays of sine coefficients ``<v, e_m>``; the last
axis runs over modes ``m = 1..n_modes`` and any leading axes are batch axes
(independent samples).  Every linear operator used by the time steppers is
diagonal in this basis, so it acts by multiplying coefficients with a symbol
evaluated at the eigenvalues.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft


@dataclass(frozen=True)
class EigenBasis:
    """Eigenpairs of ``A = -kappa d^2/dxi^2`` on ``(0, L)`` with Dirichlet BCs.

    ``lambda_m = kappa (m pi / L)^2`` and ``e_m(xi) = sqrt(2/L) sin(m pi xi / L)``.
    ``padding`` fixes the collocation grid used for pointwise (Nemytskii)
    maps: ``M = padding * n_modes`` interior nodes.
    """

    n_modes: int
    L: float = 1.0
    kappa: float = 1.0
    padding: int = 2
    eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError(f"n_modes must be a positive integer, got {self.n_modes}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if int(self.padding) != self.padding or self.padding < 2:
            raise ValueError(f"padding must be an integer >= 2, got {self.padding}")
        m = np.arange(1, self.n_modes + 1, dtype=float)
        lam = self.kappa * (m * np.pi / self.L) ** 2
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def n_nodes(self) -> int:
        return self.padding * self.n_modes

    @property
    def nodes(self) -> np.ndarray:
        M = self.n_nodes
        return np.arange(1, M + 1) * self.L / (M + 1)

    @property
    def cell(self) -> float:
        """Quadrature weight of the collocation grid."""
        return self.L / (self.n_nodes + 1)

    def functions(self, xi=None) -> np.ndarray:
        """Basis functions sampled at ``xi`` (default: nodes), shape (n_modes, len(xi))."""
        xi = self.nodes if xi is None else np.asarray(xi, dtype=float)
        m = np.arange(1, self.n_modes + 1)[:, None]
        return np.sqrt(2.0 / self.L) * np.sin(m * np.pi * xi[None, :] / self.L)

    def zeros(self, *batch: int) -> np.ndarray:
        return np.zeros((*batch, self.n_modes))

    def mode(self, m: int, amplitude: float = 1.0) -> np.ndarray:
        """Coefficient vector of ``amplitude * e_m`` (1-based ``m``)."""
        if not 1 <= m <= self.n_modes:
            raise ValueError(f"mode {m} outside 1..{self.n_modes}")
        v = self.zeros()
        v[m - 1] = amplitude
        return v

    # -- transforms -------------------------------------------------------

    def to_nodal(self, v) -> np.ndarray:
        """Evaluate a coefficient array on the collocation grid (DST-I)."""
        v = self._check_coeffs(v)
        padded = np.zeros((*v.shape[:-1], self.n_nodes))
        padded[..., : self.n_modes] = v
        # scipy's unnormalised DST-I carries a factor 2
        return (0.5 * np.sqrt(2.0 / self.L)) * scipy.fft.dst(padded, type=1, axis=-1)

    def to_spectral(self, u) -> np.ndarray:
        """Discrete L2 projection of nodal values onto ``e_1..e_n_modes``."""
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.n_nodes:
            raise ValueError(
                f"nodal field has {u.shape[-1]} values, grid has {self.n_nodes} nodes"
            )
        c = scipy.fft.dst(u, type=1, axis=-1)[..., : self.n_modes]
        return (0.5 * self.cell * np.sqrt(2.0 / self.L)) * c

    # -- diagonal operators and norms ---------------------------------------

    def apply(self, v, symbol: "Symbol") -> np.ndarray:
        """Multiply coefficients by ``symbol`` evaluated at the eigenvalues."""
        return self._check_coeffs(v) * symbol(self.eigenvalues)

    def norm_s(self, v, s: float = 0.0):
        """``||v||_s = (sum_m lambda_m^s <v, e_m>^2)^(1/2)``, reduced over the last axis."""
        v = np.asarray(v, dtype=float)
        return np.sqrt(np.sum(self.eigenvalues**s * v**2, axis=-1))

    def inner_s(self, v, w, s: float = 0.0):
        return np.sum(self.eigenvalues**s * np.asarray(v) * np.asarray(w), axis=-1)

    def _check_coeffs(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.n_modes:
            raise ValueError(f"field has {v.shape[-1]} modes, basis has {self.n_modes}")
        return v


def make_basis(n_modes: int, L: float = 1.0, kappa: float = 1.0, padding: int = 2) -> EigenBasis:
    return EigenBasis(n_modes, L, kappa, padding)


# -- symbols -----------------------------------------------------------------


def _nonneg(name, value):
    if value < 0:
        raise ValueError(f"{name} must be non-negative, got {value}")
    return float(value)


def r_half_symbol(lam, k):
    """Symbol of ``R_{k/2} = (I + k/2 A)^-1``."""
    return 1.0 / (1.0 + 0.5 * k * np.asarray(lam, dtype=float))


def m_symbol(lam, k):
    return 1.0 + 0.25 * k * np.asarray(lam, dtype=float)


def a_k_symbol(lam, k):
    """Symbol of the bounded operator ``A_k = A M_k R_{k/2}^2``."""
    lam = np.asarray(lam, dtype=float)
    return lam * m_symbol(lam, k) * r_half_symbol(lam, k) ** 2


@dataclass(frozen=True)
class Symbol:
    """A spectral multiplier ``lambda -> value`` with a readable name."""

    name: str
    params: tuple
    fn: object = field(repr=False, compare=False)

    def __call__(self, lam) -> np.ndarray:
        return self.fn(np.asarray(lam, dtype=float))


def laplacian() -> Symbol:
    return Symbol("A", (), lambda lam: lam)


def frac_power(s: float) -> Symbol:
    """``A^{s/2}``, so that ``||A^{s/2} v|| = ||v||_s``."""
    return Symbol("frac_power", (s,), lambda lam: lam ** (0.5 * s))


def r_half(k: float) -> Symbol:
    k = _nonneg("k", k)
    return Symbol("R_half", (k,), lambda lam: r_half_symbol(lam, k))


def m_k(k: float) -> Symbol:
    k = _nonneg("k", k)
    return Symbol("M", (k,), lambda lam: m_symbol(lam, k))


def a_k(k: float) -> Symbol:
    k = _nonneg("k", k)
    return Symbol("A_k", (k,), lambda lam: a_k_symbol(lam, k))


def semigroup(t: float) -> Symbol:
    t = _nonneg("t", t)
    return Symbol("E", (t,), lambda lam: np.exp(-lam * t))


def perturbed_semigroup(k: float, t: float) -> Symbol:
    """``E_k(t) = exp(-t A_k)``; diagnostics only, the schemes never use it."""
    k = _nonneg("k", k)
    t = _nonneg("t", t)
    return Symbol("E_k", (k, t), lambda lam: np.exp(-t * a_k_symbol(lam, k)))


def compose(*symbols: Symbol) -> Symbol:
    name = "*".join(s.name for s in symbols)

    def fn(lam):
        out = np.ones_like(lam)
        for s in symbols:
            out = out * s(lam)
        return out

    return Symbol(name, tuple(s.params for s in symbols), fn)
