"""Q-Wiener increments in the eigenbasis, with exact coupled coarsening.

Q is diagonal in the Laplacian eigenbasis, ``q_m = mu * lambda_m^(-gamma)``.

Random numbers come from Philox4x32-10 generators keyed by
``SeedSequence(seed, spawn_key=(sample, mode))``: every (sample, mode) pair
owns an independent counter-based stream, so a trajectory does not depend
on how many samples or modes are generated alongside it.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import EigenBasis, r_half_symbol

ADMISSIBLE_GAMMA = 1.6
_DUMP_MAGIC = b"ACNOISE1"


@dataclass(frozen=True)
class CovarianceSpec:
    gamma: float
    mu: float
    q: np.ndarray = field(repr=False)
    hs_a_half_sq: float  # ||A^{1/2} Q^{1/2}||_HS^2
    trace: float  # ||Q^{1/2}||_HS^2

    @property
    def hs_a_half(self) -> float:
        return float(np.sqrt(self.hs_a_half_sq))

    def hs_r_half_sq(self, basis: EigenBasis, k: float) -> float:
        """``||R_{k/2} Q^{1/2}||_HS^2``."""
        return float(np.sum(self.q * r_half_symbol(basis.eigenvalues, k) ** 2))


def make_covariance(
    gamma: float, mu: float, basis: EigenBasis, *, allow_inadmissible: bool = False
) -> CovarianceSpec:
    """Diagonal covariance with ``q_m = mu lambda_m^-gamma``.

    ``gamma < 1.6`` (or ``mu == 0``) is refused unless ``allow_inadmissible``
    is set: below ``gamma = 3/2`` the continuum ``||A^{1/2}Q^{1/2}||_HS`` is
    infinite in one dimension and only the truncated sum is reported.
    """
    if mu < 0 or (mu == 0 and not allow_inadmissible):
        raise ValueError(f"mu must be positive, got {mu}")
    if gamma < ADMISSIBLE_GAMMA and not allow_inadmissible:
        raise ValueError(
            f"gamma={gamma} < {ADMISSIBLE_GAMMA}: ||A^1/2 Q^1/2||_HS is not finite "
            "in the continuum; pass allow_inadmissible=True to run anyway"
        )
    lam = basis.eigenvalues
    q = mu * lam ** (-float(gamma))
    q.setflags(write=False)
    return CovarianceSpec(
        gamma=float(gamma),
        mu=float(mu),
        q=q,
        hs_a_half_sq=float(np.sum(lam * q)),
        trace=float(np.sum(q)),
    )


def _normals(seed: int, sample: int, mode: int, n: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(sample, mode))
    return np.random.Generator(np.random.Philox(ss)).standard_normal(n)


@dataclass(frozen=True)
class NoisePath:
    """Brownian increments on a uniform grid, optionally viewed at a coarser level.

    ``fine`` holds the generated increments, shape ``(*batch, N_fine, n_modes)``.
    A coarsened path shares ``fine`` and sums blocks of ``factor`` rows from
    left to right on access, so any sequence of coarsenings with the same
    total factor yields bit-identical increments.
    """

    fine: np.ndarray = field(repr=False)
    k_fine: float
    seed: int
    samples: tuple = ()
    factor: int = 1

    @property
    def n_modes(self) -> int:
        return self.fine.shape[-1]

    @property
    def N_fine(self) -> int:
        return self.fine.shape[-2]

    @property
    def N(self) -> int:
        return self.N_fine // self.factor

    @property
    def k(self) -> float:
        return self.k_fine * self.factor

    @property
    def T(self) -> float:
        return self.k_fine * self.N_fine

    @property
    def increments(self) -> np.ndarray:
        if self.factor == 1:
            return self.fine
        f = self.factor
        blocks = self.fine.reshape(*self.fine.shape[:-2], self.N, f, self.n_modes)
        acc = blocks[..., 0, :].copy()
        for i in range(1, f):
            acc += blocks[..., i, :]
        return acc

    def coarsen(self, factor: int) -> "NoisePath":
        return coarsen(self, factor)

    def brownian_at(self, n_fine: int) -> np.ndarray:
        """``W(t) - W(0)`` at fine-grid index ``n_fine`` (left-to-right sum)."""
        if not 0 <= n_fine <= self.N_fine:
            raise ValueError(f"fine index {n_fine} outside 0..{self.N_fine}")
        acc = np.zeros(self.fine.shape[:-2] + (self.n_modes,))
        for i in range(n_fine):
            acc += self.fine[..., i, :]
        return acc

    def increment_between(self, n0: int, n1: int) -> np.ndarray:
        """``W(t_{n1}) - W(t_{n0})`` for fine-grid indices ``n0 <= n1``."""
        if not 0 <= n0 <= n1 <= self.N_fine:
            raise ValueError(f"bad fine index range {n0}..{n1}")
        acc = np.zeros(self.fine.shape[:-2] + (self.n_modes,))
        for i in range(n0, n1):
            acc += self.fine[..., i, :]
        return acc

    def dump(self, path) -> None:
        """Write the increments at this level as a little-endian binary file.

        Header: magic, n_modes (u64), N (u64), k (f64), seed (u64), n_batch (u64);
        then float64 values row-major with shape (n_batch, N, n_modes).
        """
        inc = np.ascontiguousarray(self.increments, dtype="<f8")
        n_batch = int(np.prod(inc.shape[:-2], dtype=int))
        header = _DUMP_MAGIC + struct.pack(
            "<QQdQQ", self.n_modes, self.N, self.k, self.seed & (2**64 - 1), n_batch
        )
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(inc.tobytes(order="C"))

    @classmethod
    def load(cls, path) -> "NoisePath":
        raw = Path(path).read_bytes()
        if raw[:8] != _DUMP_MAGIC:
            raise ValueError(f"{path}: not a noise path dump")
        n_modes, N, k, seed, n_batch = struct.unpack_from("<QQdQQ", raw, 8)
        body = np.frombuffer(raw, dtype="<f8", offset=8 + struct.calcsize("<QQdQQ"))
        if body.size != n_batch * N * n_modes:
            raise ValueError(f"{path}: payload size does not match header")
        inc = body.reshape(n_batch, N, n_modes).astype(float)
        if n_batch == 1:
            inc = inc[0]
        return cls(fine=inc, k_fine=k, seed=seed, samples=tuple(range(n_batch)))


def sample_path(
    cov: CovarianceSpec, T: float, N_fine: int, seed: int, samples=None
) -> NoisePath:
    """Generate increments ``sqrt(k q_m) xi_{j,m}`` on ``N_fine`` uniform steps.

    ``samples=None`` gives one path of shape ``(N_fine, n_modes)`` (sample 0);
    an int or a sequence of sample indices gives a batch with a leading axis.
    """
    if N_fine < 1 or int(N_fine) != N_fine:
        raise ValueError(f"N_fine must be a positive integer, got {N_fine}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    k = T / N_fine
    single = samples is None
    idx = (0,) if single else tuple(range(samples)) if isinstance(samples, int) else tuple(samples)
    n_modes = cov.q.size
    scale = np.sqrt(k * cov.q)
    inc = np.empty((len(idx), N_fine, n_modes))
    for a, s in enumerate(idx):
        for m in range(n_modes):
            inc[a, :, m] = scale[m] * _normals(seed, s, m, N_fine)
    if single:
        inc = inc[0]
    return NoisePath(fine=inc, k_fine=k, seed=int(seed), samples=idx)


def coarsen(path: NoisePath, factor: int) -> NoisePath:
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"factor must be a positive integer, got {factor}")
    if path.N % factor:
        raise ValueError(f"factor {factor} does not divide N={path.N}")
    return NoisePath(
        fine=path.fine,
        k_fine=path.k_fine,
        seed=path.seed,
        samples=path.samples,
        factor=path.factor * factor,
    )


def apply_r_half_to_increment(dW, k: float, basis: EigenBasis) -> np.ndarray:
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    return np.asarray(dW, dtype=float) * r_half_symbol(basis.eigenvalues, k)


def operator_bound_q_a_r(cov: CovarianceSpec, basis: EigenBasis, k: float) -> float:
    """``||Q^{1/2} A^{1/2} R_{k/2}||`` in the diagonal model (max over modes)."""
    lam = basis.eigenvalues
    return float(np.max(np.sqrt(cov.q * lam) * r_half_symbol(lam, k)))
