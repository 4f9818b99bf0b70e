"""Dense complex linear algebra, seeded RNG streams, and the correlated
quadrature-increment sampler.

Everything here operates on small dense complex matrices (``numpy.ndarray``
of ``complex128``); system and ancilla dimensions stay well below ~100, so
no sparse or structured storage is used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

HERMITICITY_TOL = 1e-10
SPECTRAL_TOL = 1e-9


def as_cmatrix(entries) -> np.ndarray:
    """Coerce to a 2-D complex128 array and reject non-finite entries."""
    m = np.asarray(entries, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose (of the last two axes, so batches work too)."""
    return np.conjugate(np.swapaxes(a, -1, -2))


def require_square(a: np.ndarray, name: str = "matrix") -> None:
    if a.shape[-1] != a.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit dimension check."""
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(
            f"dimension mismatch in matmul: {a.shape} @ {b.shape}")
    return a @ b


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """[a, b] = ab - ba for square matrices of equal size."""
    require_square(a, "a")
    require_square(b, "b")
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(
            f"dimension mismatch in commutator: {a.shape} vs {b.shape}")
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """{a, b} = ab + ba for square matrices of equal size."""
    require_square(a, "a")
    require_square(b, "b")
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(
            f"dimension mismatch in anticommutator: {a.shape} vs {b.shape}")
    return a @ b + b @ a


def hermiticity_defect(a: np.ndarray) -> float:
    """max |a - a†| over entries; 0 for exactly Hermitian input."""
    return float(np.max(np.abs(a - dagger(a))))


def is_hermitian(a: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    return a.shape[-1] == a.shape[-2] and hermiticity_defect(a) <= tol


def hermitize(a: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part, (a + a†)/2."""
    return 0.5 * (a + dagger(a))


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring Pade via scipy)."""
    a = np.asarray(a, dtype=np.complex128)
    require_square(a)
    return scipy.linalg.expm(a)


def eigh(a: np.ndarray, tol: float = HERMITICITY_TOL):
    """Spectral decomposition of a Hermitian matrix.

    Returns
    -------
    (eigenvalues, eigenvectors)
        Eigenvalues ascending as a real array; eigenvector ``i`` is column
        ``i`` of the returned unitary, so ``a = V diag(w) V†``.

    Raises
    ------
    ValueError
        If ``a`` is not Hermitian within ``tol``.
    """
    a = np.asarray(a, dtype=np.complex128)
    require_square(a)
    defect = hermiticity_defect(a)
    if defect > tol:
        raise ValueError(
            f"eigh requires a Hermitian matrix (defect {defect:.3e} > {tol:.0e})")
    w, v = np.linalg.eigh(a)
    return w, v


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(1/2) tr |rho - sigma| for Hermitian matrices."""
    w = np.linalg.eigvalsh(hermitize(rho - sigma))
    return 0.5 * float(np.sum(np.abs(w)))


def trace_distance_batch(rho: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Trace distance over a stacked batch of same-size Hermitian matrices."""
    diff = hermitize(rho - sigma)
    if diff.shape[-1] == 2:
        # analytic 2x2 eigenvalues: lam = (t +- sqrt(t^2 - 4 det)) / 2
        t = np.real(diff[..., 0, 0] + diff[..., 1, 1])
        det = np.real(diff[..., 0, 0] * diff[..., 1, 1]
                      - diff[..., 0, 1] * diff[..., 1, 0])
        disc = np.sqrt(np.maximum(t * t - 4.0 * det, 0.0))
        return 0.5 * (np.abs(0.5 * (t + disc)) + np.abs(0.5 * (t - disc)))
    w = np.linalg.eigvalsh(diff)
    return 0.5 * np.sum(np.abs(w), axis=-1)


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    A stream is identified by ``(master_seed, stream_index)``.  The child
    seed is derived with numpy's ``SeedSequence`` spawn-key mixing, which
    avalanches the index so distinct indices give statistically independent
    streams and any trajectory can be reseeded in isolation.
    """

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(
            self.master_seed, spawn_key=(self.stream_index,))
        return np.random.default_rng(ss)

    def substream(self, index: int) -> "RngStream":
        """Stream ``index`` within a disjoint block reserved for this one."""
        return RngStream(self.master_seed, (self.stream_index << 20) ^ index)


@dataclass(frozen=True)
class NoisePair:
    """One correlated increment pair (dZ, dZp), both carrying units sqrt(time)."""

    dZ: float
    dZp: float


def quadrature_covariance(nbar: float) -> np.ndarray:
    """Unit-dt covariance of the two output quadrature increments.

    For thermal occupation ``nbar`` the two commuting quadratures have
    increment covariance::

        [[2n+1,          2 sqrt(n(n+1))],
         [2 sqrt(n(n+1)), 2n+1         ]]

    whose determinant is (2n+1)^2 - 4n(n+1) = 1 identically.
    """
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    c = 2.0 * np.sqrt(nbar * (nbar + 1.0))
    return np.array([[2.0 * nbar + 1.0, c], [c, 2.0 * nbar + 1.0]])


def quadrature_cholesky(nbar: float) -> np.ndarray:
    """Lower Cholesky factor of :func:`quadrature_covariance`."""
    return np.linalg.cholesky(quadrature_covariance(nbar))


def sample_noise_pair(nbar: float, dt: float,
                      rng: np.random.Generator) -> NoisePair:
    """Draw one correlated quadrature increment pair.

    ``(dZ, dZp) = sqrt(dt) * Lchol @ (w1, w2)`` with ``w`` iid standard
    normal and ``Lchol`` from :func:`quadrature_cholesky`, so the ensemble
    covariance reproduces ``dt`` times the unit-dt covariance.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    lchol = quadrature_cholesky(nbar)
    w = rng.standard_normal(2)
    dz, dzp = np.sqrt(dt) * (lchol @ w)
    return NoisePair(float(dz), float(dzp))


def sample_noise_pairs(nbar: float, dt: float, count: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`sample_noise_pair`; returns shape ``(count, 2)``."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    lchol = quadrature_cholesky(nbar)
    w = rng.standard_normal((count, 2))
    return np.sqrt(dt) * (w @ lchol.T)
