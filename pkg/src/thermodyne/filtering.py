"""Stochastic filters driven by a continuous quadrature measurement record.

Two gain conventions are carried side by side as first-class variants:

``PAPER``
    The filter equations in their literal published form.  The measurement
    gain traces to ``(2n+1) tr((L+L†) rho)`` and the innovations subtract
    ``(2n+1)^2 tr((L+L†) rho) dt``.

``CORRECTED``
    The variant obtained by retaining the cross-correlation between the two
    commuting quadrature increments (their product is ``2 sqrt(n(n+1)) dt``,
    not zero) when conditioning away the second quadrature.  The gain picks
    up a relative minus sign on the ``n`` term and an overall ``1/(2n+1)``,
    and the innovations subtract ``tr((L+L†) rho) dt``.

At ``nbar = 0`` the two coincide.  For ``nbar > 0`` they differ and the
collision-model ground truth adjudicates between them (see
:mod:`thermodyne.collision`); nothing here presumes the outcome.

All steppers are Euler-Maruyama and batch-safe: a state argument may be a
single ``(d, d)`` matrix or a stack ``(M, d, d)``, with the increment a
scalar or an ``(M,)`` array.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .generators import drift_K, lindblad_schrodinger
from .model import SystemModel
from .numerics import dagger, hermitize

EIG_CLAMP_THRESHOLD = -1e-6
TRACE_UNDERFLOW = 1e-12


class FilterCollapseError(RuntimeError):
    """The unnormalized state lost all weight (trace <= 0)."""


class StateClampWarning(UserWarning):
    """A conditioned state developed an eigenvalue below the clamp threshold."""


class FilterVariant(enum.Enum):
    """Which gain/innovations convention a filter uses."""

    PAPER = "paper"
    CORRECTED = "corrected"

    @classmethod
    def from_string(cls, s: str) -> "FilterVariant":
        try:
            return cls(s.lower())
        except ValueError:
            raise ValueError(
                f"unknown filter variant {s!r}; expected 'paper' or 'corrected'")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class MeasurementRecord:
    """Uniform-step record of quadrature increments.

    ``dY[k]`` is the increment accumulated over ``[k dt, (k+1) dt)``; the
    optional ``dYp`` holds increments of the second (commuting) quadrature.
    """

    dt: float
    dY: np.ndarray
    dYp: np.ndarray | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        object.__setattr__(self, "dY", np.asarray(self.dY, dtype=np.float64))
        if self.dYp is not None:
            dYp = np.asarray(self.dYp, dtype=np.float64)
            if dYp.shape != self.dY.shape:
                raise ValueError("dY and dYp must have equal length")
            object.__setattr__(self, "dYp", dYp)

    def __len__(self) -> int:
        return len(self.dY)

    @property
    def duration(self) -> float:
        return len(self.dY) * self.dt

    @property
    def times(self) -> np.ndarray:
        """Right-endpoint times of each increment interval."""
        return self.dt * np.arange(1, len(self.dY) + 1)

    def quadratic_variation_rate(self) -> float:
        """sum(dY^2) / duration; converges to 2 nbar + 1 for a physical record."""
        return float(np.sum(self.dY ** 2) / self.duration)


@dataclass(frozen=True)
class ConditionalState:
    """A filtered state with provenance of the filter that produced it."""

    matrix: np.ndarray
    normalized: bool
    variant: FilterVariant


def _expect_tr(op: np.ndarray, rho: np.ndarray) -> np.ndarray | float:
    """Re tr(op @ rho), batch-safe over the leading axes of rho."""
    return np.real(np.einsum('...ab,ba->...', rho, op))


def _bscal(x) -> np.ndarray:
    """Lift a per-trajectory scalar to broadcast against (..., d, d) states."""
    return np.asarray(x, dtype=np.float64)[..., None, None]


def zakai_gain(m: SystemModel, variant: FilterVariant,
               varsigma: np.ndarray) -> np.ndarray:
    """Measurement gain of the linear (unnormalized) filter."""
    L = m.L
    Ld = dagger(L)
    n = m.nbar
    t1 = L @ varsigma + varsigma @ Ld
    t2 = Ld @ varsigma + varsigma @ L
    if variant is FilterVariant.PAPER:
        return (n + 1.0) * t1 + n * t2
    return ((n + 1.0) * t1 - n * t2) / (2.0 * n + 1.0)


def zakai_step(m: SystemModel, variant: FilterVariant, varsigma: np.ndarray,
               dY, dt: float) -> np.ndarray:
    """One Euler-Maruyama step of the unnormalized filter.

    sigma' = sigma + 𝓛†sigma dt + G(sigma) dY, hermitized.  Raises
    :class:`FilterCollapseError` if the incoming trace is not positive.
    """
    tr = np.real(np.trace(varsigma, axis1=-2, axis2=-1))
    if np.any(tr <= 0.0):
        raise FilterCollapseError(
            f"unnormalized state trace fell to {np.min(tr):.3e}")
    out = varsigma + lindblad_schrodinger(m, varsigma) * dt
    out = out + zakai_gain(m, variant, varsigma) * _bscal(dY)
    return hermitize(out)


def innovations(m: SystemModel, variant: FilterVariant, rho: np.ndarray,
                dY, dt: float):
    """Innovations increment: dY minus the variant's predicted drift."""
    cbar = _expect_tr(m.quadrature, rho)
    if variant is FilterVariant.PAPER:
        scale = (2.0 * m.nbar + 1.0) ** 2
        return dY - scale * cbar * dt
    return dY - cbar * dt


def ks_gain(m: SystemModel, variant: FilterVariant,
            rho: np.ndarray) -> np.ndarray:
    """Measurement gain of the normalized filter (traceless by construction)."""
    L = m.L
    Ld = dagger(L)
    n = m.nbar
    cbar = _bscal(_expect_tr(m.quadrature, rho))
    t1 = L @ rho + rho @ Ld - cbar * rho
    t2 = Ld @ rho + rho @ L - cbar * rho
    if variant is FilterVariant.PAPER:
        return (n + 1.0) * t1 + n * t2
    return ((n + 1.0) * t1 - n * t2) / (2.0 * n + 1.0)


def _min_eig(rho: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of Hermitian (batches of) matrices; 2x2 analytic."""
    if rho.shape[-1] == 2:
        t = np.real(rho[..., 0, 0] + rho[..., 1, 1])
        det = np.real(rho[..., 0, 0] * rho[..., 1, 1]
                      - rho[..., 0, 1] * rho[..., 1, 0])
        disc = np.sqrt(np.maximum(t * t - 4.0 * det, 0.0))
        return 0.5 * (t - disc)
    return np.linalg.eigvalsh(rho)[..., 0]


def clamp_state(rho: np.ndarray, threshold: float = EIG_CLAMP_THRESHOLD,
                warn: bool = True):
    """Zero out negative eigenvalues below ``threshold`` and renormalize.

    Returns ``(state, n_clamped)``.  Mild negativity above the threshold is
    left alone; it is ordinary Euler-Maruyama transient error.
    """
    lam_min = _min_eig(rho)
    bad = lam_min < threshold
    n_bad = int(np.count_nonzero(bad))
    if n_bad:
        if warn:
            warnings.warn(
                f"clamped {n_bad} state(s) with eigenvalue below {threshold}",
                StateClampWarning, stacklevel=2)
        fixed = np.array(rho[bad] if rho.ndim == 3 else rho, copy=True)
        w, v = np.linalg.eigh(fixed)
        w = np.maximum(w, 0.0)
        fixed = (v * w[..., None, :]) @ dagger(v)
        if rho.ndim == 3:
            rho = np.array(rho, copy=True)
            rho[bad] = fixed
        else:
            rho = fixed
    return rho, n_bad


def ks_step(m: SystemModel, variant: FilterVariant, rho: np.ndarray,
            dY, dt: float) -> np.ndarray:
    """One Euler-Maruyama step of the normalized filter.

    rho' = rho + 𝓛†rho dt + H(rho) dI with dI from :func:`innovations`;
    then hermitize, clamp any eigenvalue below the threshold (with a
    warning), and renormalize the trace to 1.
    """
    dI = innovations(m, variant, rho, dY, dt)
    out = rho + lindblad_schrodinger(m, rho) * dt
    out = out + ks_gain(m, variant, rho) * _bscal(dI)
    out = hermitize(out)
    out, _ = clamp_state(out)
    tr = np.real(np.trace(out, axis1=-2, axis2=-1))
    if np.any(tr <= TRACE_UNDERFLOW):
        raise FilterCollapseError(
            f"normalized filter trace underflow ({np.min(tr):.3e})")
    return out / _bscal(tr)


def generate_record(m: SystemModel, rho0: np.ndarray, T: float, dt: float,
                    rng: np.random.Generator
                    ) -> tuple[MeasurementRecord, list[ConditionalState]]:
    """Simulate a self-consistent measurement record and its truth filter.

    The record law is built on the output relation: given the current truth
    state, ``dY = tr((L+L†) rho) dt + sqrt(2n+1) dW`` with ``dW`` a Wiener
    increment, and the truth state is propagated by the ``CORRECTED``
    normalized filter driven by that same record (the variant whose
    innovations are zero-mean under this law, as the collision-model ground
    truth confirms).

    Returns the record and truth states at all grid times, including t = 0.
    """
    steps = int(round(T / dt))
    rho = hermitize(np.asarray(rho0, dtype=np.complex128))
    c = m.quadrature
    root_var = np.sqrt(2.0 * m.nbar + 1.0)
    truth = [ConditionalState(rho, True, FilterVariant.CORRECTED)]
    dY = np.empty(steps)
    sqrt_dt = np.sqrt(dt)
    for k in range(steps):
        cbar = _expect_tr(c, rho)
        dY[k] = cbar * dt + root_var * sqrt_dt * rng.standard_normal()
        rho = ks_step(m, FilterVariant.CORRECTED, rho, dY[k], dt)
        truth.append(ConditionalState(rho, True, FilterVariant.CORRECTED))
    return MeasurementRecord(dt=dt, dY=dY), truth


def run_zakai(m: SystemModel, variant: FilterVariant, rho0: np.ndarray,
              record: MeasurementRecord) -> list[np.ndarray]:
    """Fold :func:`zakai_step` over a record; returns unnormalized states."""
    state = hermitize(np.asarray(rho0, dtype=np.complex128))
    out = [state]
    for dy in record.dY:
        state = zakai_step(m, variant, state, float(dy), record.dt)
        out.append(state)
    return out


def run_ks(m: SystemModel, variant: FilterVariant, rho0: np.ndarray,
           record: MeasurementRecord) -> list[np.ndarray]:
    """Fold :func:`ks_step` over a record; returns normalized states."""
    state = hermitize(np.asarray(rho0, dtype=np.complex128))
    out = [state]
    for dy in record.dY:
        state = ks_step(m, variant, state, float(dy), record.dt)
        out.append(state)
    return out


# ---------------------------------------------------------------------------
# Doubled-noise unraveling

def _unravel_matrices(m: SystemModel):
    n = m.nbar
    gain_y = (n + 1.0) * m.L + n * dagger(m.L)
    gain_yp = -np.sqrt(n * (n + 1.0)) * m.quadrature
    return gain_y, gain_yp, drift_K(m)


def unravel_step(m: SystemModel, xi: np.ndarray, dY: float, dYp: float,
                 dt: float) -> np.ndarray:
    """One step of the unnormalized vector unraveling.

    xi' = xi + { [(n+1)L + nL†] dY - sqrt(n(n+1)) (L+L†) dYp + K dt } xi.
    At ``nbar = 0`` the second-quadrature term vanishes and this is the
    familiar vacuum vector filter with gain L.
    """
    xi = np.asarray(xi, dtype=np.complex128)
    if not np.all(np.isfinite(xi)):
        raise ValueError("unraveling vector has non-finite entries")
    gy, gyp, K = _unravel_matrices(m)
    step = gy * dY + gyp * dYp + K * dt
    out = xi + step @ xi
    norm = np.linalg.norm(out)
    if not np.isfinite(norm) or norm > 1e120:
        raise FilterCollapseError(
            "unraveling vector norm overflow; use a smaller dt")
    return out


def conditional_Yprime(dY, nbar: float, dt: float,
                       rng: np.random.Generator):
    """Sample the second-quadrature increment given the measured one.

    The pair is jointly Gaussian with unit-dt covariance
    ``[[2n+1, 2s], [2s, 2n+1]]`` (s = sqrt(n(n+1))), so conditionally on
    ``dY`` the other increment is Normal with mean ``(2s/(2n+1)) dY`` and
    variance ``dt/(2n+1)`` (the Schur complement; note the product of the
    marginal and conditional variances is the unit determinant).
    """
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    s = np.sqrt(nbar * (nbar + 1.0))
    mean = (2.0 * s / (2.0 * nbar + 1.0)) * np.asarray(dY, dtype=np.float64)
    std = np.sqrt(dt / (2.0 * nbar + 1.0))
    return mean + std * rng.standard_normal(np.shape(dY))


def coarse_grain_unravel(m: SystemModel, record: MeasurementRecord,
                         msamples: int, rng: np.random.Generator,
                         psi0: np.ndarray) -> list[np.ndarray]:
    """Average the vector unraveling over the unobserved quadrature.

    Runs ``msamples`` unraveling trajectories that share the record's
    measured increments but draw independent conditional second-quadrature
    increments, and returns the per-time average of the outer products
    |xi><xi| (unnormalized).  If the record carries explicit ``dYp``
    increments they are used verbatim instead of sampling.
    """
    if msamples < 1:
        raise ValueError(f"msamples must be >= 1, got {msamples}")
    psi0 = np.asarray(psi0, dtype=np.complex128)
    gy, gyp, K = _unravel_matrices(m)
    dt = record.dt
    xi = np.tile(psi0, (msamples, 1))
    out = [np.einsum('ma,mb->ab', xi, xi.conj()) / msamples]
    for k, dy in enumerate(record.dY):
        if record.dYp is not None:
            dyp = np.full(msamples, record.dYp[k])
        else:
            dyp = conditional_Yprime(
                np.full(msamples, dy), m.nbar, dt, rng)
        step = (np.einsum('ab,mb->ma', gy, xi) * dy
                + np.einsum('ab,mb->ma', gyp, xi) * dyp[:, None]
                + np.einsum('ab,mb->ma', K, xi) * dt)
        xi = xi + step
        if not np.all(np.isfinite(xi)):
            raise FilterCollapseError(
                "unraveling ensemble overflow; use a smaller dt")
        out.append(np.einsum('ma,mb->ab', xi, xi.conj()) / msamples)
    return out


def coarse_grain_limit(m: SystemModel, record: MeasurementRecord,
                       rho0: np.ndarray) -> list[np.ndarray]:
    """Exact infinite-sample limit of :func:`coarse_grain_unravel`.

    Because the per-step update is linear in the Gaussian second-quadrature
    increment, its conditional average over that increment has closed form:
    with M0 = I + Gy dY + K dt, mean mu and variance v of the conditional
    increment,

        rho -> M0 rho M0† + mu (M0 rho Gp† + Gp rho M0†) + (mu^2 + v) Gp rho Gp†.

    Useful as the deterministic target when checking the 1/sqrt(M)
    Monte-Carlo convergence of the sampled average.
    """
    gy, gyp, K = _unravel_matrices(m)
    n = m.nbar
    dt = record.dt
    s = np.sqrt(n * (n + 1.0))
    cond_var = dt / (2.0 * n + 1.0)
    eye = np.eye(m.dim, dtype=np.complex128)
    rho = np.asarray(rho0, dtype=np.complex128)
    out = [rho]
    for dy in record.dY:
        mu = (2.0 * s / (2.0 * n + 1.0)) * dy
        m0 = eye + gy * dy + K * dt
        rho = (m0 @ rho @ dagger(m0)
               + mu * (m0 @ rho @ dagger(gyp) + gyp @ rho @ dagger(m0))
               + (mu * mu + cond_var) * (gyp @ rho @ dagger(gyp)))
        out.append(rho)
    return out


# ---------------------------------------------------------------------------
# Record CSV interchange

def write_record_csv(record: MeasurementRecord, path) -> None:
    """Write a record as CSV with columns ``t, dY[, dYp]``.

    Times are the right endpoints of the increment intervals and all values
    carry 17 significant digits, so a round trip is lossless.
    """
    has_yp = record.dYp is not None
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,dY,dYp\n" if has_yp else "t,dY\n")
        for k in range(len(record)):
            t = (k + 1) * record.dt
            row = f"{t:.17g},{record.dY[k]:.17g}"
            if has_yp:
                row += f",{record.dYp[k]:.17g}"
            fh.write(row + "\n")


def read_record_csv(path) -> MeasurementRecord:
    """Inverse of :func:`write_record_csv` (validates the uniform grid)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header not in (["t", "dY"], ["t", "dY", "dYp"]):
            raise ValueError(f"unrecognized record header {header}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(header):
        raise ValueError("record row width does not match header")
    t = data[:, 0]
    dt = t[0]
    if dt <= 0:
        raise ValueError("record times must start at one positive step")
    if len(t) > 1 and np.max(np.abs(np.diff(t) - dt)) > 1e-9 * dt:
        raise ValueError("record time grid is not uniform")
    dYp = data[:, 2] if len(header) == 3 else None
    return MeasurementRecord(dt=float(dt), dY=data[:, 1], dYp=dYp)
