"""Open-system models: coupling operator, Hamiltonian, and thermal occupation.

The basis convention for two-level systems is ``{g, e}`` (ground first), so
the lowering operator is ``sigma_minus = |g><e|``.  A model with ``nbar = 0``
recovers the vacuum (Fock) theory.  ``hbar = 1`` throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import HERMITICITY_TOL, as_cmatrix, hermiticity_defect


def sigma_minus() -> np.ndarray:
    """Lowering operator |g><e| in the {g, e} basis."""
    return np.array([[0.0, 1.0], [0.0, 0.0]], dtype=np.complex128)


def sigma_plus() -> np.ndarray:
    """Raising operator |e><g|."""
    return np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.complex128)


def sigma_x() -> np.ndarray:
    return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)


def sigma_y() -> np.ndarray:
    return np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=np.complex128)


def sigma_z() -> np.ndarray:
    """|e><e| - |g><g|, i.e. the commutator [sigma_plus, sigma_minus]."""
    return np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=np.complex128)


def excited_projector() -> np.ndarray:
    return np.array([[0.0, 0.0], [0.0, 1.0]], dtype=np.complex128)


def ground_projector() -> np.ndarray:
    return np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.complex128)


def plus_state() -> np.ndarray:
    """|+><+| with |+> = (|g> + |e>)/sqrt(2)."""
    return 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]], dtype=np.complex128)


class ModelValidationError(ValueError):
    """Raised when a model violates its structural invariants."""


@dataclass(frozen=True)
class SystemModel:
    """The triple (L, H, nbar) plus Hilbert-space dimension.

    Parameters
    ----------
    L : array
        Coupling operator, units sqrt(rate).
    H : array
        Hamiltonian, units rate.  Must be Hermitian for a physically valid
        model; violations are caught by :func:`validate`, not construction,
        so diagnostics can be exercised.
    nbar : float
        Thermal occupation of the bath, dimensionless, >= 0.

    Notes
    -----
    Arbitrary ``L`` is accepted.  The theory behind the presets assumes the
    free Heisenberg dynamics rotates ``L`` at a single frequency; honoring
    that is the caller's responsibility.
    """

    L: np.ndarray
    H: np.ndarray
    nbar: float = 0.0
    dim: int = field(init=False)

    def __post_init__(self):
        L = as_cmatrix(self.L)
        H = as_cmatrix(self.H)
        if L.shape[0] != L.shape[1]:
            raise ModelValidationError(f"L must be square, got {L.shape}")
        if H.shape != L.shape:
            raise ModelValidationError(
                f"H shape {H.shape} does not match L shape {L.shape}")
        L.setflags(write=False)
        H.setflags(write=False)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "nbar", float(self.nbar))
        object.__setattr__(self, "dim", L.shape[0])

    @property
    def quadrature(self) -> np.ndarray:
        """L + L†, the system operator read out by the measurement."""
        return self.L + self.L.conj().T

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=np.complex128)


@dataclass(frozen=True)
class ThermalParams:
    """Inverse temperature and transition frequency defining the occupation."""

    beta: float
    omega: float


@dataclass(frozen=True)
class DetectorPreset:
    """Two-level detector preset: L = sqrt(kappa) sigma_minus, H = omega |e><e|."""

    kappa: float
    omega: float = 0.0
    beta: float | None = None
    nbar: float | None = None


def nbar_from_thermal(p: ThermalParams) -> float:
    """Bose occupation 1 / (exp(beta*omega) - 1)."""
    x = p.beta * p.omega
    if x <= 0:
        raise ValueError(
            f"beta*omega must be > 0 for a finite occupation, got {x}")
    return 1.0 / math.expm1(x)


def build_detector(p: DetectorPreset) -> SystemModel:
    """Expand a detector preset into an explicit two-level model.

    ``nbar`` may be given directly or derived from ``(beta, omega)``; giving
    neither means a vacuum bath.
    """
    if p.kappa <= 0:
        raise ValueError(f"kappa must be > 0, got {p.kappa}")
    if p.nbar is not None:
        if p.nbar < 0:
            raise ValueError(f"nbar must be >= 0, got {p.nbar}")
        nbar = float(p.nbar)
    elif p.beta is not None:
        nbar = nbar_from_thermal(ThermalParams(beta=p.beta, omega=p.omega))
    else:
        nbar = 0.0
    L = math.sqrt(p.kappa) * sigma_minus()
    H = p.omega * excited_projector()
    return SystemModel(L=L, H=H, nbar=nbar)


@dataclass(frozen=True)
class ModelDiagnostics:
    dim: int
    nbar: float
    h_hermiticity_defect: float
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(m: SystemModel) -> ModelDiagnostics:
    """Check a model against its invariants; collect human-readable violations."""
    violations = []
    defect = hermiticity_defect(m.H)
    if defect > HERMITICITY_TOL:
        violations.append(
            f"H is not Hermitian: max|H - H†| = {defect:.3e} > {HERMITICITY_TOL:.0e}")
    if m.nbar < 0:
        violations.append(f"nbar = {m.nbar} is out of range (must be >= 0)")
    if not math.isfinite(m.nbar):
        violations.append("nbar is not finite")
    return ModelDiagnostics(
        dim=m.dim,
        nbar=m.nbar,
        h_hermiticity_defect=defect,
        violations=tuple(violations),
    )


def require_valid(m: SystemModel) -> None:
    diag = validate(m)
    if not diag.ok:
        raise ModelValidationError("; ".join(diag.violations))
