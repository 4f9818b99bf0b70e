"""Thermal homodyne quantum trajectories, filtering, and cross-validation.

The package simulates a small open quantum system coupled to a thermal bath
under continuous quadrature (homodyne) monitoring.  It provides the
unnormalized and normalized conditional-state filters in two gain
conventions, a doubled-noise vector unraveling with conditional
coarse-graining, a deterministic master-equation benchmark, and a
repeated-interaction (collision) model with exact Born-rule conditioning
that serves as ground truth for adjudicating between the filter variants.
"""

__version__ = "0.1.0"

from .collision import (AncillaConfig, CollisionMeasurement, OracleTrajectory,
                        build_measurement, coupling_b, coupling_b_prime,
                        filter_adjudication, ladder, oracle_trajectory,
                        output_relation_check, reference_process_check,
                        step_unitary)
from .ensemble import EnsembleStats, run_filter_ensemble
from .filtering import (ConditionalState, FilterCollapseError, FilterVariant,
                        MeasurementRecord, coarse_grain_unravel,
                        conditional_Yprime, generate_record, innovations,
                        ks_step, read_record_csv, run_ks, run_zakai,
                        unravel_step, write_record_csv, zakai_step)
from .generators import (GeneratorReport, collapse_report, drift_K,
                         drift_from_quadrature_table, drift_published_form,
                         evolve_master, lindblad_heisenberg,
                         lindblad_schrodinger, sub_generator)
from .model import (DetectorPreset, SystemModel, ThermalParams, build_detector,
                    nbar_from_thermal, sigma_minus, sigma_plus, sigma_x,
                    sigma_y, sigma_z, validate)
from .numerics import (NoisePair, RngStream, commutator, eigh, expm,
                       hermitize, is_hermitian, matmul, quadrature_cholesky,
                       quadrature_covariance, sample_noise_pair,
                       sample_noise_pairs, trace_distance)

__all__ = [
    "AncillaConfig", "CollisionMeasurement", "ConditionalState",
    "DetectorPreset", "EnsembleStats", "FilterCollapseError", "FilterVariant",
    "GeneratorReport", "MeasurementRecord", "NoisePair", "OracleTrajectory",
    "RngStream", "SystemModel", "ThermalParams", "build_detector",
    "build_measurement", "coarse_grain_unravel", "collapse_report",
    "commutator", "conditional_Yprime", "coupling_b", "coupling_b_prime",
    "drift_K", "drift_from_quadrature_table", "drift_published_form", "eigh",
    "evolve_master", "expm", "filter_adjudication", "generate_record",
    "hermitize", "innovations", "is_hermitian", "ks_step", "ladder",
    "lindblad_heisenberg", "lindblad_schrodinger", "matmul",
    "nbar_from_thermal", "oracle_trajectory", "output_relation_check",
    "quadrature_cholesky", "quadrature_covariance", "read_record_csv",
    "reference_process_check", "run_filter_ensemble", "run_ks", "run_zakai",
    "sample_noise_pair", "sample_noise_pairs", "sigma_minus", "sigma_plus",
    "sigma_x", "sigma_y", "sigma_z", "step_unitary", "sub_generator",
    "trace_distance", "unravel_step", "validate", "write_record_csv",
    "zakai_step",
]
