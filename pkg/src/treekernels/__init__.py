"""Weighted shifts on rooted directed trees, their reproducing kernels,
commutants and von Neumann inequalities, checked on finite truncations."""
from .commutant import (CommutantReport, MatrixMultiplier, abelian_and_irreducibility_test,
                        commutant_basis, commutation_defect, constant_multiplier_pair,
                        direct_sum_constants_check, multiplier_recovery)
from .kernels import (BergmanTreeKernel, FunctionVector, TridiagonalKernel, condition_ratio,
                      condition_sweep, eigenvector_defect, gram_psd_check,
                      polynomial_bound_witness, reproducing_check, sweep_to_csv)
from .model import ShiftModel
from .shifts import (TruncatedShift, WeightSystem, adjoint_kernel, assemble_shift,
                     bergman_weights, cauchy_dual, contraction_bound, custom_weights,
                     hyponormality_defect, moment_norm, two_parameter_weights)
from .tree import (DirectedTree, TreeSpec, TreeSpecError, branching_index, build_from_spec,
                   build_path_tree, build_two_ray_tree, parse_tree_spec, spec_of)
from .vonneumann import (ApproximantSequence, PolynomialSample, ball_positivity_defect,
                         eigenline_multiplier_recovery, fejer_approximants,
                         matrix_vn_defect, sup_norm_estimate, vn_defect,
                         wot_convergence_probe)

__version__ = "0.1.0"

__all__ = [
    "ApproximantSequence",
    "BergmanTreeKernel",
    "CommutantReport",
    "DirectedTree",
    "FunctionVector",
    "MatrixMultiplier",
    "PolynomialSample",
    "ShiftModel",
    "TreeSpec",
    "TreeSpecError",
    "TridiagonalKernel",
    "TruncatedShift",
    "WeightSystem",
    "abelian_and_irreducibility_test",
    "adjoint_kernel",
    "assemble_shift",
    "ball_positivity_defect",
    "bergman_weights",
    "branching_index",
    "build_from_spec",
    "build_path_tree",
    "build_two_ray_tree",
    "cauchy_dual",
    "commutant_basis",
    "commutation_defect",
    "condition_ratio",
    "condition_sweep",
    "constant_multiplier_pair",
    "contraction_bound",
    "custom_weights",
    "direct_sum_constants_check",
    "eigenline_multiplier_recovery",
    "eigenvector_defect",
    "fejer_approximants",
    "gram_psd_check",
    "hyponormality_defect",
    "matrix_vn_defect",
    "moment_norm",
    "multiplier_recovery",
    "parse_tree_spec",
    "polynomial_bound_witness",
    "reproducing_check",
    "spec_of",
    "sup_norm_estimate",
    "sweep_to_csv",
    "two_parameter_weights",
    "vn_defect",
    "wot_convergence_probe",
]
