"""Sparsity on level sets via extensions of symmetric submodular functions.

Set-function families, the piecewise-linear convex extension and its base
polyhedron, submodular minimization engines, proximal operators and
first-order solvers, agglomerative regularization paths, and a level-set
recovery harness.
"""

from .setfn import (CardinalityFunction, CutFunction, NoisyCutFunction,
                    SetFunction, SymmetrizedFunction, TableFunction,
                    check_axioms, is_inseparable, read_graph, read_profile)
from .lovasz import (ExtremePoint, GreedyResult, OrderedPartition,
                     check_face_lattice, extreme_points, greedy,
                     in_base_polyhedron, level_set_integral, lovasz_extension)
from .sfm import (MnpResult, SfmProblem, SfmResult, min_norm_point,
                  sfm_bruteforce, sfm_cardinality, sfm_cut, sfm_noisy_cut)
from .prox import (LatticeCertificate, ProxProblem, ProxSolution,
                   certify_lattice, extract_lattice, prox_bruteforce,
                   prox_cardinality, prox_decomposition, prox_l1_composed,
                   prox_tv1d, prox_via_mnp, soft_threshold, verify_threshold)
from .solver import (AggloReport, DenoisingLoss, PathResult, QuadraticLoss,
                     SolverConfig, Trace, agglo_margin, check_agglo_condition,
                     extension_value, prox_path_agglomerative,
                     proximal_gradient, subgradient_descent, write_trace_csv)
from .recovery import (GroundTruth, Lemma2Report, NoiseModel, RecoveryReport,
                       compute_eta, compute_nu, lambda_bound, lemma2_check,
                       level_set_error, monte_carlo_recovery,
                       robust_tv_experiment, theorem_bound,
                       tv2d_counterexample)

__version__ = "0.1.0"
