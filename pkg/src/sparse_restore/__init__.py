"""Restoration and separation of sparsely corrupted signals.

Model ``z = A x + B e + n`` with unit-norm dictionaries ``A`` (signal) and
``B`` (interference).  Three recovery procedures depending on what is known
about the supports, their deterministic recovery conditions and error-bound
constants, brute-force oracles, and two block/image pipelines.
"""

from .dictionary import (CoherenceProfile, build_dct, build_dct2d, build_identity,
                         build_random_unit, coherence, concat, load_dictionary,
                         mutual_coherence, profile, save_dictionary)
from .exceptions import (ConditionNotMet, DimensionMismatch, DRSingular,
                         EnumerationBudgetExceeded, InfeasibleBudget, InvalidDictionary,
                         NoSparseSolution, SingularInterferenceSupport, SparseRestoreError)
from .guarantees import (GuaranteeReport, bpdn_error_constants, bpres_error_constants,
                         bpsep_error_constants, check_bpres, check_bpres_rip, check_bpsep,
                         check_bpsep_rip, check_dr, classical_threshold, condition_curves,
                         dr_error_constants, f_uv, max_sparsity, ric_bound_concat,
                         ric_bound_projected)
from .model import (BothSupports, Dictionary, InterferenceSupport, NoSupport,
                    RecoveryProblem, RecoveryReport, SupportSet, synthesize)
from .oracle import exact_ric, exact_ric_projected, p0_bruteforce
from .recovery import (best_k_support, bp_restore, bp_separate, detect_saturation_support,
                       direct_restore)
from .solvers import (Projector, SolverOptions, bpdn, build_projector, cg_least_squares,
                      kkt_certificate)

__version__ = "0.1.0"
