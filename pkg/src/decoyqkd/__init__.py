"""Key-rate lower bounds for decoy-state QKD with finite statistics."""
from .asymptotic import (EveConfig, StarSolution, eve_optimal_config, eve_optimal_value,
                         improved_bound, improved_key_rate, one_decoy_key_rate,
                         preferred_tangent, star_solution, closed_form_terms,
                         vacuum_weak_key_rate)
from .channel import (ChannelParams, FiniteCounts, ObservedRates, SourceParams,
                      expected_counts, infinite_decoy_reference, simulate_rates)
from .config import RunConfig, ingest_counts, load_config, parse_config, serialize_config
from .entropy import (TangentLine, binary_entropy, feasibility_margin, feasible_tangent,
                      max_feasible_et, tangent_at)
from .finite import (FiniteKeyResult, asymptotic_rate, empirical_tangent,
                     finite_improved_rate, finite_max_distance, finite_one_decoy_rate,
                     finite_rate, finite_vacuum_weak_rate, max_distance)
from .montecarlo import (PhotonChannelTruth, TrialOutcome, build_truth,
                         conditional_intensity_probability, estimate_failure_rate,
                         sample_assignment)
from .stats import (Deviation, solve_delta, solve_delta_asymmetric,
                    solve_delta_known_expectation, solve_delta_symmetric)

__version__ = "0.1.0"
