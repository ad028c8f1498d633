"""Asymptotic MI statistics for non-centered non-separable MIMO channels."""

from .asymptotics import (AsymptoticStats, BMatrix, analyze_model, build_b,
                          emi_deterministic, oracle_from_blocks, outage_curve,
                          outage_probability, variance_clt,
                          variance_linear_system_oracle)
from .channel import (ChannelModel, VarianceProfile, build_holographic,
                      build_kronecker, build_weichselberger,
                      profile_from_matrix, profile_nonseparable_gaussian,
                      profile_rescale_to_match, profile_separable_isotropic,
                      separable_profile, synth_los)
from .errors import (ConfigError, ConvergenceError, HoloRmtError,
                     InvalidRegimeError, NumericalError)
from .geometry import (ArrayGeometry, WavenumberLattice, antenna_gain,
                       effective_zeta, enumerate_lattice, rx_lattice,
                       tx_lattice)
from .montecarlo import (MiSampleSet, compute_mi, empirical_outage,
                         ks_statistic, model_digest, normalized_samples,
                         qq_data, qq_slope, run_mc, sample_channel, substream)
from .solver import (DeltaSolution, Resolvents, build_d_matrices,
                     compute_resolvents, delta_upper_bounds,
                     self_consistency_residual, solve_deltas)

__version__ = "0.1.0"
