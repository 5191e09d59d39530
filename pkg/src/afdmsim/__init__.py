"""Link-level simulation and analysis of chirp-multicarrier MIMO systems
under transceiver hardware impairments."""

__version__ = "0.1.0"

from .modem import (AfdmParams, Constellation, add_cpp, build_daft_matrix,
                    default_c2, demap_bits, demodulate, map_bits, modulate,
                    remove_cpp, select_c1)
from .channel import (ChannelRealization, DaftChannel, PathTap,
                      band_support_mask, build_daft_channel, build_td_block,
                      elementwise_channel_entry, elementwise_channel_matrix,
                      error_support_mask, estimation_support_mask,
                      sample_channel, velocity_to_kmax)
from .hwi import (HwiConfig, cfo_matrix, dac_quantize, dac_scaling_factor,
                  dco_apply, hwi_preset, iqi_apply, iqi_params, pn_matrices,
                  sel_pa_apply, sel_pa_params)
from .link import (FrameTranscript, ImpairedLink, noise_covariance,
                   realize_link, transmit_batch, transmit_frame)
from .detectors import (CsiModel, EqualizerReport, MlCandidateTable,
                        SearchSpaceError, estimate_rv_covariance,
                        inject_csi_error, lmmse_detect, lmmse_equalize,
                        ml_detect)
from .analysis import (CodewordOperator, PepContext, aber_union_bound,
                       build_codeword_matrix, diversity_probe,
                       lmmse_ber_approx, lmmse_ber_lower_bound, q_approx,
                       q_function, union_bound_curve, upep,
                       upep_imperfect_csi)
from .sweep import (ConfigError, SweepConfig, SweepResult, analyze,
                    emit_results, figure_recipes, run_sweep)
