"""ddhop: multiuser OTFS-SCMA uplink simulation with delay-Doppler resource
hopping, NBI/PIN jamming analysis, and a turbo (EP detector + LDPC-BP) receiver."""

from .ddcore import DDGrid, LinearOperator, cyclic_shift_power, doppler_phase_power, isfft_tx, sfft_rx
from .otfsmodem import TimeBlock, default_cp_len, demodulate, modulate
from .channel import (ChannelConfig, ChannelEnsemble, ChannelPath, UserChannel,
                      apply_channel_time, build_dd_channel_matrix, sample_channels,
                      stack_full_matrix)
from .jamming import (HitPrediction, JammerSet, NbiSpec, PinSpec, dd_footprint,
                      gen_nbi, gen_pin, predict_hit_set)
from .scma import (HopState, PartitionScheme, ScmaCodebook, allocate, deallocate,
                   gen_hop_permutation, load_codebook, scma_encode)
from .fec import LdpcCode, bp_decode, ldpc_encode, peg_construct
from .receiver import (DetectorModel, SymbolPosterior, TurboConfig, complexity_census,
                       deinterleave, gaep_detect, interleave, map_oracle_detect,
                       turbo_receive)
from .harness import (BerRecord, ExperimentConfig, calibrate_powers, desk_preset,
                      paper_preset, parse_config_file, run_point, run_sweep)

__version__ = "0.1.0"
