"""Decentralized daisy-chain MMSE uplink equalization under colored noise."""

from .model import (Scenario, ChannelSet, NoisePool, Covariance, build_channel,
                    draw_noise_pool, exact_covariance, sample_covariance,
                    powers_from_ratios)
from .central import (EqualizerMatrix, SingularMatrixError, mmse_centralized,
                      zf_centralized, apply_equalizer, sample_objective)
from .daisy import (DbuState, ChainMessage, Schedule, BcdResult, ProtocolError,
                    make_chain, bdac_init, bcd_block_update, run_bcd,
                    consistency_audit)
from .interconnect import (Topology, TrafficLedger, FlopLedger,
                           predicted_traffic, meter, flop_report)
from .detect import (Constellation, ErrorStats, modulate, demodulate_hard,
                     run_link)
from .harness import (ExperimentConfig, ResultRow, run_experiment, emit_csv,
                      convergence_trace, emit_convergence_trace, load_config)

__all__ = [name for name in dir() if not name.startswith("_")]
