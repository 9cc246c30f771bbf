"""Multi-resolution model broadcast simulator.

Downlink federated learning with non-uniform 8-PSK: the model vector is
split into a low-resolution part carried on the robust bit planes and a
high-resolution residual carried on the fragile third bit plane, so
high-SNR agents receive a more accurate model than low-SNR agents from
one shared broadcast.
"""

from .broadcast import (
    AgentDecoderState,
    RoundPayload,
    ServerCodecState,
    agent_decode_high,
    agent_decode_low,
    server_encode_round,
    transmit_round,
)
from .dataio import Dataset, load_mnist, parse_idx, partition_agents
from .flcore import MLP, RoundMetrics, TrainConfig, fedavg, init_model, run_fl
from .harness import ExperimentConfig, modem_bench, run
from .modem import (
    BitPlaneErrorReport,
    ChannelSpec,
    Constellation,
    awgn,
    build_constellation,
    demod_coarse,
    demod_full,
    estimate_error_rates,
    modulate,
)
from .quantizer import (
    BitPlaneStreams,
    PartitionedModel,
    QuantizerSpec,
    pack_symbols,
    partition,
    quantize_fixed,
    unpack_symbols,
)

__version__ = "0.1.0"
