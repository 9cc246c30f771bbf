"""Differential multi-resolution downlink broadcast.

Per round the server transmits a quantized low-resolution differential d
(decodable by everyone) and the current high-resolution residual w2
(decodable only by high-SNR agents).  Both sides accumulate d into a
tracked low-resolution model, so under error-free transport the tracked
state stays bit-identical everywhere.  Transport is either ``ideal``
(lossless d, binary32-narrowed w2, no channel) or ``physical`` (encode,
pack onto the non-uniform 8-PSK constellation, per-agent AWGN, demodulate
with the full or coarse rule, decode -- with no error detection, so noise
corrupts values silently).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quantizer
from .modem import ChannelSpec, Constellation, awgn, demod_coarse, demod_full, modulate
from .quantizer import BitPlaneStreams, QuantizerSpec

HIGH_SNR = "high_snr"
LOW_SNR = "low_snr"

IDEAL = "ideal"
PHYSICAL = "physical"


class ProtocolError(RuntimeError):
    """Round desynchronization or agent/payload contract violation."""


def _snap(x: np.ndarray, spec: QuantizerSpec) -> np.ndarray:
    """Re-canonicalize an on-grid vector after float accumulation.

    Accumulating grid values in floats drifts off the decimal grid by ulps
    (0.01 + 0.02 != 3 * 0.01); snapping back to exact step multiples keeps
    server and agent state comparisons bit-exact.
    """
    if spec.variant != quantizer.FIXED_POINT:
        return x
    return np.rint(x / spec.step) * spec.step


@dataclass
class ServerCodecState:
    tracked_w1: np.ndarray
    spec: QuantizerSpec
    round_index: int = 0

    @classmethod
    def initial(cls, n: int, spec: QuantizerSpec) -> "ServerCodecState":
        return cls(tracked_w1=np.zeros(n), spec=spec)


@dataclass
class AgentDecoderState:
    tracked_w1: np.ndarray
    agent_class: str
    channel: ChannelSpec | None = None
    round_index: int = 0
    spec: QuantizerSpec = field(default_factory=QuantizerSpec)

    @classmethod
    def initial(
        cls,
        n: int,
        agent_class: str,
        channel: ChannelSpec | None = None,
        spec: QuantizerSpec | None = None,
    ) -> "AgentDecoderState":
        if agent_class not in (HIGH_SNR, LOW_SNR):
            raise ValueError(f"unknown agent class {agent_class!r}")
        return cls(
            tracked_w1=np.zeros(n),
            agent_class=agent_class,
            channel=channel,
            spec=spec or QuantizerSpec(),
        )


@dataclass(frozen=True)
class RoundPayload:
    d: np.ndarray            # quantized low-resolution differential
    w2: np.ndarray           # high-resolution residual (this round's, full)
    spec: QuantizerSpec
    round_index: int

    @property
    def n(self) -> int:
        return self.d.size


def server_encode_round(w, state: ServerCodecState) -> RoundPayload:
    """Encode one round: d = Q(w - tracked), accumulate, residual against the update."""
    w = np.asarray(w, dtype=np.float64)
    if w.size != state.tracked_w1.size:
        raise ValueError(f"model length {w.size} != codec length {state.tracked_w1.size}")
    if state.spec.variant != quantizer.FIXED_POINT:
        raise ValueError("differential broadcast requires the fixed_point variant")
    d = quantizer.quantize_fixed(
        w - state.tracked_w1, state.spec.decimals, state.spec.lowres_int_bits
    )
    state.tracked_w1 = _snap(state.tracked_w1 + d, state.spec)
    w2 = w - state.tracked_w1
    payload = RoundPayload(d=d, w2=w2, spec=state.spec, round_index=state.round_index)
    state.round_index += 1
    return payload


def agent_decode_low(d, state: AgentDecoderState, round_index: int | None = None) -> np.ndarray:
    """Accumulate a received differential; returns the updated tracked model."""
    d = np.asarray(d, dtype=np.float64)
    if round_index is not None and round_index != state.round_index:
        raise ProtocolError(
            f"payload round {round_index} != agent round {state.round_index}"
        )
    state.tracked_w1 = _snap(state.tracked_w1 + d, state.spec)
    state.round_index += 1
    return state.tracked_w1.copy()


def agent_decode_high(payload: RoundPayload, state: AgentDecoderState) -> np.ndarray:
    """High-SNR decode: accumulate d, then add this round's residual."""
    if state.agent_class != HIGH_SNR:
        raise ProtocolError("agent_decode_high called on a low_snr agent")
    tracked = agent_decode_low(payload.d, state, payload.round_index)
    return tracked + payload.w2


def _narrow32(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.float64).astype(np.float32).astype(np.float64)


def encode_streams(payload: RoundPayload) -> BitPlaneStreams:
    """Serialize a payload to its two bit planes."""
    return BitPlaneStreams(
        lowres_bits=quantizer.encode_lowres(payload.d, payload.spec),
        hires_bits=quantizer.encode_hires(payload.w2),
        n=payload.n,
        spec=payload.spec,
    )


def transmit_round(
    payload: RoundPayload,
    agents: list[AgentDecoderState],
    mode: str = IDEAL,
    constellation: Constellation | None = None,
) -> list[RoundPayload]:
    """Deliver one payload to every agent; returns each agent's received payload.

    One shared symbol sequence; each agent sees its own noise realization.
    Low-SNR agents receive only the low-resolution differential (their
    received w2 is zero-length).  Framing (n, spec) travels out-of-band on
    an assumed error-free control channel.
    """
    received: list[RoundPayload] = []
    if mode == IDEAL:
        w2_narrow = _narrow32(payload.w2)
        for agent in agents:
            if agent.agent_class == HIGH_SNR:
                rx = RoundPayload(payload.d.copy(), w2_narrow.copy(),
                                  payload.spec, payload.round_index)
            else:
                rx = RoundPayload(payload.d.copy(), np.zeros(0),
                                  payload.spec, payload.round_index)
            received.append(rx)
        return received

    if mode != PHYSICAL:
        raise ValueError(f"mode must be 'ideal' or 'physical', got {mode!r}")
    if constellation is None:
        raise ValueError("physical mode requires a constellation")

    streams = encode_streams(payload)
    tx_symbols = modulate(quantizer.pack_symbols(streams), constellation)
    for agent in agents:
        if agent.channel is None:
            raise ProtocolError("physical mode requires a per-agent ChannelSpec")
        rx_symbols = awgn(tx_symbols, agent.channel)
        if agent.agent_class == HIGH_SNR:
            words = demod_full(rx_symbols, constellation)
            rx_streams = quantizer.unpack_symbols(words, payload.n, payload.spec, "full")
            d = quantizer.decode_lowres(rx_streams.lowres_bits, payload.spec, payload.n)
            w2 = quantizer.decode_hires(rx_streams.hires_bits, payload.n)
        else:
            words = demod_coarse(rx_symbols, constellation)
            rx_streams = quantizer.unpack_symbols(words, payload.n, payload.spec, "coarse")
            d = quantizer.decode_lowres(rx_streams.lowres_bits, payload.spec, payload.n)
            w2 = np.zeros(0)
        received.append(RoundPayload(d, w2, payload.spec, payload.round_index))
    return received


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash, used for round-trace checksums."""
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _stream_checksum(bits: np.ndarray) -> int:
    return fnv1a64(np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes())


def round_trace_record(
    payload: RoundPayload, received: list[RoundPayload]
) -> dict:
    """One conformance record per round: checksums of the encoded streams."""
    streams = encode_streams(payload)
    record = {
        "round_index": payload.round_index,
        "d_checksum": _stream_checksum(streams.lowres_bits),
        "w2_checksum": _stream_checksum(streams.hires_bits),
        "agent_checksums": [],
    }
    for rx in received:
        low = quantizer.encode_lowres(rx.d, rx.spec)
        record["agent_checksums"].append(_stream_checksum(low))
    return record
