"""QAM modulation, hard-decision demapping, and error-rate accounting.

Square Gray-mapped constellations (4/16/64-QAM), unit average energy. A
symbol integer of b bits uses the first b/2 bits for the in-phase axis and
the last b/2 for quadrature; axis bit pattern 0...0 maps to the most positive
amplitude, so QPSK bits 00 -> (+1+j)/sqrt(2).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChannelSet, Scenario, draw_colored_noise, powers_from_ratios


def _gray_to_binary(g: np.ndarray) -> np.ndarray:
    b = g.copy()
    shift = 1
    while shift < 8:
        b ^= b >> shift
        shift *= 2
    return b


def _binary_to_gray(b: np.ndarray) -> np.ndarray:
    return b ^ (b >> 1)


class Constellation:
    """Gray-mapped square QAM of the given order with E[|s|^2] = 1."""

    def __init__(self, order: int):
        if order not in (4, 16, 64):
            raise ValueError(f"unsupported order {order}")
        self.order = order
        self.bits_per_symbol = int(np.log2(order))
        self.side = int(np.sqrt(order))
        self._axis_bits = self.bits_per_symbol // 2
        # axis amplitude for each axis bit pattern: Gray-decode to a level
        # index, levels descend from +(side-1) so pattern 0 is most positive
        patterns = np.arange(self.side, dtype=np.int64)
        level = _gray_to_binary(patterns)
        amp = (self.side - 1) - 2 * level
        self.scale = float(np.sqrt(3.0 / (2.0 * (order - 1))))
        self._amp = amp.astype(float) * self.scale
        sym = np.arange(order, dtype=np.int64)
        a_i = sym >> self._axis_bits
        a_q = sym & (self.side - 1)
        self.points = self._amp[a_i] + 1j * self._amp[a_q]

    def _decide_axis(self, x: np.ndarray) -> np.ndarray:
        """Nearest amplitude level -> axis bit pattern."""
        level = np.clip(np.round(((self.side - 1) - x / self.scale) / 2.0),
                        0, self.side - 1).astype(np.int64)
        return _binary_to_gray(level)


def modulate(bits: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Map a 0/1 stream to unit-average-energy symbols, MSB first."""
    bits = np.asarray(bits, dtype=np.int64)
    bps = constellation.bits_per_symbol
    if bits.size % bps != 0:
        raise ValueError(f"bit count {bits.size} not divisible by {bps}")
    groups = bits.reshape(-1, bps)
    sym = np.zeros(groups.shape[0], dtype=np.int64)
    for j in range(bps):
        sym = (sym << 1) | groups[:, j]
    return constellation.points[sym]


def demodulate_hard(s_hat: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Nearest-point decision per symbol, inverse Gray map, MSB-first bits."""
    s_hat = np.asarray(s_hat).ravel()
    a_i = constellation._decide_axis(s_hat.real)
    a_q = constellation._decide_axis(s_hat.imag)
    sym = (a_i << constellation._axis_bits) | a_q
    bps = constellation.bits_per_symbol
    bits = np.empty((s_hat.size, bps), dtype=np.int64)
    for j in range(bps):
        bits[:, j] = (sym >> (bps - 1 - j)) & 1
    return bits.ravel()


@dataclass(frozen=True)
class ErrorStats:
    bit_errors: int = 0
    symbol_errors: int = 0
    bits: int = 0
    symbols: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols if self.symbols else 0.0

    def __add__(self, other: "ErrorStats") -> "ErrorStats":
        return ErrorStats(self.bit_errors + other.bit_errors,
                          self.symbol_errors + other.symbol_errors,
                          self.bits + other.bits, self.symbols + other.symbols)


@dataclass(frozen=True)
class Frame:
    """One batch of data REs: transmitted bits/symbols and the received block."""
    bits: np.ndarray      # (K, n_symbols * bits_per_symbol)
    symbols: np.ndarray   # (K, n_symbols), unit average energy
    Y: np.ndarray         # (M, n_symbols)


def make_frame(channels: ChannelSet, scenario: Scenario, n_symbols: int,
               rng: np.random.Generator,
               constellation: Constellation | None = None) -> Frame:
    """Generate data REs with fresh colored noise over the same interference channel."""
    const = constellation or Constellation(scenario.constellation)
    K = channels.H.shape[1]
    sigma2, p_int, scale = powers_from_ratios(scenario)
    bits = rng.integers(0, 2, size=(K, n_symbols * const.bits_per_symbol))
    S = np.vstack([modulate(bits[k], const) for k in range(K)])
    noise = draw_colored_noise(channels, sigma2, p_int, n_symbols, rng)
    Y = scale * (channels.H @ S) + noise
    return Frame(bits=bits, symbols=S, Y=Y)


def evaluate_equalizer(W, frame: Frame, scenario: Scenario,
                       constellation: Constellation | None = None) -> ErrorStats:
    """Equalize a frame, hard-demap, and count bit/symbol errors."""
    const = constellation or Constellation(scenario.constellation)
    Wm = W.W if hasattr(W, "W") else np.asarray(W)
    _, _, scale = powers_from_ratios(scenario)
    S_hat = (Wm @ frame.Y) / scale
    K, n = frame.symbols.shape
    bit_errors = symbol_errors = 0
    for k in range(K):
        rx_bits = demodulate_hard(S_hat[k], const)
        diff = rx_bits != frame.bits[k]
        bit_errors += int(diff.sum())
        symbol_errors += int(diff.reshape(n, -1).any(axis=1).sum())
    return ErrorStats(bit_errors=bit_errors, symbol_errors=symbol_errors,
                      bits=K * n * const.bits_per_symbol, symbols=K * n)


def run_link(channels: ChannelSet, scenario: Scenario, W, n_symbols: int,
             rng: np.random.Generator) -> ErrorStats:
    """End-to-end link evaluation of an equalizer over n_symbols data REs."""
    const = Constellation(scenario.constellation)
    frame = make_frame(channels, scenario, n_symbols, rng, const)
    return evaluate_equalizer(W, frame, scenario, const)
