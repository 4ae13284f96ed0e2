"""Scenario construction: channels, colored-noise samples, covariances, cluster partition.

The receiver noise is the sum of thermal noise and signals from out-of-cell
interference users, so its covariance is non-diagonal ("colored"). All
operations here are pure and seed-deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


def crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Circularly symmetric complex Gaussian, unit variance per entry."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def cluster_slices(cluster_sizes) -> list[slice]:
    offsets = np.concatenate(([0], np.cumsum(cluster_sizes)))
    return [slice(int(offsets[c]), int(offsets[c + 1])) for c in range(len(cluster_sizes))]


@dataclass(frozen=True)
class Scenario:
    """All dimensions and power levels of one simulation setup.

    es_n0_db and iot_db are interpreted in dB by default; set db_ratios=False
    to read them as linear ratios instead. iot_db=None disables interference
    power entirely (only valid together with K_int=0 semantics, see
    powers_from_ratios).
    """
    M: int                              # BS antennas
    K: int                              # target users
    C: int                              # antenna clusters
    cluster_sizes: tuple[int, ...]      # per-cluster antenna counts, sums to M
    N: int                              # noise samples (pilot REs)
    K_int: int = 0                      # interference users
    E_s: float = 1.0                    # per-user transmit energy (linear)
    es_n0_db: float = 10.0              # signal-to-thermal-noise ratio
    iot_db: float | None = 10.0         # interference-over-thermal ratio
    constellation: int = 16             # QAM order: 4 / 16 / 64
    n_coh: int = 500                    # symbols per coherence block
    seed: int = 0
    gain_range_db: tuple[float, float] = (0.0, 0.0)  # large-scale gain span
    db_ratios: bool = True

    def __post_init__(self):
        object.__setattr__(self, "cluster_sizes", tuple(int(m) for m in self.cluster_sizes))
        if self.C < 1 or len(self.cluster_sizes) != self.C:
            raise ValueError(f"cluster_sizes must have C={self.C} entries")
        if any(m < 1 for m in self.cluster_sizes):
            raise ValueError("every cluster size must be >= 1")
        if sum(self.cluster_sizes) != self.M:
            raise ValueError(f"cluster_sizes sum {sum(self.cluster_sizes)} != M={self.M}")
        if not (self.M >= self.K >= 1):
            raise ValueError(f"need M >= K >= 1, got M={self.M}, K={self.K}")
        if self.K_int < 0:
            raise ValueError("K_int must be >= 0")
        # N >= max M_c keeps every local sample covariance invertible a.s.
        if self.N < max(self.cluster_sizes):
            raise ValueError(f"N={self.N} must be >= max cluster size {max(self.cluster_sizes)}")
        if self.E_s <= 0:
            raise ValueError("E_s must be > 0")
        if self.constellation not in (4, 16, 64):
            raise ValueError(f"unsupported constellation order {self.constellation}")

    @classmethod
    def uniform(cls, M: int, C: int, **kwargs) -> "Scenario":
        """Scenario with M antennas split into C equal clusters."""
        if M % C != 0:
            raise ValueError(f"M={M} not divisible by C={C}")
        return cls(M=M, C=C, cluster_sizes=(M // C,) * C, **kwargs)

    def with_ratios(self, es_n0_db: float, iot_db: float | None) -> "Scenario":
        return replace(self, es_n0_db=es_n0_db, iot_db=iot_db)

    @property
    def slices(self) -> list[slice]:
        return cluster_slices(self.cluster_sizes)


def powers_from_ratios(scenario: Scenario) -> tuple[float, float, float]:
    """Map (E_s, Es/N0, IoT) to (sigma2_thermal, p_int, symbol_scale).

    Total interference power over total thermal power per antenna equals the
    IoT ratio, so per-user interference power carries a 1/K_int factor.
    """
    if scenario.db_ratios:
        es_n0 = 10.0 ** (scenario.es_n0_db / 10.0)
        iot = None if scenario.iot_db is None else 10.0 ** (scenario.iot_db / 10.0)
    else:
        es_n0 = scenario.es_n0_db
        iot = scenario.iot_db
    sigma2 = scenario.E_s / es_n0
    if scenario.K_int == 0:
        if iot is not None and iot > 0.0:
            raise ValueError("K_int=0 but iot_db requests nonzero interference power")
        p_int = 0.0
    else:
        p_int = 0.0 if iot is None else sigma2 * iot / scenario.K_int
    return sigma2, p_int, math.sqrt(scenario.E_s)


@dataclass(frozen=True)
class ChannelSet:
    """Target channel H (M x K) and interference channel H_int (M x K_int)."""
    H: np.ndarray
    H_int: np.ndarray
    cluster_sizes: tuple[int, ...]

    def block(self, c: int) -> np.ndarray:
        """Rows of H belonging to cluster c (an M_c x K view)."""
        return self.H[cluster_slices(self.cluster_sizes)[c]]

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.H[s] for s in cluster_slices(self.cluster_sizes)]


def build_channel(scenario: Scenario, rng: np.random.Generator | None = None) -> ChannelSet:
    """i.i.d. Rayleigh channels with log-uniform large-scale gains.

    Entry variance of column k is the linear gain of user k; gains are drawn
    uniformly in dB over scenario.gain_range_db.
    """
    if rng is None:
        rng = np.random.default_rng(scenario.seed)
    lo, hi = scenario.gain_range_db

    def draw(n_users: int) -> np.ndarray:
        gains_db = rng.uniform(lo, hi, size=n_users)
        gains = 10.0 ** (gains_db / 10.0)
        return crandn(rng, scenario.M, n_users) * np.sqrt(gains)[None, :]

    H = draw(scenario.K)
    H_int = draw(scenario.K_int)
    return ChannelSet(H=H, H_int=H_int, cluster_sizes=scenario.cluster_sizes)


def draw_colored_noise(channels: ChannelSet, sigma2: float, p_int: float,
                       n: int, rng: np.random.Generator) -> np.ndarray:
    """n columns of thermal-plus-interference noise, shape (M, n)."""
    M, K_int = channels.H_int.shape
    noise = np.sqrt(sigma2) * crandn(rng, M, n)
    if K_int > 0 and p_int > 0.0:
        x = crandn(rng, K_int, n)  # unit-power interference symbols
        noise = noise + np.sqrt(p_int) * (channels.H_int @ x)
    return noise


@dataclass(frozen=True)
class NoisePool:
    """N pilot-RE noise sample vectors, stored as columns of (M, N)."""
    samples: np.ndarray
    cluster_sizes: tuple[int, ...]
    sigma2_thermal: float
    p_int: float

    @property
    def N(self) -> int:
        return self.samples.shape[1]

    def block(self, c: int) -> np.ndarray:
        """Cluster-c rows of every sample, shape (M_c, N)."""
        return self.samples[cluster_slices(self.cluster_sizes)[c]]


def draw_noise_pool(channels: ChannelSet, scenario: Scenario,
                    rng: np.random.Generator | None = None) -> NoisePool:
    """Draw the N independent pilot-RE noise samples."""
    if rng is None:
        rng = np.random.default_rng(scenario.seed + 1)
    sigma2, p_int, _ = powers_from_ratios(scenario)
    samples = draw_colored_noise(channels, sigma2, p_int, scenario.N, rng)
    return NoisePool(samples=samples, cluster_sizes=scenario.cluster_sizes,
                     sigma2_thermal=sigma2, p_int=p_int)


@dataclass(frozen=True)
class Covariance:
    """M x M Hermitian PSD noise covariance with per-cluster block views."""
    full: np.ndarray
    cluster_sizes: tuple[int, ...]

    def block(self, m: int, n: int) -> np.ndarray:
        sl = cluster_slices(self.cluster_sizes)
        return self.full[sl[m], sl[n]]


def exact_covariance(channels: ChannelSet, scenario: Scenario) -> Covariance:
    """True covariance p_int * H_int H_int^H + sigma2 * I of the colored noise."""
    sigma2, p_int, _ = powers_from_ratios(scenario)
    M = channels.H.shape[0]
    full = sigma2 * np.eye(M, dtype=complex)
    if channels.H_int.shape[1] > 0 and p_int > 0.0:
        full = full + p_int * (channels.H_int @ channels.H_int.conj().T)
    return Covariance(full=full, cluster_sizes=scenario.cluster_sizes)


def sample_covariance(pool: NoisePool) -> Covariance:
    """Average of outer products over the pool, (1/N) sum_i n_i n_i^H."""
    if pool.N == 0:
        raise ValueError("noise pool is empty")
    full = pool.samples @ pool.samples.conj().T / pool.N
    return Covariance(full=full, cluster_sizes=pool.cluster_sizes)
