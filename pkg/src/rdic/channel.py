"""Rank-deficient channel synthesis.

Each link matrix is a sum of rank-one outer products ``a b^T`` (plain
transpose, no conjugation), with ``D[j][i]`` terms for the link from
transmitter ``i`` to receiver ``j``. Indices are 0-based in Python and
1-based in serialized files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numkernel import DEFAULT_TOL, Tolerance, rank_tol


class ConfigError(ValueError):
    """A network configuration violates its invariants."""


class DegenerateDrawError(RuntimeError):
    """A generated matrix missed its prescribed rank; retry with another seed."""


@dataclass(frozen=True)
class NetworkConfig:
    K: int
    tx_antennas: tuple[int, ...]
    rx_antennas: tuple[int, ...]
    rank_map: tuple[tuple[int, ...], ...]  # rank_map[j][i]: tx i -> rx j

    def __post_init__(self):
        object.__setattr__(self, "tx_antennas", tuple(int(m) for m in self.tx_antennas))
        object.__setattr__(self, "rx_antennas", tuple(int(n) for n in self.rx_antennas))
        object.__setattr__(self, "rank_map", tuple(tuple(int(d) for d in row) for row in self.rank_map))
        K = self.K
        if K < 2:
            raise ConfigError(f"need at least two users, got K={K}")
        if len(self.tx_antennas) != K or len(self.rx_antennas) != K:
            raise ConfigError("antenna lists must have one entry per user")
        if len(self.rank_map) != K or any(len(r) != K for r in self.rank_map):
            raise ConfigError("rank_map must be K x K")
        if min(self.tx_antennas + self.rx_antennas) < 1:
            raise ConfigError("every node needs at least one antenna")
        for j in range(K):
            for i in range(K):
                d = self.rank_map[j][i]
                cap = min(self.tx_antennas[i], self.rx_antennas[j])
                if not 0 <= d <= cap:
                    raise ConfigError(
                        f"D[{j + 1},{i + 1}]={d} outside [0, min(M_{i + 1}, N_{j + 1})={cap}]")

    def rank(self, j: int, i: int) -> int:
        return self.rank_map[j][i]

    def to_dict(self) -> dict:
        return {"K": self.K, "tx_antennas": list(self.tx_antennas),
                "rx_antennas": list(self.rx_antennas),
                "rank_map": [list(r) for r in self.rank_map]}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(int(d["K"]), d["tx_antennas"], d["rx_antennas"], d["rank_map"])

    @classmethod
    def two_user(cls, M1, M2, N1, N2, D11, D12, D21, D22) -> "NetworkConfig":
        return cls(2, (M1, M2), (N1, N2), ((D11, D12), (D21, D22)))


@dataclass(frozen=True)
class SymmetricConfig:
    """All nodes carry ``M`` antennas; direct links rank ``D_d``, cross links ``D_c``."""

    K: int
    M: int
    D_d: int
    D_c: int

    def __post_init__(self):
        if self.K < 2:
            raise ConfigError(f"need at least two users, got K={self.K}")
        if self.M < 1:
            raise ConfigError("M must be positive")
        if not (0 <= self.D_d <= self.M and 0 <= self.D_c <= self.M):
            raise ConfigError(f"ranks must lie in [0, M]: D_d={self.D_d}, D_c={self.D_c}, M={self.M}")

    def network(self) -> NetworkConfig:
        K = self.K
        ranks = tuple(tuple(self.D_d if j == i else self.D_c for i in range(K)) for j in range(K))
        return NetworkConfig(K, (self.M,) * K, (self.M,) * K, ranks)


def as_network(config) -> NetworkConfig:
    return config.network() if isinstance(config, SymmetricConfig) else config


def symmetric_view(config: NetworkConfig) -> SymmetricConfig | None:
    """Recover the symmetric parameters of `config`, or None if it is not symmetric."""
    K = config.K
    M = config.tx_antennas[0]
    if set(config.tx_antennas) != {M} or set(config.rx_antennas) != {M}:
        return None
    D_d = config.rank_map[0][0]
    D_c = config.rank_map[1][0]
    for j in range(K):
        for i in range(K):
            if config.rank_map[j][i] != (D_d if i == j else D_c):
                return None
    return SymmetricConfig(K, M, D_d, D_c)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator keyed by `seed` and an integer path `key`.

    Sub-streams depend only on their key, never on the order in which other
    streams were consumed.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly symmetric CN(0, 1) draws: two independent N(0, 1/2) parts."""
    z = rng.standard_normal(tuple(np.atleast_1d(shape)) + (2,)) * np.sqrt(0.5)
    return z[..., 0] + 1j * z[..., 1]


# stream namespace for channel factors
_CHANNEL_STREAM = 0


@dataclass(frozen=True)
class ChannelInstance:
    config: NetworkConfig
    seed: int
    # factors[(j, i)] = list of (a, b) with a: (N_j,), b: (M_i,)
    factors: dict = field(repr=False)
    matrices: dict = field(repr=False)

    def H(self, j: int, i: int) -> np.ndarray:
        """Channel from transmitter `i` to receiver `j`, indices taken mod K."""
        K = self.config.K
        return self.matrices[(j % K, i % K)]

    @property
    def K(self) -> int:
        return self.config.K

    def to_dict(self) -> dict:
        fac = {}
        for (j, i), terms in sorted(self.factors.items()):
            fac[f"{j + 1},{i + 1}"] = [
                {"a": [[float(z.real), float(z.imag)] for z in a],
                 "b": [[float(z.real), float(z.imag)] for z in b]}
                for a, b in terms]
        return {"config": self.config.to_dict(), "seed": int(self.seed), "factors": fac}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelInstance":
        config = NetworkConfig.from_dict(d["config"])
        factors = {}
        for key, terms in d["factors"].items():
            j, i = (int(t) - 1 for t in key.split(","))
            factors[(j, i)] = [
                (np.array([complex(re, im) for re, im in t["a"]], dtype=np.complex128),
                 np.array([complex(re, im) for re, im in t["b"]], dtype=np.complex128))
                for t in terms]
        for j in range(config.K):
            for i in range(config.K):
                if len(factors.get((j, i), [])) != config.rank(j, i):
                    raise ConfigError(f"factor count for link {j + 1},{i + 1} does not match rank_map")
        return cls(config, int(d["seed"]), factors, _assemble(config, factors))

    @classmethod
    def from_json(cls, source) -> "ChannelInstance":
        p = Path(source) if not str(source).lstrip().startswith("{") else None
        text = p.read_text() if p is not None else str(source)
        return cls.from_dict(json.loads(text))


def _assemble(config: NetworkConfig, factors: dict) -> dict:
    mats = {}
    for j in range(config.K):
        for i in range(config.K):
            H = np.zeros((config.rx_antennas[j], config.tx_antennas[i]), dtype=np.complex128)
            for a, b in factors[(j, i)]:
                H = H + np.outer(a, b)
            mats[(j, i)] = H
    return mats


@dataclass
class RankReport:
    entries: list  # (j, i, measured, expected, ok), 0-based

    @property
    def passed(self) -> bool:
        return all(e[4] for e in self.entries)

    def failures(self) -> list:
        return [e for e in self.entries if not e[4]]


def validate(instance: ChannelInstance, tol: Tolerance = DEFAULT_TOL) -> RankReport:
    """Compare the measured rank of every link with its prescribed rank."""
    cfg = instance.config
    entries = []
    for j in range(cfg.K):
        for i in range(cfg.K):
            r = rank_tol(instance.matrices[(j, i)], tol)
            d = cfg.rank(j, i)
            entries.append((j, i, r, d, r == d))
    return RankReport(entries)


def generate(config, seed: int, tol: Tolerance = DEFAULT_TOL) -> ChannelInstance:
    """Draw a channel instance for `config` from the stream keyed by `seed`."""
    config = as_network(config)
    factors = {}
    for j in range(config.K):
        for i in range(config.K):
            terms = []
            for k in range(config.rank(j, i)):
                rng = substream(seed, _CHANNEL_STREAM, j, i, k)
                a = complex_gaussian(rng, config.rx_antennas[j])
                b = complex_gaussian(rng, config.tx_antennas[i])
                terms.append((a, b))
            factors[(j, i)] = terms
    inst = ChannelInstance(config, int(seed), factors, _assemble(config, factors))
    report = validate(inst, tol)
    if not report.passed:
        j, i, r, d, _ = report.failures()[0]
        raise DegenerateDrawError(f"seed {seed}: link {j + 1},{i + 1} has rank {r}, expected {d}")
    return inst
