"""System model: scenarios, channel generation, stacked vectors, backhaul subsets.

Two operators share an uplink band. Operator ``i`` owns ``n_ues[i]``
single-antenna UEs and ``n_rus[i]`` radio units; RU ``(i, r)`` has
``n_antennas[i][r]`` antennas and a fronthaul link of ``fronthaul_capacity[i][r]``
bits/s to its cloud processor. The cloud processors exchange quantized
shared-band streams over backhaul links of ``backhaul_capacity[i]`` bits/s.

Index conventions used throughout the package:
  * operators are 0-based (``i`` in {0, 1}), ``other(i) = 1 - i``
  * band index ``m``: 0 = private, 1 = shared
  * ``h[j][k][i][r]`` is the channel from UE ``(j, k)`` into RU ``(i, r)``
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

M_PRIVATE = 0
M_SHARED = 1

RU_LAYOUTS = ("uniform", "ring")


def other(i: int) -> int:
    """The other operator's index."""
    return 1 - i


class ScenarioError(ValueError):
    """Raised when static problem data violates a model invariant."""


def _as_int_pair(x) -> tuple[int, int]:
    vals = tuple(int(v) for v in x)
    if len(vals) != 2:
        raise ScenarioError(f"expected one value per operator, got {x!r}")
    return vals


def _as_float_pair(x) -> tuple[float, float]:
    vals = tuple(float(v) for v in x)
    if len(vals) != 2:
        raise ScenarioError(f"expected one value per operator, got {x!r}")
    return vals


@dataclass(frozen=True)
class Scenario:
    """Static problem data for one two-tenant uplink instance.

    All capacities are in bits/s, bandwidth in Hz, powers in linear units.
    ``noise_psd`` is the per-sample noise power of the discrete-time model;
    with the default 1.0, an SNR of x dB corresponds to
    ``p_max = 10 ** (x / 10)``.
    """

    n_rus: tuple[int, int]
    n_ues: tuple[int, int]
    n_antennas: tuple[tuple[int, ...], tuple[int, ...]]
    fronthaul_capacity: tuple[tuple[float, ...], tuple[float, ...]]
    backhaul_capacity: tuple[float, float]
    total_bandwidth: float
    p_max: float
    privacy_threshold: float
    subset_size: tuple[int, int]
    noise_psd: float = 1.0
    cell_radius: float = 100.0
    d_ref: float = 50.0
    pathloss_exp: float = 3.0
    ru_layout: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "n_rus", _as_int_pair(self.n_rus))
        object.__setattr__(self, "n_ues", _as_int_pair(self.n_ues))
        object.__setattr__(
            self, "n_antennas",
            tuple(tuple(int(n) for n in per_op) for per_op in self.n_antennas))
        object.__setattr__(
            self, "fronthaul_capacity",
            tuple(tuple(float(c) for c in per_op) for per_op in self.fronthaul_capacity))
        object.__setattr__(self, "backhaul_capacity", _as_float_pair(self.backhaul_capacity))
        object.__setattr__(self, "subset_size", _as_int_pair(self.subset_size))
        object.__setattr__(self, "total_bandwidth", float(self.total_bandwidth))
        object.__setattr__(self, "p_max", float(self.p_max))
        object.__setattr__(self, "privacy_threshold", float(self.privacy_threshold))
        object.__setattr__(self, "noise_psd", float(self.noise_psd))
        object.__setattr__(self, "cell_radius", float(self.cell_radius))
        object.__setattr__(self, "d_ref", float(self.d_ref))
        object.__setattr__(self, "pathloss_exp", float(self.pathloss_exp))
        self._validate()

    @property
    def n_operators(self) -> int:
        return 2

    def _validate(self) -> None:
        for i in range(2):
            if self.n_rus[i] < 0 or self.n_ues[i] < 0:
                raise ScenarioError("counts must be nonnegative")
            if len(self.n_antennas[i]) != self.n_rus[i]:
                raise ScenarioError(
                    f"operator {i}: n_antennas must list one count per RU")
            if len(self.fronthaul_capacity[i]) != self.n_rus[i]:
                raise ScenarioError(
                    f"operator {i}: fronthaul_capacity must list one value per RU")
            if any(n <= 0 for n in self.n_antennas[i]):
                raise ScenarioError("antenna counts must be positive")
            if any(c <= 0 for c in self.fronthaul_capacity[i]):
                raise ScenarioError("fronthaul capacities must be positive")
            if self.backhaul_capacity[i] <= 0:
                raise ScenarioError("backhaul capacities must be positive")
            if not 0 <= self.subset_size[i] <= self.n_rus[i]:
                raise ScenarioError(
                    f"subset_size[{i}] must lie in [0, n_rus[{i}]]")
        if self.total_bandwidth <= 0:
            raise ScenarioError("total_bandwidth must be positive")
        if self.p_max <= 0:
            raise ScenarioError("p_max must be positive")
        if self.noise_psd <= 0:
            raise ScenarioError("noise_psd must be positive")
        if self.privacy_threshold < 0:
            raise ScenarioError("privacy_threshold must be nonnegative")
        if self.cell_radius < 0 or self.d_ref <= 0:
            raise ScenarioError("geometry parameters out of range")
        if self.ru_layout not in RU_LAYOUTS:
            raise ScenarioError(f"ru_layout must be one of {RU_LAYOUTS}")

    def antenna_total(self, i: int) -> int:
        """Total antenna count over operator ``i``'s own RUs."""
        return int(sum(self.n_antennas[i]))


def snr_db_to_p_max(snr_db: float, noise_psd: float = 1.0) -> float:
    """Transmit power budget corresponding to an SNR of ``snr_db`` dB."""
    return noise_psd * 10.0 ** (snr_db / 10.0)


@dataclass(frozen=True)
class Placement:
    """UE and RU coordinates, one (n, 2) array per operator."""

    ue_xy: tuple[np.ndarray, np.ndarray]
    ru_xy: tuple[np.ndarray, np.ndarray]


def _uniform_disk(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.uniform(size=n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _ring(n: int, radius: float) -> np.ndarray:
    # deterministic fallback layout: evenly spaced on a circle at half radius
    theta = 2.0 * np.pi * np.arange(n) / max(n, 1)
    rr = 0.5 * radius
    return np.column_stack([rr * np.cos(theta), rr * np.sin(theta)])


def generate_scenario_geometry(scenario: Scenario, seed: int) -> Placement:
    """Draw UE and RU positions inside the cell disk, deterministically per seed."""
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x9E0])
    ue_xy = []
    ru_xy = []
    for i in range(2):
        ue_xy.append(_uniform_disk(rng, scenario.n_ues[i], scenario.cell_radius))
        if scenario.ru_layout == "uniform":
            ru_xy.append(_uniform_disk(rng, scenario.n_rus[i], scenario.cell_radius))
        else:
            ru_xy.append(_ring(scenario.n_rus[i], scenario.cell_radius))
    return Placement(ue_xy=(ue_xy[0], ue_xy[1]), ru_xy=(ru_xy[0], ru_xy[1]))


def pathloss_gain(distance, d_ref: float, pathloss_exp: float):
    """Per-entry channel variance 1 / (1 + (d / d_ref)^alpha)."""
    d = np.asarray(distance, dtype=float)
    return 1.0 / (1.0 + (d / d_ref) ** pathloss_exp)


@dataclass(frozen=True)
class ChannelSet:
    """All per-link channel vectors plus the derived stacks and backhaul subsets.

    ``h[j][k][i][r]`` is the complex vector (length ``n_antennas[i][r]``) from
    UE ``(j, k)`` to RU ``(i, r)``. The stacks follow the declared RU order
    with no renormalization:

      * ``stacked_private[i][k]``: UE (i, k) into operator i's own RUs.
      * ``stacked_shared_own[i][k]``: UE (i, k) into the shared-band
        observation of its own CP (own RUs, then the other operator's
        subset RUs in subset order).
      * ``stacked_shared_cross[i][k]``: UE (i, k) into the shared-band
        observation of the other CP (all of the other operator's RUs,
        then own RUs in ``subset[i]`` order).
    """

    scenario: Scenario
    h: tuple  # h[j][k][i][r] -> complex ndarray
    subset: tuple[tuple[int, ...], tuple[int, ...]]
    stacked_private: tuple
    stacked_shared_own: tuple
    stacked_shared_cross: tuple

    def obs_dim_private(self, i: int) -> int:
        """Dimension of CP i's private-band observation stack."""
        return self.scenario.antenna_total(i)

    def obs_dim_shared(self, i: int) -> int:
        """Dimension of CP i's shared-band observation stack (own + borrowed)."""
        sc = self.scenario
        j = other(i)
        return sc.antenna_total(i) + int(sum(sc.n_antennas[j][r] for r in self.subset[j]))

    def with_subset_size(self, subset_size: tuple[int, int]) -> "ChannelSet":
        """Rebuild the derived stacks for a different subset size, same fading."""
        scenario = replace(self.scenario, subset_size=tuple(int(s) for s in subset_size))
        return _assemble_channel_set(scenario, self.h)


def generate_channels(scenario: Scenario, placement: Placement, seed: int) -> ChannelSet:
    """Draw Rayleigh-faded channels for every UE-RU link and build the stacks.

    Each entry of ``h[j][k][i][r]`` is an independent complex Gaussian with
    per-entry variance ``1 / (1 + (d / d_ref)^alpha)`` where ``d`` is the
    UE (j, k) to RU (i, r) distance.
    """
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x9E1])
    h = []
    for j in range(2):
        per_ue = []
        for k in range(scenario.n_ues[j]):
            per_op = []
            for i in range(2):
                per_ru = []
                for r in range(scenario.n_rus[i]):
                    d = float(np.linalg.norm(
                        placement.ue_xy[j][k] - placement.ru_xy[i][r]))
                    gain = pathloss_gain(d, scenario.d_ref, scenario.pathloss_exp)
                    n = scenario.n_antennas[i][r]
                    std = np.sqrt(gain / 2.0)
                    vec = std * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
                    per_ru.append(vec)
                per_op.append(tuple(per_ru))
            per_ue.append(tuple(per_op))
        h.append(tuple(per_ue))
    return _assemble_channel_set(scenario, tuple(h))


def cross_channel_norm(scenario: Scenario, h, i: int, r: int) -> float:
    """Euclidean norm of the stack of all other-tenant UE channels into RU (i, r)."""
    j = other(i)
    sq = 0.0
    for k in range(scenario.n_ues[j]):
        sq += float(np.sum(np.abs(h[j][k][i][r]) ** 2))
    return float(np.sqrt(sq))


def select_backhaul_subset(scenario: Scenario, h) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Pick, per operator, the RUs with largest cross-tenant stacked channel norm.

    Returns ordered index tuples of size ``subset_size[i]``; ties break toward
    the lower RU index so results are reproducible.
    """
    subsets = []
    for i in range(2):
        norms = np.array([cross_channel_norm(scenario, h, i, r)
                          for r in range(scenario.n_rus[i])])
        # stable sort on -norm keeps the lowest index first among ties
        order = np.argsort(-norms, kind="stable")
        chosen = sorted(int(r) for r in order[: scenario.subset_size[i]])
        subsets.append(tuple(chosen))
    return (subsets[0], subsets[1])


def _stack(vectors: Sequence[np.ndarray]) -> np.ndarray:
    if not vectors:
        return np.zeros(0, dtype=complex)
    return np.concatenate([np.asarray(v, dtype=complex) for v in vectors])


def _assemble_channel_set(scenario: Scenario, h) -> ChannelSet:
    subset = select_backhaul_subset(scenario, h)
    stacked_private = []
    stacked_shared_own = []
    stacked_shared_cross = []
    for i in range(2):
        j = other(i)
        priv, own, cross = [], [], []
        for k in range(scenario.n_ues[i]):
            priv.append(_stack([h[i][k][i][r] for r in range(scenario.n_rus[i])]))
            own.append(_stack(
                [h[i][k][i][r] for r in range(scenario.n_rus[i])]
                + [h[i][k][j][r] for r in subset[j]]))
            cross.append(_stack(
                [h[i][k][j][r] for r in range(scenario.n_rus[j])]
                + [h[i][k][i][r] for r in subset[i]]))
        stacked_private.append(tuple(priv))
        stacked_shared_own.append(tuple(own))
        stacked_shared_cross.append(tuple(cross))
    return ChannelSet(
        scenario=scenario,
        h=h,
        subset=subset,
        stacked_private=tuple(stacked_private),
        stacked_shared_own=tuple(stacked_shared_own),
        stacked_shared_cross=tuple(stacked_shared_cross),
    )


def channel_set_from_links(scenario: Scenario, h) -> ChannelSet:
    """Build a ChannelSet from explicit per-link vectors (tests, file import)."""
    h_t = tuple(
        tuple(
            tuple(tuple(np.asarray(h[j][k][i][r], dtype=complex)
                        for r in range(scenario.n_rus[i]))
                  for i in range(2))
            for k in range(scenario.n_ues[j]))
        for j in range(2))
    return _assemble_channel_set(scenario, h_t)


def iter_links(scenario: Scenario):
    """Canonical (j, k, i, r) link order used by the channel dump format."""
    for j in range(2):
        for k in range(scenario.n_ues[j]):
            for i in range(2):
                for r in range(scenario.n_rus[i]):
                    yield j, k, i, r


def export_channels(channels: ChannelSet, path: str) -> None:
    """Write the channel set as a text matrix dump.

    One row per link in ``iter_links`` order; columns are the interleaved
    real/imag parts of the channel vector entries. Rows are ragged when RU
    antenna counts differ.
    """
    with open(path, "w") as fh:
        for j, k, i, r in iter_links(channels.scenario):
            vec = channels.h[j][k][i][r]
            parts = []
            for z in vec:
                parts.append(repr(float(z.real)))
                parts.append(repr(float(z.imag)))
            fh.write(" ".join(parts) + "\n")


def import_channels(scenario: Scenario, path: str) -> ChannelSet:
    """Read a channel dump written by :func:`export_channels`."""
    with open(path) as fh:
        rows = [line.split() for line in fh if line.strip()]
    links = list(iter_links(scenario))
    if len(rows) != len(links):
        raise ScenarioError(
            f"channel dump has {len(rows)} rows, scenario needs {len(links)}")
    h: list = [[[[None for _ in range(scenario.n_rus[i])] for i in range(2)]
                for _ in range(scenario.n_ues[j])] for j in range(2)]
    for row, (j, k, i, r) in zip(rows, links):
        n = scenario.n_antennas[i][r]
        if len(row) != 2 * n:
            raise ScenarioError(
                f"link ({j},{k},{i},{r}): expected {2 * n} columns, got {len(row)}")
        vals = np.array([float(x) for x in row])
        h[j][k][i][r] = vals[0::2] + 1j * vals[1::2]
    return channel_set_from_links(scenario, h)
