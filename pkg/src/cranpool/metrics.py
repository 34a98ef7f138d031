"""Analytic rate, compression and leakage functions plus constraint residuals.

All per-band spectral quantities (``quantization_rate_*``, ``rate_*``,
``privacy_leakage``) are in bits/s/Hz; multiplying by the band width in Hz
gives bits/s, which is how every capacity constraint is evaluated.

Every function here is pure in (channels, design) and safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import ChannelSet, M_PRIVATE, M_SHARED, Scenario, other

LN2 = float(np.log(2.0))


class InvalidDesignError(ValueError):
    """Raised when a design contains non-finite entries."""


@dataclass(frozen=True)
class BandAllocation:
    """Bandwidth split: two private subbands plus one shared subband (Hz)."""

    w_private: tuple[float, float]
    w_shared: float

    def __post_init__(self):
        object.__setattr__(self, "w_private",
                           (float(self.w_private[0]), float(self.w_private[1])))
        object.__setattr__(self, "w_shared", float(self.w_shared))
        if min(self.w_private) < 0 or self.w_shared < 0:
            raise ValueError("bandwidths must be nonnegative")

    def total(self) -> float:
        return self.w_private[0] + self.w_private[1] + self.w_shared

    def width(self, i: int, m: int) -> float:
        return self.w_private[i] if m == M_PRIVATE else self.w_shared


@dataclass
class DesignPoint:
    """Decision variables: band widths, power scalars, quantizers, rates.

    ``power[i]`` has shape (n_ues[i], 2) with columns (private, shared);
    entries are nonnegative reals (phases can be fixed to zero without loss,
    every metric depends on powers only through magnitudes).
    ``quantizer[i][r]`` has shape (2, n, n) complex with leading index the
    band. ``rates[i]`` has shape (n_ues[i], 2) in bits/s.
    """

    bands: BandAllocation
    power: list
    quantizer: list
    rates: list

    def copy(self) -> "DesignPoint":
        return DesignPoint(
            bands=self.bands,
            power=[p.copy() for p in self.power],
            quantizer=[[q.copy() for q in per_op] for per_op in self.quantizer],
            rates=[r.copy() for r in self.rates],
        )

    def check_finite(self) -> None:
        for i in range(2):
            if not np.all(np.isfinite(self.power[i])):
                raise InvalidDesignError("invalid design: non-finite power")
            for q in self.quantizer[i]:
                if not np.all(np.isfinite(q.view(float))):
                    raise InvalidDesignError("invalid design: non-finite quantizer")

    def sum_rate(self) -> float:
        return float(sum(r.sum() for r in self.rates))


def zero_design(scenario: Scenario, bands: BandAllocation | None = None) -> DesignPoint:
    if bands is None:
        bands = BandAllocation((0.0, 0.0), 0.0)
    power = [np.zeros((scenario.n_ues[i], 2)) for i in range(2)]
    quantizer = [
        [np.zeros((2, n, n), dtype=complex) for n in scenario.n_antennas[i]]
        for i in range(2)
    ]
    rates = [np.zeros((scenario.n_ues[i], 2)) for i in range(2)]
    return DesignPoint(bands=bands, power=power, quantizer=quantizer, rates=rates)


def logdet2_psd(mat: np.ndarray) -> float:
    """log2 det of a Hermitian matrix that is guaranteed >= I."""
    if mat.shape[0] == 0:
        return 0.0
    chol = np.linalg.cholesky(mat)
    return float(2.0 * np.sum(np.log(np.abs(np.diag(chol)))) / LN2)


def _signal_matrix(columns: list[np.ndarray], dim: int) -> np.ndarray:
    """Stack signal columns (already scaled by power) into a dim x n matrix."""
    if not columns:
        return np.zeros((dim, 0), dtype=complex)
    return np.column_stack(columns)


def block_diag_private(channels: ChannelSet, design: DesignPoint, i: int) -> np.ndarray:
    """Block-diagonal private-band quantizer over operator i's own RUs."""
    blocks = [design.quantizer[i][r][M_PRIVATE]
              for r in range(channels.scenario.n_rus[i])]
    if not blocks:
        return np.zeros((0, 0), dtype=complex)
    return scipy.linalg.block_diag(*blocks)


def block_diag_shared(channels: ChannelSet, design: DesignPoint, i: int) -> np.ndarray:
    """Block-diagonal shared-band quantizer for CP i's observation stack.

    Own RUs come first, then the other operator's subset RUs in subset order,
    matching the stacked channel layout.
    """
    j = other(i)
    blocks = [design.quantizer[i][r][M_SHARED]
              for r in range(channels.scenario.n_rus[i])]
    blocks += [design.quantizer[j][r][M_SHARED] for r in channels.subset[j]]
    if not blocks:
        return np.zeros((0, 0), dtype=complex)
    return scipy.linalg.block_diag(*blocks)


def quantization_covariance(channels: ChannelSet, design: DesignPoint,
                            i: int, r: int, m: int) -> np.ndarray:
    """Covariance of RU (i, r)'s quantized band-m signal (noise floor I included)."""
    sc = channels.scenario
    L = design.quantizer[i][r][m]
    n = L.shape[0]
    ops = [i] if m == M_PRIVATE else [0, 1]
    cols = [L @ channels.h[j][k][i][r] * design.power[j][k, m]
            for j in ops for k in range(sc.n_ues[j])]
    A = _signal_matrix(cols, n)
    return A @ A.conj().T + sc.noise_psd * (L @ L.conj().T) + np.eye(n)


def quantization_rate_private(channels: ChannelSet, design: DesignPoint,
                              i: int, r: int) -> float:
    """Bits/s/Hz needed to forward RU (i, r)'s quantized private-band signal."""
    design.check_finite()
    return logdet2_psd(quantization_covariance(channels, design, i, r, M_PRIVATE))


def quantization_rate_shared(channels: ChannelSet, design: DesignPoint,
                             i: int, r: int) -> float:
    """Bits/s/Hz for RU (i, r)'s shared-band signal, both tenants included."""
    design.check_finite()
    return logdet2_psd(quantization_covariance(channels, design, i, r, M_SHARED))


def _interference_private(channels: ChannelSet, design: DesignPoint,
                          i: int, k: int, Lbar: np.ndarray) -> np.ndarray:
    """J for the private-band SUD decoder of UE (i, k)."""
    sc = channels.scenario
    n = Lbar.shape[0]
    cols = [Lbar @ channels.stacked_private[i][l] * design.power[i][l, M_PRIVATE]
            for l in range(sc.n_ues[i]) if l != k]
    A = _signal_matrix(cols, n)
    return A @ A.conj().T + sc.noise_psd * (Lbar @ Lbar.conj().T) + np.eye(n)


def rate_private(channels: ChannelSet, design: DesignPoint, i: int, k: int) -> float:
    """Achievable private-band spectral efficiency of UE (i, k) under SUD."""
    design.check_finite()
    Lbar = block_diag_private(channels, design, i)
    if Lbar.shape[0] == 0:
        return 0.0
    J = _interference_private(channels, design, i, k, Lbar)
    a = Lbar @ channels.stacked_private[i][k] * design.power[i][k, M_PRIVATE]
    sinr = float(np.real(a.conj() @ np.linalg.solve(J, a)))
    return float(np.log2(1.0 + max(sinr, 0.0)))


def _interference_shared(channels: ChannelSet, design: DesignPoint,
                         i: int, k: int, Ltil: np.ndarray) -> np.ndarray:
    """J for the shared-band SUD decoder of UE (i, k) at CP i."""
    sc = channels.scenario
    j = other(i)
    n = Ltil.shape[0]
    cols = [Ltil @ channels.stacked_shared_own[i][l] * design.power[i][l, M_SHARED]
            for l in range(sc.n_ues[i]) if l != k]
    cols += [Ltil @ channels.stacked_shared_cross[j][l] * design.power[j][l, M_SHARED]
             for l in range(sc.n_ues[j])]
    A = _signal_matrix(cols, n)
    return A @ A.conj().T + sc.noise_psd * (Ltil @ Ltil.conj().T) + np.eye(n)


def rate_shared(channels: ChannelSet, design: DesignPoint, i: int, k: int) -> float:
    """Shared-band spectral efficiency of UE (i, k), borrowed streams included."""
    design.check_finite()
    Ltil = block_diag_shared(channels, design, i)
    if Ltil.shape[0] == 0:
        return 0.0
    J = _interference_shared(channels, design, i, k, Ltil)
    a = Ltil @ channels.stacked_shared_own[i][k] * design.power[i][k, M_SHARED]
    sinr = float(np.real(a.conj() @ np.linalg.solve(J, a)))
    return float(np.log2(1.0 + max(sinr, 0.0)))


def rate(channels: ChannelSet, design: DesignPoint, i: int, k: int, m: int) -> float:
    if m == M_PRIVATE:
        return rate_private(channels, design, i, k)
    return rate_shared(channels, design, i, k)


def privacy_covariances(channels: ChannelSet, design: DesignPoint,
                        i: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Covariance of CP ``other(i)``'s shared observation, with and without
    UE (i, k)'s signal column."""
    sc = channels.scenario
    j = other(i)
    Ltil = block_diag_shared(channels, design, j)
    n = Ltil.shape[0]
    cols_other = [Ltil @ channels.stacked_shared_own[j][l] * design.power[j][l, M_SHARED]
                  for l in range(sc.n_ues[j])]
    cols_wo = [Ltil @ channels.stacked_shared_cross[i][l] * design.power[i][l, M_SHARED]
               for l in range(sc.n_ues[i]) if l != k]
    base = _signal_matrix(cols_other + cols_wo, n)
    cov_wo = base @ base.conj().T + sc.noise_psd * (Ltil @ Ltil.conj().T) + np.eye(n)
    a = Ltil @ channels.stacked_shared_cross[i][k] * design.power[i][k, M_SHARED]
    cov_full = cov_wo + np.outer(a, a.conj())
    return cov_full, cov_wo


def privacy_leakage(channels: ChannelSet, design: DesignPoint, i: int, k: int) -> float:
    """Bits/s/Hz that UE (i, k)'s shared-band signal leaks to the other CP."""
    design.check_finite()
    cov_full, cov_wo = privacy_covariances(channels, design, i, k)
    if cov_full.shape[0] == 0:
        return 0.0
    return max(logdet2_psd(cov_full) - logdet2_psd(cov_wo), 0.0)


def refresh_rates(channels: ChannelSet, design: DesignPoint) -> None:
    """Set every rate variable to its achievable bound W * f (in place)."""
    sc = channels.scenario
    for i in range(2):
        for k in range(sc.n_ues[i]):
            wp = design.bands.w_private[i]
            ws = design.bands.w_shared
            design.rates[i][k, M_PRIVATE] = (
                wp * rate_private(channels, design, i, k) if wp > 0 else 0.0)
            design.rates[i][k, M_SHARED] = (
                ws * rate_shared(channels, design, i, k) if ws > 0 else 0.0)


@dataclass
class ConstraintReport:
    """Signed slacks of every constraint; nonnegative means satisfied."""

    private_rate_slack: list    # [i] -> (n_ues,) bits/s
    shared_rate_slack: list     # [i] -> (n_ues,) bits/s
    fronthaul_slack: list       # [i] -> (n_rus,) bits/s
    backhaul_slack: np.ndarray  # (2,) bits/s
    privacy_slack: list         # [i] -> (n_ues,) bits/s
    power_slack: list           # [i] -> (n_ues, 2) power
    bandwidth_residual: float   # Hz, signed (W - sum of widths)
    scales: dict = field(default_factory=dict)

    def _entries(self):
        for i in range(2):
            for k in range(len(self.private_rate_slack[i])):
                yield f"private_rate_slack.{i}.{k}", self.private_rate_slack[i][k], self.scales["rate"]
                yield f"shared_rate_slack.{i}.{k}", self.shared_rate_slack[i][k], self.scales["rate"]
                yield f"privacy_slack.{i}.{k}", self.privacy_slack[i][k], self.scales["privacy"]
                yield f"power_slack.{i}.{k}.private", self.power_slack[i][k, 0], self.scales["power"]
                yield f"power_slack.{i}.{k}.shared", self.power_slack[i][k, 1], self.scales["power"]
            for r in range(len(self.fronthaul_slack[i])):
                yield f"fronthaul_slack.{i}.{r}", self.fronthaul_slack[i][r], self.scales["fronthaul"]
            yield f"backhaul_slack.{i}", self.backhaul_slack[i], self.scales["backhaul"]
        yield "bandwidth_residual", -abs(self.bandwidth_residual), self.scales["bandwidth"]

    def max_relative_violation(self) -> float:
        """Largest constraint violation, scaled by each constraint's magnitude."""
        worst = 0.0
        for _, slack, scale in self._entries():
            worst = max(worst, -float(slack) / scale)
        return worst

    def is_feasible(self, tol: float = 1e-6) -> bool:
        return self.max_relative_violation() <= tol

    def to_text(self) -> str:
        """Flat key/value block used by the CLI validate output."""
        lines = [f"{key} = {float(val):.9e}" for key, val, _ in self._entries()]
        lines.append(f"max_relative_violation = {self.max_relative_violation():.9e}")
        return "\n".join(lines)


def constraint_report(channels: ChannelSet, scenario: Scenario,
                      design: DesignPoint) -> ConstraintReport:
    """Evaluate every constraint of the joint design problem as a signed slack."""
    wp = design.bands.w_private
    ws = design.bands.w_shared
    private_rate, shared_rate, privacy, power = [], [], [], []
    fronthaul = []
    backhaul = np.zeros(2)
    for i in range(2):
        n_ue = scenario.n_ues[i]
        pr = np.zeros(n_ue)
        sr = np.zeros(n_ue)
        pv = np.zeros(n_ue)
        for k in range(n_ue):
            pr[k] = wp[i] * rate_private(channels, design, i, k) - design.rates[i][k, M_PRIVATE]
            sr[k] = ws * rate_shared(channels, design, i, k) - design.rates[i][k, M_SHARED]
            pv[k] = scenario.privacy_threshold - ws * privacy_leakage(channels, design, i, k)
        private_rate.append(pr)
        shared_rate.append(sr)
        privacy.append(pv)
        power.append(scenario.p_max - design.power[i] ** 2)
        fh = np.zeros(scenario.n_rus[i])
        for r in range(scenario.n_rus[i]):
            used = (wp[i] * quantization_rate_private(channels, design, i, r)
                    + ws * quantization_rate_shared(channels, design, i, r))
            fh[r] = scenario.fronthaul_capacity[i][r] - used
        fronthaul.append(fh)
        bh_used = ws * sum(quantization_rate_shared(channels, design, i, r)
                           for r in channels.subset[i])
        backhaul[i] = scenario.backhaul_capacity[i] - bh_used
    residual = scenario.total_bandwidth - design.bands.total()
    fh_caps = [c for per_op in scenario.fronthaul_capacity for c in per_op]
    scales = {
        "rate": max(scenario.total_bandwidth, 1.0),
        "fronthaul": max(min(fh_caps), 1.0) if fh_caps else 1.0,
        "backhaul": max(min(scenario.backhaul_capacity), 1.0),
        "privacy": max(scenario.privacy_threshold, scenario.total_bandwidth * 1e-3, 1.0),
        "power": max(scenario.p_max, 1.0),
        "bandwidth": max(scenario.total_bandwidth, 1.0),
    }
    return ConstraintReport(
        private_rate_slack=private_rate,
        shared_rate_slack=shared_rate,
        fronthaul_slack=fronthaul,
        backhaul_slack=backhaul,
        privacy_slack=privacy,
        power_slack=power,
        bandwidth_residual=residual,
        scales=scales,
    )


def secrecy_sum_rate(design: DesignPoint, scenario: Scenario) -> float:
    """Sum over UEs of max(R_total - privacy_threshold, 0), bits/s."""
    total = 0.0
    for i in range(2):
        per_ue = design.rates[i].sum(axis=1)
        total += float(np.sum(np.maximum(per_ue - scenario.privacy_threshold, 0.0)))
    return total


# ---------------------------------------------------------------------------
# Sampling oracle (test-only): estimates the Gaussian mutual information that
# the analytic formulas above compute in closed form, by simulating the
# transmit/receive/quantize chain and forming empirical covariances.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObservationModel:
    """Linear observation ``y = G s + sqrt(N0) F z + q`` with target
    ``t = T_s s + sqrt(N0) T_z z``; ``s``, ``z``, ``q`` are unit complex
    Gaussians. The oracle estimates I(t; y) in bits."""

    signal_map: np.ndarray    # G, (n_obs, n_s)
    target_signal: np.ndarray  # T_s, (n_t, n_s)
    noise_map: np.ndarray     # F, (n_obs, n_z)
    target_noise: np.ndarray  # T_z, (n_t, n_z)
    noise_power: float

    def dims(self) -> tuple[int, int, int, int]:
        n_obs, n_s = self.signal_map.shape
        n_t = self.target_signal.shape[0]
        n_z = self.noise_map.shape[1]
        return n_obs, n_s, n_z, n_t


def mi_sampling_oracle(model: ObservationModel, n_samples: int, seed: int,
                       chunk: int = 200_000) -> float:
    """Monte Carlo estimate of I(t; y) in bits from empirical covariances.

    Standard error shrinks as 1/sqrt(n_samples). Intended for tests only;
    the production path is the closed-form log-det evaluation.
    """
    if n_samples < 10_000:
        raise ValueError("insufficient samples: need at least 10^4")
    n_obs, n_s, n_z, n_t = model.dims()
    if n_obs == 0 or n_t == 0:
        return 0.0
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x9E2])
    d = n_t + n_obs
    acc = np.zeros((d, d), dtype=complex)
    done = 0
    sq = np.float32(np.sqrt(model.noise_power))
    half = np.float32(np.sqrt(0.5))
    T_s = model.target_signal.astype(np.complex64)
    T_z = model.target_noise.astype(np.complex64)
    G = model.signal_map.astype(np.complex64)
    F = model.noise_map.astype(np.complex64)

    def draw(rows, m):
        re = rng.standard_normal((rows, m), dtype=np.float32)
        im = rng.standard_normal((rows, m), dtype=np.float32)
        return half * (re + 1j * im)

    # draws and per-chunk products run in single precision (the statistical
    # error at any admissible sample count dwarfs float32 roundoff); the
    # covariance accumulates in double
    while done < n_samples:
        m = min(chunk, n_samples - done)
        s = draw(n_s, m)
        z = draw(n_z, m)
        q = draw(n_obs, m)
        t = T_s @ s + sq * (T_z @ z)
        y = G @ s + sq * (F @ z) + q
        joint = np.vstack([t, y])
        acc += (joint @ joint.conj().T).astype(complex)
        done += m
    cov = acc / n_samples
    cov_t = cov[:n_t, :n_t]
    cov_y = cov[n_t:, n_t:]
    sign_t, ld_t = np.linalg.slogdet(cov_t)
    sign_y, ld_y = np.linalg.slogdet(cov_y)
    sign_j, ld_j = np.linalg.slogdet(cov)
    if min(sign_t.real, sign_y.real, sign_j.real) <= 0:
        raise ValueError("insufficient samples: degenerate empirical covariance")
    return float((ld_t + ld_y - ld_j) / LN2)


def _shared_signal_columns(channels: ChannelSet, design: DesignPoint, i: int):
    """Signal columns of CP i's shared observation, with UE labels."""
    sc = channels.scenario
    j = other(i)
    Ltil = block_diag_shared(channels, design, i)
    cols, labels = [], []
    for l in range(sc.n_ues[i]):
        cols.append(Ltil @ channels.stacked_shared_own[i][l] * design.power[i][l, M_SHARED])
        labels.append((i, l))
    for l in range(sc.n_ues[j]):
        cols.append(Ltil @ channels.stacked_shared_cross[j][l] * design.power[j][l, M_SHARED])
        labels.append((j, l))
    return Ltil, cols, labels


def model_for_quantization(channels: ChannelSet, design: DesignPoint,
                           i: int, r: int, m: int) -> ObservationModel:
    """I(y; y_hat) for RU (i, r) on band m."""
    sc = channels.scenario
    L = design.quantizer[i][r][m]
    n = L.shape[0]
    cols = []
    ops = [i] if m == M_PRIVATE else [0, 1]
    for j in ops:
        for k in range(sc.n_ues[j]):
            cols.append(channels.h[j][k][i][r] * design.power[j][k, m])
    H = _signal_matrix(cols, n)
    return ObservationModel(
        signal_map=L @ H,
        target_signal=H,
        noise_map=L.copy(),
        target_noise=np.eye(n, dtype=complex),
        noise_power=sc.noise_psd,
    )


def model_for_rate(channels: ChannelSet, design: DesignPoint,
                   i: int, k: int, m: int) -> ObservationModel:
    """I(s_{i,k}; CP i's quantized stack) on band m."""
    sc = channels.scenario
    if m == M_PRIVATE:
        Lb = block_diag_private(channels, design, i)
        cols = [Lb @ channels.stacked_private[i][l] * design.power[i][l, M_PRIVATE]
                for l in range(sc.n_ues[i])]
        target_index = k
    else:
        Lb, cols, labels = _shared_signal_columns(channels, design, i)
        target_index = labels.index((i, k))
    n = Lb.shape[0]
    G = _signal_matrix(cols, n)
    T_s = np.zeros((1, G.shape[1]), dtype=complex)
    T_s[0, target_index] = 1.0
    return ObservationModel(
        signal_map=G,
        target_signal=T_s,
        noise_map=Lb,
        target_noise=np.zeros((1, n), dtype=complex),
        noise_power=sc.noise_psd,
    )


def model_for_privacy(channels: ChannelSet, design: DesignPoint,
                      i: int, k: int) -> ObservationModel:
    """I(s_{i,k} shared; everything the other CP observes on the shared band)."""
    j = other(i)
    Lb, cols, labels = _shared_signal_columns(channels, design, j)
    n = Lb.shape[0]
    G = _signal_matrix(cols, n)
    T_s = np.zeros((1, G.shape[1]), dtype=complex)
    T_s[0, labels.index((i, k))] = 1.0
    return ObservationModel(
        signal_map=G,
        target_signal=T_s,
        noise_map=Lb,
        target_noise=np.zeros((1, n), dtype=complex),
        noise_power=channels.scenario.noise_psd,
    )
