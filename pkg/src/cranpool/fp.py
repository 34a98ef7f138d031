"""Fractional-programming surrogates for the non-convex design constraints.

The joint design problem couples bandwidths W, powers v and quantizers L
through products like W * f(v, L) and W * g(v, L). This module provides the
two halves of the convexification:

* :func:`update_aux` computes, in closed form, the auxiliary variables
  (SINR/receive-filter pairs for the rate functions, square-root product
  coefficients for the bandwidth couplings, covariance anchors for the
  log-det usage terms, and a matrix quadratic-transform pair for the
  leakage bound) that make every surrogate coincide with the original
  constraint function at the current design point.

* :func:`build_surrogates` emits, for one active variable block (bands,
  power or quantizers), a convex constraint system over that block plus the
  scalar auxiliaries (R, alpha, rho, rho_tilde, beta_var, theta). Any point
  feasible for the emitted system is feasible for the original constraints,
  and the system is tight at the anchoring design.

All bandwidths and bit rates are normalized internally: widths are
fractions of the total bandwidth and rates are in units of
total_bandwidth * (1 bit/s/Hz), so constraint coefficients stay O(1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .model import ChannelSet, M_PRIVATE, M_SHARED, Scenario, other
from .metrics import (
    DesignPoint,
    block_diag_private,
    block_diag_shared,
    logdet2_psd,
    quantization_covariance,
)

LN2 = float(np.log(2.0))

BAND_NAMES = ("P.0", "P.1", "S")

BLOCK_BANDS = "bands"
BLOCK_POWER = "power"
BLOCK_QUANTIZERS = "quantizers"
BLOCKS = (BLOCK_BANDS, BLOCK_POWER, BLOCK_QUANTIZERS)


class AnchorViolationError(RuntimeError):
    """The design anchoring the surrogates does not satisfy them."""


# ---------------------------------------------------------------------------
# Auxiliary state
# ---------------------------------------------------------------------------


@dataclass
class AuxState:
    """Closed-form auxiliary variables anchored at one design point.

    Shapes: per-UE arrays are (n_ues[i], 2) with band columns
    (private, shared); per-RU arrays are (n_rus[i],). ``z_*[i][k]`` are the
    receive-filter vectors of the quadratic transform, ``Sigma_*`` the
    covariance anchors of the Fenchel bounds, ``(K, Z)`` the matrix
    quadratic-transform pair of the leakage bound. Scalar entries mirror the
    warm-start values of the per-block subproblems.
    """

    w_hat: np.ndarray                  # (3,) normalized widths (P0, P1, S)
    shared_active: bool
    f: list                            # [i] -> (n_ues, 2) anchor rates, bits/s/Hz
    g_p: list                          # [i] -> (n_rus,)
    g_s: list                          # [i] -> (n_rus,)
    beta: list                         # [i] -> (n_ues,)
    kappa: list                        # [i] -> (n_ues, 2)
    z_p: list                          # [i][k] -> complex vec
    z_s: list                          # [i][k] -> complex vec
    alpha: list                        # [i] -> (n_ues, 2)
    c_rate: list                       # [i] -> (n_ues, 2)
    rho_p: list                        # [i] -> (n_rus,)
    rho_sf: list                       # [i] -> (n_rus,)
    c_tilde_p: list                    # [i] -> (n_rus,)
    c_tilde_sf: list                   # [i] -> (n_rus,)
    c_tilde_sb: list                   # [i] -> (n_rus,), meaningful on subset
    Sigma_p: list                      # [i][r] -> complex matrix
    Sigma_s: list                      # [i][r] -> complex matrix
    c_hat: float
    Sigma_tilde: list                  # [i] -> cov of CP other(i)'s shared stack
    K: list                            # [i][k] -> complex matrix
    Z: list                            # [i][k] -> complex matrix
    theta: list                        # [i] -> (n_ues,)

    def anchor_rate(self, i: int, k: int, m: int) -> float:
        """Normalized warm-start rate: w_hat * f."""
        w = self.w_hat[i] if m == M_PRIVATE else self.w_hat[2]
        return float(w * self.f[i][k, m])


def _qt_pairs(E: np.ndarray, cols: list[np.ndarray], own_count: int,
              noise_psd: float):
    """SINR kappa and receive filters z for every own column of a SUD stack.

    ``cols`` holds every signal column (own UEs first), already multiplied
    by E and the power scalar. Returns (kappa[own], z[own], J_all) where
    J_all is the full signal-plus-noise covariance.
    """
    n = E.shape[0]
    A = np.column_stack(cols) if cols else np.zeros((n, 0), dtype=complex)
    J_all = A @ A.conj().T + noise_psd * (E @ E.conj().T) + np.eye(n)
    chol = scipy.linalg.cho_factor(J_all, lower=True)
    kappas, zs = [], []
    for k in range(own_count):
        a = cols[k]
        z = scipy.linalg.cho_solve(chol, a)
        t = float(np.real(a.conj() @ z))
        t = min(max(t, 0.0), 1.0 - 1e-15)
        kappas.append(t / (1.0 - t))
        zs.append(z)
    return kappas, zs, J_all


def update_aux(channels: ChannelSet, scenario: Scenario, design: DesignPoint,
               eps_shared_hz: float = 1.0, shared_enabled: bool = True) -> AuxState:
    """Refresh every auxiliary variable at the current design (the anchor).

    When the shared band is narrower than ``eps_shared_hz`` (or disabled by
    the scheme), shared-band auxiliaries are skipped and the surrogate system
    degenerates to the no-pooling form.
    """
    design.check_finite()
    w_tot = scenario.total_bandwidth
    w_hat = np.array([design.bands.w_private[0] / w_tot,
                      design.bands.w_private[1] / w_tot,
                      design.bands.w_shared / w_tot])
    shared_active = bool(shared_enabled and design.bands.w_shared >= eps_shared_hz)

    n_ues = scenario.n_ues
    f = [np.zeros((n_ues[i], 2)) for i in range(2)]
    kappa = [np.zeros((n_ues[i], 2)) for i in range(2)]
    beta = [np.zeros(n_ues[i]) for i in range(2)]
    theta = [np.zeros(n_ues[i]) for i in range(2)]
    z_p = [[None] * n_ues[i] for i in range(2)]
    z_s = [[None] * n_ues[i] for i in range(2)]
    g_p = [np.zeros(scenario.n_rus[i]) for i in range(2)]
    g_s = [np.zeros(scenario.n_rus[i]) for i in range(2)]
    Sigma_p = [[None] * scenario.n_rus[i] for i in range(2)]
    Sigma_s = [[None] * scenario.n_rus[i] for i in range(2)]
    Sigma_tilde = [None, None]
    K = [[None] * n_ues[i] for i in range(2)]
    Z = [[None] * n_ues[i] for i in range(2)]
    shared_cov = [None, None]

    for i in range(2):
        # private-band quadratic-transform pairs
        E = block_diag_private(channels, design, i)
        cols = [E @ channels.stacked_private[i][k] * design.power[i][k, M_PRIVATE]
                for k in range(n_ues[i])]
        if E.shape[0] > 0 and n_ues[i] > 0:
            kp, zp, _ = _qt_pairs(E, cols, n_ues[i], scenario.noise_psd)
            for k in range(n_ues[i]):
                kappa[i][k, M_PRIVATE] = kp[k]
                z_p[i][k] = zp[k]
                f[i][k, M_PRIVATE] = np.log2(1.0 + kp[k])
        else:
            for k in range(n_ues[i]):
                z_p[i][k] = np.zeros(E.shape[0], dtype=complex)
        # per-RU quantization covariances
        for r in range(scenario.n_rus[i]):
            Sigma_p[i][r] = quantization_covariance(channels, design, i, r, M_PRIVATE)
            g_p[i][r] = logdet2_psd(Sigma_p[i][r])
            if shared_active:
                Sigma_s[i][r] = quantization_covariance(channels, design, i, r, M_SHARED)
                g_s[i][r] = logdet2_psd(Sigma_s[i][r])

    if shared_active:
        for i in range(2):
            j = other(i)
            E = block_diag_shared(channels, design, i)
            cols = [E @ channels.stacked_shared_own[i][k] * design.power[i][k, M_SHARED]
                    for k in range(n_ues[i])]
            cols += [E @ channels.stacked_shared_cross[j][l] * design.power[j][l, M_SHARED]
                     for l in range(n_ues[j])]
            if E.shape[0] > 0:
                ks, zs, J_all = _qt_pairs(E, cols, n_ues[i], scenario.noise_psd)
                for k in range(n_ues[i]):
                    kappa[i][k, M_SHARED] = ks[k]
                    z_s[i][k] = zs[k]
                    f[i][k, M_SHARED] = np.log2(1.0 + ks[k])
                shared_cov[i] = J_all
            else:
                for k in range(n_ues[i]):
                    z_s[i][k] = np.zeros(0, dtype=complex)
                shared_cov[i] = np.zeros((0, 0), dtype=complex)
        for i in range(2):
            # leakage of operator i's UEs into CP other(i)
            j = other(i)
            cov_full = shared_cov[j]
            Sigma_tilde[i] = cov_full
            n_obs = cov_full.shape[0]
            Ltil = block_diag_shared(channels, design, j)
            for k in range(n_ues[i]):
                c = Ltil @ channels.stacked_shared_cross[i][k] * design.power[i][k, M_SHARED]
                cov_wo = cov_full - np.outer(c, c.conj())
                beta[i][k] = max(logdet2_psd(cov_full) - logdet2_psd(cov_wo), 0.0)
                theta[i][k] = logdet2_psd(cov_wo)
                K[i][k] = cov_wo - np.eye(n_obs)
                A = _privacy_column_matrix(channels, design, i, k)
                Z[i][k] = np.linalg.solve(
                    A.conj().T @ A + np.eye(A.shape[1]), A.conj().T)

    alpha = [f[i].copy() for i in range(2)]
    c_rate = [np.zeros((n_ues[i], 2)) for i in range(2)]
    rho_p = [np.zeros(scenario.n_rus[i]) for i in range(2)]
    rho_sf = [np.zeros(scenario.n_rus[i]) for i in range(2)]
    c_tilde_p = [np.zeros(scenario.n_rus[i]) for i in range(2)]
    c_tilde_sf = [np.zeros(scenario.n_rus[i]) for i in range(2)]
    c_tilde_sb = [np.zeros(scenario.n_rus[i]) for i in range(2)]
    for i in range(2):
        c_rate[i][:, M_PRIVATE] = f[i][:, M_PRIVATE] * np.sqrt(w_hat[i])
        rho_p[i] = w_hat[i] * g_p[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            c_tilde_p[i] = np.where(
                w_hat[i] > 0, np.sqrt(np.maximum(rho_p[i], 0.0)) / max(w_hat[i], 1e-300), 0.0)
        if shared_active:
            c_rate[i][:, M_SHARED] = f[i][:, M_SHARED] * np.sqrt(w_hat[2])
            rho_sf[i] = w_hat[2] * g_s[i]
            c_tilde_sf[i] = np.sqrt(np.maximum(rho_sf[i], 0.0)) / w_hat[2]
            c_tilde_sb[i] = c_tilde_sf[i].copy()

    gamma_hat = scenario.privacy_threshold / w_tot
    c_hat = float(np.sqrt(gamma_hat) / w_hat[2]) if shared_active else 0.0

    return AuxState(
        w_hat=w_hat, shared_active=shared_active, f=f, g_p=g_p, g_s=g_s,
        beta=beta, kappa=kappa, z_p=z_p, z_s=z_s, alpha=alpha, c_rate=c_rate,
        rho_p=rho_p, rho_sf=rho_sf, c_tilde_p=c_tilde_p, c_tilde_sf=c_tilde_sf,
        c_tilde_sb=c_tilde_sb, Sigma_p=Sigma_p, Sigma_s=Sigma_s, c_hat=c_hat,
        Sigma_tilde=Sigma_tilde, K=K, Z=Z, theta=theta,
    )


def _privacy_column_matrix(channels: ChannelSet, design: DesignPoint,
                           i: int, k: int) -> np.ndarray:
    """Signal-plus-noise column matrix A of CP other(i)'s observation with
    UE (i, k)'s column removed; K = A A^H, theta bounds log2 det(I + K)."""
    sc = channels.scenario
    j = other(i)
    Ltil = block_diag_shared(channels, design, j)
    n = Ltil.shape[0]
    cols = [Ltil @ channels.stacked_shared_own[j][l] * design.power[j][l, M_SHARED]
            for l in range(sc.n_ues[j])]
    cols += [Ltil @ channels.stacked_shared_cross[i][l] * design.power[i][l, M_SHARED]
             for l in range(sc.n_ues[i]) if l != k]
    sig = np.column_stack(cols) if cols else np.zeros((n, 0), dtype=complex)
    return np.hstack([sig, np.sqrt(sc.noise_psd) * Ltil])


# ---------------------------------------------------------------------------
# Variable manifest and constraint records
# ---------------------------------------------------------------------------


@dataclass
class Manifest:
    """Flat real coordinate layout for one block subproblem.

    Scalars occupy one coordinate each. A complex matrix block of side n
    occupies 2 n^2 coordinates: the row-major real parts, then the row-major
    imaginary parts.
    """

    names: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    blocks: dict = field(default_factory=dict)   # name -> (offset, n)
    size: int = 0

    def add_scalar(self, name: str) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable {name}")
        self.index[name] = self.size
        self.names.append(name)
        self.size += 1
        return self.index[name]

    def add_complex_block(self, name: str, n: int) -> tuple[int, int]:
        if name in self.blocks:
            raise ValueError(f"duplicate block {name}")
        off = self.size
        self.blocks[name] = (off, n)
        self.size += 2 * n * n
        return off, n

    def idx(self, name: str) -> int:
        return self.index[name]

    def has(self, name: str) -> bool:
        return name in self.index

    def get_block(self, x: np.ndarray, name: str) -> np.ndarray:
        off, n = self.blocks[name]
        re = x[off: off + n * n].reshape(n, n)
        im = x[off + n * n: off + 2 * n * n].reshape(n, n)
        return re + 1j * im

    def set_block(self, x: np.ndarray, name: str, L: np.ndarray) -> None:
        off, n = self.blocks[name]
        x[off: off + n * n] = L.real.ravel()
        x[off + n * n: off + 2 * n * n] = L.imag.ravel()


class RowAccumulator:
    """Builds complex affine functionals row(x) = coef . x + const over the
    real manifest coordinates (x is real; coefficients may be complex)."""

    def __init__(self, manifest: Manifest, m: int):
        self.manifest = manifest
        self.rows = np.zeros((m, manifest.size), dtype=complex)
        self.const = np.zeros(m, dtype=complex)

    def add_scalar(self, j: int, name: str, coef: complex) -> None:
        self.rows[j, self.manifest.idx(name)] += coef

    def add_l_pairing(self, j: int, block_name: str, C: np.ndarray) -> None:
        """Adds sum_ab C[a, b] * L[a, b] to row j."""
        off, n = self.manifest.blocks[block_name]
        flat = C.ravel()
        self.rows[j, off: off + n * n] += flat
        self.rows[j, off + n * n: off + 2 * n * n] += 1j * flat

    def add_l_pairing_batch(self, row_indices, block_name: str,
                            Cs: np.ndarray) -> None:
        """Adds one pairing matrix per listed row: Cs has shape (k, n, n)."""
        off, n = self.manifest.blocks[block_name]
        flat = Cs.reshape(len(row_indices), n * n)
        self.rows[row_indices, off: off + n * n] += flat
        self.rows[row_indices, off + n * n: off + 2 * n * n] += 1j * flat

    def add_const(self, j: int, c: complex) -> None:
        self.const[j] += c

    def realified(self, scale: float = 1.0):
        """Split into real rows [Re; Im], dropping numerically empty rows."""
        parts = []
        for rows, const in ((self.rows.real, self.const.real),
                            (self.rows.imag, self.const.imag)):
            keep = np.any(rows != 0.0, axis=1) | (const != 0.0)
            if np.any(keep):
                parts.append((rows[keep], const[keep]))
        if not parts:
            return np.zeros((0, self.manifest.size)), np.zeros(0)
        out_rows = np.vstack([p[0] for p in parts])
        out_const = np.concatenate([p[1] for p in parts])
        return scale * out_rows, scale * out_const

    def real_part(self, j: int):
        """Real part of row j as (coefficients, constant)."""
        return self.rows[j].real.copy(), float(self.const[j].real)


def _compact(Q: np.ndarray, lin: np.ndarray):
    """Column-compact a dense quadratic payload to its used coordinates."""
    used = np.flatnonzero(np.any(Q != 0.0, axis=0) | (lin != 0.0))
    return used, Q[:, used], lin[used]


@dataclass
class AffineCon:
    """coef . x <= rhs (or == rhs)."""

    origin: str
    tag: str
    idx: np.ndarray
    coef: np.ndarray
    rhs: float
    equality: bool = False

    def evaluate(self, x: np.ndarray) -> float:
        r = self.rhs - float(self.coef @ x[self.idx])
        return -abs(r) if self.equality else r


@dataclass
class QuadCone:
    """||Q x_used + q0||^2 <= lin_coef . x_used + const."""

    origin: str
    tag: str
    cols: np.ndarray
    Q: np.ndarray
    q0: np.ndarray
    lin: np.ndarray
    const: float

    def evaluate(self, x: np.ndarray) -> float:
        sub = x[self.cols]
        return float(self.lin @ sub + self.const - np.sum((self.Q @ sub + self.q0) ** 2))

    def rhs_value(self, x: np.ndarray) -> float:
        """Linear side at x (useful when the bounded scalar is zeroed)."""
        return float(self.lin @ x[self.cols] + self.const)


@dataclass
class RateCap:
    """R <= 2 c sqrt(w) - c^2 / alpha, with w a variable or a fixed width."""

    origin: str
    tag: str
    r_idx: int
    c: float
    alpha_idx: int
    w_idx: int | None = None
    w_fixed: float = 0.0

    def evaluate(self, x: np.ndarray) -> float:
        w = x[self.w_idx] if self.w_idx is not None else self.w_fixed
        alpha = max(float(x[self.alpha_idx]), 1e-300)
        return 2.0 * self.c * np.sqrt(max(w, 0.0)) - self.c ** 2 / alpha - x[self.r_idx]


@dataclass
class UsageCap:
    """rho_tilde <= 2 c sqrt(rho) - c^2 w, with w a variable or fixed.

    Sign choice: with the minus sign the right side is maximized over c at
    c = sqrt(rho)/w where it equals rho/w, which is exactly what makes the
    closed-form coefficient update tight. Read with a plus sign the bound
    grows without limit in c and upper-bounds nothing.
    """

    origin: str
    tag: str
    t_idx: int
    c: float
    rho_idx: int
    w_idx: int | None = None
    w_fixed: float = 0.0

    def evaluate(self, x: np.ndarray) -> float:
        w = x[self.w_idx] if self.w_idx is not None else self.w_fixed
        rho = max(float(x[self.rho_idx]), 0.0)
        return 2.0 * self.c * np.sqrt(rho) - self.c ** 2 * w - x[self.t_idx]


Record = AffineCon | QuadCone | RateCap | UsageCap


@dataclass
class SurrogateSystem:
    """Convex surrogate constraint system for one variable block.

    ``records`` hold every emitted constraint, tagged with the original
    constraint family it replaces; ``anchor`` is the warm-start coordinate
    vector at which all bound-type records hold with equality.
    """

    block: str
    manifest: Manifest
    records: list
    anchor: np.ndarray
    objective_idx: np.ndarray
    w_tot: float
    shared_active: bool

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.array([rec.evaluate(x) for rec in self.records])

    def max_violation(self, x: np.ndarray) -> float:
        slacks = self.evaluate(x)
        return float(max(0.0, -slacks.min())) if len(slacks) else 0.0

    def objective(self, x: np.ndarray) -> float:
        return float(np.sum(x[self.objective_idx]))

    def describe(self) -> str:
        """Self-describing text dump: variable manifest plus constraint list."""
        lines = [f"block {self.block}", f"variables {self.manifest.size}"]
        for name in self.manifest.names:
            lines.append(f"  scalar {name}")
        for name, (off, n) in self.manifest.blocks.items():
            lines.append(f"  complex {name} {n}x{n} @ {off}")
        lines.append(f"objective maximize sum of {len(self.objective_idx)} rate vars")
        lines.append(f"constraints {len(self.records)}")
        for rec in self.records:
            lines.append(f"  [{rec.origin}] {rec.tag} {type(rec).__name__}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Surrogate construction
# ---------------------------------------------------------------------------


def _shared_stack_layout(channels: ChannelSet, i: int):
    """Constituent (block_name, row_slice, local_n) of CP i's shared stack."""
    sc = channels.scenario
    j = other(i)
    layout = []
    pos = 0
    for r in range(sc.n_rus[i]):
        n = sc.n_antennas[i][r]
        layout.append((f"L.S.{i}.{r}", slice(pos, pos + n), n))
        pos += n
    for r in channels.subset[j]:
        n = sc.n_antennas[j][r]
        layout.append((f"L.S.{j}.{r}", slice(pos, pos + n), n))
        pos += n
    return layout, pos


def _private_stack_layout(channels: ChannelSet, i: int):
    sc = channels.scenario
    layout = []
    pos = 0
    for r in range(sc.n_rus[i]):
        n = sc.n_antennas[i][r]
        layout.append((f"L.P.{i}.{r}", slice(pos, pos + n), n))
        pos += n
    return layout, pos


def _add_stack_vector_rows(acc: RowAccumulator, j0: int, layout, vec_per_row,
                           coef_vec: np.ndarray, L_fixed: np.ndarray | None,
                           use_l_vars: bool):
    """Rows j0.. of acc receive the components of E @ coef_vec where E is the
    (block-diagonal) stacked quantizer, either as L-variable pairings or as
    fixed numbers."""
    if use_l_vars:
        for name, rows, n in layout:
            h_loc = coef_vec[rows]
            for a in range(n):
                C = np.zeros((n, n), dtype=complex)
                C[a, :] = h_loc
                acc.add_l_pairing(j0 + rows.start + a, name, C)
    else:
        out = L_fixed @ coef_vec
        for a in range(len(out)):
            acc.add_const(j0 + a, out[a])


def build_surrogates(channels: ChannelSet, scenario: Scenario,
                     design: DesignPoint, aux: AuxState, block: str,
                     free_bands: tuple[bool, bool, bool] = (True, True, True),
                     eps_w_hat: float | None = None) -> SurrogateSystem:
    """Emit the convex surrogate system for one variable block.

    ``free_bands`` marks which of (W_P0, W_P1, W_S) are decision variables in
    the bands block (ignored for the other blocks). Frozen or inactive bands
    keep their current widths.
    """
    if block not in BLOCKS:
        raise ValueError(f"unknown block {block!r}")
    sc = scenario
    w_tot = sc.total_bandwidth
    shared = aux.shared_active
    if eps_w_hat is None:
        eps_w_hat = 1.0 / w_tot
    mf = Manifest()

    # --- variables -------------------------------------------------------
    band_idx: dict[int, int] = {}
    if block == BLOCK_BANDS:
        for b in range(3):
            if free_bands[b]:
                band_idx[b] = mf.add_scalar(f"w.{BAND_NAMES[b]}")
    v_idx: dict[tuple, int] = {}
    if block == BLOCK_POWER:
        for i in range(2):
            for k in range(sc.n_ues[i]):
                v_idx[(i, k, M_PRIVATE)] = mf.add_scalar(f"v.P.{i}.{k}")
                if shared:
                    v_idx[(i, k, M_SHARED)] = mf.add_scalar(f"v.S.{i}.{k}")
    if block == BLOCK_QUANTIZERS:
        for i in range(2):
            for r in range(sc.n_rus[i]):
                mf.add_complex_block(f"L.P.{i}.{r}", sc.n_antennas[i][r])
                if shared:
                    mf.add_complex_block(f"L.S.{i}.{r}", sc.n_antennas[i][r])

    bands_of = [M_PRIVATE, M_SHARED] if shared else [M_PRIVATE]
    r_idx, a_idx = {}, {}
    for i in range(2):
        for k in range(sc.n_ues[i]):
            for m in bands_of:
                tagm = "P" if m == M_PRIVATE else "S"
                r_idx[(i, k, m)] = mf.add_scalar(f"R.{tagm}.{i}.{k}")
                if aux.c_rate[i][k, m] > 0.0:
                    a_idx[(i, k, m)] = mf.add_scalar(f"alpha.{tagm}.{i}.{k}")
    rho_p_idx, rho_sf_idx, rho_sb_idx = {}, {}, {}
    rhot_p_idx, rhot_s_idx = {}, {}
    for i in range(2):
        for r in range(sc.n_rus[i]):
            rho_p_idx[(i, r)] = mf.add_scalar(f"rho.P.{i}.{r}")
            rhot_p_idx[(i, r)] = mf.add_scalar(f"rhot.P.{i}.{r}")
            if shared:
                rho_sf_idx[(i, r)] = mf.add_scalar(f"rho.SF.{i}.{r}")
                rhot_s_idx[(i, r)] = mf.add_scalar(f"rhot.S.{i}.{r}")
        if shared:
            for r in channels.subset[i]:
                rho_sb_idx[(i, r)] = mf.add_scalar(f"rho.SB.{i}.{r}")
    bvar_idx, th_idx = {}, {}
    if shared:
        for i in range(2):
            for k in range(sc.n_ues[i]):
                bvar_idx[(i, k)] = mf.add_scalar(f"beta.{i}.{k}")
                th_idx[(i, k)] = mf.add_scalar(f"theta.{i}.{k}")

    records: list = []
    anchor = np.zeros(mf.size)

    def band_width(b: int) -> float:
        return float(aux.w_hat[b])

    def band_ref(b: int):
        """(w_idx, w_fixed) pair for cap records."""
        if b in band_idx:
            return band_idx[b], 0.0
        return None, band_width(b)

    # --- anchor coordinates ------------------------------------------------
    if block == BLOCK_BANDS:
        for b, j in band_idx.items():
            anchor[j] = band_width(b)
    if block == BLOCK_POWER:
        for (i, k, m), j in v_idx.items():
            anchor[j] = design.power[i][k, m]
    if block == BLOCK_QUANTIZERS:
        for i in range(2):
            for r in range(sc.n_rus[i]):
                mf.set_block(anchor, f"L.P.{i}.{r}", design.quantizer[i][r][M_PRIVATE])
                if shared:
                    mf.set_block(anchor, f"L.S.{i}.{r}", design.quantizer[i][r][M_SHARED])
    for (i, k, m), j in r_idx.items():
        anchor[j] = aux.anchor_rate(i, k, m)
    for (i, k, m), j in a_idx.items():
        anchor[j] = aux.alpha[i][k, m]
    for (i, r), j in rho_p_idx.items():
        anchor[j] = aux.rho_p[i][r]
    for (i, r), j in rhot_p_idx.items():
        anchor[j] = aux.g_p[i][r]
    for (i, r), j in rho_sf_idx.items():
        anchor[j] = aux.rho_sf[i][r]
    for (i, r), j in rhot_s_idx.items():
        anchor[j] = aux.g_s[i][r]
    for (i, r), j in rho_sb_idx.items():
        anchor[j] = aux.rho_sf[i][r]
    for (i, k), j in bvar_idx.items():
        anchor[j] = aux.beta[i][k]
    for (i, k), j in th_idx.items():
        anchor[j] = aux.theta[i][k]

    # --- (12b)/(12c): achievable-rate surrogates ---------------------------
    for i in range(2):
        for k in range(sc.n_ues[i]):
            for m in bands_of:
                tagm = "P" if m == M_PRIVATE else "S"
                band = i if m == M_PRIVATE else 2
                origin = "12b" if m == M_PRIVATE else "12c"
                c = float(aux.c_rate[i][k, m])
                rj = r_idx[(i, k, m)]
                if c <= 0.0:
                    records.append(AffineCon(
                        origin, f"rate_cap.{tagm}.{i}.{k}",
                        np.array([rj]), np.array([1.0]), 0.0))
                    continue
                w_i, w_f = band_ref(band)
                records.append(RateCap(
                    origin, f"rate_cap.{tagm}.{i}.{k}", rj, c,
                    a_idx[(i, k, m)], w_i, w_f))
                aj = a_idx[(i, k, m)]
                if block == BLOCK_BANDS:
                    records.append(AffineCon(
                        origin, f"rate_bound.{tagm}.{i}.{k}",
                        np.array([aj]), np.array([1.0]), float(aux.f[i][k, m])))
                else:
                    records.append(_qt_rate_record(
                        channels, sc, design, aux, mf, block, i, k, m, aj, v_idx))

    # --- (12d): per-RU fronthaul budget ------------------------------------
    for i in range(2):
        for r in range(sc.n_rus[i]):
            cf_hat = sc.fronthaul_capacity[i][r] / w_tot
            if shared:
                records.append(AffineCon(
                    "12d", f"fronthaul_budget.{i}.{r}",
                    np.array([rho_p_idx[(i, r)], rho_sf_idx[(i, r)]]),
                    np.array([1.0, 1.0]), cf_hat))
            else:
                records.append(AffineCon(
                    "12d", f"fronthaul_budget.{i}.{r}",
                    np.array([rho_p_idx[(i, r)]]), np.array([1.0]), cf_hat))
            # private usage chain
            w_i, w_f = band_ref(i) if block == BLOCK_BANDS else (None, band_width(i))
            records.append(UsageCap(
                "12d", f"usage_cap.P.{i}.{r}", rhot_p_idx[(i, r)],
                float(aux.c_tilde_p[i][r]), rho_p_idx[(i, r)], w_i, w_f))
            records.append(_fenchel_record(
                channels, sc, design, aux, mf, block, i, r, M_PRIVATE,
                rhot_p_idx[(i, r)], v_idx, "12d", f"usage_bound.P.{i}.{r}"))
            if shared:
                w_i, w_f = band_ref(2) if block == BLOCK_BANDS else (None, band_width(2))
                records.append(UsageCap(
                    "12d", f"usage_cap.SF.{i}.{r}", rhot_s_idx[(i, r)],
                    float(aux.c_tilde_sf[i][r]), rho_sf_idx[(i, r)], w_i, w_f))
                records.append(_fenchel_record(
                    channels, sc, design, aux, mf, block, i, r, M_SHARED,
                    rhot_s_idx[(i, r)], v_idx, "12d", f"usage_bound.S.{i}.{r}"))

    # --- (12e): backhaul budget --------------------------------------------
    if shared:
        for i in range(2):
            if not channels.subset[i]:
                continue
            cb_hat = sc.backhaul_capacity[i] / w_tot
            ids = np.array([rho_sb_idx[(i, r)] for r in channels.subset[i]])
            records.append(AffineCon(
                "12e", f"backhaul_budget.{i}", ids, np.ones(len(ids)), cb_hat))
            w_i, w_f = band_ref(2) if block == BLOCK_BANDS else (None, band_width(2))
            for r in channels.subset[i]:
                records.append(UsageCap(
                    "12e", f"usage_cap.SB.{i}.{r}", rhot_s_idx[(i, r)],
                    float(aux.c_tilde_sb[i][r]), rho_sb_idx[(i, r)], w_i, w_f))

    # --- (12f): privacy -----------------------------------------------------
    if shared:
        gamma_hat = sc.privacy_threshold / w_tot
        for i in range(2):
            payload = None
            if block != BLOCK_BANDS and sc.n_ues[i] > 0:
                payload = _privacy_fenchel_payload(
                    channels, sc, design, aux, mf, block, i)
            for k in range(sc.n_ues[i]):
                bj, tj = bvar_idx[(i, k)], th_idx[(i, k)]
                # cap: beta_var + c_hat^2 W_S <= 2 c_hat sqrt(Gamma)
                rhs = 2.0 * aux.c_hat * np.sqrt(gamma_hat)
                if 2 in band_idx:
                    records.append(AffineCon(
                        "12f", f"privacy_cap.{i}.{k}",
                        np.array([bj, band_idx[2]]),
                        np.array([1.0, aux.c_hat ** 2]), rhs))
                else:
                    records.append(AffineCon(
                        "12f", f"privacy_cap.{i}.{k}", np.array([bj]),
                        np.array([1.0]), rhs - aux.c_hat ** 2 * band_width(2)))
                if block == BLOCK_BANDS:
                    lower = float(aux.beta[i][k] + aux.theta[i][k])
                    records.append(AffineCon(
                        "12f", f"privacy_bound.{i}.{k}",
                        np.array([bj, tj]), np.array([-1.0, -1.0]), -lower))
                    records.append(AffineCon(
                        "12f", f"privacy_qt.{i}.{k}",
                        np.array([tj]), np.array([1.0]), float(aux.theta[i][k])))
                else:
                    records.append(_privacy_fenchel_record(
                        payload, mf, i, k, bj, tj))
                    records.append(_privacy_qt_record(
                        channels, sc, design, aux, mf, block, i, k, tj, v_idx))

    # --- (12g): power box ----------------------------------------------------
    if block == BLOCK_POWER:
        vmax = np.sqrt(sc.p_max)
        for (i, k, m), j in v_idx.items():
            tagm = "P" if m == M_PRIVATE else "S"
            records.append(AffineCon(
                "12g", f"power_max.{tagm}.{i}.{k}", np.array([j]),
                np.array([1.0]), vmax))
            records.append(AffineCon(
                "12g", f"power_min.{tagm}.{i}.{k}", np.array([j]),
                np.array([-1.0]), 0.0))

    # --- (12h): bandwidth partition ------------------------------------------
    if block == BLOCK_BANDS:
        ids = np.array(sorted(band_idx.values()))
        fixed = sum(band_width(b) for b in range(3) if b not in band_idx)
        records.append(AffineCon(
            "12h", "bandwidth_total", ids, np.ones(len(ids)), 1.0 - fixed,
            equality=True))
        for b, j in band_idx.items():
            if b < 2:
                # keep private bands a hair above zero so the next anchor
                # does not divide by a vanishing width
                records.append(AffineCon(
                    "12h", f"bandwidth_floor.{BAND_NAMES[b]}", np.array([j]),
                    np.array([-1.0]), -eps_w_hat))
            else:
                records.append(AffineCon(
                    "12h", "bandwidth_floor.S", np.array([j]),
                    np.array([-1.0]), 0.0))
                if not shared:
                    # a degenerate shared band carries unaccounted usage in
                    # its stale quantizers; keep it pinned until it is
                    # reactivated from a fresh anchor
                    records.append(AffineCon(
                        "12h", "bandwidth_pin.S", np.array([j]),
                        np.array([1.0]), eps_w_hat))

    objective_idx = np.array(sorted(r_idx.values()), dtype=int)
    return SurrogateSystem(
        block=block, manifest=mf, records=records, anchor=anchor,
        objective_idx=objective_idx, w_tot=w_tot, shared_active=shared)


# --- quadratic payload builders ---------------------------------------------


def _qt_rate_record(channels, sc, design, aux, mf, block, i, k, m, alpha_j,
                    v_idx) -> QuadCone:
    """alpha <= log2(1+kappa) - kappa/ln2 + (1+kappa)/ln2 * QT(v, L)."""
    kap = float(aux.kappa[i][k, m])
    z = aux.z_p[i][k] if m == M_PRIVATE else aux.z_s[i][k]
    s = (1.0 + kap) / LN2
    sq = np.sqrt(s)
    j = other(i)
    if m == M_PRIVATE:
        layout, dim = _private_stack_layout(channels, i)
        E = block_diag_private(channels, design, i)
        own = [(channels.stacked_private[i][l], design.power[i][l, M_PRIVATE],
                (i, l, M_PRIVATE)) for l in range(sc.n_ues[i])]
        cross = []
    else:
        layout, dim = _shared_stack_layout(channels, i)
        E = block_diag_shared(channels, design, i)
        own = [(channels.stacked_shared_own[i][l], design.power[i][l, M_SHARED],
                (i, l, M_SHARED)) for l in range(sc.n_ues[i])]
        cross = [(channels.stacked_shared_cross[j][l], design.power[j][l, M_SHARED],
                  (j, l, M_SHARED)) for l in range(sc.n_ues[j])]
    use_l = block == BLOCK_QUANTIZERS
    cols = own + cross
    const = np.log2(1.0 + kap) - kap / LN2 - s * float(np.real(z.conj() @ z))
    lin = np.zeros(mf.size)
    lin[alpha_j] = -1.0

    # signal magnitude rows |z^H E h_l v_l| for every UE column l
    acc = RowAccumulator(mf, len(cols))
    for jrow, (hvec, v_val, key) in enumerate(cols):
        if use_l:
            for name, rows, n in layout:
                C = np.outer(np.conj(z[rows]), hvec[rows])
                acc.add_l_pairing(jrow, name, v_val * C)
        else:
            amp = complex(np.conj(z) @ (E @ hvec))
            if key in v_idx:
                acc.add_scalar(jrow, f"v.{'P' if key[2] == M_PRIVATE else 'S'}.{key[0]}.{key[1]}", amp)
            else:
                acc.add_const(jrow, amp * v_val)
    Q_sig, q0_sig = acc.realified(sq)

    # noise rows sqrt(N0) * components of E^H z
    if use_l:
        accn = RowAccumulator(mf, dim)
        for name, rows, n in layout:
            zloc = np.conj(z[rows])
            idx = np.arange(n)
            Cs = np.zeros((n, n, n), dtype=complex)
            Cs[idx, :, idx] = zloc
            accn.add_l_pairing_batch(rows.start + idx, name, Cs)
        Q_n, q0_n = accn.realified(sq * np.sqrt(sc.noise_psd))
        Q = np.vstack([Q_sig, Q_n]) if Q_sig.size or Q_n.size else np.zeros((0, mf.size))
        q0 = np.concatenate([q0_sig, q0_n])
    else:
        const -= s * sc.noise_psd * float(np.real(z.conj() @ (E @ E.conj().T) @ z))
        Q, q0 = Q_sig, q0_sig

    # linear term 2 s Re{conj(v_k) z^H E h_k}
    hk, vk, key_k = cols[k][0], cols[k][1], cols[k][2]
    if use_l:
        accl = RowAccumulator(mf, 1)
        for name, rows, n in layout:
            C = np.outer(np.conj(z[rows]), hk[rows])
            accl.add_l_pairing(0, name, C)
        lrow, lconst = accl.real_part(0)
        lin += 2.0 * s * vk * lrow
        const += 2.0 * s * vk * lconst
    else:
        amp = float(np.real(np.conj(z) @ (E @ hk)))
        vname = f"v.{'P' if m == M_PRIVATE else 'S'}.{i}.{k}"
        if mf.has(vname):
            lin[mf.idx(vname)] += 2.0 * s * amp
        else:
            const += 2.0 * s * amp * vk

    cols_used, Qc, linc = _compact(Q, lin)
    tagm = "P" if m == M_PRIVATE else "S"
    return QuadCone("12b" if m == M_PRIVATE else "12c",
                    f"rate_bound.{tagm}.{i}.{k}", cols_used, Qc, q0, linc, const)


def _fenchel_record(channels, sc, design, aux, mf, block, i, r, m, t_idx,
                    v_idx, origin, tag) -> QuadCone:
    """rho_tilde >= log2 det Sigma - n/ln2 + tr(Sigma^-1 Cov(L, v))/ln2.

    The -n/ln2 offset is forced by tightness: at Sigma = Cov the majorant
    must reduce to log2 det Cov (trace term contributes exactly n/ln2
    there); a +n/ln2 reading is off by 2n/ln2 at its own minimizer.
    """
    Sigma = aux.Sigma_p[i][r] if m == M_PRIVATE else aux.Sigma_s[i][r]
    n = Sigma.shape[0]
    Rchol = np.linalg.cholesky(Sigma)        # Sigma = R R^H
    Rinv = scipy.linalg.solve_triangular(Rchol, np.eye(n), lower=True)
    sq = np.sqrt(1.0 / LN2)
    L = design.quantizer[i][r][m]
    ops = [i] if m == M_PRIVATE else [0, 1]
    cols = [(channels.h[j][k][i][r], design.power[j][k, m], (j, k, m))
            for j in ops for k in range(sc.n_ues[j])]
    use_l = block == BLOCK_QUANTIZERS
    # constant: log2 det Sigma - n/ln2 + tr(Sigma^-1)/ln2 (identity part)
    base = logdet2_psd(Sigma) - n / LN2 + float(np.sum(np.abs(Rinv) ** 2)) / LN2

    acc_rows = []
    acc_q0 = []
    if use_l:
        block = f"L.{'P' if m == M_PRIVATE else 'S'}.{i}.{r}"
        acc = RowAccumulator(mf, n * len(cols))
        for jcol, (hvec, v_val, _) in enumerate(cols):
            Cs = v_val * Rinv[:, :, None] * hvec[None, None, :]
            acc.add_l_pairing_batch(jcol * n + np.arange(n), block, Cs)
        Q1, q01 = acc.realified(sq)
        accn = RowAccumulator(mf, n * n)
        idx = np.arange(n)
        T = np.zeros((n, n, n, n), dtype=complex)
        T[:, idx, :, idx] = np.broadcast_to(Rinv, (n, n, n))
        accn.add_l_pairing_batch(np.arange(n * n), block, T.reshape(n * n, n, n))
        Q2, q02 = accn.realified(sq * np.sqrt(sc.noise_psd))
        acc_rows = [Q1, Q2]
        acc_q0 = [q01, q02]
    else:
        base += sc.noise_psd * float(np.sum(np.abs(Rinv @ L) ** 2)) / LN2
        acc = RowAccumulator(mf, len(cols))
        for jcol, (hvec, v_val, key) in enumerate(cols):
            amp = np.linalg.norm(Rinv @ (L @ hvec))
            vname = f"v.{'P' if m == M_PRIVATE else 'S'}.{key[0]}.{key[1]}"
            if mf.has(vname):
                acc.add_scalar(jcol, vname, amp)
            else:
                acc.add_const(jcol, amp * v_val)
        Q1, q01 = acc.realified(sq)
        acc_rows = [Q1]
        acc_q0 = [q01]

    Q = np.vstack([q for q in acc_rows if q.size]) if any(q.size for q in acc_rows) else np.zeros((0, mf.size))
    q0 = np.concatenate(acc_q0) if acc_q0 else np.zeros(0)
    lin = np.zeros(mf.size)
    lin[t_idx] = 1.0
    cols_used, Qc, linc = _compact(Q, lin)
    return QuadCone(origin, tag, cols_used, Qc, q0, linc, -base)


def _privacy_fenchel_payload(channels, sc, design, aux, mf, block, i):
    """Shared quadratic payload of the privacy majorant for operator i.

    The majorant of the full-observation log-det does not depend on which
    UE is protected, so one payload serves every (i, k) record; only the
    (beta_var, theta) linear side differs per k.
    """
    j = other(i)
    Sigma = aux.Sigma_tilde[i]
    n_obs = Sigma.shape[0]
    Rchol = np.linalg.cholesky(Sigma)
    Rinv = scipy.linalg.solve_triangular(Rchol, np.eye(n_obs), lower=True)
    sq = np.sqrt(1.0 / LN2)
    layout, dim = _shared_stack_layout(channels, j)
    E = block_diag_shared(channels, design, j)
    use_l = block == BLOCK_QUANTIZERS
    base = logdet2_psd(Sigma) - n_obs / LN2 + float(np.sum(np.abs(Rinv) ** 2)) / LN2

    cols = [(channels.stacked_shared_own[j][l], design.power[j][l, M_SHARED],
             (j, l, M_SHARED)) for l in range(sc.n_ues[j])]
    cols += [(channels.stacked_shared_cross[i][l], design.power[i][l, M_SHARED],
              (i, l, M_SHARED)) for l in range(sc.n_ues[i])]

    blocks_q = []
    blocks_q0 = []
    if use_l:
        acc = RowAccumulator(mf, n_obs * len(cols))
        arange_obs = np.arange(n_obs)
        for jcol, (hvec, v_val, _) in enumerate(cols):
            for name, rows, nn in layout:
                Cs = v_val * Rinv[:, rows, None] * hvec[rows][None, None, :]
                acc.add_l_pairing_batch(jcol * n_obs + arange_obs, name, Cs)
        Q1, q01 = acc.realified(sq)
        # noise part: rows of sqrt(N0) Rinv @ E, E block-diagonal over layout
        accn = RowAccumulator(mf, n_obs * dim)
        for name, rows, nn in layout:
            idx = np.arange(nn)
            T = np.zeros((n_obs, nn, nn, nn), dtype=complex)
            T[:, idx, :, idx] = np.broadcast_to(Rinv[:, rows], (nn, n_obs, nn))
            row_idx = (arange_obs[:, None] * dim + rows.start + idx[None, :]).ravel()
            accn.add_l_pairing_batch(row_idx, name, T.reshape(n_obs * nn, nn, nn))
        Q2, q02 = accn.realified(sq * np.sqrt(sc.noise_psd))
        blocks_q = [Q1, Q2]
        blocks_q0 = [q01, q02]
    else:
        base += sc.noise_psd * float(np.sum(np.abs(Rinv @ E) ** 2)) / LN2
        acc = RowAccumulator(mf, len(cols))
        for jcol, (hvec, v_val, key) in enumerate(cols):
            amp = np.linalg.norm(Rinv @ (E @ hvec))
            vname = f"v.S.{key[0]}.{key[1]}"
            if mf.has(vname):
                acc.add_scalar(jcol, vname, amp)
            else:
                acc.add_const(jcol, amp * v_val)
        Q1, q01 = acc.realified(sq)
        blocks_q = [Q1]
        blocks_q0 = [q01]

    Q = np.vstack([q for q in blocks_q if q.size]) if any(q.size for q in blocks_q) else np.zeros((0, mf.size))
    q0 = np.concatenate(blocks_q0) if blocks_q0 else np.zeros(0)
    used = np.flatnonzero(np.any(Q != 0.0, axis=0))
    return used, Q[:, used], q0, base


def _privacy_fenchel_record(payload, mf, i, k, bvar_j, theta_j) -> QuadCone:
    """beta_var + theta >= Fenchel majorant of the full-observation log-det."""
    used, Qc, q0, base = payload
    cols_used = np.concatenate([used, [bvar_j, theta_j]])
    Qfull = np.hstack([Qc, np.zeros((Qc.shape[0], 2))])
    lin = np.zeros(len(cols_used))
    lin[-2] = 1.0
    lin[-1] = 1.0
    return QuadCone("12f", f"privacy_bound.{i}.{k}", cols_used, Qfull, q0,
                    lin, -base)


def _privacy_qt_record(channels, sc, design, aux, mf, block, i, k, theta_j,
                       v_idx) -> QuadCone:
    """theta <= matrix quadratic-transform minorant of log2 det(I + A A^H)."""
    j = other(i)
    Kmat = aux.K[i][k]
    Zmat = aux.Z[i][k]
    n_obs = Kmat.shape[0]
    M = Kmat + np.eye(n_obs)
    G = np.linalg.cholesky(M)
    ZG = Zmat @ G
    ZM = Zmat @ M
    layout, dim = _shared_stack_layout(channels, j)
    E = block_diag_shared(channels, design, j)
    use_l = block == BLOCK_QUANTIZERS

    # signal columns of A: own-j UEs then cross-i UEs without k; noise block last
    cols = [(channels.stacked_shared_own[j][l], design.power[j][l, M_SHARED],
             (j, l, M_SHARED)) for l in range(sc.n_ues[j])]
    cols += [(channels.stacked_shared_cross[i][l], design.power[i][l, M_SHARED],
              (i, l, M_SHARED)) for l in range(sc.n_ues[i]) if l != k]
    p_sig = len(cols)

    const = (logdet2_psd(M) - float(np.real(np.trace(Kmat))) / LN2
             - float(np.real(np.trace(M @ Zmat.conj().T @ Zmat))) / LN2)
    lin = np.zeros(mf.size)
    lin[theta_j] = -1.0
    sq = np.sqrt(1.0 / LN2)

    # quadratic rows: entries of A(x) @ ZG, shape (n_obs, n_obs)
    acc = RowAccumulator(mf, n_obs * n_obs)
    # linear term (2/ln2) Re tr(M A Z) = (2/ln2) Re sum_c [column_c . (ZM)[c, :]];
    # accumulated below per column
    lin_c = 0.0 + 0.0j
    arange_obs = np.arange(n_obs)
    for c, (hvec, v_val, key) in enumerate(cols):
        zg_row = ZG[c, :]
        if use_l:
            for name, rows, nn in layout:
                h_loc = hvec[rows]
                idx = np.arange(nn)
                # row (a, b) gets v ZG[c, b] e_{a_loc} h_loc^T on block t
                eh = np.zeros((nn, nn, nn), dtype=complex)
                eh[idx, idx, :] = h_loc
                Cs = (v_val * eh[:, None, :, :]
                      * zg_row[None, :, None, None]).reshape(nn * n_obs, nn, nn)
                row_idx = ((rows.start + idx)[:, None] * n_obs
                           + arange_obs[None, :]).ravel()
                acc.add_l_pairing_batch(row_idx, name, Cs)
        else:
            col_fixed = E @ hvec
            amps = np.outer(col_fixed, zg_row).ravel()
            vname = f"v.S.{key[0]}.{key[1]}"
            if mf.has(vname):
                acc.rows[:, mf.idx(vname)] += amps
            else:
                acc.const += amps * v_val
    # noise block columns of A: sqrt(N0) * E
    sqn = np.sqrt(sc.noise_psd)
    if use_l:
        for name, rows, nn in layout:
            idx = np.arange(nn)
            zblk = ZG[p_sig + rows.start: p_sig + rows.start + nn, :]
            # row (a, b): C[a_loc, b_loc] = sqn * ZG[p_sig + gcol(b_loc), b]
            T = np.zeros((nn, n_obs, nn, nn), dtype=complex)
            T[idx, :, idx, :] = sqn * np.transpose(
                np.broadcast_to(zblk, (nn, nn, n_obs)), (0, 2, 1))
            row_idx = ((rows.start + idx)[:, None] * n_obs
                       + arange_obs[None, :]).ravel()
            acc.add_l_pairing_batch(row_idx, name, T.reshape(nn * n_obs, nn, nn))
    else:
        noise_part = sqn * E @ ZG[p_sig:, :]
        acc.const += noise_part.ravel()
    Q, q0 = acc.realified(sq)

    # linear side: (2/ln2) Re tr(M A Z)
    if use_l:
        accl = RowAccumulator(mf, 1)
        for c, (hvec, v_val, key) in enumerate(cols):
            zm_row = ZM[c, :]
            for name, rows, nn in layout:
                C = v_val * np.outer(zm_row[rows], hvec[rows])
                accl.add_l_pairing(0, name, C)
        for name, rows, nn in layout:
            for b_loc in range(nn):
                cglob = p_sig + rows.start + b_loc
                C = np.zeros((nn, nn), dtype=complex)
                C[:, b_loc] = sqn * ZM[cglob, rows]
                accl.add_l_pairing(0, name, C)
        lrow, lconst = accl.real_part(0)
        lin += (2.0 / LN2) * lrow
        const += (2.0 / LN2) * lconst
    else:
        for c, (hvec, v_val, key) in enumerate(cols):
            amp = complex(ZM[c, :] @ (E @ hvec))
            vname = f"v.S.{key[0]}.{key[1]}"
            if mf.has(vname):
                lin[mf.idx(vname)] += (2.0 / LN2) * amp.real
            else:
                lin_c += amp * v_val
        noise_tr = sqn * np.trace(ZM[p_sig:, :] @ E)
        lin_c += noise_tr
        const += (2.0 / LN2) * lin_c.real

    cols_used, Qc, linc = _compact(Q, lin)
    return QuadCone("12f", f"privacy_qt.{i}.{k}", cols_used, Qc, q0, linc, const)
