import numpy as np
import pytest

from cranpool import fp, metrics, model
from conftest import make_scenario, make_channels, feasible_design, random_design
from test_metrics import scalar_instance

TIGHT_KINDS = ("rate_cap", "rate_bound", "usage_cap", "usage_bound",
               "privacy_bound", "privacy_qt")


def tightness_residual(system):
    """Worst |slack| over bound records, worst violation over the rest."""
    worst_tight, worst_feas = 0.0, 0.0
    slacks = system.evaluate(system.anchor)
    for rec, s in zip(system.records, slacks):
        if rec.tag.split(".")[0] in TIGHT_KINDS:
            worst_tight = max(worst_tight, abs(s))
        else:
            worst_feas = max(worst_feas, -s)
    return worst_tight, worst_feas


def test_scalar_closed_forms():
    # one UE, one RU, unit everything: kappa = 1/2 and z = 1/3
    sc, ch = scalar_instance()
    d = metrics.zero_design(sc, metrics.BandAllocation((5e7, 4e7), 1e7))
    d.power[0][0, 0] = 1.0
    d.quantizer[0][0][0] = np.eye(1)
    metrics.refresh_rates(ch, d)
    aux = fp.update_aux(ch, sc, d)
    assert aux.kappa[0][0, 0] == pytest.approx(0.5, abs=1e-12)
    assert aux.z_p[0][0][0] == pytest.approx(1.0 / 3.0, abs=1e-12)
    # tightness of the rate surrogate: log2(1 + kappa) equals the true rate
    assert aux.f[0][0, 0] == pytest.approx(np.log2(1.5), abs=1e-12)


def test_usage_chain_algebraic_identity(rng):
    # with rho = W g, the cap 2 c sqrt(rho) - c^2 W evaluates back to g
    for _ in range(20):
        g = float(rng.uniform(0.01, 8.0))
        w = float(rng.uniform(0.05, 1.0))
        rho = w * g
        c = np.sqrt(rho) / w
        assert 2.0 * c * np.sqrt(rho) - c ** 2 * w == pytest.approx(g, rel=1e-12)
        # and the cap never exceeds rho'/w for other rho'
        for _ in range(10):
            rho2 = float(rng.uniform(0.0, 5.0))
            assert 2.0 * c * np.sqrt(rho2) - c ** 2 * w <= rho2 / w + 1e-12


def test_fenchel_identity_random_psd(rng):
    # log2 det X = min over anchors of the majorant, attained at Sigma = X
    for _ in range(10):
        n = int(rng.integers(1, 4))
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        X = a @ a.conj().T + np.eye(n)
        target = float(np.linalg.slogdet(X)[1] / np.log(2.0))

        def majorant(S):
            return (float(np.linalg.slogdet(S)[1] / np.log(2.0))
                    + float(np.real(np.trace(np.linalg.solve(S, X)))) / np.log(2.0)
                    - n / np.log(2.0))

        assert majorant(X) == pytest.approx(target, rel=1e-10)
        for _ in range(8):
            b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            S = b @ b.conj().T + np.eye(n)
            assert majorant(S) >= target - 1e-9


def test_tightness_at_random_feasible_designs(rng):
    for trial in range(8):
        sc = make_scenario(
            n_rus=(int(rng.integers(1, 3)), int(rng.integers(1, 3))),
            n_ues=(int(rng.integers(1, 3)), int(rng.integers(1, 3))),
            subset=(1, 1))
        sc = model.Scenario(
            n_rus=sc.n_rus, n_ues=sc.n_ues,
            n_antennas=tuple(tuple(int(rng.integers(1, 3)) for _ in range(sc.n_rus[i]))
                             for i in range(2)),
            fronthaul_capacity=sc.fronthaul_capacity,
            backhaul_capacity=sc.backhaul_capacity,
            total_bandwidth=sc.total_bandwidth, p_max=sc.p_max,
            privacy_threshold=sc.privacy_threshold,
            subset_size=(min(1, sc.n_rus[0]), min(1, sc.n_rus[1])))
        ch = make_channels(sc, seed=100 + trial)
        d = feasible_design(ch, sc, rng)
        aux = fp.update_aux(ch, sc, d)
        for block in fp.BLOCKS:
            system = fp.build_surrogates(ch, sc, d, aux, block)
            tight, feas = tightness_residual(system)
            assert tight <= 1e-8, f"{block}: tightness residual {tight}"
            assert feas <= 1e-10, f"{block}: anchor violation {feas}"


def _perturbed_power(design, sc, rng):
    d2 = design.copy()
    for i in range(2):
        d2.power[i] = np.clip(
            design.power[i] * rng.uniform(0.3, 1.7, size=design.power[i].shape),
            0.0, np.sqrt(sc.p_max))
    return d2


def _perturbed_quant(design, sc, rng):
    d2 = design.copy()
    for i in range(2):
        for r in range(sc.n_rus[i]):
            n = sc.n_antennas[i][r]
            for m in range(2):
                step = (rng.standard_normal((n, n))
                        + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
                d2.quantizer[i][r][m] = design.quantizer[i][r][m] + 0.25 * step
    return d2


def _embed(system, sc, design):
    """Manifest vector at a perturbed design, scalars left at the anchor."""
    x = system.anchor.copy()
    mf = system.manifest
    for i in range(2):
        for k in range(sc.n_ues[i]):
            for m, tag in ((0, "P"), (1, "S")):
                name = f"v.{tag}.{i}.{k}"
                if mf.has(name):
                    x[mf.idx(name)] = design.power[i][k, m]
        for r in range(sc.n_rus[i]):
            for m, tag in ((0, "P"), (1, "S")):
                name = f"L.{tag}.{i}.{r}"
                if name in mf.blocks:
                    mf.set_block(x, name, design.quantizer[i][r][m])
    return x


@pytest.mark.parametrize("block", [fp.BLOCK_POWER, fp.BLOCK_QUANTIZERS])
def test_minorant_majorant_directions(block, rng, small_instance):
    sc, ch, d = small_instance
    aux = fp.update_aux(ch, sc, d)
    system = fp.build_surrogates(ch, sc, d, aux, block)
    mf = system.manifest
    for trial in range(25):
        d2 = (_perturbed_power(d, sc, rng) if block == fp.BLOCK_POWER
              else _perturbed_quant(d, sc, rng))
        x = _embed(system, sc, d2)
        for rec in system.records:
            kind = rec.tag.split(".")[0]
            if kind == "rate_bound":
                _, tm, si, sk = rec.tag.split(".")
                i, k, m = int(si), int(sk), (0 if tm == "P" else 1)
                xa = x.copy()
                xa[mf.idx(f"alpha.{tm}.{i}.{k}")] = 0.0
                bound = rec.evaluate(xa)
                assert bound <= metrics.rate(ch, d2, i, k, m) + 1e-9
            elif kind == "usage_bound":
                _, tm, si, sr = rec.tag.split(".")
                i, r = int(si), int(sr)
                xa = x.copy()
                xa[mf.idx(f"rhot.{tm}.{i}.{r}")] = 0.0
                expr = -rec.evaluate(xa)
                true_g = (metrics.quantization_rate_private(ch, d2, i, r)
                          if tm == "P" else
                          metrics.quantization_rate_shared(ch, d2, i, r))
                assert expr >= true_g - 1e-9
            elif kind == "privacy_bound":
                _, si, sk = rec.tag.split(".")
                i, k = int(si), int(sk)
                xa = x.copy()
                xa[mf.idx(f"beta.{i}.{k}")] = 0.0
                xa[mf.idx(f"theta.{i}.{k}")] = 0.0
                expr = -rec.evaluate(xa)
                cov_full, _ = metrics.privacy_covariances(ch, d2, i, k)
                assert expr >= metrics.logdet2_psd(cov_full) - 1e-9
            elif kind == "privacy_qt":
                _, si, sk = rec.tag.split(".")
                i, k = int(si), int(sk)
                xa = x.copy()
                xa[mf.idx(f"theta.{i}.{k}")] = 0.0
                bound = rec.evaluate(xa)
                _, cov_wo = metrics.privacy_covariances(ch, d2, i, k)
                assert bound <= metrics.logdet2_psd(cov_wo) + 1e-9


def test_privacy_violation_makes_surrogate_infeasible(rng):
    # scalar instance with W_S * beta > Gamma admits no feasible
    # (beta_var, theta): sweep both and find no point satisfying all three
    # privacy records
    sc, ch = scalar_instance(gamma=1e6)
    d = metrics.zero_design(sc, metrics.BandAllocation((1e7, 1e7), 8e7))
    d.power[0][0, 1] = 1.0
    d.power[1][0, 1] = 0.2
    for i in range(2):
        d.quantizer[i][0][1] = np.eye(1)
    metrics.refresh_rates(ch, d)
    beta = metrics.privacy_leakage(ch, d, 0, 0)
    assert d.bands.w_shared * beta > sc.privacy_threshold  # violated design
    aux = fp.update_aux(ch, sc, d)
    system = fp.build_surrogates(ch, sc, d, aux, fp.BLOCK_POWER)
    mf = system.manifest
    x = system.anchor.copy()
    recs = [r for r in system.records
            if r.tag in ("privacy_cap.0.0", "privacy_bound.0.0", "privacy_qt.0.0")]
    assert len(recs) == 3
    feasible_found = False
    for bv in np.linspace(-5.0, 5.0, 161):
        for th in np.linspace(-5.0, 5.0, 161):
            x[mf.idx("beta.0.0")] = bv
            x[mf.idx("theta.0.0")] = th
            if all(r.evaluate(x) >= -1e-12 for r in recs):
                feasible_found = True
    assert not feasible_found


def test_ws_zero_freezes_shared_band():
    sc, ch = scalar_instance()
    d = metrics.zero_design(sc, metrics.BandAllocation((5e7, 5e7), 0.0))
    d.power[0][0, 0] = 1.0
    d.quantizer[0][0][0] = np.eye(1)
    metrics.refresh_rates(ch, d)
    aux = fp.update_aux(ch, sc, d)
    assert not aux.shared_active
    system = fp.build_surrogates(ch, sc, d, aux, fp.BLOCK_POWER)
    names = set(system.manifest.names)
    assert "v.S.0.0" not in names
    assert "R.S.0.0" not in names
    assert "beta.0.0" not in names
    assert all(not r.tag.startswith("backhaul") for r in system.records)


def test_gamma_zero_forces_silent_shared_band(rng):
    # c_hat = 0: the cap pins beta_var <= 0 and with it any leaking power
    sc, ch = scalar_instance(gamma=0.0)
    d = metrics.zero_design(sc, metrics.BandAllocation((3e7, 3e7), 4e7))
    d.quantizer[0][0][1] = np.eye(1)
    d.quantizer[1][0][1] = np.eye(1)
    metrics.refresh_rates(ch, d)
    aux = fp.update_aux(ch, sc, d)
    assert aux.c_hat == 0.0
    system = fp.build_surrogates(ch, sc, d, aux, fp.BLOCK_POWER)
    mf = system.manifest
    x = system.anchor.copy()
    cap = next(r for r in system.records if r.tag == "privacy_cap.0.0")
    bound = next(r for r in system.records if r.tag == "privacy_bound.0.0")
    qt = next(r for r in system.records if r.tag == "privacy_qt.0.0")
    # any positive shared power of UE (0,0) breaks the record chain for
    # every admissible (beta_var, theta)
    x[mf.idx("v.S.0.0")] = 0.5
    ok = False
    for bv in np.linspace(-2.0, 0.0, 81):
        for th in np.linspace(-4.0, 4.0, 161):
            x[mf.idx("beta.0.0")] = bv
            x[mf.idx("theta.0.0")] = th
            if (cap.evaluate(x) >= -1e-12 and bound.evaluate(x) >= -1e-12
                    and qt.evaluate(x) >= -1e-12):
                ok = True
    assert not ok


def test_surrogate_dump_lists_origins(small_instance):
    sc, ch, d = small_instance
    aux = fp.update_aux(ch, sc, d)
    system = fp.build_surrogates(ch, sc, d, aux, fp.BLOCK_POWER)
    text = system.describe()
    for origin in ("12b", "12c", "12d", "12e", "12f", "12g"):
        assert f"[{origin}]" in text
    assert "variables" in text
