import numpy as np
import pytest

from cranpool import model
from conftest import make_scenario, make_channels


def test_scenario_validation():
    with pytest.raises(model.ScenarioError):
        make_scenario(subset=(3, 1))          # subset larger than n_rus
    with pytest.raises(model.ScenarioError):
        make_scenario(w=0.0)
    with pytest.raises(model.ScenarioError):
        make_scenario(gamma=-1.0)
    with pytest.raises(model.ScenarioError):
        make_scenario(fronthaul=0.0)
    sc = make_scenario(gamma=0.0)
    assert sc.privacy_threshold == 0.0


def test_geometry_inside_disk():
    sc = make_scenario(n_rus=(3, 2), n_ues=(4, 3), subset=(1, 1))
    pl = model.generate_scenario_geometry(sc, 123)
    for i in range(2):
        assert np.all(np.hypot(pl.ue_xy[i][:, 0], pl.ue_xy[i][:, 1])
                      <= sc.cell_radius + 1e-9)
        assert np.all(np.hypot(pl.ru_xy[i][:, 0], pl.ru_xy[i][:, 1])
                      <= sc.cell_radius + 1e-9)


def test_geometry_zero_radius_collapses_to_origin():
    sc = make_scenario(cell_radius=0.0)
    pl = model.generate_scenario_geometry(sc, 9)
    for i in range(2):
        assert np.allclose(pl.ue_xy[i], 0.0)
        assert np.allclose(pl.ru_xy[i], 0.0)


def test_geometry_deterministic():
    sc = make_scenario()
    a = model.generate_scenario_geometry(sc, 42)
    b = model.generate_scenario_geometry(sc, 42)
    for i in range(2):
        assert np.array_equal(a.ue_xy[i], b.ue_xy[i])
        assert np.array_equal(a.ru_xy[i], b.ru_xy[i])
    c = model.generate_scenario_geometry(sc, 43)
    assert not np.array_equal(a.ue_xy[0], c.ue_xy[0])


def test_pathloss_values():
    # at the reference distance the gain halves; at zero distance it is 1
    assert model.pathloss_gain(50.0, 50.0, 3.0) == pytest.approx(0.5)
    assert model.pathloss_gain(0.0, 50.0, 3.0) == pytest.approx(1.0)
    assert model.pathloss_gain(100.0, 50.0, 3.0) == pytest.approx(1.0 / 9.0)


def test_channel_variance_matches_pathloss():
    # many i.i.d. draws at a pinned geometry: empirical per-entry variance
    # approaches 1 / (1 + (d / d_ref)^alpha)
    sc = model.Scenario(
        n_rus=(1, 1), n_ues=(1, 1), n_antennas=((1,), (1,)),
        fronthaul_capacity=((5e8,), (5e8,)), backhaul_capacity=(1e9, 1e9),
        total_bandwidth=1e8, p_max=1.0, privacy_threshold=6e8,
        subset_size=(1, 1), cell_radius=0.0)
    # all nodes at origin except we fake distance via d_ref scaling:
    # with radius 0 every distance is 0, so instead draw a large batch at a
    # fixed 100 m separation using the raw path-loss formula
    rng = np.random.default_rng(11)
    n = 100_000
    gain = model.pathloss_gain(100.0, 50.0, 3.0)
    draws = np.sqrt(gain / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    var = float(np.mean(np.abs(draws) ** 2))
    assert var == pytest.approx(1.0 / 9.0, rel=0.03)
    # and the generator itself: zero distance -> unit variance
    pl = model.generate_scenario_geometry(sc, 1)
    ch = model.generate_channels(sc, pl, 1)
    samples = []
    for seed in range(400):
        chs = model.generate_channels(sc, pl, seed)
        samples.append(chs.h[0][0][0][0][0])
    var0 = float(np.mean(np.abs(samples) ** 2))
    assert var0 == pytest.approx(1.0, rel=0.15)


def test_channels_deterministic_and_finite():
    sc = make_scenario(n_antennas=((2, 1), (1, 3)))
    pl = model.generate_scenario_geometry(sc, 7)
    a = model.generate_channels(sc, pl, 7)
    b = model.generate_channels(sc, pl, 7)
    for j in range(2):
        for k in range(sc.n_ues[j]):
            for i in range(2):
                for r in range(sc.n_rus[i]):
                    assert np.array_equal(a.h[j][k][i][r], b.h[j][k][i][r])
                    assert np.all(np.isfinite(a.h[j][k][i][r].view(float)))


def test_stacking_roundtrip():
    sc = make_scenario(n_rus=(2, 3), n_ues=(2, 1), subset=(1, 2),
                       n_antennas=((2, 1), (1, 2, 1)))
    ch = make_channels(sc, seed=3)
    for i in range(2):
        for k in range(sc.n_ues[i]):
            pos = 0
            for r in range(sc.n_rus[i]):
                n = sc.n_antennas[i][r]
                block = ch.stacked_private[i][k][pos:pos + n]
                assert np.array_equal(block, ch.h[i][k][i][r])
                pos += n
            assert pos == len(ch.stacked_private[i][k])


def test_shared_stack_composition():
    sc = make_scenario(n_rus=(2, 3), n_ues=(1, 2), subset=(2, 1),
                       n_antennas=((2, 1), (1, 2, 1)))
    ch = make_channels(sc, seed=4)
    for i in range(2):
        j = model.other(i)
        for k in range(sc.n_ues[i]):
            own = ch.stacked_shared_own[i][k]
            # own RUs first
            pos = 0
            for r in range(sc.n_rus[i]):
                n = sc.n_antennas[i][r]
                assert np.array_equal(own[pos:pos + n], ch.h[i][k][i][r])
                pos += n
            # then the other operator's subset RUs
            for r in ch.subset[j]:
                n = sc.n_antennas[j][r]
                assert np.array_equal(own[pos:pos + n], ch.h[i][k][j][r])
                pos += n
            assert pos == len(own)
            # cross stack: all other-op RUs then own subset blocks
            cross = ch.stacked_shared_cross[i][k]
            pos = 0
            for r in range(sc.n_rus[j]):
                n = sc.n_antennas[j][r]
                assert np.array_equal(cross[pos:pos + n], ch.h[i][k][j][r])
                pos += n
            for r in ch.subset[i]:
                n = sc.n_antennas[i][r]
                assert np.array_equal(cross[pos:pos + n], ch.h[i][k][i][r])
                pos += n
            assert pos == len(cross)


def test_subset_selection_ranks_cross_norms():
    # 3 RUs with cross-channel norms (2, 5, 3) and subset size 2 must pick
    # the RUs with norms 5 and 3, i.e. indices 1 and 2
    sc = make_scenario(n_rus=(3, 1), n_ues=(1, 1), subset=(2, 0),
                       n_antennas=((1, 1, 1), (1,)))
    h = [[[[None for _ in range(sc.n_rus[i])] for i in range(2)]]
         for _ in range(2)]
    for j in range(2):
        for i in range(2):
            for r in range(sc.n_rus[i]):
                h[j][0][i][r] = np.array([0.1 + 0.0j])
    # cross-tenant channels into operator 0's RUs come from UE (1, 0)
    h[1][0][0][0] = np.array([2.0 + 0.0j])
    h[1][0][0][1] = np.array([5.0 + 0.0j])
    h[1][0][0][2] = np.array([3.0 + 0.0j])
    ch = model.channel_set_from_links(sc, h)
    assert ch.subset[0] == (1, 2)
    assert ch.subset[1] == ()


def test_subset_full_and_empty():
    sc = make_scenario(n_rus=(2, 2), subset=(2, 0))
    ch = make_channels(sc, seed=8)
    assert ch.subset[0] == (0, 1)
    assert ch.subset[1] == ()


def test_subset_tie_breaks_low_index():
    sc = make_scenario(n_rus=(2, 1), n_ues=(1, 1), subset=(1, 0),
                       n_antennas=((1, 1), (1,)))
    h = [[[[np.array([1.0 + 0.0j]) for _ in range(sc.n_rus[i])]
           for i in range(2)]] for _ in range(2)]
    ch = model.channel_set_from_links(sc, h)
    assert ch.subset[0] == (0,)


def test_channel_export_import_roundtrip(tmp_path):
    sc = make_scenario(n_antennas=((2, 1), (1, 3)), subset=(1, 2))
    ch = make_channels(sc, seed=12)
    path = tmp_path / "channels.txt"
    model.export_channels(ch, str(path))
    ch2 = model.import_channels(sc, str(path))
    for j, k, i, r in model.iter_links(sc):
        assert np.allclose(ch.h[j][k][i][r], ch2.h[j][k][i][r], rtol=0, atol=0)
    assert ch2.subset == ch.subset


def test_with_subset_size_keeps_fading():
    sc = make_scenario(n_rus=(3, 3), subset=(1, 1),
                       n_antennas=((1, 1, 1), (1, 1, 1)))
    ch = make_channels(sc, seed=2)
    ch4 = ch.with_subset_size((3, 3))
    assert ch4.subset == ((0, 1, 2), (0, 1, 2))
    assert np.array_equal(ch4.h[0][0][1][2], ch.h[0][0][1][2])
