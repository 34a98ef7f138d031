import numpy as np
import pytest

from cranpool import metrics, model


def make_scenario(n_rus=(2, 2), n_ues=(2, 2), n_antennas=None,
                  fronthaul=5e8, backhaul=1e9, w=1e8, p_max=1.0,
                  gamma=6e8, subset=(1, 1), **kw):
    if n_antennas is None:
        n_antennas = tuple(tuple(1 for _ in range(n_rus[i])) for i in range(2))
    return model.Scenario(
        n_rus=n_rus, n_ues=n_ues, n_antennas=n_antennas,
        fronthaul_capacity=tuple(tuple(fronthaul for _ in range(n_rus[i]))
                                 for i in range(2)),
        backhaul_capacity=(backhaul, backhaul),
        total_bandwidth=w, p_max=p_max, privacy_threshold=gamma,
        subset_size=subset, **kw)


def make_channels(scenario, seed=0):
    placement = model.generate_scenario_geometry(scenario, seed)
    return model.generate_channels(scenario, placement, seed)


def random_design(channels, scenario, rng, band_split=None, power_scale=0.6,
                  quant_scale=0.4):
    """A generic design with random complex quantizers; not always feasible."""
    if band_split is None:
        w = rng.dirichlet([2.0, 2.0, 2.0]) * scenario.total_bandwidth
    else:
        w = np.asarray(band_split, dtype=float) * scenario.total_bandwidth
    design = metrics.zero_design(
        scenario, metrics.BandAllocation((w[0], w[1]), w[2]))
    for i in range(2):
        design.power[i][:, :] = rng.uniform(
            0.2, 1.0, size=design.power[i].shape) * power_scale * np.sqrt(scenario.p_max)
        for r in range(scenario.n_rus[i]):
            n = scenario.n_antennas[i][r]
            for m in range(2):
                mat = (rng.standard_normal((n, n))
                       + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
                design.quantizer[i][r][m] = quant_scale * mat
    metrics.refresh_rates(channels, design)
    return design


def feasible_design(channels, scenario, rng, **kw):
    design = random_design(channels, scenario, rng, **kw)
    for _ in range(60):
        metrics.refresh_rates(channels, design)
        if metrics.constraint_report(channels, scenario, design).is_feasible(1e-9):
            return design
        for i in range(2):
            design.power[i] *= 0.7
            for r in range(scenario.n_rus[i]):
                design.quantizer[i][r] *= 0.7
    raise RuntimeError("no feasible design found")


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def small_instance(rng):
    sc = make_scenario()
    ch = make_channels(sc, seed=5)
    d = feasible_design(ch, sc, rng)
    return sc, ch, d
