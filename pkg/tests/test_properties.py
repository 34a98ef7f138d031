"""Property tests of the algebraic invariants behind the surrogate system."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from cranpool import harness, metrics
from conftest import make_scenario

pos = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False,
                allow_infinity=False)


@given(g=pos, w=st.floats(min_value=1e-6, max_value=1.0), rho2=pos)
def test_usage_cap_is_a_product_underestimator(g, w, rho2):
    # anchored at rho = w g, the cap equals g and never exceeds rho'/w
    rho = w * g
    c = np.sqrt(rho) / w
    anchored = 2 * c * np.sqrt(rho) - c ** 2 * w
    assert abs(anchored - g) <= 1e-9 * max(g, 1.0)
    assert 2 * c * np.sqrt(rho2) - c ** 2 * w <= rho2 / w + 1e-9 * max(rho2 / w, 1.0)


@given(alpha=pos, w=st.floats(min_value=1e-6, max_value=1.0), a2=pos)
def test_rate_cap_is_a_product_underestimator(alpha, w, a2):
    # anchored at c = alpha sqrt(w): equals alpha w; for any other alpha'
    # stays below alpha' w
    c = alpha * np.sqrt(w)
    assert abs((2 * c * np.sqrt(w) - c ** 2 / alpha) - alpha * w) <= 1e-9 * max(alpha * w, 1.0)
    assert 2 * c * np.sqrt(w) - c ** 2 / a2 <= a2 * w + 1e-9 * max(a2 * w, 1.0)


@given(rates=st.lists(st.floats(min_value=0, max_value=1e10), min_size=1,
                      max_size=6),
       gamma=st.floats(min_value=0, max_value=1e10))
@settings(max_examples=60)
def test_secrecy_clamps_per_ue(rates, gamma):
    sc = make_scenario(n_ues=(len(rates), 0), gamma=gamma)
    d = metrics.zero_design(sc, metrics.BandAllocation((5e7, 5e7), 0.0))
    for k, r in enumerate(rates):
        d.rates[0][k, 0] = r
    expected = sum(max(r - gamma, 0.0) for r in rates)
    got = metrics.secrecy_sum_rate(d, sc)
    assert abs(got - expected) <= 1e-6 * max(expected, 1.0)
    assert got <= sum(rates) + 1e-9


@given(st.integers(min_value=-(2 ** 62), max_value=2 ** 62))
@settings(max_examples=30)
def test_config_parser_roundtrips_integers(x):
    cfg = harness.parse_config_text(f"base_seed = {x}\n")
    assert cfg["base_seed"] == x


@given(st.lists(st.floats(min_value=1e-3, max_value=1e12, allow_nan=False),
                min_size=1, max_size=5))
@settings(max_examples=30)
def test_config_parser_roundtrips_float_lists(values):
    line = "sweep_values = [" + ", ".join(repr(v) for v in values) + "]\n"
    cfg = harness.parse_config_text(line)
    assert cfg["sweep_values"] == values
