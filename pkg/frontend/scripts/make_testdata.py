#!/usr/bin/env python3
"""Generate the figure-style CSV fixtures consumed by the frontend tests.

Produces, with small trial counts so regeneration stays quick:
  * fig2_sr{1..4}.csv: backhaul-capacity sweeps of the optimized scheme at
    relay subset sizes 1..4 (4-RU / 4-UE system).
  * fig3_snr{0,10,20}db.csv: privacy-threshold sweeps of all four schemes
    (2-RU / 2-UE system) at three SNRs.

Run from anywhere; writes into frontend/testdata/.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", "src"))

from cranpool import harness, model  # noqa: E402

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "testdata")


def fig2_scenario(s_r: int) -> model.Scenario:
    return model.Scenario(
        n_rus=(4, 4), n_ues=(4, 4), n_antennas=((1,) * 4, (1,) * 4),
        fronthaul_capacity=((5e8,) * 4, (5e8,) * 4),
        backhaul_capacity=(1e9, 1e9), total_bandwidth=1e8, p_max=1.0,
        privacy_threshold=6e8, subset_size=(s_r, s_r))


def fig3_scenario(snr_db: float) -> model.Scenario:
    return model.Scenario(
        n_rus=(2, 2), n_ues=(2, 2), n_antennas=((1, 1), (1, 1)),
        fronthaul_capacity=((5e8, 5e8), (5e8, 5e8)),
        backhaul_capacity=(1e9, 1e9), total_bandwidth=1e8,
        p_max=model.snr_db_to_p_max(snr_db), privacy_threshold=6e8,
        subset_size=(2, 2))


def main(jobs: int = 2) -> None:
    os.makedirs(OUT_DIR, exist_ok=True)
    for s_r in (1, 2, 3, 4):
        spec = harness.ExperimentSpec(
            scenario=fig2_scenario(s_r), sweep_axis="backhaul_capacity",
            sweep_values=(1e7, 1e8, 1e9, 1e10), schemes=("optimized-pooling",),
            trials=2, base_seed=40,
            output=os.path.join(OUT_DIR, f"fig2_sr{s_r}.csv"))
        path = harness.run_experiment(spec, jobs=jobs)
        print("wrote", path)
    for snr in (0, 10, 20):
        spec = harness.ExperimentSpec(
            scenario=fig3_scenario(snr), sweep_axis="privacy_threshold",
            sweep_values=(1e7, 2e8, 6e8, 1.5e9),
            schemes=("optimized-pooling", "no-pooling", "equal-thirds",
                     "orthogonal-optimized"),
            trials=2, base_seed=60,
            output=os.path.join(OUT_DIR, f"fig3_snr{snr}db.csv"))
        path = harness.run_experiment(spec, jobs=jobs)
        print("wrote", path)


if __name__ == "__main__":
    main(jobs=int(sys.argv[1]) if len(sys.argv) > 1 else 2)
