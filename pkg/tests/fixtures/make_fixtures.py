"""Regenerate the CSV fixtures: ``python3 tests/fixtures/make_fixtures.py``."""

import csv
from pathlib import Path

import numpy as np

from mprsel.simulation import SimScenario, calibrate_censoring, generate_dataset

HERE = Path(__file__).parent


def write(path, data, cov):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "status"] + [f"x{j}" for j in range(1, cov.shape[1] + 1)])
        for i in range(data.n):
            w.writerow([repr(float(data.t[i])), int(data.delta[i])]
                       + [repr(float(v)) for v in cov[i]])


def main():
    sc = SimScenario(n=1000, rng_seed=1000)
    data, cov = generate_dataset(sc, calibrate_censoring(sc), np.random.default_rng(1000))
    write(HERE / "truth_n1000.csv", data, cov)


if __name__ == "__main__":
    main()
