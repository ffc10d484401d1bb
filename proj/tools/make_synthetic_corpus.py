#!/usr/bin/env python3
"""Writes the bundled synthetic corpus: five assets on weekdays 2005-2008.

Each asset alternates between a log-normal random walk and a bubble phase in
which p^-n follows a drifting Gaussian walk. Bubble phases start with a
lag across assets so transfer entropy has something to find; 2008 is a
broad decline of asset-specific depth.
"""
import argparse
import datetime as dt
import math
import random
from pathlib import Path

ASSETS = [
    # id, group, subsector, start price, bubble start (day), bubble length, 2008 drift
    ("ind_a", "industrial", "", 8.0, 300, 180, -0.0030),
    ("ind_b", "industrial", "", 12.0, 315, 170, -0.0022),
    ("ind_c", "industrial", "", 5.0, 340, 150, -0.0012),
    ("fin_a", "financial", "bank", 20.0, 330, 160, -0.0026),
    ("fin_b", "financial", "insurance", 15.0, 360, 120, -0.0016),
]
N = 0.5
OFFSET = -7.0  # matches preprocess.log_price_offset in the config


def weekdays(first, last):
    d = first
    while d <= last:
        if d.weekday() < 5:
            yield d
        d += dt.timedelta(days=1)


def simulate(rng, days, p0, bubble_start, bubble_len, drift_2008):
    y = math.log(p0)
    out = []
    crash_start = next(i for i, d in enumerate(days) if d.year == 2008)
    for i, _ in enumerate(days):
        if bubble_start <= i < bubble_start + bubble_len:
            # bubble phase on the shifted scale, where prices sit far below 1
            z = math.exp(-N * (y + OFFSET))
            z += -N * 0.02 + N * 0.02 * rng.gauss(0.0, 1.0)
            z = max(z, 1e-6)
            y = -math.log(z) / N - OFFSET
        elif i >= crash_start:
            y += drift_2008 + 0.025 * rng.gauss(0.0, 1.0)
        else:
            y += 0.0002 + 0.012 * rng.gauss(0.0, 1.0)
        out.append(y)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "synthetic"))
    ap.add_argument("--seed", type=int, default=20060101)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    days = list(weekdays(dt.date(2005, 1, 3), dt.date(2008, 12, 31)))
    for asset_id, _, _, p0, start, length, drift in ASSETS:
        ys = simulate(rng, days, p0, start, length, drift)
        with open(out / f"{asset_id}.csv", "w") as f:
            f.write("date,price,market_cap\n")
            for d, y in zip(days, ys):
                price = math.exp(y)
                f.write(f"{d.isoformat()},{price:.6f},{price * 1e6:.2f}\n")


if __name__ == "__main__":
    main()
