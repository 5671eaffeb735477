#!/usr/bin/env python3
"""Regenerate data/quakes.csv.

The file is a synthetic stand-in for the Fiji seismic-event table shipped
with R (datasets::quakes): same schema (lat, long, depth, mag, stations),
same row count (1000) and the same spatial extent, drawn from a mixture
that mimics the two seismic arcs in the original. Environments with R can
replace it with the genuine table via
    write.csv(quakes, "data/quakes.csv", row.names = FALSE)
"""

import numpy as np

rng = np.random.default_rng(19640101)

N = 1000
rows = []


def clipped_normal(mean, sd, lo, hi):
    while True:
        v = rng.normal(mean, sd)
        if lo <= v <= hi:
            return v


for i in range(N):
    u = rng.random()
    if u < 0.55:
        # Tonga-Kermadec band: deep events along a NNE-SSW arc
        t = rng.beta(2.2, 2.8)
        lat = -37.5 + 25.5 * t + rng.normal(0, 1.1)
        lon = 179.5 + 6.5 * t + rng.normal(0, 1.0)
        depth = clipped_normal(520 - 240 * (1 - t), 90, 40, 680)
    elif u < 0.82:
        # Fiji platform cluster: shallow-to-mid depths near (-20, 182)
        lat = clipped_normal(-20.5, 2.0, -27, -14)
        lon = clipped_normal(182.2, 1.6, 178, 187)
        depth = clipped_normal(120, 60, 40, 350)
    else:
        # Vanuatu arc: shallow band to the west
        t = rng.beta(2.0, 2.0)
        lat = -22.0 + 9.5 * t + rng.normal(0, 0.8)
        lon = 166.8 + 3.8 * t + rng.normal(0, 0.7)
        depth = clipped_normal(140, 70, 40, 400)
    lat = float(np.clip(lat, -38.59, -10.72))
    lon = float(np.clip(lon, 165.67, 188.13))
    mag = min(4.0 + rng.exponential(0.40), 6.4)
    stations = max(10, int(round(10 + (mag - 4.0) * 38 + rng.exponential(8))))
    rows.append((round(lat, 2), round(lon, 2), int(round(depth)), round(mag, 1), stations))

with open("data/quakes.csv", "w") as f:
    f.write("lat,long,depth,mag,stations\n")
    for lat, lon, depth, mag, stations in rows:
        f.write(f"{lat:.2f},{lon:.2f},{depth},{mag:.1f},{stations}\n")

print(f"wrote {N} rows to data/quakes.csv")
