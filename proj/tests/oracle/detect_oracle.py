#!/usr/bin/env python3
"""Independent detector oracle.

Generates a recording with the CLI, reimplements quantization, stage hits,
segmentation and chaining from their definitions, and compares the result
with the CLI's events for a hand-built 3-stage mask and a few random ones.
Chains are enumerated exhaustively rather than searched.
"""

import argparse
import csv
import math
import random
import subprocess
import sys
import tempfile
from pathlib import Path

DEFAULTS = {"dur": (2000, 3000), "gap": (-200, 2000), "outlier": 50}
LATTICE = (-16.0, 16.0, 16)  # min, max, bits per dimension


def quantize(v, lo, hi, bits):
    top = (1 << bits) - 1
    v = min(max(v, lo), hi)
    return min(top, math.floor((v - lo) / (hi - lo) * top + 0.5))


def parse_mask(text):
    stages, params = [], dict(DEFAULTS)
    for line in text.splitlines():
        tokens = line.split("#", 1)[0].split()
        if not tokens or tokens[0] == "name":
            continue
        if tokens[0] == "stage":
            vals = [float(x) for x in tokens[1:]]
            stages.append((vals[0::2], vals[1::2]))
        elif tokens[0] in ("dur", "gap"):
            params[tokens[0]] = (int(tokens[1]), int(tokens[2]))
        elif tokens[0] == "outlier":
            params["outlier"] = int(tokens[1])
    return stages, params


def stage_times(rows, box):
    lo = [quantize(v, *LATTICE) for v in box[0]]
    hi = [quantize(v, *LATTICE) for v in box[1]]
    hits = []
    for t, values in rows:
        q = [quantize(v, *LATTICE) for v in values]
        if all(l <= c <= h for c, l, h in zip(q, lo, hi)):
            hits.append(t)
    return hits


def segments(times, params):
    runs = []
    for t in times:
        if runs and t - runs[-1][-1] <= params["outlier"]:
            runs[-1].append(t)
        else:
            runs.append([t])
    dmin, dmax = params["dur"]
    return [(r[0], r[-1]) for r in runs if dmin <= r[-1] - r[0] <= dmax]


def chains(per_stage, params):
    gmin, gmax = params["gap"]
    best = {}

    def walk(stage, first, prev_end):
        if stage == len(per_stage):
            best[first] = min(best.get(first, prev_end), prev_end)
            return
        for seg in per_stage[stage]:
            if gmin <= seg[0] - prev_end <= gmax:
                walk(stage + 1, first, seg[1])

    for seg in per_stage[0]:
        walk(1, seg, seg[1])
    return sorted((first[0], end) for first, end in best.items())


def oracle_events(rows, mask_text):
    stages, params = parse_mask(mask_text)
    per_stage = [segments(stage_times(rows, box), params) for box in stages]
    return chains(per_stage, params)


def run(cli, *args):
    return subprocess.run([cli, *args], check=True, capture_output=True, text=True).stdout


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cli", required=True)
    args = ap.parse_args()

    # Braking followed by a lane change chains when the gap is small enough;
    # the pairs at 40 s and 70 s are too far apart or incomplete.
    chained = """name brake_then_swerve
stage -16 -0.0002 -1 1
stage -0.5 0.5 -16 -0.0002
stage -0.5 0.5 0.0007 16
dur 1000 3000
outlier 20
"""
    # Random variations of it: thresholds move into the noise band, so
    # segment edges and chains depend on noisy samples.
    rng = random.Random(7)
    masks = {"chained": chained}
    for k in range(6):
        width = rng.uniform(0.2, 2.0)
        lines = [
            f"name random{k}",
            f"stage -16 {-rng.uniform(0.0002, 3.0)!r} {-width!r} {width!r}",
            f"stage {-width!r} {width!r} -16 {-rng.uniform(0.0002, 2.0)!r}",
            f"stage {-width!r} {width!r} {rng.uniform(0.0007, 2.0)!r} 16",
            f"dur {rng.randint(100, 900)} {rng.randint(1500, 3000)}",
            f"gap {rng.randint(-100, 0)} {rng.randint(200, 3000)}",
            f"outlier {rng.randint(10, 60)}",
        ]
        masks[f"random{k}"] = "\n".join(lines) + "\n"

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        run(args.cli, "generate", "--duration", "180", "--seed", "3", "--noise", "0.3",
            "--braking", "10000:8", "--lane-change", "13000:4",
            "--braking", "40000:6", "--lane-change", "45000:5",
            "--lane-change", "70000:3",
            "--braking", "100000:9", "--lane-change", "102500:7",
            "--braking", "130000:5", "--lane-change", "132600:6", "--lane-change", "136000:6",
            "--out", str(tmp / "drive.csv"))
        run(args.cli, "ingest", "--csv", str(tmp / "drive.csv"), "--store", str(tmp / "store"))
        with open(tmp / "drive.csv", newline="") as f:
            reader = csv.reader(f)
            next(reader)
            rows = [(int(r[0]), [float(x) for x in r[1:]]) for r in reader]

        failures = 0
        for name, text in masks.items():
            path = tmp / f"{name}.mask"
            path.write_text(text)
            expected = oracle_events(rows, text)
            for detector in ("bf_primitive", "bf_improved", "sfc"):
                out = run(args.cli, "query", "--store", str(tmp / "store"), "--mask", str(path),
                          "--detector", detector)
                got = [(int(r["t_start_ms"]), int(r["t_end_ms"])) for r in csv.DictReader(out.splitlines())]
                status = "ok" if got == expected else "MISMATCH"
                failures += got != expected
                print(f"{name:8s} {detector:13s} {len(got):3d} events  {status}")
            if name == "chained" and len(expected) != 3:
                print(f"chained mask: expected 3 oracle events, got {expected}")
                failures += 1
        return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
