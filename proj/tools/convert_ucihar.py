#!/usr/bin/env python3
"""Convert the UCI-HAR "Inertial Signals" release into efflif CSV files.

Each row is one 128-sample window: 6 channels (total_acc x/y/z, body_gyro
x/y/z), channel-major, followed by the activity label 0..5. The official
train split is divided into train and val by subject; test is kept as is.

    python3 tools/convert_ucihar.py "UCI HAR Dataset" out/ucihar
"""

import argparse
import csv
import random
from pathlib import Path

SIGNALS = ["total_acc_x", "total_acc_y", "total_acc_z", "body_gyro_x", "body_gyro_y", "body_gyro_z"]
LENGTH = 128


def read_matrix(path):
    with open(path) as f:
        return [[float(v) for v in line.split()] for line in f if line.strip()]


def read_column(path):
    with open(path) as f:
        return [int(line) for line in f if line.strip()]


def load_split(root, split):
    base = root / split
    channels = [read_matrix(base / "Inertial Signals" / f"{s}_{split}.txt") for s in SIGNALS]
    labels = [y - 1 for y in read_column(base / f"y_{split}.txt")]
    subjects = read_column(base / f"subject_{split}.txt")
    rows = []
    for i, y in enumerate(labels):
        feats = []
        for ch in channels:
            if len(ch[i]) != LENGTH:
                raise SystemExit(f"{split} window {i}: expected {LENGTH} samples, got {len(ch[i])}")
            feats.extend(ch[i])
        rows.append((feats, y, subjects[i]))
    return rows


def write_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        for feats, y, _ in rows:
            w.writerow([repr(v) for v in feats] + [y])


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("source", type=Path, help="extracted 'UCI HAR Dataset' directory")
    ap.add_argument("out", type=Path, help="output directory")
    ap.add_argument("--val-subjects", type=int, default=4, help="training subjects held out for validation")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    train = load_split(args.source, "train")
    test = load_split(args.source, "test")
    subjects = sorted({s for _, _, s in train})
    held = set(random.Random(args.seed).sample(subjects, args.val_subjects))
    val = [r for r in train if r[2] in held]
    train = [r for r in train if r[2] not in held]

    args.out.mkdir(parents=True, exist_ok=True)
    for name, rows in (("train", train), ("val", val), ("test", test)):
        write_csv(args.out / f"{name}.csv", rows)
    (args.out / "manifest.ini").write_text(
        "schema = efflif-data/1\n\n[data]\n"
        "train_csv = train.csv\nval_csv = val.csv\ntest_csv = test.csv\n"
        f"channels = {len(SIGNALS)}\nlength = {LENGTH}\nclasses = 6\n"
    )
    print(f"train={len(train)} val={len(val)} test={len(test)} -> {args.out / 'manifest.ini'}")


if __name__ == "__main__":
    main()
