# SPDX-License-Identifier: Apache-2.0
"""Builds tests/data/mnist_subset.bin.gz from MNIST digits shipped inside two
public packages (npm `mnist` 1.1.0 and the `mlxtend` 0.24.0 wheel).

Output layout (little-endian, gzip-compressed):
  magic "MNSB", u32 train count, u32 test count, u32 height, u32 width,
  then one u8 intensity per pixel, train images first.

Usage: prepare_mnist.py --npm-dir <package/src/digits> --mlxtend-wheel <whl> --out <file>
"""

import argparse
import gzip
import hashlib
import io
import json
import random
import struct
import zipfile
from pathlib import Path

SIDE = 28
PIXELS = SIDE * SIDE


def npm_digits(digits_dir):
    images = []
    for label in range(10):
        data = json.loads((Path(digits_dir) / f"{label}.json").read_text())["data"]
        if len(data) % PIXELS:
            raise ValueError(f"{label}.json: length {len(data)} is not a multiple of {PIXELS}")
        # Stored as round(x / 255, 3); the rounding error stays below half a level.
        ints = bytes(round(v * 255) for v in data)
        images.extend(ints[i : i + PIXELS] for i in range(0, len(ints), PIXELS))
    return images


def mlxtend_digits(wheel):
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()
    images = []
    for line in io.StringIO(raw):
        fields = line.strip().split(",")
        if len(fields) != PIXELS + 1:
            continue
        images.append(bytes(int(v) for v in fields[:PIXELS]))
    return images


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--npm-dir", required=True)
    ap.add_argument("--mlxtend-wheel", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--test-fraction", type=float, default=1 / 6)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()

    seen = set()
    unique = []
    for img in npm_digits(args.npm_dir) + mlxtend_digits(args.mlxtend_wheel):
        key = hashlib.sha1(img).digest()
        if key not in seen:
            seen.add(key)
            unique.append(img)

    random.Random(args.seed).shuffle(unique)
    n_test = round(len(unique) * args.test_fraction)
    test, train = unique[:n_test], unique[n_test:]

    payload = struct.pack("<4sIIII", b"MNSB", len(train), len(test), SIDE, SIDE)
    payload += b"".join(train) + b"".join(test)
    Path(args.out).write_bytes(gzip.compress(payload, compresslevel=9, mtime=0))
    print(f"{len(unique)} unique images: {len(train)} train, {len(test)} test -> {args.out}")


if __name__ == "__main__":
    main()
