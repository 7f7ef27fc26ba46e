#!/usr/bin/env python3
# Copyright 2026 The lnx Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds gzipped IDX files from the 10k-digit MNIST sample in the npm `mnist`
package (fetch it with `npm pack mnist`).

Per digit, the first 80% of samples go to the training split and the rest to
the test split. Both splits are interleaved with a fixed permutation so the
files are not sorted by class.
"""
import argparse
import gzip
import json
import random
import struct
import tarfile


def write_idx(path, magic, dims, payload):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(payload)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("tarball")
    ap.add_argument("outdir")
    ap.add_argument("--train-fraction", type=float, default=0.8)
    args = ap.parse_args()

    train, test = [], []
    with tarfile.open(args.tarball) as tar:
        for digit in range(10):
            member = tar.getmember(f"package/src/digits/{digit}.json")
            values = json.load(tar.extractfile(member))["data"]
            count = len(values) // 784
            split = int(count * args.train_fraction)
            for k in range(count):
                pixels = bytes(
                    min(255, max(0, round(v * 255))) for v in values[k * 784:(k + 1) * 784])
                (train if k < split else test).append((pixels, digit))

    rng = random.Random(20220101)
    for name, rows in (("train", train), ("t10k", test)):
        rng.shuffle(rows)
        write_idx(f"{args.outdir}/{name}-images-idx3-ubyte.gz", 0x803,
                  (len(rows), 28, 28), b"".join(p for p, _ in rows))
        write_idx(f"{args.outdir}/{name}-labels-idx1-ubyte.gz", 0x801,
                  (len(rows),), bytes(d for _, d in rows))
        print(name, len(rows))


if __name__ == "__main__":
    main()
