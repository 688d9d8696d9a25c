#!/usr/bin/env python3
"""Build the desk MNIST sample as IDX files.

The npm package `mnist` (cazala/mnist, MIT) ships 10,000 MNIST digits as
JSON arrays of 784 floats in [0, 1], rounded to three decimals. The original
bytes are recovered exactly as round(v * 255) because byte/255 values are more
than 0.001 apart.

Usage:
    python3 tools/fetch_mnist.py [--out data/mnist] [--tarball mnist-1.1.0.tgz]

Without --tarball the script runs `npm pack mnist@1.1.0` in a temp directory.
The digits are shuffled with a fixed seed so that the first 8,000 images form
the training split and the last 2,000 the held-out split.
"""

import argparse
import json
import random
import struct
import subprocess
import tarfile
import tempfile
from pathlib import Path

SHUFFLE_SEED = 20200101
IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


def read_digits(tarball: Path):
    samples = []
    with tarfile.open(tarball, "r:gz") as tar:
        for digit in range(10):
            member = tar.getmember(f"package/src/digits/{digit}.json")
            flat = json.load(tar.extractfile(member))["data"]
            if len(flat) % 784:
                raise ValueError(f"digit {digit}: payload not a multiple of 784")
            for k in range(len(flat) // 784):
                pixels = flat[k * 784:(k + 1) * 784]
                raw = bytes(int(round(v * 255.0)) for v in pixels)
                for v, b in zip(pixels, raw):
                    if abs(b / 255.0 - v) > 6e-4:
                        raise ValueError("pixel not recoverable as a byte")
                samples.append((raw, digit))
    return samples


def write_idx(out: Path, stem: str, samples):
    with open(out / f"{stem}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, len(samples), 28, 28))
        for raw, _ in samples:
            f.write(raw)
    with open(out / f"{stem}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data/mnist")
    parser.add_argument("--tarball")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tarball = Path(args.tarball) if args.tarball else None
        if tarball is None:
            subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=tmp, check=True,
                           stdout=subprocess.DEVNULL)
            tarball = Path(tmp) / "mnist-1.1.0.tgz"
        samples = read_digits(tarball)

    random.Random(SHUFFLE_SEED).shuffle(samples)
    write_idx(out, "mnist-10k", samples)
    print(f"wrote {len(samples)} digits to {out}")


if __name__ == "__main__":
    main()
