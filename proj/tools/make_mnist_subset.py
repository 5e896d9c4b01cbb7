#!/usr/bin/env python3
"""Convert the 10k-digit MNIST subset shipped in the `mnist` npm package to IDX files.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist10k

Pixels are stored in the package as value/255 rounded to 3 decimals; they are
scaled back to bytes. The 10000 samples are shuffled with a fixed seed and
split 8000 / 2000 into the train and t10k file pairs.
"""
import argparse
import json
import pathlib
import struct

import numpy as np


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, images.shape[0], 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, labels.shape[0]))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("digits_dir", type=pathlib.Path)
    parser.add_argument("out_dir", type=pathlib.Path)
    parser.add_argument("--train", type=int, default=8000)
    parser.add_argument("--seed", type=int, default=20250101)
    args = parser.parse_args()

    images, labels = [], []
    for digit in range(10):
        raw = json.loads((args.digits_dir / f"{digit}.json").read_text())["data"]
        arr = np.asarray(raw, dtype=np.float64).reshape(-1, 784)
        images.append(np.clip(np.rint(arr * 255.0), 0, 255))
        labels.append(np.full(arr.shape[0], digit))
    images = np.concatenate(images)
    labels = np.concatenate(labels)

    order = np.random.default_rng(args.seed).permutation(images.shape[0])
    images, labels = images[order], labels[order]

    args.out_dir.mkdir(parents=True, exist_ok=True)
    n = args.train
    write_idx_images(args.out_dir / "train-images-idx3-ubyte", images[:n])
    write_idx_labels(args.out_dir / "train-labels-idx1-ubyte", labels[:n])
    write_idx_images(args.out_dir / "t10k-images-idx3-ubyte", images[n:])
    write_idx_labels(args.out_dir / "t10k-labels-idx1-ubyte", labels[n:])
    print(f"wrote {n} train / {images.shape[0] - n} test samples to {args.out_dir}")


if __name__ == "__main__":
    main()
