#!/usr/bin/env python3
"""Write MNIST IDX files from the 5000-image MNIST sample bundled with mlxtend.

Use this when the official MNIST files cannot be downloaded. The sample is
split into a class-balanced training part and test part, written with the standard file
names so that `fsprune --dataset mnist --data-dir DIR` can read them.
"""

import argparse
import gzip
import importlib.util
import os
import struct
import zipfile


def read_rows(source):
    if source.endswith(".whl"):
        with zipfile.ZipFile(source) as whl:
            raw = whl.read("mlxtend/data/data/mnist_5k.csv.gz")
    elif source:
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        spec = importlib.util.find_spec("mlxtend")
        if spec is None:
            raise SystemExit("mlxtend is not installed; pass --source with the wheel or mnist_5k.csv.gz")
        path = os.path.join(os.path.dirname(spec.origin), "data", "data", "mnist_5k.csv.gz")
        with open(path, "rb") as fh:
            raw = fh.read()
    rows = []
    for line in gzip.decompress(raw).decode().splitlines():
        values = [int(float(v)) for v in line.split(",")]
        rows.append((values[:-1], values[-1]))
    return rows


def write_idx(rows, images_path, labels_path):
    with open(images_path, "wb") as img:
        img.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        for pixels, _ in rows:
            img.write(bytes(pixels))
    with open(labels_path, "wb") as lab:
        lab.write(struct.pack(">II", 0x00000801, len(rows)))
        lab.write(bytes(label for _, label in rows))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/mnist")
    parser.add_argument("--source", default="", help="mlxtend wheel or mnist_5k.csv.gz (default: installed mlxtend)")
    parser.add_argument("--test-count", type=int, default=1000)
    args = parser.parse_args()

    rows = read_rows(args.source)
    # The sample is sorted by class: send every k-th image of each class to the
    # test split so both splits are balanced.
    stride = max(1, len(rows) // args.test_count)
    test = [r for i, r in enumerate(rows) if i % stride == stride - 1][: args.test_count]
    chosen = {id(r) for r in test}
    train = [r for r in rows if id(r) not in chosen]
    os.makedirs(args.out, exist_ok=True)
    write_idx(train, os.path.join(args.out, "train-images-idx3-ubyte"), os.path.join(args.out, "train-labels-idx1-ubyte"))
    write_idx(test, os.path.join(args.out, "t10k-images-idx3-ubyte"), os.path.join(args.out, "t10k-labels-idx1-ubyte"))
    print(f"wrote {len(train)} training and {len(test)} test images to {args.out}")


if __name__ == "__main__":
    main()
