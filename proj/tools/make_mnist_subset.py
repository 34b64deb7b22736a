#!/usr/bin/env python3
"""Write a small MNIST subset as gzipped IDX files.

The source is the 5,000-image MNIST sample shipped inside the mlxtend wheel
(mlxtend/data/data/mnist_5k.csv.gz: 784 pixel columns followed by the label).
Each class is split 80/20 in file order into train and test.

    pip download --no-deps -d /tmp/pd mlxtend==0.24.0
    python3 tools/make_mnist_subset.py /tmp/pd/mlxtend-0.24.0-py3-none-any.whl data/mnist5k
"""

import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def write_gz(path, payload):
    # mtime=0 keeps the archives byte-reproducible.
    with open(path, "wb") as raw:
        with gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as gz:
            gz.write(payload)


def images_idx(rows):
    head = struct.pack(">IIII", 0x803, len(rows), 28, 28)
    return head + b"".join(bytes(r) for r in rows)


def labels_idx(labels):
    return struct.pack(">II", 0x801, len(labels)) + bytes(labels)


def main():
    if len(sys.argv) != 3:
        sys.exit("usage: make_mnist_subset.py WHEEL OUT_DIR")
    wheel, out = Path(sys.argv[1]), Path(sys.argv[2])
    text = gzip.decompress(zipfile.ZipFile(wheel).read(MEMBER)).decode()
    by_class = {k: [] for k in range(10)}
    for line in text.splitlines():
        vals = [int(float(v)) for v in line.split(",")]
        by_class[vals[-1]].append(vals[:-1])

    split = {"train": ([], []), "test": ([], [])}
    for k in range(10):
        cut = len(by_class[k]) * 4 // 5
        for i, px in enumerate(by_class[k]):
            imgs, labs = split["train" if i < cut else "test"]
            imgs.append(px)
            labs.append(k)

    out.mkdir(parents=True, exist_ok=True)
    for name, (imgs, labs) in split.items():
        write_gz(out / f"{name}-images-idx3-ubyte.gz", images_idx(imgs))
        write_gz(out / f"{name}-labels-idx1-ubyte.gz", labels_idx(labs))
        print(f"{name}: {len(labs)} images")


if __name__ == "__main__":
    main()
