#!/usr/bin/env python3
"""Convert the bundled MNIST / Fashion-MNIST subsets into gzipped IDX files.

Sources (both fetched through the regular package managers):

  * MNIST: the 5000-image subset shipped inside the ``mlxtend`` wheel
    (``mlxtend/data/data/mnist_5k.csv.gz``, 500 images per digit).
        pip download --no-deps mlxtend
  * Fashion-MNIST: the ``fashion-mnist`` npm package, which stores all
    70000 images as JSON arrays, one file per class.
        npm pack fashion-mnist

Usage:
    scripts/build_datasets.py <mlxtend.whl> <fashion-mnist.tgz> <out_dir>

Writes ``mnist-5k-{images-idx3,labels-idx1}-ubyte.gz`` and
``fashion-mnist-5x1000-{images-idx3,labels-idx1}-ubyte.gz`` (classes 0..4,
first 1000 images of each).
"""
import gzip
import io
import json
import struct
import sys
import tarfile
import zipfile

FASHION_CLASSES = range(5)
FASHION_PER_CLASS = 1000


def write_idx(path, images, labels, rows=28, cols=28):
    head = struct.pack(">IIII", 0x00000803, len(images), rows, cols)
    with gzip.GzipFile(path + "-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(head)
        for img in images:
            f.write(bytes(img))
    with gzip.GzipFile(path + "-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def mnist(wheel):
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    images, labels = [], []
    for line in gzip.decompress(raw).decode().splitlines():
        vals = [int(float(v)) for v in line.split(",")]
        images.append(vals[:-1])
        labels.append(vals[-1])
    return images, labels


def fashion(tgz):
    tar = tarfile.open(tgz)
    images, labels = [], []
    for c in FASHION_CLASSES:
        data = json.load(io.TextIOWrapper(tar.extractfile(f"package/src/clothes/{c}.json")))["data"]
        for img in data[:FASHION_PER_CLASS]:
            images.append(img)
            labels.append(c)
    return images, labels


def main():
    wheel, tgz, out = sys.argv[1:4]
    write_idx(f"{out}/mnist-5k", *mnist(wheel))
    write_idx(f"{out}/fashion-mnist-5x1000", *fashion(tgz))


if __name__ == "__main__":
    main()
