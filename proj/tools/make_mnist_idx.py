#!/usr/bin/env python3
"""Build IDX files from the 5000-sample MNIST subset bundled with mlxtend.

The subset holds 500 images per digit. The first 400 images of each digit
(in file order) go to the train split, the remaining 100 to the test split.

Usage:
    python3 tools/make_mnist_idx.py [out_dir]

The mlxtend wheel is fetched with `pip download` when the package is not
importable; only its bundled CSV is read.
"""

import gzip
import io
import pathlib
import struct
import subprocess
import sys
import tempfile
import zipfile

CSV_MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"
TRAIN_PER_CLASS = 400


def read_csv_bytes():
    try:
        import mlxtend.data  # noqa: F401

        path = pathlib.Path(mlxtend.data.__file__).parent / "data" / "mnist_5k.csv.gz"
        return path.read_bytes()
    except ImportError:
        pass
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "mlxtend"],
            check=True,
        )
        wheel = next(pathlib.Path(tmp).glob("mlxtend-*.whl"))
        with zipfile.ZipFile(wheel) as z:
            return z.read(CSV_MEMBER)


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "data/mnist5k")
    out.mkdir(parents=True, exist_ok=True)
    text = gzip.decompress(read_csv_bytes()).decode()
    seen = [0] * 10
    train, test = ([], []), ([], [])
    for line in io.StringIO(text):
        fields = line.strip().split(",")
        if len(fields) != 785:
            continue
        pixels = [int(float(v)) for v in fields[:784]]
        label = int(float(fields[784]))
        split = train if seen[label] < TRAIN_PER_CLASS else test
        seen[label] += 1
        split[0].append(pixels)
        split[1].append(label)
    write_images(out / "train-images-idx3-ubyte", train[0])
    write_labels(out / "train-labels-idx1-ubyte", train[1])
    write_images(out / "t10k-images-idx3-ubyte", test[0])
    write_labels(out / "t10k-labels-idx1-ubyte", test[1])
    print(f"train={len(train[1])} test={len(test[1])} -> {out}")


if __name__ == "__main__":
    main()
