#!/usr/bin/env python3
"""Generate 28x28 handwritten-digit IDX fixtures from sklearn's bundled
digits set (nearest-neighbor upscale of the 8x8 images). Produces
train/valid/test pairs in the standard IDX layout, plus gzipped copies
of the test pair for the transparent-decompression path.
"""
import gzip
import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits


def write_idx_images(path: Path, images: np.ndarray) -> None:
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main() -> None:
    out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
    out.mkdir(parents=True, exist_ok=True)
    digits = load_digits()
    rng = np.random.default_rng(20240817)
    order = rng.permutation(len(digits.target))
    images8 = digits.images[order]  # (n, 8, 8), values 0..16
    labels = digits.target[order]

    idx = (np.arange(28) * 8) // 28  # nearest-neighbor 8 -> 28
    images28 = images8[:, idx][:, :, idx]
    images28 = np.clip(images28 * (255.0 / 16.0), 0, 255).round()

    n = len(labels)
    n_train, n_valid = 1100, 350
    splits = {
        "train": (0, n_train),
        "valid": (n_train, n_train + n_valid),
        "test": (n_train + n_valid, n),
    }
    for name, (a, b) in splits.items():
        write_idx_images(out / f"{name}-images-idx3-ubyte", images28[a:b])
        write_idx_labels(out / f"{name}-labels-idx1-ubyte", labels[a:b])
    for name in ("test-images-idx3-ubyte", "test-labels-idx1-ubyte"):
        data = (out / name).read_bytes()
        with open(out / f"{name}.gz", "wb") as raw:
            with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
                f.write(data)
    print(f"wrote fixtures for {n} samples to {out}")


if __name__ == "__main__":
    main()
