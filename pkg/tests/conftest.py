import csv

import numpy as np
import pytest


def make_synthetic(n=2000, num_classes=4, n_features=16, seed=0, noise=0.5):
    """Gaussian blobs with class-dependent means: easy, seeded, balanced."""
    rng = np.random.default_rng(seed)
    means = rng.normal(0.0, 1.0, size=(num_classes, n_features))
    labels = np.arange(n) % num_classes
    labels = rng.permutation(labels)
    features = means[labels] + rng.normal(0.0, noise, size=(n, n_features))
    return features, labels.astype(np.int64)


def write_csv(path, features, labels):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"X{i + 1}" for i in range(features.shape[1])] + ["y"])
        for row, label in zip(features, labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


@pytest.fixture
def synthetic_small():
    return make_synthetic(n=240, seed=3)


@pytest.fixture
def synthetic_csv(tmp_path, synthetic_small):
    features, labels = synthetic_small
    path = tmp_path / "synthetic.csv"
    write_csv(path, features, labels)
    return path
