"""Shared test fixtures and helpers."""

from __future__ import annotations

import numpy as np
import pytest

from slidebench.categories import Category, EffectiveSubset, Subset
from slidebench.fixture import paper_manifest
from slidebench.manifest import serialize_manifest, write_manifest


CSV_HEADER = "fullpath,file,case_id,sub_block,block,DIAG_SCORE,DIAG_TYPE,category,subset,Staining"


def manifest_csv(rows: list[str]) -> str:
    return "\n".join([CSV_HEADER, *rows]) + "\n"


def simple_row(
    file: str,
    category: str = "squamous",
    subset: str = "Train",
    score: str = "100",
    staining: str = "H&E",
) -> str:
    return f"/x/{file}.tar,{file},case_1,B1-1,B,{score},lesion,{category},{subset},{staining}"


@pytest.fixture(scope="session")
def paper_manifest_csv(tmp_path_factory) -> str:
    """The 960-slide paper-shaped manifest written to disk once."""
    path = tmp_path_factory.mktemp("manifest") / "paper_manifest.csv"
    write_manifest(paper_manifest(seed=0), path)
    return str(path)


def class_dirs(d: int, dir_seed: int = 100) -> np.ndarray:
    """Three well-separated unit directions: orthogonal when d >= 3,
    a planar simplex when d == 2."""
    if d == 2:
        angles = np.asarray([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    rng = np.random.default_rng(dir_seed)
    base = rng.standard_normal((3, d))
    for i in range(3):
        for j in range(i):
            base[i] -= (base[i] @ base[j]) * base[j]
        base[i] /= np.linalg.norm(base[i])
    return base


def make_blobs(n_per_class: list[int], d: int, sep: float, seed: int = 0, dir_seed: int = 100):
    """Gaussian 3-class blobs; `seed` drives noise, `dir_seed` the geometry,
    so train/test sets drawn with different seeds share class structure."""
    base = class_dirs(d, dir_seed)
    rng = np.random.default_rng(seed)
    X, y = [], []
    for c, n in enumerate(n_per_class):
        X.append(rng.standard_normal((n, d)) + sep * base[c])
        y.append(np.full(n, c, dtype=np.int64))
    return np.vstack(X), np.concatenate(y)
