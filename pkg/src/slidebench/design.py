"""Slide-level feature assembly: mean aggregation and design matrices.

Design-matrix file format (little-endian):

    magic "DMAT" | u32 version=1 | u32 n | u32 d
    | n*d float32 rows | n u8 label codes | n u8 subset codes
    | per slide: u16 id length + UTF-8 bytes
    | u32 CRC-32 over everything after the magic+version prefix
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .categories import Category, EffectiveSubset
from .embeddings import CACHE_SUFFIX, EmbeddingMatrix, read_cache
from .manifest import Manifest

MAGIC = b"DMAT"
VERSION = 1


class DesignError(ValueError):
    """Raised for inconsistent design-matrix inputs or corrupt files."""


@dataclass
class DesignMatrix:
    """n x d slide features with aligned labels, subsets, and slide ids."""

    rows: np.ndarray      # (n, d) float32
    labels: np.ndarray    # (n,) uint8 Category codes
    subsets: np.ndarray   # (n,) uint8 EffectiveSubset codes
    slide_ids: list[str]

    def __post_init__(self) -> None:
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        self.subsets = np.ascontiguousarray(self.subsets, dtype=np.uint8)
        n = self.rows.shape[0]
        if not (len(self.labels) == len(self.subsets) == len(self.slide_ids) == n):
            raise DesignError("misaligned design matrix arrays")
        if np.any(self.labels == Category.OTHER.value):
            raise DesignError("design matrix contains excluded 'other' labels")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]


def mean_aggregate(emb: EmbeddingMatrix) -> np.ndarray:
    """Average the patch embeddings into one slide vector.

    Accumulates in float64 in ascending patch order (patch counts can
    exceed 20k, where float32 running sums lose digits), then stores f32.
    """
    if emb.m < 1:
        raise DesignError("cannot aggregate an empty embedding matrix")
    acc = np.zeros(emb.d, dtype=np.float64)
    for i in range(emb.m):
        acc += emb.data[i].astype(np.float64)
    return (acc / emb.m).astype(np.float32)


def build_design(manifest: Manifest, cache_dir: str | Path, backend_name: str) -> DesignMatrix:
    """One aggregated row per manifest slide, in manifest order.

    Reads `<cache_dir>/<backend_name>/<slide_id>.embc` for every slide.
    """
    directory = Path(cache_dir) / backend_name
    missing = [m.file for m in manifest if not (directory / f"{m.file}{CACHE_SUFFIX}").exists()]
    if missing:
        raise DesignError(
            f"missing embedding caches under {directory}: {', '.join(missing)}"
        )

    rows = None
    labels = np.empty(len(manifest), dtype=np.uint8)
    subsets = np.empty(len(manifest), dtype=np.uint8)
    slide_ids: list[str] = []
    for i, meta in enumerate(manifest):
        if meta.effective is None:
            raise DesignError(f"slide {meta.file!r} has no effective subset; run effective_split first")
        emb = read_cache(directory / f"{meta.file}{CACHE_SUFFIX}")
        vec = mean_aggregate(emb)
        if rows is None:
            rows = np.empty((len(manifest), vec.shape[0]), dtype=np.float32)
        elif vec.shape[0] != rows.shape[1]:
            raise DesignError(
                f"mixed embedding dimensions: slide {meta.file!r} has d={vec.shape[0]}, "
                f"expected {rows.shape[1]}"
            )
        rows[i] = vec
        labels[i] = meta.category.value
        subsets[i] = meta.effective.value
        slide_ids.append(meta.file)
    assert rows is not None
    return DesignMatrix(rows, labels, subsets, slide_ids)


def split_design(dm: DesignMatrix) -> tuple[DesignMatrix, DesignMatrix]:
    """Partition rows by effective subset, preserving within-part order."""
    train_mask = dm.subsets == EffectiveSubset.TRAIN.value
    test_mask = ~train_mask
    if not train_mask.any():
        raise DesignError("empty train partition")
    if not test_mask.any():
        raise DesignError("empty test partition")

    def part(mask: np.ndarray) -> DesignMatrix:
        idx = np.flatnonzero(mask)
        return DesignMatrix(
            dm.rows[idx],
            dm.labels[idx],
            dm.subsets[idx],
            [dm.slide_ids[i] for i in idx],
        )

    return part(train_mask), part(test_mask)


def save_design(dm: DesignMatrix, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = bytearray()
    body += struct.pack("<II", dm.n, dm.d)
    body += np.ascontiguousarray(dm.rows, dtype="<f4").tobytes()
    body += dm.labels.tobytes()
    body += dm.subsets.tobytes()
    for sid in dm.slide_ids:
        raw = sid.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise DesignError(f"slide id too long to serialize ({len(raw)} bytes)")
        body += struct.pack("<H", len(raw)) + raw
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<I", VERSION))
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF))
    return path


def load_design(path: str | Path) -> DesignMatrix:
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise DesignError(f"{path}: bad magic")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != VERSION:
        raise DesignError(f"{path}: unsupported version {version}")
    if len(blob) < 12:
        raise DesignError(f"{path}: truncated file")
    body, crc_stored = blob[8:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise DesignError(f"{path}: checksum mismatch")
    off = 0

    def take(n: int, what: str) -> bytes:
        nonlocal off
        if off + n > len(body):
            raise DesignError(f"{path}: truncated {what}")
        chunk = body[off : off + n]
        off += n
        return chunk

    n, d = struct.unpack("<II", take(8, "shape"))
    rows = np.frombuffer(take(n * d * 4, "rows"), dtype="<f4").reshape(n, d).copy()
    labels = np.frombuffer(take(n, "labels"), dtype=np.uint8).copy()
    subsets = np.frombuffer(take(n, "subsets"), dtype=np.uint8).copy()
    slide_ids = []
    for _ in range(n):
        (ln,) = struct.unpack("<H", take(2, "slide id length"))
        slide_ids.append(take(ln, "slide id").decode("utf-8"))
    if off != len(body):
        raise DesignError(f"{path}: {len(body) - off} trailing bytes")
    return DesignMatrix(rows, labels, subsets, slide_ids)
