"""Exact Euclidean k-NN by exhaustive scan over big-ann style vector files.

Supported layouts (all little-endian):

* ``fvecs``: records of ``int32 d`` then ``d`` float32
* ``bvecs``: records of ``int32 d`` then ``d`` uint8
* ``fbin`` / ``u8bin``: ``int32 npts, int32 dim`` header then a row-major payload

Squared distances are accumulated in float64 one coordinate at a time, so the
result is bit-identical to a naive per-pair loop regardless of blocking.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Hashable, Iterable, Iterator

import numpy as np

from .lid import NeighborProfile

FORMATS = ("fvecs", "bvecs", "fbin", "u8bin")
_KIND = {"fvecs": np.float32, "bvecs": np.uint8, "fbin": np.float32, "u8bin": np.uint8}


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class VectorDataset:
    vectors: np.ndarray  # (count, dim), possibly a memmap view
    element_kind: str
    path: str | None = None

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def from_array(cls, arr) -> "VectorDataset":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        if arr.dtype == np.uint8:
            return cls(arr, "uint8")
        return cls(arr.astype(np.float32, copy=False), "float32")


QuerySet = VectorDataset


@dataclass(frozen=True)
class TopKResult:
    query_id: Hashable
    ids: np.ndarray
    distances: np.ndarray


def _scan_vecs_dims(path: str, elem_size: int, size: int) -> tuple[int, int]:
    """Walk record headers; return (record index, bad dim) of the first mismatch, or (-1, count)."""
    with open(path, "rb") as f:
        first = np.frombuffer(f.read(4), dtype="<i4")[0]
        rec = 4 + int(first) * elem_size
        idx, pos = 0, 0
        while pos < size:
            f.seek(pos)
            raw = f.read(4)
            if len(raw) < 4:
                break
            d = int(np.frombuffer(raw, dtype="<i4")[0])
            if d != first:
                return idx, d
            pos += rec
            idx += 1
    return -1, idx


def _load_vecs(path: str, fmt: str) -> VectorDataset:
    elem = np.dtype(_KIND[fmt]).itemsize
    size = os.path.getsize(path)
    if size == 0:
        return VectorDataset(np.zeros((0, 0), dtype=_KIND[fmt]), str(np.dtype(_KIND[fmt])), path)
    if size < 4:
        raise DatasetFormatError(f"{path}: truncated header")
    dim = int(np.fromfile(path, dtype="<i4", count=1)[0])
    if dim <= 0:
        raise DatasetFormatError(f"{path}: record 0 has invalid dimension {dim}")
    rec = 4 + dim * elem
    if size % rec:
        bad, info = _scan_vecs_dims(path, elem, size)
        if bad >= 0:
            raise DatasetFormatError(f"{path}: record {bad} has dimension {info}, expected {dim}")
        raise DatasetFormatError(f"{path}: truncated file ({size} bytes is not a multiple of {rec})")
    raw = np.memmap(path, dtype=np.uint8, mode="r").reshape(-1, rec)
    dims = raw[:, :4].copy().view("<i4").ravel()
    bad = np.flatnonzero(dims != dim)
    if bad.size:
        raise DatasetFormatError(f"{path}: record {bad[0]} has dimension {dims[bad[0]]}, expected {dim}")
    vecs = raw[:, 4:].view(np.dtype(_KIND[fmt]).newbyteorder("<"))
    return VectorDataset(vecs, str(np.dtype(_KIND[fmt])), path)


def _load_bin(path: str, fmt: str) -> VectorDataset:
    size = os.path.getsize(path)
    if size < 8:
        raise DatasetFormatError(f"{path}: truncated header")
    npts, dim = (int(v) for v in np.fromfile(path, dtype="<i4", count=2))
    if npts < 0 or dim <= 0:
        raise DatasetFormatError(f"{path}: invalid header npts={npts} dim={dim}")
    kind = np.dtype(_KIND[fmt]).newbyteorder("<")
    expected = 8 + npts * dim * kind.itemsize
    if size < expected:
        raise DatasetFormatError(f"{path}: truncated payload ({size} bytes, header implies {expected})")
    if size > expected:
        raise DatasetFormatError(f"{path}: {size - expected} trailing bytes after payload")
    if npts == 0:
        return VectorDataset(np.zeros((0, dim), dtype=kind), str(np.dtype(_KIND[fmt])), path)
    vecs = np.memmap(path, dtype=kind, mode="r", offset=8, shape=(npts, dim))
    return VectorDataset(vecs, str(np.dtype(_KIND[fmt])), path)


def load_dataset(path, fmt: str) -> VectorDataset:
    path = os.fspath(path)
    if fmt not in FORMATS:
        raise DatasetFormatError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    if fmt in ("fvecs", "bvecs"):
        return _load_vecs(path, fmt)
    return _load_bin(path, fmt)


def write_dataset(path, vectors, fmt: str):
    """Write ``vectors`` in one of the supported layouts (fixtures, synthetic data)."""
    if fmt not in FORMATS:
        raise DatasetFormatError(f"unknown format {fmt!r}")
    arr = np.ascontiguousarray(vectors, dtype=np.dtype(_KIND[fmt]).newbyteorder("<"))
    n, d = arr.shape
    with open(path, "wb") as f:
        if fmt in ("fbin", "u8bin"):
            np.array([n, d], dtype="<i4").tofile(f)
            arr.tofile(f)
        else:
            rec = np.empty((n, 4 + d * arr.itemsize), dtype=np.uint8)
            rec[:, :4] = np.full((n, 1), d, dtype="<i4").view(np.uint8)
            rec[:, 4:] = arr.view(np.uint8).reshape(n, -1)
            rec.tofile(f)


def squared_distances(block: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """``(q, m)`` squared Euclidean distances, summed coordinate by coordinate in float64."""
    acc = np.zeros((queries.shape[0], block.shape[0]))
    for j in range(block.shape[1]):
        diff = block[:, j].astype(np.float64)[None, :] - queries[:, j].astype(np.float64)[:, None]
        acc += diff * diff
    return acc


def _select(d2: np.ndarray, ids: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k smallest of one row, ties broken by lower id."""
    if d2.size > k:
        thr = np.partition(d2, k - 1)[k - 1]
        keep = d2 <= thr
        d2, ids = d2[keep], ids[keep]
    order = np.lexsort((ids, d2))[:k]
    return d2[order], ids[order]


def _scan_block(data: np.ndarray, qblock: np.ndarray, k: int, exclude_self: bool, chunk: int):
    nq = qblock.shape[0]
    best_d = [np.empty(0) for _ in range(nq)]
    best_i = [np.empty(0, dtype=np.int64) for _ in range(nq)]
    for start in range(0, data.shape[0], chunk):
        block = np.asarray(data[start : start + chunk])
        d2 = squared_distances(block, qblock)
        if exclude_self:
            d2[d2 == 0.0] = np.inf
        ids = np.arange(start, start + block.shape[0], dtype=np.int64)
        for r in range(nq):
            best_d[r], best_i[r] = _select(
                np.concatenate([best_d[r], d2[r]]), np.concatenate([best_i[r], ids]), k
            )
    out = []
    for r in range(nq):
        finite = np.isfinite(best_d[r])
        out.append((best_i[r][finite], np.sqrt(best_d[r][finite])))
    return out


def exhaustive_knn(
    data: VectorDataset,
    queries: VectorDataset,
    k: int,
    exclude_self: bool = False,
    query_block: int = 64,
    chunk: int = 65536,
    threads: int = 1,
) -> Iterator[TopKResult]:
    """Exact top-k neighbors of every query, in query order.

    With ``exclude_self`` points at distance exactly 0 from the query are
    skipped (queries that duplicate dataset points).
    """
    if data.dim != queries.dim:
        raise ValueError(f"dimension mismatch: data {data.dim}, queries {queries.dim}")
    if not 1 <= k <= data.count:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={data.count}")
    starts = list(range(0, queries.count, query_block))

    def work(s):
        qb = np.asarray(queries.vectors[s : s + query_block])
        return s, _scan_block(data.vectors, qb, k, exclude_self, chunk)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            # map preserves submission order, so output is independent of scheduling
            blocks = pool.map(work, starts)
            for s, res in blocks:
                for r, (ids, dist) in enumerate(res):
                    yield TopKResult(s + r, ids, dist)
    else:
        for s in starts:
            _, res = work(s)
            for r, (ids, dist) in enumerate(res):
                yield TopKResult(s + r, ids, dist)


def profiles_from_results(results: Iterable[TopKResult]) -> Iterator[NeighborProfile]:
    """Project results onto their distance profiles; zero leading distances stay visible
    through :attr:`NeighborProfile.has_zero_distance`."""
    for res in results:
        yield NeighborProfile(res.query_id, res.distances)


CSV_HEADER = ("query_id", "rank", "neighbor_id", "distance")


def write_topk_csv(results: Iterable[TopKResult], path) -> int:
    """Write results as ``query_id,rank,neighbor_id,distance`` rows; return the row count."""
    rows = 0
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for res in results:
            for rank, (i, d) in enumerate(zip(res.ids, res.distances), start=1):
                w.writerow((res.query_id, rank, int(i), repr(float(d))))
                rows += 1
    return rows


def read_topk_csv(path) -> list[TopKResult]:
    by_query: dict[str, list[tuple[int, int, float]]] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise DatasetFormatError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                qid, rank, nid, dist = row
                by_query.setdefault(qid, []).append((int(rank), int(nid), float(dist)))
            except ValueError as exc:
                raise DatasetFormatError(f"{path}:{lineno}: malformed row {row!r}") from exc
    out = []
    for qid, rows in by_query.items():
        rows.sort()
        qkey = int(qid) if qid.lstrip("-").isdigit() else qid
        out.append(
            TopKResult(qkey, np.array([r[1] for r in rows], dtype=np.int64), np.array([r[2] for r in rows]))
        )
    return out
