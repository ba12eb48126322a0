"""On-disk formats for graphs, features, labels and masks.

Text formats are UTF-8 with 0-indexed node ids:
    edges   one "u<TAB>v" pair per line
    labels  one "node<TAB>class" pair per line, absent ids are unlabeled
    masks   one node id per line

Features are either a plain CSV matrix or a binary blob:
    magic "GUFM", then n and f as 64-bit little-endian unsigned ints,
    then n*f float64 little-endian values in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError, IoError, MaskError
from .graph import UNLABELED, Graph, build_graph

FEATURE_MAGIC = b"GUFM"


def _read_lines(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return [ln for ln in text.splitlines() if ln.strip()]


def _write_text(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_edge_list(path) -> np.ndarray:
    """Parse an edge file into an (m, 2) int array."""
    rows = []
    for i, line in enumerate(_read_lines(path), start=1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{i}: expected 'u<TAB>v', got {line!r}")
        try:
            rows.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise DataError(f"{path}:{i}: non-integer endpoint in {line!r}") from exc
    return np.asarray(rows, dtype=np.int64).reshape(-1, 2)


def write_edge_list(path, edges) -> None:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    _write_text(path, "".join(f"{u}\t{v}\n" for u, v in edges))


def read_features(path) -> np.ndarray:
    """Load a feature matrix, sniffing binary vs CSV from the magic bytes."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if raw[:4] == FEATURE_MAGIC:
        if len(raw) < 20:
            raise DataError(f"{path}: truncated binary feature header")
        n, f = struct.unpack("<QQ", raw[4:20])
        expect = 20 + 8 * n * f
        if len(raw) != expect:
            raise DataError(f"{path}: expected {expect} bytes for {n}x{f} features, got {len(raw)}")
        return np.frombuffer(raw, dtype="<f8", offset=20).reshape(n, f).astype(np.float64)
    try:
        mat = np.loadtxt(p, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise DataError(f"{path}: malformed CSV feature matrix: {exc}") from exc
    return mat


def write_features(path, features) -> None:
    """Write features as CSV when the path ends in .csv, else binary."""
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"feature matrix must be 2-d, got shape {x.shape}")
    p = Path(path)
    if p.suffix == ".csv":
        np.savetxt(p, x, delimiter=",", fmt="%.17g")
        return
    header = FEATURE_MAGIC + struct.pack("<QQ", x.shape[0], x.shape[1])
    try:
        p.write_bytes(header + x.astype("<f8").tobytes(order="C"))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_labels(path, n: int) -> np.ndarray:
    labels = np.full(n, UNLABELED, dtype=np.int64)
    for i, line in enumerate(_read_lines(path), start=1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{i}: expected 'node<TAB>class', got {line!r}")
        try:
            node, cls = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}:{i}: non-integer field in {line!r}") from exc
        if not 0 <= node < n:
            raise DataError(f"{path}:{i}: node {node} outside [0, {n})")
        labels[node] = cls
    return labels


def write_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.int64)
    lines = (f"{node}\t{cls}\n" for node, cls in enumerate(labels) if cls != UNLABELED)
    _write_text(path, "".join(lines))


def read_mask(path, n: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    for i, line in enumerate(_read_lines(path), start=1):
        try:
            node = int(line.strip())
        except ValueError as exc:
            raise DataError(f"{path}:{i}: non-integer node id {line!r}") from exc
        if not 0 <= node < n:
            raise MaskError(f"{path}:{i}: node {node} outside [0, {n})")
        mask[node] = True
    return mask


def write_mask(path, mask) -> None:
    mask = np.asarray(mask)
    ids = np.flatnonzero(mask) if mask.dtype == bool else np.asarray(mask, dtype=np.int64)
    _write_text(path, "".join(f"{i}\n" for i in ids))


def load_graph(edge_path, feature_path, label_path=None,
               train_mask_path=None, test_mask_path=None) -> Graph:
    """Assemble a Graph from its on-disk pieces; n is taken from the features."""
    features = read_features(feature_path)
    n = features.shape[0]
    edges = read_edge_list(edge_path)
    labels = read_labels(label_path, n) if label_path else None
    train = read_mask(train_mask_path, n) if train_mask_path else None
    test = read_mask(test_mask_path, n) if test_mask_path else None
    return build_graph(n, edges, features, labels, train, test)


def save_graph(graph: Graph, edge_path, feature_path, label_path,
               train_mask_path, test_mask_path) -> None:
    write_edge_list(edge_path, graph.undirected_edges())
    write_features(feature_path, graph.features)
    write_labels(label_path, graph.labels)
    write_mask(train_mask_path, graph.train_mask)
    write_mask(test_mask_path, graph.test_mask)
