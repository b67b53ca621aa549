"""Dataset ingestion (MatrixMarket, CSV covariance, PGM images), derived
transforms, synthetic stand-ins for the benchmark suite, and report
persistence."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.io
import scipy.ndimage

from .errors import DomainError, ParseError

KINDS = ("dense_graph", "network", "surface_mesh", "covariance", "image")


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    kind: str
    source: str
    N: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown dataset kind '{self.kind}'")


def load_matrix_market(path) -> np.ndarray:
    """Dense square matrix from a MatrixMarket file (coordinate or array,
    general or symmetric; symmetric storage is mirrored)."""
    try:
        mat = scipy.io.mmread(str(path))
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: malformed MatrixMarket file: {exc}") from exc
    arr = np.asarray(mat.todense() if hasattr(mat, "todense") else mat, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ParseError(f"{path}: matrix is not square: shape {arr.shape}")
    return arr


def covariance_from_csv(path) -> np.ndarray:
    """Unbiased sample covariance of the columns of a numeric CSV."""
    rows: list[list[float]] = []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        for r, record in enumerate(reader):
            if not record or all(tok.strip() == "" for tok in record):
                continue
            vals = []
            for c, tok in enumerate(record):
                try:
                    vals.append(float(tok))
                except ValueError:
                    raise ParseError(f"{path}: non-numeric cell at row {r + 1}, column {c + 1}")
            rows.append(vals)
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least two data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ParseError(f"{path}: ragged rows")
    data = np.array(rows, dtype=np.float64)
    centered = data - data.mean(axis=0, keepdims=True)
    return (centered.T @ centered) / (data.shape[0] - 1)


def dissimilarity_from_similarity(S) -> np.ndarray:
    """d_ij = sqrt(s_ii + s_jj - s_ji - s_ij)."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DomainError("similarity matrix must be square")
    d = np.diag(S)
    inside = d[:, None] + d[None, :] - S.T - S
    return np.sqrt(np.maximum(inside, 0.0))


# ---------------------------------------------------------------------------
# images (PGM P2/P5)
# ---------------------------------------------------------------------------

def load_image_gray(path) -> np.ndarray:
    """Square 8-bit PGM (P2 ascii or P5 binary), scaled into [0, 1]."""
    raw = Path(path).read_bytes()
    if raw[:2] not in (b"P2", b"P5"):
        raise ParseError(f"{path}: not a PGM P2/P5 file")
    binary = raw[:2] == b"P5"

    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3 and pos < len(raw):
        # strip whitespace and comments to find header fields
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if len(tokens) < 3:
        raise ParseError(f"{path}: truncated PGM header")
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ParseError(f"{path}: bad PGM header") from exc
    if width != height:
        raise ParseError(f"{path}: image is not square ({width}x{height})")
    if not (0 < maxval <= 255):
        raise ParseError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    if binary:
        pos += 1  # single whitespace after maxval
        data = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=pos)
        if data.size != width * height:
            raise ParseError(f"{path}: truncated pixel data")
    else:
        try:
            flat = [int(t) for t in raw[pos:].split()]
        except ValueError as exc:
            raise ParseError(f"{path}: non-integer pixel") from exc
        if len(flat) != width * height:
            raise ParseError(f"{path}: expected {width * height} pixels, got {len(flat)}")
        data = np.array(flat, dtype=np.uint16)
    img = data.reshape(height, width).astype(np.float64) / float(maxval)
    return img


def write_pgm(img: np.ndarray, path, binary: bool = True) -> None:
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    pixels = np.round(arr * 255).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{w} {h}\n255\n".encode())
            fh.write(pixels.tobytes())
        else:
            fh.write(f"P2\n{w} {h}\n255\n".encode())
            for row in pixels:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode())


def gradient_magnitude(image) -> np.ndarray:
    """sqrt(Gx^2 + Gy^2) with central differences and replicated borders."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DomainError("image must be 2-d")
    padded = np.pad(img, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return np.sqrt(gx * gx + gy * gy)


# ---------------------------------------------------------------------------
# synthetic stand-ins (offline mirrors of the benchmark kinds)
# ---------------------------------------------------------------------------

def synth_chessboard(N: int = 256, tile: int = 32) -> np.ndarray:
    """Rank-<=2 chessboard: value 1 on (block parity even) squares."""
    idx = (np.arange(N) // tile) % 2
    return ((idx[:, None] + idx[None, :]) % 2 == 0).astype(np.float64)


def synth_photo(N: int = 256, seed: int = 0) -> np.ndarray:
    """Photo-like field with curved and diagonal edges.

    Disks and tilted bands keep the gradient-magnitude image genuinely
    high-rank (axis-aligned shapes would collapse it to a few outer
    products)."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:N, 0:N].astype(np.float64)
    img = scipy.ndimage.gaussian_filter(rng.random((N, N)), sigma=N / 24)
    for _ in range(14):
        cy, cx = rng.uniform(0, N, size=2)
        rad = rng.uniform(N / 24, N / 5)
        disk = ((yy - cy) ** 2 + (xx - cx) ** 2) <= rad * rad
        img[disk] += rng.uniform(0.25, 1.0)
    for _ in range(4):
        theta = rng.uniform(0.2, 1.4)
        offset = rng.uniform(0, N)
        width = rng.uniform(N / 32, N / 10)
        band = np.abs((xx * math.cos(theta) + yy * math.sin(theta)) % N - offset) < width
        img[band] += rng.uniform(0.15, 0.5)
    img += 0.05 * rng.random((N, N))
    img -= img.min()
    peak = img.max()
    return img / peak if peak > 0 else img


def synth_network(N: int, nnz_target: int, seed: int = 0) -> np.ndarray:
    """Sparse 0/1 affinity matrix of an undirected random network."""
    rng = np.random.default_rng(seed)
    A = np.zeros((N, N))
    want_pairs = max(1, nnz_target // 2)
    iu, ju = np.triu_indices(N, k=1)
    take = rng.choice(iu.size, size=min(want_pairs, iu.size), replace=False)
    A[iu[take], ju[take]] = 1.0
    A[ju[take], iu[take]] = 1.0
    return A


def synth_mesh(N: int, seed: int = 0, neighbors: int = 5) -> np.ndarray:
    """Symmetric geometric-graph affinity: k-nearest points on the square."""
    rng = np.random.default_rng(seed)
    pts = rng.random((N, 2))
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d2, np.inf)
    A = np.zeros((N, N))
    order = np.argsort(d2, axis=1)[:, :neighbors]
    for i in range(N):
        for j in order[i]:
            A[i, j] = A[j, i] = 1.0
    A += np.eye(N) * neighbors
    return A


def synth_covariance(
    N: int, instances: int = 1000, seed: int = 0, spectrum_decay: float | None = None
) -> np.ndarray:
    """Covariance of correlated Gaussian draws (PSD by construction).

    With ``spectrum_decay`` the population spectrum falls geometrically,
    mirroring feature covariances of real sensor data; otherwise a dense
    random mixing is used."""
    rng = np.random.default_rng(seed)
    if spectrum_decay is not None:
        q, _ = np.linalg.qr(rng.normal(size=(N, N)))
        mixing = (q * np.sqrt(spectrum_decay ** np.arange(N))).T
    else:
        mixing = rng.normal(size=(N, N)) / math.sqrt(N)
    data = rng.normal(size=(instances, N)) @ mixing
    centered = data - data.mean(axis=0, keepdims=True)
    return (centered.T @ centered) / (instances - 1)


SYNTHETIC_SUITE: tuple[tuple[str, str, int], ...] = (
    # (name, kind, N) mirrors of the small published datasets
    ("sawmill_like", "network", 36),
    ("strike_like", "network", 24),
    ("mexican_like", "network", 35),
    ("mesh1e1_like", "surface_mesh", 48),
    ("votes_like", "covariance", 16),
    ("pendigits_like", "covariance", 16),
)


def synthetic_dataset(name: str, kind: str, N: int, seed: int = 0) -> np.ndarray:
    if kind == "network":
        return synth_network(N, nnz_target=3 * N, seed=seed)
    if kind == "surface_mesh":
        return synth_mesh(N, seed=seed)
    if kind == "covariance":
        # sensor-like covariances carry a decaying population spectrum
        return synth_covariance(N, instances=max(687 * N, 40 * N), seed=seed, spectrum_decay=0.5)
    if kind == "dense_graph":
        rng = np.random.default_rng(seed)
        pts = rng.random((N, 3))
        d2 = np.sum((pts[:, None] - pts[None, :]) ** 2, axis=2)
        return np.exp(-d2)
    if kind == "image":
        return synth_photo(N, seed=seed)
    raise DomainError(f"unknown dataset kind '{kind}'")


def load_dataset(spec: DatasetSpec, seed: int = 0) -> np.ndarray:
    """Resolve a spec: 'synthetic' sources generate, files load per kind."""
    if spec.source.startswith("synthetic"):
        X = synthetic_dataset(spec.name, spec.kind, spec.N, seed=seed)
    elif spec.kind == "covariance" and spec.source.endswith(".csv"):
        X = covariance_from_csv(spec.source)
    elif spec.kind == "image":
        X = load_image_gray(spec.source)
    else:
        X = load_matrix_market(spec.source)
    if X.shape[0] != spec.N:
        raise ParseError(f"{spec.name}: expected order {spec.N}, got {X.shape[0]}")
    return X


def load_registry(path) -> list[DatasetSpec]:
    """JSON registry: list of {name, kind, source, N}."""
    with open(path) as fh:
        entries = json.load(fh)
    if not isinstance(entries, list):
        raise ParseError(f"{path}: registry must be a JSON list")
    specs = []
    for e in entries:
        try:
            specs.append(DatasetSpec(e["name"], e["kind"], e["source"], int(e["N"])))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"{path}: bad registry entry {e!r}") from exc
    return specs


# ---------------------------------------------------------------------------
# report persistence
# ---------------------------------------------------------------------------

def _format_value(v) -> str:
    if isinstance(v, float):
        return "%.6e" % v
    return str(v)


def save_report(rows: Sequence, path, fmt: str = "csv") -> None:
    """Bit-stable CSV or JSON serialisation of benchmark report rows."""
    from .factorize import REPORT_COLUMNS

    dicts = [r.to_dict() if hasattr(r, "to_dict") else dict(r) for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(REPORT_COLUMNS) + "\n")
        for d in dicts:
            buf.write(",".join(_format_value(d[k]) for k in REPORT_COLUMNS) + "\n")
        Path(path).write_text(buf.getvalue())
    elif fmt == "json":
        payload = [
            {k: (_format_value(v) if isinstance(v, float) else v) for k, v in sorted(d.items())}
            for d in dicts
        ]
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        raise DomainError(f"unknown report format '{fmt}'")


def load_report_json(path) -> list[dict]:
    with open(path) as fh:
        return json.load(fh)
