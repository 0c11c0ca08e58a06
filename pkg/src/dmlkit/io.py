"""Embedding dump files (binary ``DMLE`` layout or ``label,e0,e1,...`` CSV)."""

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"DMLE"
VERSION = 1
_HEADER = struct.Struct("<4sHQIB")  # magic, version, n, d, has_labels


class DumpFormatError(ValueError):
    pass


@dataclass
class EmbeddingDump:
    data: np.ndarray  # float32, row-major
    labels: np.ndarray | None = None
    version: int = VERSION

    def __post_init__(self):
        self.data = np.ascontiguousarray(np.atleast_2d(self.data), dtype="<f4")
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype="<u4").reshape(-1)
            if len(self.labels) != len(self.data):
                raise DumpFormatError("label count does not match row count")

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]

    def to_bytes(self):
        has = self.labels is not None
        parts = [_HEADER.pack(MAGIC, self.version, self.n, self.d, int(has))]
        if has:
            parts.append(self.labels.tobytes())
        parts.append(self.data.tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, raw):
        if len(raw) < _HEADER.size:
            raise DumpFormatError("file too short for a DMLE header")
        magic, version, n, d, has = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise DumpFormatError("bad magic")
        if version != VERSION:
            raise DumpFormatError(f"unsupported version {version}")
        if has not in (0, 1):
            raise DumpFormatError("bad label flag")
        expected = _HEADER.size + 4 * n * has + 4 * n * d
        if len(raw) != expected:
            raise DumpFormatError(f"expected {expected} bytes, found {len(raw)}")
        offset = _HEADER.size
        labels = None
        if has:
            labels = np.frombuffer(raw, dtype="<u4", count=n, offset=offset).copy()
            offset += 4 * n
        data = np.frombuffer(raw, dtype="<f4", count=n * d, offset=offset).reshape(n, d).copy()
        return cls(data, labels, version)


def expected_size(n, d, has_labels):
    return _HEADER.size + 4 * n * int(has_labels) + 4 * n * d


def write_dump(path, embeddings, labels=None):
    dump = EmbeddingDump(np.asarray(embeddings), None if labels is None else np.asarray(labels))
    Path(path).write_bytes(dump.to_bytes())
    return dump


def read_dump(path):
    return EmbeddingDump.from_bytes(Path(path).read_bytes())


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DumpFormatError("empty CSV")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "label" or header[1:] != [f"e{i}" for i in range(len(header) - 1)]:
        raise DumpFormatError("CSV header must be label,e0,e1,...")
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=np.float64)
    except ValueError as exc:
        raise DumpFormatError(f"non-numeric CSV value: {exc}") from None
    if body.ndim != 2 or body.shape[1] != len(header):
        raise DumpFormatError("CSV rows do not match the header")
    return EmbeddingDump(body[:, 1:], body[:, 0].astype(np.int64))


def load_embeddings(path):
    """Read a binary dump or a CSV fixture, chosen by file suffix."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv(path)
    return read_dump(path)


def write_spectrum_csv(path, spectrum, mean_class_spectrum=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "singular_value"] + (["mean_class_value"] if mean_class_spectrum is not None else []))
        for i, s in enumerate(spectrum):
            row = [i, repr(float(s))]
            if mean_class_spectrum is not None:
                row.append(repr(float(mean_class_spectrum[i])) if i < len(mean_class_spectrum) else "")
            w.writerow(row)


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "loss", "rho"])
        for it, loss, r in trace:
            w.writerow([it, repr(float(loss)), repr(float(r))])


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def scatter_svg(points, labels, title="", size=320):
    """Bare-bones SVG scatter plot with axes through the origin."""
    pts = np.asarray(points, dtype=np.float64)[:, :2]
    lim = max(1.0, float(np.abs(pts).max()) * 1.1) if len(pts) else 1.0
    half = size / 2

    def px(v):
        return half + v / lim * (half - 10)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="0" y1="{half}" x2="{size}" y2="{half}" stroke="#999" stroke-width="0.5"/>',
        f'<line x1="{half}" y1="0" x2="{half}" y2="{size}" stroke="#999" stroke-width="0.5"/>',
    ]
    if title:
        out.append(f'<text x="6" y="14" font-size="11" font-family="sans-serif">{title}</text>')
    for (x, y), c in zip(pts, np.asarray(labels)):
        color = _PALETTE[int(c) % len(_PALETTE)]
        out.append(f'<circle cx="{px(x):.2f}" cy="{size - px(y):.2f}" r="3" fill="{color}"/>')
    out.append("</svg>\n")
    return "\n".join(out)
