"""On-disk format for precomputed embedding matrices.

A pack is a `<base>.idx.json` / `<base>.f32` pair: the index file holds the
ordered sample ids, kind, dim, format version, and a CRC-32 of the raw
file; the raw file is the row-major little-endian float32 matrix. The pair
is the contract between the numerical core and whatever produced the
embeddings (offline encoder or the synthetic generator).
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ChecksumError, FeaturePackError

FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class FeaturePack:
    kind: str  # "visual" or "text:<field>"
    dim: int
    ids: tuple[str, ...]
    data: np.ndarray  # (len(ids), dim) float32

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise FeaturePackError(f"pack '{self.kind}' has duplicate sample ids")
        if self.data.shape != (len(self.ids), self.dim):
            raise FeaturePackError(
                f"pack '{self.kind}' data shape {self.data.shape} does not match "
                f"{len(self.ids)} ids x dim {self.dim}"
            )
        object.__setattr__(self, "data", np.ascontiguousarray(self.data, dtype="<f4"))
        object.__setattr__(self, "_row_of", {i: r for r, i in enumerate(self.ids)})

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self._row_of

    def lookup(self, sample_id: str, zero_fill: bool = False) -> np.ndarray:
        """Row for a sample, promoted to float64.

        With zero_fill, a missing id maps to the zero vector (the
        blank-content convention); otherwise it is an error.
        """
        row = self._row_of.get(sample_id)
        if row is None:
            if zero_fill:
                return np.zeros(self.dim)
            raise FeaturePackError(f"sample '{sample_id}' missing from pack '{self.kind}'")
        return self.data[row].astype(np.float64)


def write_pack(pack: FeaturePack, basepath) -> None:
    raw = pack.data.tobytes()
    Path(f"{basepath}.f32").write_bytes(raw)
    index = {
        "format_version": FORMAT_VERSION,
        "kind": pack.kind,
        "dim": pack.dim,
        "count": len(pack.ids),
        "crc32": zlib.crc32(raw) & 0xFFFFFFFF,
        "ids": list(pack.ids),
    }
    with Path(f"{basepath}.idx.json").open("w", encoding="utf-8") as fh:
        json.dump(index, fh)


def read_pack(basepath) -> FeaturePack:
    idx_path = Path(f"{basepath}.idx.json")
    raw_path = Path(f"{basepath}.f32")
    if not idx_path.exists() or not raw_path.exists():
        raise FeaturePackError(f"pack files not found at {basepath}(.idx.json/.f32)")
    try:
        index = json.loads(idx_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FeaturePackError(f"unreadable pack index {idx_path}: {exc}") from exc
    version = index.get("format_version")
    if version != FORMAT_VERSION:
        raise FeaturePackError(f"unsupported pack format version {version!r} in {idx_path}")
    for key in ("kind", "dim", "count", "crc32", "ids"):
        if key not in index:
            raise FeaturePackError(f"pack index {idx_path} missing field '{key}'")
    raw = raw_path.read_bytes()
    expected = 4 * index["count"] * index["dim"]
    if len(raw) != expected:
        raise FeaturePackError(
            f"pack data {raw_path} is {len(raw)} bytes, expected {expected} (truncated or padded)"
        )
    if zlib.crc32(raw) & 0xFFFFFFFF != index["crc32"]:
        raise ChecksumError(f"CRC-32 mismatch for {raw_path}")
    data = np.frombuffer(raw, dtype="<f4").reshape(index["count"], index["dim"])
    return FeaturePack(kind=index["kind"], dim=index["dim"], ids=tuple(index["ids"]), data=data)
