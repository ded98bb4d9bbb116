"""EMB1 embedding-table writer.

Layout: magic ``EMB1``, u32-LE row count, u32-LE dim, then per row a u16-LE
name length, the UTF-8 name, and dim little-endian float32 values. Rows are
L2-normalized before serialization.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"EMB1"


def write_table(rows: list[tuple[str, np.ndarray]]) -> bytes:
    if not rows:
        raise ValueError("refusing to write an empty embedding table")
    dim = int(rows[0][1].size)
    seen: set[str] = set()
    chunks = [MAGIC, struct.pack("<II", len(rows), dim)]
    for name, values in rows:
        v = np.asarray(values, dtype=np.float64).ravel()
        if v.size != dim:
            raise ValueError(f"row {name!r} has dim {v.size}, table dim is {dim}")
        if name in seen:
            raise ValueError(f"duplicate row name {name!r}")
        seen.add(name)
        norm = float(np.linalg.norm(v))
        if norm < 1e-12:
            raise ValueError(f"row {name!r} is a zero vector")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append((v / norm).astype("<f4").tobytes())
    return b"".join(chunks)
