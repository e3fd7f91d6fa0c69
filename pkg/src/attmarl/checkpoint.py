"""Parameter checkpoint container.

Layout (little-endian):

    bytes 0..7    magic  b"ATTMARL1"
    bytes 8..15   uint64 length L of the JSON header
    bytes 16..    UTF-8 JSON header, then raw float64 data

Header schema::

    {
      "meta":   { ... run metadata (env, algorithm, dims, ...) },
      "stores": [
        {"name": "agent0/actor", "size": 1234,
         "entries": [{"name": "W0", "shape": [6, 32], "offset": 0}, ...]},
        ...
      ]
    }

Each store's data is its flat value buffer; stores are concatenated in
header order. Entry offsets are element offsets within their store.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ValidationError
from .nn import ParameterStore

MAGIC = b"ATTMARL1"


def save_checkpoint(path, meta: dict, stores: dict[str, ParameterStore]) -> None:
    header = {"meta": meta, "stores": []}
    blobs = []
    for name, store in stores.items():
        header["stores"].append({
            "name": name,
            "size": store.size,
            "entries": [
                {"name": ename, "shape": list(shape), "offset": off}
                for ename, shape, off in store.manifest()
            ],
        })
        blobs.append(store.flat_values.astype("<f8"))
    raw = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint64(len(raw)).tobytes())
        fh.write(raw)
        for blob in blobs:
            fh.write(blob.tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, ParameterStore]]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValidationError(f"{path}: not a checkpoint file (bad magic)")
        (length,) = np.frombuffer(fh.read(8), dtype="<u8")
        header = json.loads(fh.read(int(length)).decode("utf-8"))
        stores: dict[str, ParameterStore] = {}
        for entry in header["stores"]:
            data = np.frombuffer(fh.read(8 * entry["size"]), dtype="<f8")
            if data.size != entry["size"]:
                raise ValidationError(f"{path}: truncated store {entry['name']!r}")
            store = ParameterStore()
            for e in entry["entries"]:
                n = int(np.prod(e["shape"])) if e["shape"] else 1
                store.add(e["name"], e["shape"],
                          data[e["offset"] : e["offset"] + n].reshape(e["shape"]))
            stores[entry["name"]] = store
    return header["meta"], stores
