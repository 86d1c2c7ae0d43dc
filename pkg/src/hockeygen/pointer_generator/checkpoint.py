"""PGEN checkpoint container.

Layout: ``b"PGEN"``, uint32 format version, uint64 header length, a UTF-8
JSON header, then raw little-endian tensor bytes. The header carries the
model config, the vocabulary, free-form metadata and a table of named
tensors (dtype, shape, byte offset relative to the data section).
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np
import torch

MAGIC = b"PGEN"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def write_container(path, header: dict, tensors: dict[str, torch.Tensor]) -> None:
    table, blobs, offset = [], [], 0
    for name, t in tensors.items():
        arr = np.ascontiguousarray(t.detach().cpu().numpy())
        arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        raw = arr.tobytes()
        table.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape), "offset": offset})
        blobs.append(raw)
        offset += len(raw)
    head = json.dumps({**header, "tensors": table}, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IQ", FORMAT_VERSION, len(head)))
    buf.write(head)
    for raw in blobs:
        buf.write(raw)
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(buf.getvalue())
    tmp.replace(path)


def read_container(path) -> tuple[dict, dict[str, torch.Tensor]]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a PGEN checkpoint")
    version, hlen = struct.unpack_from("<IQ", data, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported PGEN version {version}")
    start = 4 + struct.calcsize("<IQ")
    header = json.loads(data[start : start + hlen].decode("utf-8"))
    base = start + hlen
    tensors = {}
    for entry in header.pop("tensors"):
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=base + entry["offset"])
        tensors[entry["name"]] = torch.from_numpy(arr.reshape(entry["shape"]).copy())
    return header, tensors


def optimizer_tensors(optimizer: torch.optim.Optimizer) -> tuple[dict, dict[str, torch.Tensor]]:
    sd = optimizer.state_dict()
    tensors, scalars = {}, {}
    for pid, st in sd["state"].items():
        for key, val in st.items():
            if torch.is_tensor(val):
                tensors[f"optim.{pid}.{key}"] = val
            else:
                scalars[f"{pid}.{key}"] = val
    return {"param_groups": sd["param_groups"], "scalars": scalars}, tensors


def optimizer_state_dict(meta: dict, tensors: dict[str, torch.Tensor]) -> dict:
    state: dict[int, dict] = {}
    for name, t in tensors.items():
        if name.startswith("optim."):
            _, pid, key = name.split(".", 2)
            state.setdefault(int(pid), {})[key] = t
    for name, val in meta["scalars"].items():
        pid, key = name.split(".", 1)
        state.setdefault(int(pid), {})[key] = val
    return {"state": state, "param_groups": meta["param_groups"]}
