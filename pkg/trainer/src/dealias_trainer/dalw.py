"""Weight-bundle container: named float32 tensors plus an architecture
descriptor, in a fixed binary layout.

Layout: magic "DALW", u32 version (1), u32 header length, JSON header
{"descriptor": ..., "tensors": [{"name", "shape", "offset"}, ...]} with
sorted keys, then the raw tensor data — IEEE-754 single precision,
little-endian, row-major, in table order.  Offsets are relative to the
start of the data section.

Tensor names outside the architecture table are allowed only under the
reserved "fixture." prefix; that is how parity fixtures (an input grid and
a reference forward output) ride along inside one container.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

MAGIC = b"DALW"
VERSION = 1
FIXTURE_PREFIX = "fixture."


def mask_channels(v: int, mode: str) -> int:
    if mode == "diag":
        return 2 * v
    if mode == "full":
        return 2 * v * v
    raise ConfigError(f"mode must be 'diag' or 'full', got {mode!r}")


def architecture_shapes(descriptor: dict) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) table implied by a descriptor, in execution
    order: encoder double-convs, bottleneck, decoder (upsample conv, then a
    double conv on the [skip, upsampled] concatenation), 1x1 head."""
    v, mode = descriptor["v"], descriptor["mode"]
    depth, base = descriptor["depth"], descriptor["base"]
    if v < 1 or depth < 0 or base < 1:
        raise ConfigError(f"bad descriptor {descriptor}")
    c_out = mask_channels(v, mode)
    table: list[tuple[str, tuple[int, ...]]] = []

    def conv(name, out_ch, in_ch, k):
        table.append((f"{name}.weight", (out_ch, in_ch, k, k)))
        table.append((f"{name}.bias", (out_ch,)))

    ch_in = 2 * v
    for level in range(depth):
        ch = base << level
        conv(f"enc{level}.conv1", ch, ch_in, 3)
        conv(f"enc{level}.conv2", ch, ch, 3)
        ch_in = ch
    if depth > 0:
        ch = base << depth
        conv("bottleneck.conv1", ch, ch_in, 3)
        conv("bottleneck.conv2", ch, ch, 3)
        for level in range(depth - 1, -1, -1):
            ch = base << level
            conv(f"dec{level}.up", ch, ch * 2, 3)
            conv(f"dec{level}.conv1", ch, ch * 2, 3)
            conv(f"dec{level}.conv2", ch, ch, 3)
        ch_in = base
    conv("head", c_out, ch_in, 1)
    return table


@dataclass(frozen=True)
class Bundle:
    """Descriptor plus ordered named float32 tensors.

    Validation checks the tensor set against the architecture table;
    extra names must carry the fixture prefix and everything must be
    finite.
    """

    descriptor: dict
    tensors: tuple

    def __post_init__(self):
        desc = dict(self.descriptor)
        if set(desc) != {"v", "mode", "depth", "base"}:
            raise DataError(f"descriptor keys {sorted(desc)} unexpected")
        desc = {"v": int(desc["v"]), "mode": str(desc["mode"]),
                "depth": int(desc["depth"]), "base": int(desc["base"])}
        expected = dict(architecture_shapes(desc))
        seen = set()
        frozen = []
        for name, arr in self.tensors:
            a = np.ascontiguousarray(arr, dtype=np.float32)
            if name in seen:
                raise DataError(f"tensor {name}: duplicated")
            if not name.startswith(FIXTURE_PREFIX):
                if name not in expected:
                    raise DataError(f"tensor {name}: not in architecture")
                if a.shape != expected[name]:
                    raise DataError(
                        f"tensor {name}: expected shape {expected[name]}, got {a.shape}"
                    )
            if not np.all(np.isfinite(a)):
                raise DataError(f"tensor {name}: non-finite values")
            seen.add(name)
            frozen.append((name, a))
        missing = [n for n in expected if n not in seen]
        if missing:
            raise DataError(f"tensor {missing[0]}: missing from bundle")
        object.__setattr__(self, "descriptor", desc)
        object.__setattr__(self, "tensors", tuple(frozen))

    def tensor(self, name: str) -> np.ndarray:
        for n, arr in self.tensors:
            if n == name:
                return arr
        raise DataError(f"tensor {name}: missing from bundle")

    def names(self) -> list[str]:
        return [n for n, _ in self.tensors]

    def without_fixture(self) -> "Bundle":
        return Bundle(
            self.descriptor,
            tuple((n, a) for n, a in self.tensors if not n.startswith(FIXTURE_PREFIX)),
        )


def save_bundle(bundle: Bundle, path: str) -> None:
    table = []
    blobs = []
    offset = 0
    for name, arr in bundle.tensors:
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        table.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"descriptor": bundle.descriptor, "tensors": table}, sort_keys=True
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_bundle(path: str) -> Bundle:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise DataError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 12:
        raise DataError(f"{path}: truncated header")
    version, header_len = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    if len(blob) < 12 + header_len:
        raise DataError(f"{path}: truncated header")
    try:
        header = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
        descriptor = header["descriptor"]
        table = header["tensors"]
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: unreadable header: {exc}") from exc
    data = blob[12 + header_len :]
    tensors = []
    for entry in table:
        try:
            name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}: malformed tensor entry: {exc}") from exc
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = offset + 4 * count
        if offset < 0 or end > len(data):
            raise DataError(f"{path}: tensor {name} extends past end of file")
        arr = np.frombuffer(data[offset:end], dtype="<f4").reshape(shape)
        tensors.append((name, arr))
    return Bundle(descriptor, tuple(tensors))
