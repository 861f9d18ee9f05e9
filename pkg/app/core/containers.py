"""Versioned little-endian binary containers for dataset caches and model checkpoints.

Dataset cache::

    "IMUW" u16 version u16 rate_hz u32 window_length
    u16 n_classes, then per class u16 length + utf-8 name
    u16 length + utf-8 dataset name
    u32 length + utf-8 JSON provenance
    per split (train, test): u32 count, i32 labels, i32 subjects, f32 values (count x L x 6)

Checkpoint::

    "IMUM" u16 version, 32-byte model-spec hash, u32 parameter count
    per parameter: u16 length + utf-8 name, u8 ndim, u32 dims, f32 values
"""
import io
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import BinaryIO, Dict, List, Tuple, Union

import numpy as np

from app.core.errors import CacheError
from app.models.signals import N_CHANNELS, Dataset, Window

DATASET_MAGIC = b"IMUW"
MODEL_MAGIC = b"IMUM"
CONTAINER_VERSION = 1

PathLike = Union[str, Path]


def atomic_write(path: PathLike, payload: bytes) -> None:
    """Write ``payload`` to a temporary sibling file, then rename it over ``path``"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _write_str(buf: BinaryIO, text: str, width: str = "<H") -> None:
    raw = text.encode("utf-8")
    buf.write(struct.pack(width, len(raw)))
    buf.write(raw)


def _read_exact(buf: BinaryIO, size: int, path: str) -> bytes:
    data = buf.read(size)
    if len(data) != size:
        raise CacheError("container truncated", path=path)
    return data


def _read_struct(buf: BinaryIO, fmt: str, path: str) -> Tuple:
    return struct.unpack(fmt, _read_exact(buf, struct.calcsize(fmt), path))


def _read_str(buf: BinaryIO, path: str, width: str = "<H") -> str:
    (length,) = _read_struct(buf, width, path)
    try:
        return _read_exact(buf, length, path).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CacheError("container holds a non-utf-8 string", path=path) from exc


def _check_header(buf: BinaryIO, magic: bytes, path: str) -> None:
    found = _read_exact(buf, 4, path)
    if found != magic:
        raise CacheError(f"bad magic {found!r}, expected {magic!r}", path=path)
    (version,) = _read_struct(buf, "<H", path)
    if version != CONTAINER_VERSION:
        raise CacheError(f"unsupported container version {version}", path=path)


def encode_dataset(dataset: Dataset) -> bytes:
    length = dataset.window_length
    buf = io.BytesIO()
    buf.write(DATASET_MAGIC)
    buf.write(struct.pack("<HHI", CONTAINER_VERSION, dataset.rate_hz, length))
    buf.write(struct.pack("<H", len(dataset.classes)))
    for name in dataset.classes:
        _write_str(buf, name)
    _write_str(buf, dataset.name)
    _write_str(buf, json.dumps(dataset.provenance, sort_keys=True, default=str), width="<I")
    for windows in (dataset.train, dataset.test):
        buf.write(struct.pack("<I", len(windows)))
        labels = np.array([w.label for w in windows], dtype="<i4")
        subjects = np.array([w.subject for w in windows], dtype="<i4")
        values = (
            np.stack([w.samples for w in windows]).astype("<f4")
            if windows
            else np.zeros((0, length, N_CHANNELS), dtype="<f4")
        )
        buf.write(labels.tobytes())
        buf.write(subjects.tobytes())
        buf.write(values.tobytes())
    return buf.getvalue()


def decode_dataset(payload: bytes, path: str = "<memory>") -> Dataset:
    buf = io.BytesIO(payload)
    _check_header(buf, DATASET_MAGIC, path)
    rate_hz, length = _read_struct(buf, "<HI", path)
    (n_classes,) = _read_struct(buf, "<H", path)
    classes = [_read_str(buf, path) for _ in range(n_classes)]
    name = _read_str(buf, path)
    try:
        provenance = json.loads(_read_str(buf, path, width="<I"))
    except json.JSONDecodeError as exc:
        raise CacheError("container provenance is not JSON", path=path) from exc
    splits: List[List[Window]] = []
    for _ in range(2):
        (count,) = _read_struct(buf, "<I", path)
        labels = np.frombuffer(_read_exact(buf, 4 * count, path), dtype="<i4")
        subjects = np.frombuffer(_read_exact(buf, 4 * count, path), dtype="<i4")
        values = np.frombuffer(_read_exact(buf, 4 * count * length * N_CHANNELS, path), dtype="<f4")
        values = values.reshape(count, length, N_CHANNELS).astype(np.float32)
        splits.append(
            [
                Window(samples=values[i], label=int(labels[i]), subject=int(subjects[i]), rate_hz=rate_hz)
                for i in range(count)
            ]
        )
    if buf.read(1):
        raise CacheError("trailing bytes after dataset container", path=path)
    return Dataset(
        name=name, rate_hz=rate_hz, classes=classes, train=splits[0], test=splits[1], provenance=provenance
    )


def write_dataset_cache(path: PathLike, dataset: Dataset) -> None:
    atomic_write(path, encode_dataset(dataset))


def read_dataset_cache(path: PathLike) -> Dataset:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise CacheError(f"cannot read cache: {exc}", path=str(path)) from exc
    return decode_dataset(payload, str(path))


def encode_checkpoint(spec_hash: bytes, params: Dict[str, np.ndarray]) -> bytes:
    if len(spec_hash) != 32:
        raise CacheError("model-spec hash must be 32 bytes")
    buf = io.BytesIO()
    buf.write(MODEL_MAGIC)
    buf.write(struct.pack("<H", CONTAINER_VERSION))
    buf.write(spec_hash)
    buf.write(struct.pack("<I", len(params)))
    for name, value in params.items():
        _write_str(buf, name)
        buf.write(struct.pack("<B", value.ndim))
        buf.write(struct.pack(f"<{value.ndim}I", *value.shape))
        buf.write(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return buf.getvalue()


def decode_checkpoint(payload: bytes, path: str = "<memory>") -> Tuple[bytes, Dict[str, np.ndarray]]:
    buf = io.BytesIO(payload)
    _check_header(buf, MODEL_MAGIC, path)
    spec_hash = _read_exact(buf, 32, path)
    (count,) = _read_struct(buf, "<I", path)
    params: Dict[str, np.ndarray] = {}
    for _ in range(count):
        name = _read_str(buf, path)
        (ndim,) = _read_struct(buf, "<B", path)
        shape = _read_struct(buf, f"<{ndim}I", path)
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(_read_exact(buf, 4 * size, path), dtype="<f4")
        params[name] = data.reshape(shape).astype(np.float32)
    return spec_hash, params


def save_checkpoint(path: PathLike, model) -> None:
    params = {name: p.value for name, p in model.named_parameters().items()}
    atomic_write(path, encode_checkpoint(model.spec.spec_hash(), params))


def load_checkpoint(path: PathLike, model) -> None:
    """Load parameters saved by ``save_checkpoint`` into a model built from the same spec"""
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise CacheError(f"cannot read checkpoint: {exc}", path=str(path)) from exc
    spec_hash, params = decode_checkpoint(payload, str(path))
    if spec_hash != model.spec.spec_hash():
        raise CacheError("checkpoint was written for a different model spec", path=str(path))
    named = model.named_parameters()
    if set(named) != set(params):
        raise CacheError("checkpoint parameter names do not match the model", path=str(path))
    for name, param in named.items():
        if params[name].shape != param.value.shape:
            raise CacheError(f"checkpoint shape mismatch for {name}", path=str(path))
        param.value[...] = params[name]
