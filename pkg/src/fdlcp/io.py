"""Binary containers: ``.cimg`` images, ``.cmap`` class maps, ``.dbank`` banks.

All numeric payloads are little-endian. Complex values are stored as
``float64`` (real, imag) pairs.
"""

from __future__ import annotations

import os

import numpy as np

from fdlcp.dictionary import DictionaryBank
from fdlcp.direction import ClassMap
from fdlcp.errors import InputError

CIMG_MAGIC = b"FDLCP-CIMG 1\n"
CMAP_MAGIC = b"FDLCP-CMAP 1\n"
DBANK_MAGIC = b"FDLCP-DBANK 1\n"

_C16 = np.dtype("<c16")
_U16 = np.dtype("<u2")


def _split_header(buf: bytes, magic: bytes, what: str) -> tuple[list[int], bytes]:
    if not buf.startswith(magic):
        raise InputError(f"not a {what} file (bad magic)")
    rest = buf[len(magic):]
    nl = rest.find(b"\n")
    if nl < 0:
        raise InputError(f"truncated {what} header")
    try:
        fields = [int(v) for v in rest[:nl].decode("ascii").split()]
    except (UnicodeDecodeError, ValueError) as exc:
        raise InputError(f"malformed {what} header") from exc
    return fields, rest[nl + 1:]


def cimg_bytes(image) -> bytes:
    a = np.asarray(image, dtype=np.complex128)
    if a.ndim != 2:
        raise InputError(f"cimg payload must be 2D, got shape {a.shape}")
    head = CIMG_MAGIC + f"{a.shape[0]} {a.shape[1]}\n".encode("ascii")
    return head + np.ascontiguousarray(a, dtype=_C16).tobytes()


def parse_cimg(buf: bytes) -> np.ndarray:
    dims, payload = _split_header(buf, CIMG_MAGIC, "cimg")
    if len(dims) != 2 or min(dims) < 1:
        raise InputError(f"bad cimg dimensions {dims}")
    n1, n2 = dims
    if len(payload) != n1 * n2 * _C16.itemsize:
        raise InputError(f"cimg payload holds {len(payload)} bytes, expected {n1 * n2 * 16}")
    return np.frombuffer(payload, dtype=_C16).astype(np.complex128).reshape(n1, n2)


def write_cimg(path, image) -> None:
    with open(path, "wb") as f:
        f.write(cimg_bytes(image))


def read_cimg(path) -> np.ndarray:
    with open(path, "rb") as f:
        return parse_cimg(f.read())


def write_mask(path, mask) -> None:
    write_cimg(path, np.asarray(mask, dtype=bool).astype(np.complex128))


def read_mask(path) -> np.ndarray:
    m = read_cimg(path)
    if not np.all((m == 0) | (m == 1)):
        raise InputError(f"{os.fspath(path)} is not a 0/1 mask")
    return m.real.astype(bool)


def write_cmap(path, cmap: ClassMap) -> None:
    with open(path, "wb") as f:
        f.write(CMAP_MAGIC + f"{cmap.J} {cmap.Q}\n".encode("ascii"))
        f.write(np.asarray(cmap.labels, dtype=_U16).tobytes())


def read_cmap(path) -> ClassMap:
    with open(path, "rb") as f:
        (J, Q), payload = _split_header(f.read(), CMAP_MAGIC, "cmap")
    if len(payload) != 2 * J:
        raise InputError("cmap payload length mismatch")
    labels = np.frombuffer(payload, dtype=_U16).astype(np.int64)
    if labels.size and labels.max() >= Q:
        raise InputError("cmap class index out of range")
    return ClassMap(labels=labels, Q=Q)


def write_dbank(path, bank: DictionaryBank) -> None:
    classes = bank.populated
    with open(path, "wb") as f:
        f.write(DBANK_MAGIC + f"{bank.n} {bank.Q} {len(classes)}\n".encode("ascii"))
        for q in classes:
            f.write(np.array([q], dtype=_U16).tobytes())
            f.write(np.asarray(bank[q], dtype=_C16).tobytes(order="F"))


def read_dbank(path, eta: float = 0.2) -> DictionaryBank:
    with open(path, "rb") as f:
        (n, Q, count), payload = _split_header(f.read(), DBANK_MAGIC, "dbank")
    m = n * n
    rec = 2 + m * m * _C16.itemsize
    if len(payload) != count * rec:
        raise InputError("dbank payload length mismatch")
    bank = DictionaryBank(n=n, Q=Q, eta=eta)
    for i in range(count):
        chunk = payload[i * rec:(i + 1) * rec]
        q = int(np.frombuffer(chunk[:2], dtype=_U16)[0])
        D = np.frombuffer(chunk[2:], dtype=_C16).reshape((m, m), order="F").astype(np.complex128)
        bank.dictionaries[q] = D
    return bank
