import struct

import numpy as np

from neuroaps.api.dataclasses import N_REGIONS, ClassLabel, PointCloud
from neuroaps.api.exceptions import FormatException, LengthException, RegionCodeException
from neuroaps.utils.utils import atomic_write

__all__ = ["MAGIC", "HEADER_SIZE", "RECORD_SIZE", "encode_cloud", "decode_cloud", "write_cloud", "read_cloud"]

"""
================================================================================
FORMATO: APC1 (nuvem de pontos binária)
================================================================================
Cabeçalho (12 bytes):
- "APC1" (4 bytes)
- u32 little-endian: número de pontos
- u8: classe (0=CN, 1=AD, 255=sem rótulo)
- u8 x 3: reservados, sempre zero

Corpo (13 bytes por ponto, na ordem da nuvem):
- f32 x, f32 y, f32 intensidade, u8 região (little-endian)
"""

MAGIC = b"APC1"
UNLABELLED = 255
_HEADER = struct.Struct("<4sIB3s")
HEADER_SIZE = _HEADER.size
RECORD_DTYPE = np.dtype([("x", "<f4"), ("y", "<f4"), ("intensity", "<f4"), ("region", "u1")])
RECORD_SIZE = RECORD_DTYPE.itemsize


def encode_cloud(cloud: PointCloud) -> bytes:
    label = UNLABELLED if cloud.class_label is None else int(cloud.class_label)
    header = _HEADER.pack(MAGIC, len(cloud), label, b"\x00\x00\x00")
    body = np.empty(len(cloud), dtype=RECORD_DTYPE)
    body["x"] = cloud.x
    body["y"] = cloud.y
    body["intensity"] = cloud.intensity
    body["region"] = cloud.region
    return header + body.tobytes()


def decode_cloud(data, source_id="") -> PointCloud:
    """
    Decodifica bytes APC1 em uma PointCloud.

    Nunca lê além do tamanho declarado no cabeçalho; qualquer inconsistência
    vira uma exceção de formato.
    """
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        if not MAGIC.startswith(data[:4]):
            raise FormatException("bad magic {!r}, expected {!r}".format(data[:4], MAGIC))
        raise LengthException("truncated header: {} of {} bytes".format(len(data), HEADER_SIZE))
    magic, count, label, reserved = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatException("bad magic {!r}, expected {!r}".format(magic, MAGIC))
    if reserved != b"\x00\x00\x00":
        raise FormatException("reserved header bytes must be zero")
    if label not in (int(ClassLabel.CN), int(ClassLabel.AD), UNLABELLED):
        raise FormatException("unknown class label byte {}".format(label))
    expected = HEADER_SIZE + count * RECORD_SIZE
    if len(data) < expected:
        raise LengthException("header declares {} points ({} bytes) but only {} bytes present".format(
            count, expected, len(data)))
    if len(data) > expected:
        raise LengthException("{} trailing bytes after {} points".format(len(data) - expected, count))

    if count:
        body = np.frombuffer(data, dtype=RECORD_DTYPE, count=count, offset=HEADER_SIZE)
    else:
        body = np.zeros(0, dtype=RECORD_DTYPE)
    bad_region = np.flatnonzero(body["region"] >= N_REGIONS)
    if bad_region.size:
        index = int(bad_region[0])
        raise RegionCodeException("point {} has region code {} (expected 0..{})".format(
            index, int(body["region"][index]), N_REGIONS - 1))
    for column, low in (("x", -1.0), ("y", -1.0), ("intensity", 0.0)):
        values = body[column]
        bad = np.flatnonzero(~(np.isfinite(values) & (values >= low) & (values <= 1.0)))
        if bad.size:
            index = int(bad[0])
            raise FormatException("point {} has {} = {} outside [{}, 1]".format(index, column, values[index], low))

    return PointCloud(body["x"], body["y"], body["intensity"], body["region"],
                      None if label == UNLABELLED else ClassLabel(label), source_id)


def write_cloud(path, cloud: PointCloud):
    with atomic_write(path, binary=True) as f:
        f.write(encode_cloud(cloud))


def read_cloud(path, source_id=None) -> PointCloud:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise FormatException("cannot read cloud {}: {}".format(path, e))
    if source_id is None:
        source_id = ""
    return decode_cloud(data, source_id)
