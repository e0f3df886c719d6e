"""
Binary cache of encoded library spectra.

Layout (all integers little-endian)::

    magic            4 bytes  b"HOMS"
    version          u32
    config_len       u32
    config block     config_len bytes (every preprocessing/encoding setting)
    count            u64
    metadata         count records:
                       id_len u32, id utf-8,
                       precursor_mz f64, charge i32 (0 = unknown), is_decoy u8,
                       has_peptide u8, [peptide_len u32, peptide utf-8]
    hypervectors     count * (D / 64) * 8 bytes, row-major uint64 words
    checksum         u64, BLAKE2b-64 over metadata + hypervector bytes

A cache is only accepted when its config block is byte-identical to the one
derived from the requested run configuration.
"""

from __future__ import annotations

import hashlib
import os
import struct
from typing import IO, List, Sequence, Tuple, Union

import numpy as np

from hdoms.encoder import WORD_DTYPE, EncoderConfig
from hdoms.preprocess import SCALING_METHODS, PreprocessConfig
from hdoms.spectrum import SpectrumMeta

MAGIC = b"HOMS"
VERSION = 1

_CONFIG_STRUCT = struct.Struct("<dddIIdB" + "IIIQ")
_META_FIXED = struct.Struct("<diBB")


class CacheError(Exception):
    """Base class for cache loading problems."""


class CacheFormatError(CacheError):
    """Not a cache file, or a cache version this code cannot read."""


class StaleCacheError(CacheError):
    """The cache was built with different preprocessing/encoding settings."""


class CacheCorruptError(CacheError):
    """The cache is truncated or fails its checksum."""


def config_block(preprocess: PreprocessConfig, encoder: EncoderConfig) -> bytes:
    """Serialize every setting that influences the encoded vectors."""
    return _CONFIG_STRUCT.pack(
        preprocess.min_mz, preprocess.max_mz, preprocess.bin_size,
        preprocess.max_peaks, preprocess.min_peaks, preprocess.intensity_floor,
        SCALING_METHODS.index(preprocess.scaling),
        encoder.dim, encoder.alpha, encoder.levels, encoder.seed)


def describe_config_block(block: bytes) -> str:
    try:
        (min_mz, max_mz, bin_size, max_peaks, min_peaks, floor, scaling,
         dim, alpha, levels, seed) = _CONFIG_STRUCT.unpack(block)
    except struct.error:
        return "<unreadable config>"
    return (f"min_mz={min_mz} max_mz={max_mz} bin_size={bin_size} "
            f"max_peaks={max_peaks} min_peaks={min_peaks} intensity_floor={floor} "
            f"scaling={SCALING_METHODS[scaling] if scaling < len(SCALING_METHODS) else scaling} "
            f"dim={dim} alpha={alpha} levels={levels} seed={seed}")


def _pack_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _checksum(*chunks: bytes) -> int:
    digest = hashlib.blake2b(digest_size=8)
    for chunk in chunks:
        digest.update(chunk)
    return int.from_bytes(digest.digest(), "little")


def _as_matrix(hvs, words: int) -> np.ndarray:
    if isinstance(hvs, np.ndarray) and hvs.ndim == 2:
        matrix = hvs
    else:
        rows = [np.asarray(hv) for hv in hvs]
        if len({row.shape for row in rows}) > 1:
            raise ValueError("hypervectors have mixed dimensionalities")
        matrix = np.stack(rows) if rows else np.empty((0, words), dtype=WORD_DTYPE)
    if matrix.shape[1] != words:
        raise ValueError(
            f"hypervectors have {matrix.shape[1] * 64} bits, config says {words * 64}")
    return np.ascontiguousarray(matrix, dtype=WORD_DTYPE)


def dumps_cache(metas: Sequence[SpectrumMeta], hvs, preprocess: PreprocessConfig,
                encoder: EncoderConfig) -> bytes:
    """Serialize an encoded library; see :func:`write_cache`."""
    matrix = _as_matrix(hvs, encoder.words)
    if matrix.shape[0] != len(metas):
        raise ValueError(f"{len(metas)} metadata records but {matrix.shape[0]} hypervectors")
    block = config_block(preprocess, encoder)
    header = MAGIC + struct.pack("<II", VERSION, len(block)) + block
    parts = [struct.pack("<Q", len(metas))]
    for meta in metas:
        parts.append(_pack_str(meta.id))
        parts.append(_META_FIXED.pack(float(meta.precursor_mz), meta.charge or 0,
                                      int(bool(meta.is_decoy)), meta.peptide is not None))
        if meta.peptide is not None:
            parts.append(_pack_str(meta.peptide))
    body = b"".join(parts)
    vectors = matrix.tobytes()
    return header + body + vectors + struct.pack("<Q", _checksum(body, vectors))


def write_cache(dest: Union[str, os.PathLike, IO[bytes]], metas: Sequence[SpectrumMeta],
                hvs, preprocess: PreprocessConfig, encoder: EncoderConfig) -> None:
    """
    Write encoded library entries.

    Parameters
    ----------
    dest : path or binary stream
    metas : sequence of SpectrumMeta
        Metadata, one record per hypervector.
    hvs : (n, D // 64) array or sequence of 1-D word arrays
        Packed hypervectors; all must share ``encoder.dim``.
    preprocess, encoder : configs
        Stored in the header so stale caches can be detected.

    Raises
    ------
    ValueError
        If hypervector lengths are mixed or disagree with ``encoder.dim``.
    """
    data = dumps_cache(metas, hvs, preprocess, encoder)
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "wb") as handle:
            handle.write(data)
    else:
        dest.write(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CacheCorruptError(
                f"cache truncated: needed {n} bytes at offset {self.pos}, "
                f"only {len(self.data) - self.pos} left")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: Union[str, struct.Struct]):
        fmt = fmt if isinstance(fmt, struct.Struct) else struct.Struct(fmt)
        return fmt.unpack(self.take(fmt.size))

    def string(self) -> str:
        (length,) = self.unpack("<I")
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CacheCorruptError(f"invalid string in metadata: {exc}") from None


def loads_cache(data: bytes, preprocess: PreprocessConfig,
                encoder: EncoderConfig) -> Tuple[List[SpectrumMeta], np.ndarray]:
    """Parse cache bytes; see :func:`read_cache`."""
    reader = _Reader(data)
    try:
        magic = reader.take(4)
    except CacheCorruptError:
        raise CacheFormatError("not a library cache (file too short)") from None
    if magic != MAGIC:
        raise CacheFormatError(f"not a library cache (magic {magic!r})")
    version, block_len = reader.unpack("<II")
    if version != VERSION:
        raise CacheFormatError(f"unsupported cache version {version} (expected {VERSION})")
    block = reader.take(block_len)
    expected = config_block(preprocess, encoder)
    if block != expected:
        raise StaleCacheError(
            "library cache was built with different settings; re-run `hdoms encode`.\n"
            f"  cache:     {describe_config_block(block)}\n"
            f"  requested: {describe_config_block(expected)}")

    body_start = reader.pos
    (count,) = reader.unpack("<Q")
    metas = []
    for _ in range(count):
        spectrum_id = reader.string()
        precursor_mz, charge, is_decoy, has_peptide = reader.unpack(_META_FIXED)
        peptide = reader.string() if has_peptide else None
        metas.append(SpectrumMeta(spectrum_id, precursor_mz, charge or None,
                                  bool(is_decoy), peptide))
    body = data[body_start:reader.pos]
    vectors = reader.take(count * encoder.words * 8)
    (stored,) = reader.unpack("<Q")
    if reader.pos != len(data):
        raise CacheCorruptError(f"{len(data) - reader.pos} trailing bytes after checksum")
    if stored != _checksum(body, vectors):
        raise CacheCorruptError("checksum mismatch; the cache file is corrupted")
    hvs = np.frombuffer(vectors, dtype=WORD_DTYPE).reshape(count, encoder.words).copy()
    return metas, hvs


def read_cache(source: Union[str, os.PathLike, IO[bytes]], preprocess: PreprocessConfig,
               encoder: EncoderConfig) -> Tuple[List[SpectrumMeta], np.ndarray]:
    """
    Load an encoded library written by :func:`write_cache`.

    Returns
    -------
    (metas, hvs)
        Metadata list and an ``(n, D // 64)`` uint64 matrix.

    Raises
    ------
    CacheFormatError
        Bad magic or unsupported version.
    StaleCacheError
        The cache settings differ from ``preprocess`` / ``encoder``.
    CacheCorruptError
        Truncated data or checksum mismatch.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as handle:
            data = handle.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    return loads_cache(data, preprocess, encoder)
