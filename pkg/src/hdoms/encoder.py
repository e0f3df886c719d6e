"""
Binary hypervector encoding of spectrum vectors.

Hypervectors are D-bit binary vectors stored as ``ceil(D / 64)`` little-endian
``uint64`` words: bit ``d`` lives in word ``d // 64`` at bit position
``d % 64``.  A set bit stands for the bipolar component +1, a clear bit for -1,
so the bipolar product of two vectors is their bitwise XNOR.

Encoding bundles one bound pair per peak,

    acc = sum over peaks (i, j) of F[i] * L[j]      (bipolar, elementwise)

and keeps ``acc > 0`` as the output bit.  ``F`` are position vectors, one per
m/z bin, generated as a random walk so that nearby bins stay correlated.
``L`` are level vectors, one per quantized intensity level, whose pairwise
similarity falls off linearly with the level gap.
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from hdoms.preprocess import SpectrumVector

WORD_BITS = 64
WORD_DTYPE = np.dtype("<u8")

# Rows of the position walk drawn per RNG child stream.  Part of the
# generation scheme: changing it changes every codebook for a given seed.
POSITION_BLOCK_ROWS = 256

_POSITION_STREAM = 0
_LEVEL_STREAM = 1


@dataclass(frozen=True)
class EncoderConfig:
    """
    Hypervector settings.

    ``alpha`` is the number of bit flips (drawn with replacement) between
    adjacent position vectors and defaults to ``dim // 2``.
    """

    dim: int = 8192
    alpha: Optional[int] = None
    levels: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.dim < WORD_BITS or self.dim % WORD_BITS:
            raise ValueError(f"dim must be a positive multiple of {WORD_BITS}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", self.dim // 2)
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.levels < 2:
            raise ValueError("levels must be at least 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def words(self) -> int:
        return self.dim // WORD_BITS


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a ``(..., D)`` 0/1 array into ``(..., D // 64)`` uint64 words."""
    bits = np.asarray(bits)
    if bits.shape[-1] % WORD_BITS:
        raise ValueError(f"bit length must be a multiple of {WORD_BITS}")
    packed = np.packbits(bits.astype(bool), axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view(WORD_DTYPE)


def unpack_bits(words: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pack_bits`; returns a ``(..., D)`` uint8 array."""
    words = np.ascontiguousarray(words, dtype=WORD_DTYPE)
    return np.unpackbits(words.view(np.uint8), axis=-1, bitorder="little")


def _random_words(rng: np.random.Generator, n_words: int) -> np.ndarray:
    return np.frombuffer(rng.bytes(n_words * 8), dtype=WORD_DTYPE).copy()


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def gen_position_hvs(f: int, config: EncoderConfig) -> np.ndarray:
    """
    Generate ``f`` position hypervectors as a random bit-flip walk.

    The first vector is uniformly random.  Every following vector copies its
    predecessor and flips ``alpha`` positions drawn uniformly with
    replacement (a position drawn twice flips back).  Adjacent vectors
    therefore have expected normalized similarity ``0.5 + 0.5 (1 - 2/D)^alpha``
    and the similarity decays geometrically toward 0.5 with the index gap.

    Each block of :data:`POSITION_BLOCK_ROWS` steps draws from its own child
    stream of ``SeedSequence(seed)``, so the bits do not depend on how the
    generation is scheduled.

    Returns
    -------
    np.ndarray
        ``(f, D // 64)`` packed words.
    """
    if f < 1:
        raise ValueError("f must be at least 1")
    dim, alpha = config.dim, config.alpha
    out = np.empty((f, config.words), dtype=WORD_DTYPE)
    out[0] = _random_words(_stream(config.seed, _POSITION_STREAM), config.words)
    if alpha == 0:
        out[1:] = out[0]
        return out

    prev = out[0]
    for block, start in enumerate(range(1, f, POSITION_BLOCK_ROWS)):
        stop = min(start + POSITION_BLOCK_ROWS, f)
        rows = stop - start
        rng = _stream(config.seed, _POSITION_STREAM, block + 1)
        draws = rng.integers(0, dim, size=(rows, alpha), dtype=np.int64)
        draws += (np.arange(rows, dtype=np.int64) * dim)[:, None]
        parity = np.bincount(draws.ravel(), minlength=rows * dim) & 1
        flips = pack_bits(parity.reshape(rows, dim))
        walk = np.bitwise_xor.accumulate(flips, axis=0)
        walk ^= prev
        out[start:stop] = walk
        prev = walk[-1]
    return out


def gen_level_hvs(config: EncoderConfig) -> np.ndarray:
    """
    Generate ``levels + 1`` level hypervectors ``L_0 .. L_Q``.

    ``L_q`` is ``L_0`` with the first ``floor((D/2) * q / Q)`` entries of one
    fixed random ordering of ``D/2`` distinct positions flipped.  Flips are
    nested, so the number of differing bits between ``L_a`` and ``L_b`` is
    the difference of their flip counts and ``sim(L_0, L_Q) = 0.5``.  When
    ``D / (2Q)`` is an integer, ``sim(L_a, L_b) = 1 - |a - b| / (2Q)`` exactly.
    """
    dim, q_levels = config.dim, config.levels
    rng = _stream(config.seed, _LEVEL_STREAM)
    base = unpack_bits(_random_words(rng, config.words))
    order = rng.permutation(dim)[: dim // 2]
    bits = np.repeat(base[None, :], q_levels + 1, axis=0)
    for q in range(1, q_levels + 1):
        n_flip = (dim // 2) * q // q_levels
        bits[q, order[:n_flip]] ^= 1
    return pack_bits(bits)


@dataclass(frozen=True, eq=False)
class Codebook:
    """Position vectors (one per bin) and level vectors (``levels + 1``)."""

    position: np.ndarray = field(repr=False)
    level: np.ndarray = field(repr=False)
    config: EncoderConfig
    f: int

    @classmethod
    def generate(cls, f: int, config: EncoderConfig) -> "Codebook":
        return _cached_codebook(f, config)


@functools.lru_cache(maxsize=2)
def _cached_codebook(f: int, config: EncoderConfig) -> Codebook:
    position = gen_position_hvs(f, config)
    level = gen_level_hvs(config)
    position.flags.writeable = False
    level.flags.writeable = False
    return Codebook(position, level, config, f)


def quantize_intensity(value, levels: int):
    """
    Map normalized intensities in [0, 1] to level indices in ``[0, levels]``.

    Uses round-half-up, ``floor(v * Q + 0.5)``.  Accepts scalars or arrays.
    """
    arr = np.asarray(value, dtype=np.float64)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError("intensities must lie in [0, 1]")
    q = np.clip(np.floor(arr * levels + 0.5), 0, levels).astype(np.int64)
    return int(q) if q.ndim == 0 else q


def encode(sv: SpectrumVector, cb: Codebook) -> np.ndarray:
    """
    Encode one spectrum vector into a packed hypervector.

    Output bit ``d`` is set iff strictly more than half of the peaks have
    ``F[i][d] == L[j][d]``; a zero accumulator maps to -1 (clear bit).
    """
    if sv.dims != cb.f:
        raise ValueError(f"spectrum vector has {sv.dims} bins, codebook has {cb.f}")
    n = len(sv)
    if n == 0:
        raise ValueError("cannot encode an empty spectrum vector")
    levels = quantize_intensity(sv.intensities, cb.config.levels)
    # A set XOR bit means the bipolar product is -1.
    products = cb.position[sv.bins] ^ cb.level[levels]
    negatives = unpack_bits(products).sum(axis=0, dtype=np.int32)
    return pack_bits(2 * negatives < n)


def encode_batch(svs: Sequence[SpectrumVector], cb: Codebook) -> np.ndarray:
    """Encode several spectrum vectors into an ``(n, D // 64)`` word matrix."""
    out = np.empty((len(svs), cb.config.words), dtype=WORD_DTYPE)
    for row, sv in enumerate(svs):
        out[row] = encode(sv, cb)
    return out


def hamming_similarity(a: np.ndarray, b: np.ndarray):
    """
    Number of equal bits between packed hypervectors.

    ``a`` and ``b`` broadcast against each other over leading axes; the last
    axis holds the words.  Returns ``D - popcount(a XOR b)``.
    """
    a = np.asarray(a, dtype=WORD_DTYPE)
    b = np.asarray(b, dtype=WORD_DTYPE)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(
            f"hypervector lengths differ: {a.shape[-1] * WORD_BITS} vs {b.shape[-1] * WORD_BITS} bits")
    dim = a.shape[-1] * WORD_BITS
    diff = np.bitwise_count(a ^ b).sum(axis=-1, dtype=np.int64)
    return dim - diff


def normalized_similarity(a: np.ndarray, b: np.ndarray):
    """Hamming similarity divided by D, in [0, 1]."""
    return hamming_similarity(a, b) / (np.shape(a)[-1] * WORD_BITS)


def kernel_speedup(n_refs: int = 2048, dim: int = 8192, repeats: int = 5,
                   seed: int = 0) -> dict:
    """
    Time one query scanned against ``n_refs`` references with the packed
    popcount kernel and with an unpacked one-byte-per-bit comparison.

    Returns a dict with both timings (seconds per scan) and their ratio.
    """
    rng = np.random.default_rng(seed)
    words = dim // WORD_BITS
    refs = _random_words(rng, n_refs * words).reshape(n_refs, words)
    query = refs[0].copy()
    refs_bits = unpack_bits(refs)
    query_bits = unpack_bits(query)

    def best(fn):
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return min(times)

    packed = best(lambda: hamming_similarity(query, refs))
    naive = best(lambda: (refs_bits == query_bits).sum(axis=1))
    return {"packed_seconds": packed, "unpacked_seconds": naive,
            "speedup": naive / packed if packed > 0 else float("inf")}
