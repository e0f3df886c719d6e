"""
Charge-partitioned precursor index and Hamming similarity search.

References are bucketed by charge and sorted by precursor m/z, so the
candidates for a query form one contiguous slice found by binary search.
The best candidate maximizes Hamming similarity; ties prefer the smaller
absolute precursor m/z difference, then the smaller library id.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from hdoms import fdr
from hdoms.encoder import WORD_BITS, WORD_DTYPE, hamming_similarity
from hdoms.spectrum import SpectrumMeta

NARROW = "narrow"
WIDE = "wide"


@dataclass(frozen=True)
class Tolerance:
    """Precursor m/z tolerance; ``unit`` is ``"ppm"`` or ``"da"``."""

    value: float
    unit: str = "ppm"

    def __post_init__(self):
        unit = self.unit.lower()
        if unit not in ("ppm", "da"):
            raise ValueError(f"tolerance unit must be 'ppm' or 'da', got {self.unit!r}")
        object.__setattr__(self, "unit", unit)
        if not self.value > 0:
            raise ValueError("tolerance must be positive")

    @classmethod
    def parse(cls, text: str) -> "Tolerance":
        """Parse strings such as ``"20ppm"``, ``"500da"`` or ``"0.5 Da"``."""
        text = text.strip().lower()
        for unit in ("ppm", "da"):
            if text.endswith(unit):
                return cls(float(text[: -len(unit)]), unit)
        raise ValueError(f"cannot parse tolerance {text!r}; expected e.g. 20ppm or 500da")

    def half_width(self, query_mz: float) -> float:
        """Half width of the window in Thomson; ppm is relative to the query."""
        if self.unit == "ppm":
            return self.value * query_mz * 1e-6
        return self.value

    def accepts(self, query_mz: float, ref_mz) -> np.ndarray:
        return np.abs(query_mz - np.asarray(ref_mz)) <= self.half_width(query_mz)

    def __str__(self):
        return f"{self.value:g}{'ppm' if self.unit == 'ppm' else 'Da'}"


@dataclass
class Ssm:
    """Spectrum-spectrum match between a query and a library entry."""

    query_id: str
    library_id: str
    peptide: Optional[str]
    charge: int
    query_precursor_mz: float
    library_precursor_mz: float
    mass_diff: float
    score: float
    is_decoy: bool
    stage: Optional[str] = None
    q_value: Optional[float] = None


@dataclass
class Bucket:
    """References of one charge, sorted by (precursor m/z, library id)."""

    charge: Optional[int]
    precursor_mz: np.ndarray
    metas: List[SpectrumMeta]
    hvs: np.ndarray = field(repr=False)
    id_rank: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.metas)


@dataclass
class LibraryIndex:
    buckets: Dict[Optional[int], Bucket]
    dim: int

    def __len__(self) -> int:
        return sum(len(b) for b in self.buckets.values())


def build_index(metas: Sequence[SpectrumMeta], hvs: np.ndarray) -> LibraryIndex:
    """
    Partition encoded references by charge and sort each bucket.

    Entries with unknown charge go to the ``None`` bucket, which no query
    ever searches.

    Raises
    ------
    ValueError
        For an empty library or a metadata / vector count mismatch.
    """
    hvs = np.asarray(hvs, dtype=WORD_DTYPE)
    if len(metas) == 0:
        raise ValueError("cannot index an empty library")
    if hvs.ndim != 2 or hvs.shape[0] != len(metas):
        raise ValueError(f"expected ({len(metas)}, words) hypervector matrix, got {hvs.shape}")
    ids = [m.id for m in metas]
    id_order = sorted(range(len(ids)), key=ids.__getitem__)
    id_rank = np.empty(len(ids), dtype=np.int64)
    id_rank[id_order] = np.arange(len(ids))

    groups: Dict[Optional[int], List[int]] = {}
    for i, meta in enumerate(metas):
        groups.setdefault(meta.charge, []).append(i)

    buckets = {}
    for charge, members in groups.items():
        members = np.asarray(members)
        mz = np.array([metas[i].precursor_mz for i in members], dtype=np.float64)
        order = members[np.lexsort((id_rank[members], mz))]
        buckets[charge] = Bucket(
            charge,
            np.array([metas[i].precursor_mz for i in order], dtype=np.float64),
            [metas[i] for i in order],
            np.ascontiguousarray(hvs[order]),
            id_rank[order])
    return LibraryIndex(buckets, hvs.shape[1] * WORD_BITS)


def select_candidates(query: SpectrumMeta, index: LibraryIndex, tol: Tolerance) -> range:
    """
    Indices ``lo..hi`` within the query's charge bucket whose precursor m/z
    satisfies ``|query_mz - ref_mz| <= tol``.  Empty if the charge is
    unknown or absent from the library.
    """
    if query.charge is None or query.charge not in index.buckets:
        return range(0)
    mz = index.buckets[query.charge].precursor_mz
    q = query.precursor_mz
    width = tol.half_width(q)
    lo = int(np.searchsorted(mz, q - width, side="left"))
    hi = int(np.searchsorted(mz, q + width, side="right"))
    # Settle floating-point rounding at the edges against the exact predicate.
    while lo > 0 and abs(q - mz[lo - 1]) <= width:
        lo -= 1
    while lo < len(mz) and mz[lo] < q and abs(q - mz[lo]) > width:
        lo += 1
    while hi < len(mz) and abs(q - mz[hi]) <= width:
        hi += 1
    while hi > lo and mz[hi - 1] > q and abs(q - mz[hi - 1]) > width:
        hi -= 1
    return range(lo, max(lo, hi))


def _check_dim(hv: np.ndarray, index: LibraryIndex):
    if np.shape(hv)[-1] * WORD_BITS != index.dim:
        raise ValueError(
            f"query hypervector has {np.shape(hv)[-1] * WORD_BITS} bits, library has {index.dim}")


def search_top_k(query: SpectrumMeta, hv: np.ndarray, index: LibraryIndex,
                 tol: Tolerance, k: int = 1) -> List[Ssm]:
    """Best ``k`` matches for one query, best first (see module docstring)."""
    _check_dim(hv, index)
    candidates = select_candidates(query, index, tol)
    if len(candidates) == 0:
        return []
    bucket = index.buckets[query.charge]
    window = slice(candidates.start, candidates.stop)
    sims = hamming_similarity(hv, bucket.hvs[window])
    diffs = query.precursor_mz - bucket.precursor_mz[window]
    if k == 1:
        best = np.flatnonzero(sims == sims.max())
        if best.size > 1:
            best = best[np.lexsort((bucket.id_rank[window][best], np.abs(diffs[best])))]
        order = best[:1]
    else:
        order = np.lexsort((bucket.id_rank[window], np.abs(diffs), -sims))[:k]
    out = []
    for i in order:
        ref = bucket.metas[candidates.start + i]
        out.append(Ssm(query.id, ref.id, ref.peptide, query.charge, query.precursor_mz,
                       ref.precursor_mz, float(diffs[i]), float(sims[i]) / index.dim,
                       ref.is_decoy))
    return out


def search_one(query: SpectrumMeta, hv: np.ndarray, index: LibraryIndex,
               tol: Tolerance) -> Optional[Ssm]:
    """Top-1 match for one query, or ``None`` if no candidate passes the filter."""
    hits = search_top_k(query, hv, index, tol, k=1)
    return hits[0] if hits else None


def search_batch(queries: Sequence[SpectrumMeta], hvs: np.ndarray, index: LibraryIndex,
                 tol: Tolerance, batch_size: int = 1024, threads: int = 1
                 ) -> List[Optional[Ssm]]:
    """
    :func:`search_one` for every query.

    Queries are split into batches of ``batch_size`` and batches may run on
    ``threads`` worker threads; results are always returned in input order
    and do not depend on either setting.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    if len(queries) != len(hvs):
        raise ValueError(f"{len(queries)} queries but {len(hvs)} hypervectors")
    if len(queries) == 0:
        return []
    _check_dim(hvs, index)

    def run(start: int) -> List[Optional[Ssm]]:
        stop = min(start + batch_size, len(queries))
        return [search_one(queries[i], hvs[i], index, tol) for i in range(start, stop)]

    starts = range(0, len(queries), batch_size)
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return [ssm for part in parts for ssm in part]


def _accept(ssms: List[Optional[Ssm]], stage: str, fdr_q: float) -> List[Ssm]:
    tagged = [replace(s, stage=stage) for s in ssms if s is not None]
    return fdr.filter_at_fdr(fdr.compute_fdr_curve(tagged), fdr_q)


def cascade_search(queries: Sequence[SpectrumMeta], hvs: np.ndarray, index: LibraryIndex,
                   narrow: Tolerance, wide: Tolerance, fdr_q: float = 0.01,
                   batch_size: int = 1024, threads: int = 1) -> List[Ssm]:
    """
    Two-stage search: narrow tolerance first, then wide on the leftovers.

    Each stage keeps its top-1 matches, estimates q-values over that stage's
    matches alone and accepts targets at ``q <= fdr_q``.  Queries accepted
    in the narrow stage are not searched again.

    Returns
    -------
    List[Ssm]
        Accepted target matches with ``stage`` and ``q_value`` set, in the
        order of the input queries.
    """
    if not 0 < fdr_q <= 1:
        raise ValueError("fdr_q must lie in (0, 1]")
    position = {q.id: i for i, q in enumerate(queries)}
    if len(position) != len(queries):
        raise ValueError("query ids must be unique")

    first = search_batch(queries, hvs, index, narrow, batch_size, threads)
    accepted = _accept(first, NARROW, fdr_q)
    done = {s.query_id for s in accepted}

    remaining = [i for i, q in enumerate(queries) if q.id not in done]
    if remaining:
        second = search_batch([queries[i] for i in remaining], np.asarray(hvs)[remaining],
                              index, wide, batch_size, threads)
        accepted += _accept(second, WIDE, fdr_q)
    accepted.sort(key=lambda s: position[s.query_id])
    return accepted


def exhaustive_search(query: SpectrumMeta, hv: np.ndarray, metas: Sequence[SpectrumMeta],
                      hvs: np.ndarray, tol: Tolerance) -> Optional[Ssm]:
    """Linear scan over all references, applying the filters directly."""
    best = None
    best_key = None
    dim = np.shape(hv)[-1] * WORD_BITS
    for ref, ref_hv in zip(metas, hvs):
        if query.charge is None or ref.charge != query.charge:
            continue
        diff = query.precursor_mz - ref.precursor_mz
        if not abs(diff) <= tol.half_width(query.precursor_mz):
            continue
        sim = int(hamming_similarity(hv, ref_hv))
        key = (-sim, abs(diff), ref.id)
        if best_key is None or key < best_key:
            best_key = key
            best = Ssm(query.id, ref.id, ref.peptide, query.charge, query.precursor_mz,
                       ref.precursor_mz, diff, sim / dim, ref.is_decoy)
    return best


def default_batch_size(dim: int, budget_fraction: float = 0.25,
                       expected_candidates: int = 4096) -> int:
    """
    Queries per batch sized from currently available host memory.

    Budgets ``budget_fraction`` of free memory for the per-query similarity
    work (an XOR buffer of ``expected_candidates`` reference vectors).
    """
    try:
        free = os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        free = 1 << 30
    per_query = expected_candidates * (dim // 8)
    return int(min(65536, max(1, math.floor(free * budget_fraction / per_query))))
