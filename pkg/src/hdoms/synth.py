"""
Synthetic spectral libraries with planted modifications.

Library targets are random spectra whose peaks sit at distinct bin centres.
Each decoy repositions the peaks of one target at random (same precursor,
charge and intensities).  Queries are copies of library targets; a chosen
fraction is modified by a precursor mass shift that also moves a subset of
fragment peaks by the same offset.  All queries get multiplicative intensity
noise.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from hdoms.mgf import write_mgf
from hdoms.spectrum import RawSpectrum

AMINO_ACIDS = np.array(list("ACDEFGHIKLMNPQRSTVWY"))


@dataclass(frozen=True)
class SynthParams:
    n_library: int = 2000
    n_query: int = 500
    n_peaks: int = 50
    min_mz: float = 101.0
    max_mz: float = 1500.0
    bin_size: float = 0.05
    precursor_min: float = 400.0
    precursor_max: float = 1200.0
    charges: Tuple[int, ...] = (2, 3)
    fraction_modified: float = 0.6
    shift_da: float = 79.97
    fraction_fragments_shifted: float = 0.3
    intensity_noise: float = 0.05
    decoy_fraction: float = 1.0
    decoy_prefix: str = "DECOY_"

    def __post_init__(self):
        bins = int(round((self.max_mz - self.min_mz) / self.bin_size))
        if self.n_peaks < 1 or self.n_peaks > bins:
            raise ValueError(f"cannot place {self.n_peaks} distinct peaks in {bins} bins")
        if self.n_library < 1 or self.n_query < 0:
            raise ValueError("need at least one library spectrum and a non-negative query count")
        if not 0 < self.precursor_min < self.precursor_max:
            raise ValueError("precursor range must be positive and non-empty")
        if not self.charges or min(self.charges) < 1:
            raise ValueError("charges must be positive integers")
        for name in ("fraction_modified", "fraction_fragments_shifted", "decoy_fraction"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.intensity_noise < 0:
            raise ValueError("intensity_noise must be non-negative")


@dataclass
class TruthRecord:
    query_id: str
    source_id: str
    peptide: str
    modified: bool
    precursor_shift: float


@dataclass
class SynthData:
    library: List[RawSpectrum] = field(repr=False)
    queries: List[RawSpectrum] = field(repr=False)
    truth: List[TruthRecord] = field(repr=False)


def _random_peaks(rng, params: SynthParams, n_bins: int):
    bins = np.sort(rng.choice(n_bins, size=params.n_peaks, replace=False))
    mz = params.min_mz + (bins + 0.5) * params.bin_size
    intensity = np.round((0.02 + 0.98 * rng.random(params.n_peaks) ** 2) * 1e4, 2)
    return mz, intensity


def _sorted_merged(mz, intensity):
    order = np.argsort(mz, kind="stable")
    mz, intensity = mz[order], intensity[order]
    uniq, start = np.unique(mz, return_index=True)
    return uniq, np.add.reduceat(intensity, start)


def generate(params: SynthParams, seed: int = 0) -> SynthData:
    """Build an in-memory library, query set and ground truth."""
    rng = np.random.default_rng(seed)
    n_bins = int(round((params.max_mz - params.min_mz) / params.bin_size))

    targets = []
    for i in range(params.n_library):
        charge = int(rng.choice(params.charges))
        precursor = float(np.round(rng.uniform(params.precursor_min, params.precursor_max), 5))
        peptide = "".join(rng.choice(AMINO_ACIDS, size=int(rng.integers(7, 21))))
        mz, intensity = _random_peaks(rng, params, n_bins)
        targets.append(RawSpectrum(f"lib{i:05d}", precursor, charge, mz, intensity,
                                   peptide=peptide))

    decoys = []
    n_decoys = int(round(params.decoy_fraction * params.n_library))
    for i, target in enumerate(targets[:n_decoys]):
        mz, _ = _random_peaks(rng, params, n_bins)
        intensity = rng.permutation(target.intensity)
        decoys.append(RawSpectrum(f"{params.decoy_prefix}lib{i:05d}", target.precursor_mz,
                                  target.charge, mz, intensity, is_decoy=True,
                                  peptide=params.decoy_prefix + target.peptide[::-1]))

    replace_sources = params.n_query > params.n_library
    sources = rng.choice(params.n_library, size=params.n_query, replace=replace_sources)
    n_modified = int(round(params.fraction_modified * params.n_query))
    modified = np.zeros(params.n_query, dtype=bool)
    modified[rng.permutation(params.n_query)[:n_modified]] = True
    n_shift = int(round(params.fraction_fragments_shifted * params.n_peaks))

    queries, truth = [], []
    for q, (src, is_mod) in enumerate(zip(sources, modified)):
        source = targets[src]
        mz, intensity = source.mz.copy(), source.intensity.copy()
        precursor, shift = source.precursor_mz, 0.0
        if is_mod:
            shift = params.shift_da
            precursor = source.precursor_mz + shift / source.charge
            moved = rng.choice(mz.size, size=n_shift, replace=False)
            mz[moved] += shift
            mz, intensity = _sorted_merged(mz, intensity)
        if params.intensity_noise > 0:
            factor = 1.0 + params.intensity_noise * rng.standard_normal(intensity.size)
            intensity = intensity * np.maximum(factor, 0.05)
        query_id = f"q{q:05d}"
        queries.append(RawSpectrum(query_id, precursor, source.charge, mz, intensity))
        truth.append(TruthRecord(query_id, source.id, source.peptide, bool(is_mod), shift))

    return SynthData(targets + decoys, queries, truth)


def write_truth(truth: List[TruthRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(["query_id", "source_id", "peptide", "modified", "precursor_shift"])
        for t in truth:
            writer.writerow([t.query_id, t.source_id, t.peptide, int(t.modified),
                             repr(float(t.precursor_shift))])


def read_truth(path) -> List[TruthRecord]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle, delimiter="\t")
        return [TruthRecord(r["query_id"], r["source_id"], r["peptide"],
                            r["modified"] == "1", float(r["precursor_shift"]))
                for r in reader]


def write_synth(data: SynthData, out_dir) -> Tuple[str, str, str]:
    """Write ``library.mgf``, ``queries.mgf`` and ``truth.tsv`` into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = tuple(os.path.join(out_dir, name)
                  for name in ("library.mgf", "queries.mgf", "truth.tsv"))
    write_mgf(data.library, paths[0])
    write_mgf(data.queries, paths[1])
    write_truth(data.truth, paths[2])
    return paths
