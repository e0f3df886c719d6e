"""Spectrum containers shared by the parser, preprocessing and search."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class SpectrumMeta:
    """Identity and precursor information carried alongside a spectrum."""

    id: str
    precursor_mz: float
    charge: Optional[int] = None
    is_decoy: bool = False
    peptide: Optional[str] = None


@dataclass
class RawSpectrum:
    """
    A single MS/MS spectrum as read from disk.

    Peaks are stored as two parallel arrays sorted strictly ascending by m/z.
    A charge of ``None`` means the charge state was not reported.
    """

    id: str
    precursor_mz: float
    charge: Optional[int]
    mz: np.ndarray = field(repr=False)
    intensity: np.ndarray = field(repr=False)
    is_decoy: bool = False
    peptide: Optional[str] = None

    def __post_init__(self):
        self.mz = np.asarray(self.mz, dtype=np.float64)
        self.intensity = np.asarray(self.intensity, dtype=np.float64)
        if self.mz.shape != self.intensity.shape or self.mz.ndim != 1:
            raise ValueError("mz and intensity must be 1-D arrays of equal length")
        if not self.precursor_mz > 0:
            raise ValueError(f"{self.id}: precursor m/z must be positive")
        if self.mz.size and (self.mz[0] <= 0 or np.any(np.diff(self.mz) <= 0)):
            raise ValueError(f"{self.id}: peak m/z must be positive and strictly ascending")
        if np.any(self.intensity < 0):
            raise ValueError(f"{self.id}: negative peak intensity")

    def __len__(self) -> int:
        return self.mz.size

    @property
    def meta(self) -> SpectrumMeta:
        return SpectrumMeta(self.id, self.precursor_mz, self.charge,
                            self.is_decoy, self.peptide)

    def with_peaks(self, mz: np.ndarray, intensity: np.ndarray) -> "RawSpectrum":
        return RawSpectrum(self.id, self.precursor_mz, self.charge, mz,
                           intensity, self.is_decoy, self.peptide)

    def __eq__(self, other):
        if not isinstance(other, RawSpectrum):
            return NotImplemented
        return (self.meta == other.meta
                and np.array_equal(self.mz, other.mz)
                and np.array_equal(self.intensity, other.intensity))
