"""
Peak refinement and conversion of spectra into sparse binned vectors.

A refined spectrum keeps only in-range peaks above a relative noise floor,
truncated to the most intense ``max_peaks``.  Vectorization bins the m/z axis
into half-open intervals ``[min_mz + k * bin_size, min_mz + (k + 1) * bin_size)``,
sums intensities that collide in one bin and normalizes to the base peak.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from hdoms.spectrum import RawSpectrum, SpectrumMeta

SCALING_METHODS = ("none", "sqrt")

# Slack (in units of one bin) absorbing decimal representation error, so that
# e.g. 100.05 with min_mz=100, bin_size=0.05 lands in bin 1 and not bin 0.
_BIN_EPS = 1e-9


@dataclass(frozen=True)
class PreprocessConfig:
    """Spectrum refinement and binning settings (defaults: small-scale search)."""

    min_mz: float = 101.0
    max_mz: float = 1500.0
    bin_size: float = 0.05
    max_peaks: int = 50
    min_peaks: int = 10
    intensity_floor: float = 0.01
    scaling: str = "none"

    def __post_init__(self):
        if not self.min_mz < self.max_mz:
            raise ValueError("min_mz must be smaller than max_mz")
        if not self.bin_size > 0:
            raise ValueError("bin_size must be positive")
        if not self.max_peaks >= self.min_peaks >= 1:
            raise ValueError("require max_peaks >= min_peaks >= 1")
        if not 0 <= self.intensity_floor < 1:
            raise ValueError("intensity_floor must lie in [0, 1)")
        if self.scaling not in SCALING_METHODS:
            raise ValueError(f"scaling must be one of {SCALING_METHODS}")

    @property
    def dimension(self) -> int:
        return dimension(self)


@dataclass
class SpectrumVector:
    """
    Sparse binned spectrum: strictly ascending bin indices with intensities
    in (0, 1], the largest being exactly 1.
    """

    dims: int
    bins: np.ndarray = field(repr=False)
    intensities: np.ndarray = field(repr=False)
    meta: SpectrumMeta

    def __len__(self) -> int:
        return self.bins.size

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dims, dtype=np.float64)
        dense[self.bins] = self.intensities
        return dense


def dimension(config: PreprocessConfig) -> int:
    """Number of m/z bins, ``ceil((max_mz - min_mz) / bin_size)``."""
    ratio = (config.max_mz - config.min_mz) / config.bin_size
    nearest = round(ratio)
    if math.isclose(ratio, nearest, rel_tol=1e-12, abs_tol=1e-9):
        return max(1, int(nearest))
    return max(1, math.ceil(ratio))


def bin_index(mz, config: PreprocessConfig) -> np.ndarray:
    """Map m/z values inside ``[min_mz, max_mz)`` to bin indices."""
    raw = (np.asarray(mz, dtype=np.float64) - config.min_mz) / config.bin_size
    bins = np.floor(raw + _BIN_EPS).astype(np.int64)
    return np.clip(bins, 0, dimension(config) - 1)


def refine_peaks(spectrum: RawSpectrum, config: PreprocessConfig) -> Optional[RawSpectrum]:
    """
    Remove noise and out-of-range peaks and keep the most intense ones.

    Parameters
    ----------
    spectrum : RawSpectrum
        Parsed spectrum with ascending peak m/z.
    config : PreprocessConfig
        Refinement settings.

    Returns
    -------
    Optional[RawSpectrum]
        The refined spectrum (peaks ordered by m/z), or ``None`` if fewer than
        ``config.min_peaks`` peaks survive.  Such spectra are unprocessable
        and excluded from searching.
    """
    mz, intensity = spectrum.mz, spectrum.intensity
    keep = (mz >= config.min_mz) & (mz < config.max_mz) & (intensity > 0)
    mz, intensity = mz[keep], intensity[keep]
    if mz.size == 0:
        return None

    keep = intensity >= config.intensity_floor * intensity.max()
    mz, intensity = mz[keep], intensity[keep]

    if mz.size > config.max_peaks:
        # Most intense first; equal intensities keep the lower m/z.
        order = np.lexsort((mz, -intensity))[:config.max_peaks]
        order.sort()
        mz, intensity = mz[order], intensity[order]

    if mz.size < config.min_peaks:
        return None
    return spectrum.with_peaks(mz, intensity)


def vectorize(spectrum: RawSpectrum, config: PreprocessConfig) -> SpectrumVector:
    """Bin a refined spectrum into a base-peak normalized sparse vector."""
    if len(spectrum) == 0:
        raise ValueError(f"{spectrum.id}: cannot vectorize an empty spectrum")
    bins = bin_index(spectrum.mz, config)
    # mz ascending => bins non-decreasing, so collisions are adjacent.
    uniq, start = np.unique(bins, return_index=True)
    intensities = np.add.reduceat(spectrum.intensity, start)
    if config.scaling == "sqrt":
        intensities = np.sqrt(intensities)
    top = intensities.max()
    if not top > 0:
        raise ValueError(f"{spectrum.id}: all peak intensities are zero")
    intensities = intensities / top
    return SpectrumVector(dimension(config), uniq, intensities, spectrum.meta)


def preprocess(spectrum: RawSpectrum, config: PreprocessConfig) -> Optional[SpectrumVector]:
    """:func:`refine_peaks` followed by :func:`vectorize`; ``None`` if unprocessable."""
    refined = refine_peaks(spectrum, config)
    if refined is None:
        return None
    return vectorize(refined, config)
