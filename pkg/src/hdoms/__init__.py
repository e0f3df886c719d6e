"""Open modification spectral library search with binary hypervectors."""

from hdoms.cache import (CacheCorruptError, CacheError, CacheFormatError, StaleCacheError,
                         read_cache, write_cache)
from hdoms.encoder import (Codebook, EncoderConfig, encode, encode_batch, gen_level_hvs,
                           gen_position_hvs, hamming_similarity, kernel_speedup,
                           normalized_similarity, quantize_intensity)
from hdoms.fdr import FdrCurve, compute_fdr_curve, filter_at_fdr
from hdoms.mgf import MgfParseError, parse_mgf, write_mgf
from hdoms.preprocess import (PreprocessConfig, SpectrumVector, dimension, preprocess,
                              refine_peaks, vectorize)
from hdoms.search import (LibraryIndex, Ssm, Tolerance, build_index, cascade_search,
                          search_batch, search_one, select_candidates)
from hdoms.spectrum import RawSpectrum, SpectrumMeta
from hdoms.synth import SynthParams, generate

__version__ = "0.1.0"
