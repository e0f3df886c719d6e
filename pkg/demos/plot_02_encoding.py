"""
From peak list to hypervector
=============================

A raw spectrum is filtered, binned and normalized, then bundled into one
8192-bit vector packed into 128 machine words.
"""

import numpy as np

from hdoms import (Codebook, EncoderConfig, PreprocessConfig, RawSpectrum, encode,
                   normalized_similarity, preprocess)

rng = np.random.default_rng(1)
pre = PreprocessConfig()
print("bins:", pre.dimension)

mz = np.sort(rng.uniform(150, 1400, 60))
intensity = rng.uniform(1, 100, 60)
spectrum = RawSpectrum("demo", 650.3, 2, mz, intensity)

###############################################################################
# Preprocessing keeps the 50 most intense peaks inside the m/z window and
# scales them to the base peak.

sv = preprocess(spectrum, pre)
print(len(sv), "peaks kept, max intensity", sv.intensities.max())

codebook = Codebook.generate(pre.dimension, EncoderConfig())
hv = encode(sv, codebook)
print(hv.shape, hv.dtype)

###############################################################################
# Jitter every peak by a fraction of a bin: most peaks keep their bin and the
# encoding barely moves.  A random spectrum lands near 0.5.

jittered = RawSpectrum("jitter", 650.3, 2, mz + rng.normal(0, 0.01, 60), intensity)
order = np.argsort(jittered.mz)
jittered = jittered.with_peaks(jittered.mz[order], jittered.intensity[order])
other = RawSpectrum("other", 650.3, 2, np.sort(rng.uniform(150, 1400, 60)), intensity)

for s in (jittered, other):
    print(s.id, normalized_similarity(hv, encode(preprocess(s, pre), codebook)))
