"""
Position and level codebooks
============================

Two families of binary hypervectors carry all the information a spectrum
encoding needs: one vector per m/z bin and one per intensity level.
"""

import numpy as np

from hdoms import EncoderConfig, gen_level_hvs, gen_position_hvs, normalized_similarity

config = EncoderConfig(dim=8192, levels=16, seed=0)
print(config)

###############################################################################
# Level vectors drift linearly: each level flips a fixed slice of bits, so
# level 0 and level 16 share exactly half of their bits.

level = gen_level_hvs(config)
for q in (0, 1, 4, 8, 16):
    print(f"sim(L0, L{q:<2d}) = {normalized_similarity(level[0], level[q]):.4f}")

###############################################################################
# Position vectors come from a random walk of bit flips.  Neighbouring bins
# stay correlated and the correlation fades to 0.5 within a few steps, so a
# small m/z error costs a little similarity, not all of it.

position = gen_position_hvs(2000, config)
starts = np.arange(0, 1800, 9)
for gap in (1, 2, 4, 8, 100):
    sims = normalized_similarity(position[starts], position[starts + gap])
    print(f"gap {gap:>3d}: mean similarity {sims.mean():.4f}")
