"""
Narrow then wide: cascade search
================================

Unmodified queries are identified against candidates inside a 20 ppm
precursor window.  What remains is searched again within 500 Da, where a
modified peptide still matches its unmodified library spectrum.
"""

from collections import Counter

from hdoms import (Codebook, EncoderConfig, PreprocessConfig, SynthParams, Tolerance,
                   build_index, cascade_search, encode_batch, generate, preprocess)

data = generate(SynthParams(n_library=1000, n_query=200), seed=3)
pre = PreprocessConfig()
codebook = Codebook.generate(pre.dimension, EncoderConfig())


def encode_all(spectra):
    svs = [sv for sv in (preprocess(s, pre) for s in spectra) if sv is not None]
    return [sv.meta for sv in svs], encode_batch(svs, codebook)


lib_metas, lib_hvs = encode_all(data.library)
q_metas, q_hvs = encode_all(data.queries)
index = build_index(lib_metas, lib_hvs)

accepted = cascade_search(q_metas, q_hvs, index, Tolerance(20, "ppm"), Tolerance(500, "da"))

###############################################################################
# Modified queries (+79.97 Da) can only be found by the wide stage.

truth = {t.query_id: t for t in data.truth}
print(Counter((s.stage, truth[s.query_id].modified) for s in accepted))
correct = sum(truth[s.query_id].source_id == s.library_id for s in accepted)
print(f"{len(accepted)} accepted, {correct} correct")

for s in accepted[:5]:
    print(f"{s.query_id} -> {s.library_id}  {s.stage:6s} score={s.score:.3f} "
          f"diff={s.mass_diff:+.3f}")
