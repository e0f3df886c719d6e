"""
Target-decoy q-values
=====================

Matches to decoy spectra estimate how many target matches above a given
score are wrong.
"""

from hdoms import Ssm, compute_fdr_curve, filter_at_fdr


def ssm(name, score, decoy):
    return Ssm(name, "lib_" + name, None, 2, 500.0, 500.0, 0.0, score, decoy)


curve = compute_fdr_curve([ssm("a", 0.9, False), ssm("b", 0.8, False),
                           ssm("c", 0.7, True), ssm("d", 0.6, False)])
for s, fdr in zip(curve.ssms, curve.fdr):
    print(f"{s.query_id}  score={s.score}  decoy={s.is_decoy!s:5}  "
          f"fdr={fdr:.3f}  q={s.q_value:.3f}")

###############################################################################
# At 1% only the two matches ranked above the decoy survive.

print([s.query_id for s in filter_at_fdr(curve, 0.01)])
print([s.query_id for s in filter_at_fdr(curve, 1.0)])
