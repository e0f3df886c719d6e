"""
Target-decoy FDR estimation for spectrum-spectrum matches.

Matches are ranked by descending score, decoys ahead of targets on equal
score.  At each rank the FDR is estimated as ``decoys / max(1, targets)``
among the matches at or above that rank, and the q-value of a match is the
minimum FDR over that rank and every rank below it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Sequence

import numpy as np


@dataclass
class FdrCurve:
    """Ranked matches with running target/decoy counts, FDR and q-values."""

    ssms: list
    targets: np.ndarray
    decoys: np.ndarray
    fdr: np.ndarray
    q_values: np.ndarray

    def __len__(self) -> int:
        return len(self.ssms)


def compute_fdr_curve(ssms: Sequence) -> FdrCurve:
    """
    Rank matches and annotate each with its q-value.

    Parameters
    ----------
    ssms : sequence of Ssm
        Anything with ``score`` and ``is_decoy`` attributes that
        :func:`dataclasses.replace` accepts.

    Returns
    -------
    FdrCurve
        ``curve.ssms`` are copies of the inputs, in rank order, with
        ``q_value`` filled in.
    """
    if len(ssms) == 0:
        empty_i = np.zeros(0, dtype=np.int64)
        empty_f = np.zeros(0, dtype=np.float64)
        return FdrCurve([], empty_i, empty_i.copy(), empty_f, empty_f.copy())

    scores = np.array([s.score for s in ssms], dtype=np.float64)
    is_decoy = np.array([bool(s.is_decoy) for s in ssms])
    # lexsort: last key is primary.  Stable on input order for full ties.
    order = np.lexsort((np.arange(len(ssms)), ~is_decoy, -scores))
    decoy_sorted = is_decoy[order]

    decoys = np.cumsum(decoy_sorted)
    targets = np.cumsum(~decoy_sorted)
    fdr = decoys / np.maximum(1, targets)
    q_values = np.minimum.accumulate(fdr[::-1])[::-1]

    ranked = [replace(ssms[i], q_value=float(q)) for i, q in zip(order, q_values)]
    return FdrCurve(ranked, targets, decoys, fdr, q_values)


def filter_at_fdr(curve: FdrCurve, q: float) -> List:
    """Target matches with ``q_value <= q``, in rank order.  Decoys never pass."""
    return [s for s, qv in zip(curve.ssms, curve.q_values)
            if qv <= q and not s.is_decoy]
