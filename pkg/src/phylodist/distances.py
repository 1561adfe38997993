"""Analytic pairwise distance estimators: Hamming, Jukes-Cantor, Kimura 2P.

Correction formulas diverge at saturation (mismatch fraction >= 3/4 for JC,
nonpositive log arguments for K2P); a SaturationPolicy either substitutes a
finite ceiling (default 5.0, chosen above the plateau a trained network
settles on) or raises SaturationError.
"""

import math
from dataclasses import dataclass

import numpy as np

from .alignment import Alignment
from .errors import ConfigError, DataError, SaturationError
from .matrices import DistanceMatrix

DEFAULT_CEILING = 5.0

# state-index pairs (i < j) that are transitions under the A,C,G,T encoding
_TRANSITION = {(0, 2), (1, 3)}


@dataclass(frozen=True)
class SaturationPolicy:
    """What to do when a correction formula leaves its domain."""

    mode: str = "ceiling"  # "ceiling" | "error"
    ceiling: float = DEFAULT_CEILING

    def __post_init__(self):
        if self.mode not in ("ceiling", "error"):
            raise ConfigError(f"unknown saturation mode {self.mode!r}")
        if not (self.ceiling > 0 and math.isfinite(self.ceiling)):
            raise ConfigError("ceiling must be positive and finite")

    def apply(self, what):
        if self.mode == "error":
            raise SaturationError(f"{what} is saturated")
        return self.ceiling


def _as_states(x):
    if isinstance(x, str):
        return Alignment.from_sequences(["x"], [x]).states[0]
    return np.asarray(x)


def _check_pair(x, y):
    x, y = _as_states(x), _as_states(y)
    if x.shape != y.shape:
        raise DataError(f"sequence lengths differ: {x.shape[0]} vs {y.shape[0]}")
    if x.size == 0:
        raise DataError("empty sequences")
    return x, y


def d_hamming(x, y):
    """Fraction of mismatching sites."""
    x, y = _check_pair(x, y)
    return float(np.mean(x != y))


def jc_correct(p, policy=SaturationPolicy()):
    """Jukes-Cantor corrected distance for mismatch fraction p."""
    if p >= 0.75:
        return policy.apply(f"JC correction at mismatch fraction {p}")
    return -0.75 * math.log1p(-4.0 * p / 3.0)


def d_jc(x, y, policy=SaturationPolicy()):
    """Jukes-Cantor distance: -(3/4) ln(1 - (4/3) p) for Hamming fraction p."""
    return jc_correct(d_hamming(x, y), policy)


def transition_transversion_fractions(x, y):
    """(transition fraction, transversion fraction) of differing sites."""
    x, y = _check_pair(x, y)
    diff = x != y
    lo = np.minimum(x, y)[diff]
    hi = np.maximum(x, y)[diff]
    ts = sum(
        int(np.count_nonzero((lo == i) & (hi == j))) for i, j in _TRANSITION
    )
    total = int(np.count_nonzero(diff))
    n = x.size
    return ts / n, (total - ts) / n


def k2p_correct(p, q, policy=SaturationPolicy()):
    """Kimura 2-parameter distance from transition/transversion fractions."""
    a = 1.0 - 2.0 * p - q
    b = 1.0 - 2.0 * q
    if a <= 0.0 or b <= 0.0:
        return policy.apply(f"K2P correction at (p={p}, q={q})")
    return -0.5 * math.log(a) - 0.25 * math.log(b)


def d_k2p(x, y, policy=SaturationPolicy()):
    """Kimura 2P distance: -(1/2) ln(1-2p-q) - (1/4) ln(1-2q)."""
    p, q = transition_transversion_fractions(x, y)
    return k2p_correct(p, q, policy)


_ESTIMATORS = {"hamming": d_hamming, "jc": d_jc, "k2p": d_k2p}


def distance_matrix(aln, kind="jc", policy=SaturationPolicy()):
    """All-pairs distance matrix under one analytic estimator.

    Labels come out in sorted (canonical) order.  Saturation errors are
    re-raised with the offending pair named.
    """
    if kind not in _ESTIMATORS:
        raise ConfigError(f"unknown distance kind {kind!r}; options {sorted(_ESTIMATORS)}")
    if aln.n < 3:
        raise DataError(f"distance matrix needs >= 3 sequences, got {aln.n}")
    labels = tuple(sorted(aln.labels))
    rows = {lab: aln.row(lab) for lab in labels}
    n = len(labels)
    d = np.zeros((n, n))
    fn = _ESTIMATORS[kind]
    for i in range(n):
        for j in range(i + 1, n):
            try:
                if kind == "hamming":
                    val = fn(rows[labels[i]], rows[labels[j]])
                else:
                    val = fn(rows[labels[i]], rows[labels[j]], policy)
            except SaturationError as err:
                raise SaturationError(
                    f"pair ({labels[i]}, {labels[j]}): {err}"
                ) from None
            d[i, j] = d[j, i] = val
    return DistanceMatrix(labels, d)
