"""Labeled symmetric matrices: pairwise distances and phylogenetic covariances.

Both types are immutable after construction and validate their invariants
eagerly.  The inverse Gromov transform converts a covariance (Gram) matrix to
the distance matrix d_ij = C_ii + C_jj - 2*C_ij.
"""

import numpy as np

from .errors import DataError, NumericError

_PSD_TOL = 1e-8


def _check_labels(labels, n):
    labels = tuple(str(x) for x in labels)
    if len(labels) != n:
        raise DataError(f"expected {n} labels, got {len(labels)}")
    if len(set(labels)) != n:
        raise DataError("duplicate labels")
    return labels


def _frozen(values):
    values = np.array(values, dtype=float)
    values.setflags(write=False)
    return values


class DistanceMatrix:
    """Symmetric nonnegative matrix with zero diagonal, labeled by taxon."""

    def __init__(self, labels, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataError("distance matrix must be square")
        n = values.shape[0]
        self.labels = _check_labels(labels, n)
        if not np.all(np.isfinite(values)):
            raise DataError("distance matrix contains non-finite entries")
        if not np.array_equal(values, values.T):
            raise DataError("distance matrix is not exactly symmetric")
        if np.any(np.diag(values) != 0.0):
            raise DataError("distance matrix diagonal must be exactly zero")
        if np.any(values < 0.0):
            raise DataError("distance matrix has negative entries")
        self.values = _frozen(values)

    @property
    def n(self):
        return len(self.labels)

    def index(self, label):
        return self.labels.index(label)

    def get(self, a, b):
        return float(self.values[self.index(a), self.index(b)])

    def reorder(self, labels):
        """Return a copy with rows/columns arranged in the given label order."""
        idx = [self.index(l) for l in labels]
        return DistanceMatrix(labels, self.values[np.ix_(idx, idx)])

    def __eq__(self, other):
        return (
            isinstance(other, DistanceMatrix)
            and self.labels == other.labels
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"DistanceMatrix(n={self.n})"


class CovarianceMatrix:
    """Symmetric PSD matrix of shared root-to-MRCA path lengths."""

    def __init__(self, labels, values, check_psd=True):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataError("covariance matrix must be square")
        n = values.shape[0]
        self.labels = _check_labels(labels, n)
        if not np.all(np.isfinite(values)):
            raise DataError("covariance matrix contains non-finite entries")
        if not np.array_equal(values, values.T):
            raise DataError("covariance matrix is not exactly symmetric")
        if check_psd:
            w = np.linalg.eigvalsh(values)
            if w.size and w[0] < -_PSD_TOL:
                raise DataError(
                    f"covariance matrix is not PSD (min eigenvalue {w[0]:.3e})"
                )
        self.values = _frozen(values)

    @property
    def n(self):
        return len(self.labels)

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.values)[0])

    def __repr__(self):
        return f"CovarianceMatrix(n={self.n})"


def inverse_gromov(cov):
    """Distance matrix d_ij = C_ii + C_jj - 2*C_ij from a covariance matrix.

    Raises NumericError if any resulting entry is below -1e-9 (the input was
    not PSD); entries in [-1e-9, 0] are clamped to zero.
    """
    if isinstance(cov, CovarianceMatrix):
        labels, c = cov.labels, cov.values
    else:
        labels, c = cov
        c = np.asarray(c, dtype=float)
        if not np.array_equal(c, c.T):
            raise DataError("inverse_gromov requires a symmetric input")
    diag = np.diag(c)
    d = diag[:, None] + diag[None, :] - 2.0 * c
    if np.any(d < -1e-9):
        i, j = np.unravel_index(np.argmin(d), d.shape)
        raise NumericError(
            f"inverse Gromov transform produced negative distance "
            f"{d[i, j]:.3e} for pair ({labels[i]}, {labels[j]})"
        )
    d[d < 0.0] = 0.0
    np.fill_diagonal(d, 0.0)
    d = np.maximum(d, d.T)  # exact symmetry regardless of rounding
    return DistanceMatrix(labels, d)


def write_tsv(mat, path):
    """Write a labeled square matrix as TSV with a header row of labels."""
    labels, values = mat.labels, mat.values
    with open(path, "w") as fh:
        fh.write("\t".join(("",) + labels) + "\n")
        for i, lab in enumerate(labels):
            fh.write(lab + "\t" + "\t".join(repr(float(v)) for v in values[i]) + "\n")


def read_tsv(path, kind="distance"):
    """Read a labeled square matrix from TSV (see write_tsv)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty matrix file")
    header = lines[0].split("\t")
    labels = header[1:]
    n = len(labels)
    if len(lines) != n + 1:
        raise DataError(f"{path}: expected {n} data rows, found {len(lines) - 1}")
    values = np.zeros((n, n))
    for i, line in enumerate(lines[1:]):
        parts = line.split("\t")
        if len(parts) != n + 1:
            raise DataError(f"{path}: row {i + 1} has {len(parts) - 1} values")
        if parts[0] != labels[i]:
            raise DataError(
                f"{path}: row label {parts[0]!r} does not match header {labels[i]!r}"
            )
        values[i] = [float(x) for x in parts[1:]]
    if kind == "distance":
        return DistanceMatrix(labels, values)
    if kind == "covariance":
        return CovarianceMatrix(labels, values)
    raise DataError(f"unknown matrix kind {kind!r}")
