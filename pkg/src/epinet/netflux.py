"""Mobility structure: commuter matrix, flux matrix and the scaled flux operator.

Conventions
-----------
``commuter[i, j]`` is the probability per unit time that a person in zone j
moves to zone i, so columns sum to one and the diagonal is zero. The flux
matrix copies the off-diagonal entries and puts -1 on the diagonal, which
makes every column sum to zero. The scaled operator multiplies column j by
the flux load ``sigma[j]``.
"""

from __future__ import annotations

import csv
import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import DataError, DegeneracyError, NumericalError, StructuralError, ValidationError

COLUMN_SUM_TOL = 1e-12
SINGULAR_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def rank_tolerance(singular_values, n):
    """Threshold below which a singular value counts as zero."""
    s = np.asarray(singular_values)
    smax = float(s.max()) if s.size else 0.0
    return n * np.finfo(float).eps * smax


def numerical_rank(matrix):
    """Rank by counting singular values above ``n * eps * s_max``."""
    m = np.asarray(matrix, dtype=float)
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > rank_tolerance(s, max(m.shape))))


@dataclass(frozen=True)
class Violation:
    kind: str
    index: tuple
    message: str


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def messages(self):
        return [v.message for v in self.violations]

    def raise_if_invalid(self):
        if not self.ok:
            raise ValidationError("invalid commuter matrix: " + "; ".join(self.messages()), self.messages())


def strongly_connected(adjacency):
    """True when the directed graph with boolean ``adjacency[i, j]`` (edge j -> i)
    is strongly connected."""
    adj = np.asarray(adjacency, dtype=bool)
    n = adj.shape[0]

    def reach(a):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            j = queue.popleft()
            for i in np.flatnonzero(a[:, j] & ~seen):
                seen[i] = True
                queue.append(i)
        return seen.all()

    return reach(adj) and reach(adj.T)


def validate_commuter(matrix, tol=COLUMN_SUM_TOL):
    """Check zero diagonal, unit column sums, nonnegativity and irreducibility.

    Raises
    ------
    StructuralError
        Input is not a square matrix with at least two rows.
    DataError
        Input has NaN or infinite entries.
    """
    c = np.asarray(matrix, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise StructuralError(f"commuter matrix must be square, got shape {c.shape}")
    n = c.shape[0]
    if n < 2:
        raise StructuralError(f"need at least 2 zones, got {n}")
    if not np.all(np.isfinite(c)):
        bad = [tuple(int(k) + 1 for k in idx) for idx in np.argwhere(~np.isfinite(c))]
        raise DataError(f"commuter matrix has non-finite entries at {bad}")

    out = []
    for i, j in np.argwhere(c < 0):
        out.append(Violation("negative", (i, j), f"c_{i + 1}{j + 1} = {c[i, j]!r} < 0"))
    for i in range(n):
        if c[i, i] != 0:
            out.append(Violation("diagonal", (i,), f"c_{i + 1}{i + 1} = {c[i, i]!r} != 0"))
    sums = c.sum(axis=0)
    for j in range(n):
        if abs(sums[j] - 1.0) > tol:
            out.append(Violation("column_sum", (j,), f"column {j + 1} sums to {sums[j]:.15g}"))
    support = c > 0
    np.fill_diagonal(support, False)
    if not strongly_connected(support):
        out.append(Violation("reducible", (), "Phi_+ is reducible (commuter graph not strongly connected)"))
    return ValidationResult(tuple(out))


@dataclass(frozen=True)
class ZoneNetwork:
    """Zones, commuter probabilities and maximum flux loads.

    Construction validates the commuter matrix and raises
    :class:`~epinet.errors.ValidationError` on any violation.
    """

    commuter: np.ndarray
    sigma: np.ndarray
    zone_ids: tuple = None
    tol: float = field(default=COLUMN_SUM_TOL, repr=False)

    def __post_init__(self):
        c = np.asarray(self.commuter, dtype=float)
        validate_commuter(c, self.tol).raise_if_invalid()
        n = c.shape[0]
        s = np.asarray(self.sigma, dtype=float)
        if s.shape != (n,):
            raise StructuralError(f"sigma must have length {n}, got shape {s.shape}")
        if not np.all(np.isfinite(s)) or np.any(s <= 0):
            raise DataError(f"sigma entries must be finite and > 0, got {s.tolist()}")
        ids = tuple(str(z) for z in self.zone_ids) if self.zone_ids is not None else tuple(
            f"z{k + 1}" for k in range(n))
        if len(ids) != n:
            raise StructuralError(f"expected {n} zone ids, got {len(ids)}")
        if len(set(ids)) != n:
            raise DataError(f"zone ids must be unique: {list(ids)}")
        object.__setattr__(self, "commuter", _frozen(c))
        object.__setattr__(self, "sigma", _frozen(s))
        object.__setattr__(self, "zone_ids", ids)

    @property
    def n(self):
        return self.commuter.shape[0]

    def with_sigma(self, sigma):
        return ZoneNetwork(self.commuter, sigma, self.zone_ids, self.tol)


@dataclass(frozen=True)
class FluxMatrix:
    phi: np.ndarray
    scaled: np.ndarray

    @property
    def phi_plus(self):
        return self.phi + np.eye(self.phi.shape[0])


def build_flux(net: ZoneNetwork) -> FluxMatrix:
    phi = np.array(net.commuter, dtype=float)
    np.fill_diagonal(phi, -1.0)
    return FluxMatrix(_frozen(phi), _frozen(phi * net.sigma[np.newaxis, :]))


def check_singular(scaled, tol=SINGULAR_TOL):
    """Determinant of the scaled flux matrix and whether it vanishes.

    The determinant comes from an LU factorization with partial pivoting.
    It is judged against the Hadamard bound (product of row norms), so the
    test does not depend on the overall scale of the matrix.

    Returns
    -------
    det : float
    singular : bool
    """
    m = np.asarray(scaled, dtype=float)
    with warnings.catch_warnings():
        # an exactly zero pivot is the expected outcome here
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=True)
    swaps = int(np.sum(piv != np.arange(len(piv))))
    det = float((-1) ** swaps * np.prod(np.diag(lu)))
    scale = float(np.prod(np.linalg.norm(m, axis=1)))
    if scale == 0.0:
        return det, True
    return det, abs(det) <= tol * scale


def shifted_stability(scaled, r):
    """Eigenvalues of ``scaled - r*id`` and whether all have negative real part."""
    if not r > 0:
        raise ValueError(f"shift r must be positive, got {r}")
    m = np.asarray(scaled, dtype=float)
    try:
        ev = np.linalg.eigvals(m - r * np.eye(m.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration (LAPACK geev) did not converge: {exc}") from exc
    return ev, bool(np.all(ev.real < 0))


def kernel_vector(scaled):
    """Positive null vector of the scaled flux matrix, normalized to sum 1.

    Solved as the least-squares system ``[M; e^T] x = [0; 1]``, which is
    nonsingular exactly when the null space is one-dimensional. The null-space
    dimension is confirmed from the second smallest singular value.

    Raises
    ------
    DegeneracyError
        Null space has dimension other than one, or the solution is not
        strictly positive.
    """
    m = np.asarray(scaled, dtype=float)
    n = m.shape[0]
    s = np.linalg.svd(m, compute_uv=False)
    thresh = rank_tolerance(s, n)
    if n > 1 and s[-2] <= thresh:
        dim = max(2, int(np.sum(s <= thresh)))
        raise DegeneracyError(f"null space of sigma|>Phi has dimension {dim}, expected 1")
    aug = np.vstack([m, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    x, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    resid = np.max(np.abs(m @ x))
    if resid > 1e-10 * np.linalg.norm(x) * max(1.0, np.abs(m).max()):
        raise DegeneracyError(f"kernel residual {resid:.3e} too large; matrix is not singular")
    if np.any(x <= 0):
        raise DegeneracyError(f"kernel vector is not strictly positive: {x.tolist()}")
    return x / x.sum()


def read_commuter_csv(path):
    """Read a commuter matrix CSV.

    The first row holds the zone ids. Row i lists destination zone i; column j
    is origin zone j. A leading label column (with an empty or arbitrary corner
    cell in the header) is accepted and must repeat the zone ids.

    Returns
    -------
    zone_ids : list of str
    matrix : ndarray
    """
    with open(Path(path), newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise StructuralError(f"{path}: empty commuter CSV")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    labelled = bool(body) and len(body[0]) == len(header) and not _is_number(body[0][0])
    if labelled:
        ids = header[1:]
    else:
        ids = header
    n = len(ids)
    if len(body) != n:
        raise StructuralError(f"{path}: header names {n} zones but found {len(body)} data rows")
    mat = np.empty((n, n))
    for i, row in enumerate(body):
        cells = row[1:] if labelled else row
        if len(cells) != n:
            raise StructuralError(f"{path}: row {i + 2} has {len(cells)} values, expected {n}")
        if labelled and row[0].strip() != ids[i]:
            raise StructuralError(f"{path}: row {i + 2} label {row[0]!r} does not match zone id {ids[i]!r}")
        try:
            mat[i] = [float(v) for v in cells]
        except ValueError as exc:
            raise DataError(f"{path}: row {i + 2}: {exc}") from exc
    return ids, mat


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True
