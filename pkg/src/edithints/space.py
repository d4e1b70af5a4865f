"""The distance embedding: double centering, eigenvalue correction,
out-of-sample extension and distances between weighted state combinations.

Edit distances are symmetric with zero self-distance, so the squared
distance matrix always admits a pseudo-Euclidean embedding; negative
eigenvalues of the centered Gram matrix measure how far it is from being
Euclidean.  Correcting the spectrum (clip / flip / shift) yields a proper
Euclidean space in which states are vectors, weighted combinations of
states are meaningful, and distances between such combinations reduce to
quadratic forms of the corrected Gram matrix.

A query state outside the training set enters the space through a Nystrom
projection of its centered squared distances onto the corrected
eigenbasis.  For a query equal to training state j this reproduces row j
of the corrected distances exactly (clip and flip modes).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODES = ("clip", "flip", "shift")


class NumericalError(RuntimeError):
    """Eigensolver non-convergence or irreparably malformed numeric input."""


def validate_sqdist(d2: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    d2 = np.asarray(d2, dtype=float)
    if d2.ndim != 2 or d2.shape[0] != d2.shape[1]:
        raise ValueError(f"squared distance matrix must be square, got {d2.shape}")
    if not d2.size:
        return d2
    scale = max(1.0, float(np.max(np.abs(d2))))
    if np.max(np.abs(d2 - d2.T)) > tol * scale:
        raise ValueError("squared distance matrix must be symmetric")
    if np.max(np.abs(np.diag(d2))) > tol * scale:
        raise ValueError("squared distance matrix must have a zero diagonal")
    if np.min(d2) < -tol * scale:
        raise ValueError("squared distances must be non-negative")
    return d2


def center(d2: np.ndarray) -> np.ndarray:
    """Double centering: G = -1/2 J D2 J with J = I - (1/M) 11^T.

    Row and column sums of G are zero; for Euclidean inputs
    G_ii + G_jj - 2 G_ij reproduces D2_ij.
    """
    d2 = np.asarray(d2, dtype=float)
    m = d2.shape[0]
    if m == 0:
        return np.zeros((0, 0))
    j = np.eye(m) - np.full((m, m), 1.0 / m)
    return -0.5 * (j @ d2 @ j)


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Returns eigenvalues in descending order and the matching orthonormal
    eigenvector columns.  Sweeps stop once the off-diagonal Frobenius norm
    falls below ``tol`` times the Frobenius norm of the input; exceeding
    ``max_sweeps`` raises :class:`NumericalError` with the residual.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    if n == 0:
        return np.zeros(0), v
    scale = float(np.linalg.norm(a))
    if scale == 0.0:
        return np.zeros(n), v
    threshold = tol * scale

    def off_norm() -> float:
        off = a - np.diag(np.diag(a))
        return float(np.linalg.norm(off))

    sweeps = 0
    while off_norm() > threshold:
        if sweeps >= max_sweeps:
            raise NumericalError(
                f"Jacobi sweeps did not converge: off-diagonal residual "
                f"{off_norm():.3e} after {max_sweeps} sweeps (threshold {threshold:.3e})"
            )
        # rotations far below the convergence threshold cannot delay it:
        # if every remaining |a_pq| <= threshold/n the off-diagonal norm is
        # already below threshold
        skip = threshold / n
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
        sweeps += 1
    eigvals = np.diag(a).copy()
    order = np.argsort(-eigvals, kind="stable")
    return eigvals[order], v[:, order]


def correct_eigenvalues(eigvals: np.ndarray, mode: str) -> np.ndarray:
    """Repair an indefinite spectrum.

    clip: negative eigenvalues to zero; flip: absolute values; shift:
    subtract the smallest eigenvalue when it is negative.
    """
    if mode not in MODES:
        raise ValueError(f"correction mode must be one of {MODES}, got {mode!r}")
    w = np.asarray(eigvals, dtype=float)
    if mode == "clip":
        return np.clip(w, 0.0, None)
    if mode == "flip":
        return np.abs(w)
    lo = float(np.min(w)) if w.size else 0.0
    return w - lo if lo < 0 else w.copy()


@dataclass(frozen=True)
class QueryEmbedding:
    """A query state projected into a corrected space.

    ``coords`` are its coordinates in the corrected eigenbasis,
    ``cross_gram[i]`` its inner product with training state i, and
    ``self_inner`` its squared norm, floored at the projected norm and
    raised to the norm implied by the query's raw distances so that
    distances to off-span queries are not underestimated.  The corrected
    squared distance to training state i is
    ``self_inner + G_ii - 2 cross_gram[i]``.
    """

    coords: np.ndarray
    cross_gram: np.ndarray
    self_inner: float


class CorrectedSpace:
    """Eigenvalue-corrected embedding of a finite state collection.

    Immutable after construction; all methods are pure.
    """

    def __init__(self, sqdist: np.ndarray, mode: str = "clip", _precomputed=None):
        self.sqdist_raw = validate_sqdist(sqdist)
        self.mode = mode
        m = self.sqdist_raw.shape[0]
        self.size = m
        if _precomputed is not None:
            self.eigenvalues, self.eigenvectors = _precomputed
        else:
            gram = center(self.sqdist_raw)
            self.eigenvalues, self.eigenvectors = jacobi_eigh(gram)
        self.corrected_eigenvalues = correct_eigenvalues(self.eigenvalues, mode)
        self.col_means = (
            self.sqdist_raw.mean(axis=0) if m else np.zeros(0)
        )
        self.grand_mean = float(self.sqdist_raw.mean()) if m else 0.0
        root = np.sqrt(self.corrected_eigenvalues)
        self.coordinates = self.eigenvectors * root[np.newaxis, :]
        self.gram_corrected = self.coordinates @ self.coordinates.T
        self._eps = 1e-10 * float(np.max(self.corrected_eigenvalues, initial=0.0))
        self._check_invariants()

    def _check_invariants(self):
        if self.size == 0:
            return
        u = self.eigenvectors
        ortho = np.max(np.abs(u.T @ u - np.eye(self.size)))
        if ortho > 1e-8:
            raise NumericalError(f"eigenvectors lost orthonormality: {ortho:.3e}")
        scale = float(np.max(np.abs(self.eigenvalues), initial=1.0))
        if np.min(self.corrected_eigenvalues, initial=0.0) < -1e-8 * max(scale, 1.0):
            raise NumericalError("corrected spectrum is not positive semi-definite")
        g = self.gram_corrected
        raw = np.diag(g)[:, None] + np.diag(g)[None, :] - 2.0 * g
        if np.min(raw) < -1e-8 * max(scale, 1.0):
            raise NumericalError("corrected squared distances turned negative")

    def corrected_sqdist(self) -> np.ndarray:
        g = self.gram_corrected
        diag = np.diag(g)
        out = diag[:, None] + diag[None, :] - 2.0 * g
        return np.maximum(out, 0.0)

    def extend(self, d2_to_training: np.ndarray) -> QueryEmbedding:
        """Nystrom projection of a query's squared distances to training.

        The query's squared distances are centered against the training
        column means and grand mean, projected onto the corrected
        eigenbasis, and re-normed so an in-sample query reproduces its own
        corrected distance row.
        """
        d2q = np.asarray(d2_to_training, dtype=float)
        if d2q.shape != (self.size,):
            raise ValueError(f"expected {self.size} query distances, got {d2q.shape}")
        if self.size and np.min(d2q) < -1e-12:
            raise ValueError("query squared distances must be non-negative")
        if self.size == 0:
            return QueryEmbedding(np.zeros(0), np.zeros(0), 0.0)
        query_mean = float(d2q.mean())
        g_tilde = -0.5 * (d2q - self.col_means - query_mean + self.grand_mean)
        coords = np.zeros(self.size)
        for k in range(self.size):
            lam = self.eigenvalues[k]
            lam_plus = self.corrected_eigenvalues[k]
            if lam_plus > self._eps and abs(lam) > self._eps:
                coords[k] = (self.eigenvectors[:, k] @ g_tilde) * np.sqrt(lam_plus) / lam
        cross = self.coordinates @ coords
        norm_estimate = query_mean - 0.5 * self.grand_mean
        self_inner = max(float(coords @ coords), norm_estimate, 0.0)
        return QueryEmbedding(coords, cross, self_inner)

    def query_sqdist(self, q: QueryEmbedding) -> np.ndarray:
        """Corrected squared distances from the query to every training state."""
        return q.self_inner + np.diag(self.gram_corrected) - 2.0 * q.cross_gram

    def extended_gram(self, q: QueryEmbedding = None) -> np.ndarray:
        """Corrected Gram matrix, optionally bordered by the query column."""
        if q is None:
            return self.gram_corrected.copy()
        m = self.size
        out = np.zeros((m + 1, m + 1))
        out[:m, :m] = self.gram_corrected
        out[:m, m] = q.cross_gram
        out[m, :m] = q.cross_gram
        out[m, m] = q.self_inner
        return out

    def combo_sqdist(self, a, b, query: QueryEmbedding = None) -> float:
        """Squared distance between two weighted state combinations.

        Coefficient vectors run over the training states, plus one trailing
        entry for the query when ``query`` is given.  The value is the
        quadratic form (a - b)^T G (a - b) over the (extended) corrected
        Gram matrix; tiny negative values from rounding are possible and
        bounded by -1e-8 times the Gram scale.
        """
        gram = self.extended_gram(query)
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape != (gram.shape[0],) or b.shape != (gram.shape[0],):
            raise ValueError(
                f"coefficient vectors must have length {gram.shape[0]}"
            )
        v = a - b
        return float(v @ gram @ v)

    def mds_coordinates(self, dims: int = 2) -> np.ndarray:
        """Top-``dims`` corrected eigen-coordinates per state (zero-padded)."""
        out = np.zeros((self.size, dims))
        take = min(dims, self.size)
        out[:, :take] = self.coordinates[:, :take]
        return out
