"""Smallest eigenpair of the generalized problem H u = lambda W u.

W is a positive diagonal, so the problem reduces to a standard symmetric one
by the W^(-1/2) congruence.  The shift for shift-invert Lanczos is seeded at
the certified floor min(potential * w / W): the stiffness part of every
assembled form is positive semidefinite, so no eigenvalue lies below it.
That keeps the nearest-to-shift eigenvalue equal to the smallest one even on
strongly indefinite (violated) pencils.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .forms import DiagonalWeight, FormMatrix
from .grids import describe

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 5000
DENSE_CUTOFF = 12  # below this, ARPACK subspace constraints bite; solve densely
RETRY_SHIFTS = (-1.0, -10.0)


class SolverError(RuntimeError):
    """Unrecoverable solver failure (singular factorizations exhausted)."""


@dataclass(frozen=True)
class Pencil:
    """Generalized symmetric pair (H, W) with W a positive diagonal."""

    H: FormMatrix
    W: DiagonalWeight

    def __post_init__(self):
        if self.H.dimension != len(self.W.values):
            raise ValueError("pencil dimensions do not match")

    @property
    def floor(self) -> float:
        """Certified lower bound for the smallest eigenvalue."""
        return float(np.min(self.H.potential * self.H.quadrature.weights / self.W.values))


@dataclass
class EigenResult:
    lambda_min: float
    vector: np.ndarray | None
    residual: float
    iterations: int
    converged: bool


def _reduced_operator(pencil: Pencil) -> tuple[sp.csc_matrix, np.ndarray]:
    d = 1.0 / np.sqrt(pencil.W.values)
    A = sp.diags(d) @ pencil.H.entries @ sp.diags(d)
    A = ((A + A.T) * 0.5).tocsc()
    return A, d


def _scaled_residual(A: sp.csc_matrix, v: np.ndarray, lam: float) -> float:
    # row-balanced residual: grids spanning many decades make the reduced
    # operator's scale spread enormous (up to ~1e26), so a bare 2-norm has a
    # float64 floor far above any useful tolerance; Jacobi scaling restores a
    # machine-attainable, rescaling-invariant certificate
    scale = np.sqrt(np.abs(A.diagonal()) + abs(lam) + 1.0)
    return float(np.linalg.norm((A @ v - lam * v) / scale))


def _result_from_vector(pencil: Pencil, A: sp.csc_matrix, d: np.ndarray, v: np.ndarray,
                        iterations: int, tol: float) -> EigenResult:
    """Rayleigh value + row-balanced W-normalized residual, with one or two
    Rayleigh-quotient polish steps when the Lanczos vector is loose.

    In pencil coordinates the residual reads
    ``|| (H u - lam W u) / sqrt(|diag H| + (1+|lam|) W) || / ||u||_W``.
    """
    v = v / np.linalg.norm(v)
    lam = float(v @ (A @ v))
    residual = _scaled_residual(A, v, lam)
    tries = 0
    n = A.shape[0]
    while residual > tol and tries < 3:
        # inverse-power step at the current Rayleigh value; cubic locally
        shift = lam * (1.0 + 1e-14) + 1e-300
        try:
            op = _CountingOpInv(A, shift)
            w = op.solve_refined((A - shift * sp.identity(n, format="csc")).tocsc(), v)
        except RuntimeError:
            break
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0:
            break
        v2 = w / nw
        lam2 = float(v2 @ (A @ v2))
        residual2 = _scaled_residual(A, v2, lam2)
        iterations += 1
        tries += 1
        if residual2 >= residual:
            break
        v, lam, residual = v2, lam2, residual2
    u = d * v  # ||u||_W = ||v|| = 1
    return EigenResult(lam, u, residual, iterations, bool(residual <= tol))


class _CountingOpInv(spla.LinearOperator):
    """(A - sigma I)^(-1) through a sparse LU factor, counting applications.

    The factorization acts on the diagonally balanced matrix D (A - sigma) D
    (exact identity (A - sigma)^(-1) = D (D (A - sigma) D)^(-1) D): grids
    spanning many decades push the raw scale spread past 1e20, where an
    unbalanced LU's backward error ruins the eigenvector's small components.
    """

    def __init__(self, A: sp.csc_matrix, sigma: float):
        n = A.shape[0]
        super().__init__(dtype=np.float64, shape=(n, n))
        M = (A - sigma * sp.identity(n, format="csc")).tocsc()
        s = np.abs(M.diagonal())
        s[s == 0] = 1.0
        self.d = 1.0 / np.sqrt(s)
        balanced = (sp.diags(self.d) @ M @ sp.diags(self.d)).tocsc()
        self.lu = spla.splu(balanced)
        self.count = 0

    def _matvec(self, x):
        self.count += 1
        return self.d * self.lu.solve(self.d * x)

    def solve_refined(self, M: sp.csc_matrix, x: np.ndarray) -> np.ndarray:
        """One step of iterative refinement against the unbalanced M."""
        w = self._matvec(x)
        return w + self._matvec(x - M @ w)


def _shift_invert(A: sp.csc_matrix, sigma0: float, k: int, v0: np.ndarray,
                  max_iter: int) -> tuple[np.ndarray, np.ndarray, int]:
    """k eigenpairs of A nearest (above) the shift; retries lower shifts on
    singular factorizations per the configured ladder."""
    last = None
    for shift in (0.0,) + RETRY_SHIFTS:
        sigma = sigma0 + shift
        try:
            op = _CountingOpInv(A, sigma)
        except RuntimeError as exc:  # singular factor; retry lower
            last = exc
            continue
        try:
            vals, vecs = spla.eigsh(A, k=k, sigma=sigma, which="LM", OPinv=op,
                                    v0=v0, maxiter=max_iter, tol=1e-12)
        except spla.ArpackNoConvergence as exc:
            if exc.eigenvalues is None or len(exc.eigenvalues) == 0:
                raise
            vals, vecs = exc.eigenvalues, exc.eigenvectors
        order = np.argsort(vals)
        return vals[order], vecs[:, order], op.count
    raise SolverError(f"all shift retries produced singular factorizations: {last}")


def smallest_eigenpair(pencil: Pencil, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER, seed: int = 0) -> EigenResult:
    """Smallest eigenpair with a W-normalized residual certificate.

    Deterministic for a fixed seed.  Non-convergence is reported through the
    ``converged`` flag, not raised.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, d = _reduced_operator(pencil)
    n = A.shape[0]
    if n <= DENSE_CUTOFF:
        vals, vecs = np.linalg.eigh(A.toarray())
        return _result_from_vector(pencil, A, d, vecs[:, 0], 0, tol)
    floor = pencil.floor
    sigma = floor - 1e-3 * (1.0 + abs(floor))
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    try:
        _, vecs, iters = _shift_invert(A, sigma, 1, v0, max_iter)
    except spla.ArpackNoConvergence:
        return EigenResult(float("nan"), None, float("inf"), max_iter, False)
    return _result_from_vector(pencil, A, d, vecs[:, 0], iters, tol)


def lowest_eigenvalues(pencil: Pencil, k: int, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER, seed: int = 0) -> np.ndarray:
    """The k smallest eigenvalues, ascending (fiber level checks)."""
    A, _ = _reduced_operator(pencil)
    n = A.shape[0]
    if n <= max(DENSE_CUTOFF, 2 * k + 2):
        return np.linalg.eigvalsh(A.toarray())[:k]
    floor = pencil.floor
    sigma = floor - 1e-3 * (1.0 + abs(floor))
    rng = np.random.default_rng(seed)
    vals, _, _ = _shift_invert(A, sigma, k, rng.standard_normal(n), max_iter)
    return vals


@dataclass
class StudyRow:
    grid: dict
    result: EigenResult | None
    error: str | None = None


def convergence_study(pencil_builder: Callable[[object], Pencil],
                      grid_family: Iterable, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER, seed: int = 0) -> list[StudyRow]:
    """One independent smallest-eigenpair row per grid; per-row failures are
    recorded instead of aborting the table."""
    rows: list[StudyRow] = []
    for grid in grid_family:
        try:
            pencil = pencil_builder(grid)
            rows.append(StudyRow(describe(grid), smallest_eigenpair(pencil, tol, max_iter, seed)))
        except Exception as exc:  # noqa: BLE001 - table rows must survive failures
            try:
                gd = describe(grid)
            except Exception:  # noqa: BLE001
                gd = {"inner": None, "outer": None, "n": None, "kind": type(grid).__name__}
            rows.append(StudyRow(gd, None, f"{type(exc).__name__}: {exc}"))
    return rows
