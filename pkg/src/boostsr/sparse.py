"""Sparse coding solvers.

Three routes: greedy orthogonal matching pursuit (dictionary training),
coordinate-descent l1 coding with per-signal fidelity weights (the boosted
reconstruction path), and closed-form ridge regression (anchored neighborhood
projections).  The fidelity weight s folds exactly into the l1 problem as an
effective penalty lam / s**2, so one descent kernel serves the weighted and
unweighted paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a normal dependency
    _HAVE_NUMBA = False


class NumericalError(Exception):
    """A solver or training procedure failed numerically."""


def check_unit_columns(dictionary: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    d = np.asarray(dictionary, dtype=np.float64)
    if d.ndim != 2 or d.shape[1] < 1:
        raise ValueError("dictionary must be a 2D matrix with at least one atom")
    norms = np.linalg.norm(d, axis=0)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError("dictionary columns must have unit l2 norm")
    return d


@dataclass
class SparseCode:
    """Nonzero coefficients of a signal over a dictionary of `dict_size` atoms."""

    indices: np.ndarray
    values: np.ndarray
    dict_size: int

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.indices.shape != self.values.shape:
            raise ValueError("indices and values must align")
        if len(np.unique(self.indices)) != len(self.indices):
            raise ValueError("atom indices must be unique")
        if len(self.indices) and (
            self.indices.min() < 0 or self.indices.max() >= self.dict_size
        ):
            raise ValueError("atom index out of range")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("coefficients must be finite")

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dict_size)
        dense[self.indices] = self.values
        return dense

    @property
    def nnz(self) -> int:
        return len(self.indices)


# ---------------------------------------------------------------------------
# orthogonal matching pursuit

def omp(
    signal: np.ndarray,
    dictionary: np.ndarray,
    sparsity_budget: int,
    tol: float = 1e-10,
) -> SparseCode:
    """Greedy atom selection by residual correlation with least-squares refits.

    Stops at the sparsity budget or once the residual norm drops below `tol`.
    Correlation ties break toward the lowest atom index; a linearly dependent
    candidate atom is dropped and the pursuit stops early.
    """
    d = check_unit_columns(dictionary)
    if sparsity_budget < 1:
        raise ValueError("sparsity budget must be >= 1")
    y = np.asarray(signal, dtype=np.float64).ravel()
    if y.shape[0] != d.shape[0]:
        raise ValueError("signal dimension does not match the dictionary")
    support, coef, _ = _omp_core(y, d, sparsity_budget, tol)
    return SparseCode(np.array(support, dtype=np.int64), coef, d.shape[1])


def _omp_core(y, d, budget, tol):
    """Unchecked OMP inner loop; returns (support, coefficients, residual)."""
    support: list[int] = []
    coef = np.zeros(0)
    residual = y
    res_norm = np.linalg.norm(y)
    while len(support) < budget and res_norm >= tol:
        corr = np.abs(d.T @ residual)
        if support:
            corr[support] = -1.0  # selected atoms are orthogonal to the residual
        j = int(np.argmax(corr))  # argmax picks the lowest index on exact ties
        trial = support + [j]
        sub = d[:, trial]
        gram = sub.T @ sub
        try:
            sol = np.linalg.solve(gram, sub.T @ y)
        except np.linalg.LinAlgError:
            break  # candidate atom is dependent on the support
        new_residual = y - sub @ sol
        new_norm = np.linalg.norm(new_residual)
        if not np.all(np.isfinite(sol)) or new_norm > res_norm + 1e-12:
            break  # ill-conditioned support; keep the previous fit
        support = trial
        coef = sol
        residual = new_residual
        res_norm = new_norm
    return support, coef, residual


# ---------------------------------------------------------------------------
# weighted l1 coding via cyclic coordinate descent

@dataclass
class CodingProblem:
    """One weighted l1 coding instance: min ||s (y - D a)||^2 + lam ||a||_1."""

    signal: np.ndarray
    dictionary: np.ndarray
    lam: float
    fidelity_weight: float = 1.0

    def __post_init__(self):
        self.dictionary = check_unit_columns(self.dictionary)
        self.signal = np.asarray(self.signal, dtype=np.float64).ravel()
        if self.signal.shape[0] != self.dictionary.shape[0]:
            raise ValueError("signal dimension does not match the dictionary")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.fidelity_weight <= 0:
            raise ValueError("fidelity weight must be positive")


@dataclass
class CodingDiagnostics:
    converged: bool
    sweeps: int


def _cd_lasso_py(gram, dty_t, lam_eff, tol, max_sweeps):
    """Pure-numpy coordinate descent, vectorized across problems (rows)."""
    n, k = dty_t.shape
    codes = np.zeros((n, k))
    q = np.zeros((n, k))  # codes @ gram, maintained incrementally
    active = np.ones(n, dtype=bool)
    thr = 0.5 * lam_eff
    sweeps = 0
    while sweeps < max_sweeps and active.any():
        sweeps += 1
        idx = np.where(active)[0]
        delta = np.zeros(len(idx))
        for j in range(k):
            gjj = gram[j, j]
            rho = dty_t[idx, j] - q[idx, j] + gjj * codes[idx, j]
            new = np.sign(rho) * np.maximum(np.abs(rho) - thr[idx], 0.0) / gjj
            diff = new - codes[idx, j]
            nz = diff != 0.0
            if np.any(nz):
                rows = idx[nz]
                codes[rows, j] = new[nz]
                q[rows] += diff[nz, None] * gram[j]
                delta = np.maximum(delta, np.abs(diff))
        active[idx[delta < tol]] = False
    return codes.T, sweeps, ~active


if _HAVE_NUMBA:

    @njit(cache=True)
    def _cd_lasso_nb(gram, dty_t, lam_eff, tol, max_sweeps):  # pragma: no cover
        n, k = dty_t.shape
        codes = np.zeros((n, k))
        q = np.zeros((n, k))
        active = np.ones(n, dtype=np.bool_)
        sweeps = 0
        any_active = n > 0
        while sweeps < max_sweeps and any_active:
            sweeps += 1
            any_active = False
            for p in range(n):
                if not active[p]:
                    continue
                delta = 0.0
                for j in range(k):
                    gjj = gram[j, j]
                    rho = dty_t[p, j] - q[p, j] + gjj * codes[p, j]
                    thr = 0.5 * lam_eff[p]
                    if rho > thr:
                        new = (rho - thr) / gjj
                    elif rho < -thr:
                        new = (rho + thr) / gjj
                    else:
                        new = 0.0
                    diff = new - codes[p, j]
                    if diff != 0.0:
                        codes[p, j] = new
                        for i in range(k):
                            q[p, i] += gram[j, i] * diff
                        ad = abs(diff)
                        if ad > delta:
                            delta = ad
                if delta < tol:
                    active[p] = False
                else:
                    any_active = True
        return codes.T, sweeps, ~active


def cd_lasso_batch(
    dictionary: np.ndarray,
    signals: np.ndarray,
    lam_eff: np.ndarray,
    tol: float = 1e-7,
    max_sweeps: int = 1000,
    gram: np.ndarray | None = None,
):
    """Solve min ||y_p - D a_p||^2 + lam_eff[p] ||a_p||_1 for every column p.

    Columns are independent problems sharing one Gram matrix; per-column
    results agree with a single-problem run to solver precision.  Returns
    (codes (k, n), sweeps, converged mask (n,)).
    """
    d = np.asarray(dictionary, dtype=np.float64)
    y = np.asarray(signals, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    lam_eff = np.broadcast_to(
        np.asarray(lam_eff, dtype=np.float64), (y.shape[1],)
    ).copy()
    if np.any(lam_eff <= 0):
        raise ValueError("effective penalties must be positive")
    if gram is None:
        gram = d.T @ d
    dty_t = np.ascontiguousarray((d.T @ y).T)
    if _HAVE_NUMBA:
        return _cd_lasso_nb(
            np.ascontiguousarray(gram), dty_t, lam_eff, tol, max_sweeps
        )
    return _cd_lasso_py(gram, dty_t, lam_eff, tol, max_sweeps)


def weighted_l1_code(
    problem: CodingProblem,
    tol: float = 1e-7,
    max_sweeps: int = 1000,
    return_diagnostics: bool = False,
):
    """Coordinate-descent solve of one weighted l1 coding problem.

    The weighted fidelity is folded into the penalty: lam_eff = lam / s**2.
    Converged when the largest coefficient change in a sweep is below `tol`;
    otherwise the best (last) iterate is returned and flagged.
    """
    lam_eff = problem.lam / problem.fidelity_weight**2
    codes, sweeps, conv = cd_lasso_batch(
        problem.dictionary,
        problem.signal[:, None],
        np.array([lam_eff]),
        tol=tol,
        max_sweeps=max_sweeps,
    )
    dense = codes[:, 0]
    nz = np.nonzero(dense)[0]
    code = SparseCode(nz, dense[nz], problem.dictionary.shape[1])
    if return_diagnostics:
        return code, CodingDiagnostics(bool(conv[0]), sweeps)
    return code


def l1_objective(
    dictionary: np.ndarray, signal: np.ndarray, code: np.ndarray, lam_eff: float
) -> float:
    r = signal - dictionary @ code
    return float(r @ r + lam_eff * np.sum(np.abs(code)))


# ---------------------------------------------------------------------------
# ridge regression

def ridge_solve(
    signal: np.ndarray, neighborhood_atoms: np.ndarray, lam: float
) -> np.ndarray:
    """Closed-form coefficients (N'N + lam I)^-1 N' a by a direct solve."""
    n = np.asarray(neighborhood_atoms, dtype=np.float64)
    if n.ndim != 2 or n.shape[1] < 1:
        raise ValueError("neighborhood must be a matrix with at least one column")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    a = np.asarray(signal, dtype=np.float64).ravel()
    if a.shape[0] != n.shape[0]:
        raise ValueError("signal dimension does not match the neighborhood")
    k = n.shape[1]
    gram = n.T @ n + lam * np.eye(k)
    if lam == 0 and np.linalg.matrix_rank(gram) < k:
        raise ValueError("singular system at lam = 0; use lam > 0")
    try:
        return np.linalg.solve(gram, n.T @ a)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular system at lam = 0; use lam > 0") from exc
