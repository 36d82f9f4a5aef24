import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SingularLinearSystem


def _tridiagonal_bands(A):
    n = A.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = A.diagonal(1)
    ab[1] = A.diagonal(0)
    ab[2, :-1] = A.diagonal(-1)
    return ab


def solve(A: sp.spmatrix, b: np.ndarray, tridiagonal: bool, refine_tol=None) -> np.ndarray:
    """Solve ``A x = b``; tridiagonal elimination when the caller says so.

    One step of iterative refinement runs if the residual exceeds
    ``refine_tol``.
    """
    A = sp.csr_matrix(A)
    try:
        if tridiagonal:
            ab = _tridiagonal_bands(A)

            def _solve(rhs):
                return sla.solve_banded((1, 1), ab, rhs, check_finite=False)

        else:
            lu = spla.splu(sp.csc_matrix(A))
            _solve = lu.solve
        x = _solve(b)
    except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        raise SingularLinearSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularLinearSystem("linear solve produced non-finite values")
    if refine_tol is not None:
        r = b - A @ x
        if np.max(np.abs(r)) > refine_tol:
            x = x + _solve(r)
    return x
