"""Sparse linear algebra: products, Dirichlet-free solves and diagnostics.

Matrices are scipy CSR. ``ZeroSumOperator`` applies a symmetric matrix with
zero row sums in flux form, ``sum_j a_ij (x_j - x_i)``, so that sums of the
result over any node set telescope exactly.
"""
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def spmv(A, x):
    return A @ x


def transpose_apply(A, x):
    return A.T @ x


class ZeroSumOperator:
    def __init__(self, A):
        A = sp.coo_matrix(A)
        off = A.row != A.col
        self.rows = A.row[off].astype(np.int64)
        self.cols = A.col[off].astype(np.int64)
        self.vals = A.data[off]
        self.n = A.shape[0]

    def __matmul__(self, x):
        x = np.asarray(x)
        terms = np.asarray(self.vals * (x[self.cols] - x[self.rows]), dtype=float)
        return np.bincount(self.rows, weights=terms, minlength=self.n).astype(float)


DIRECT_MAX = 600_000


def _jacobi(A):
    d = A.diagonal().copy()
    if np.any(d == 0):
        raise SolverError("zero on the diagonal; Jacobi preconditioner undefined")
    inv = 1.0 / d
    return spla.LinearOperator(A.shape, matvec=lambda v: inv * v, dtype=float)


def solve(A, b, method="auto", rtol=1e-10, maxiter=None, symmetric=False,
          direct_max=DIRECT_MAX, refine=0, residual=None, extended=False):
    """Solve ``A x = b``. Returns ``(x, info)``.

    ``method`` is "direct", "cg", "bicgstab" or "auto" (direct up to
    ``direct_max`` unknowns, else Jacobi-preconditioned CG when ``symmetric``
    and BiCGStab otherwise). ``refine`` extra correction steps use
    ``residual(x)`` (default ``A @ x - b``). With ``extended`` the iterate is
    accumulated in ``np.longdouble``, which lets the refinement push the
    residual below the rounding floor of a double-precision solution.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if method == "auto":
        method = "direct" if n <= direct_max else ("cg" if symmetric else "bicgstab")
    if residual is None:
        residual = lambda x: A @ x - b  # noqa: E731
    info = {"method": method, "n": n, "iterations": 0}

    if method == "direct":
        try:
            lu = spla.splu(A.tocsc())
        except RuntimeError as exc:
            raise SolverError(f"LU factorization failed: {exc}", n=n) from exc

        def inner(rhs):
            info["iterations"] += 1
            return lu.solve(rhs)
    elif method in ("cg", "bicgstab"):
        fn = spla.cg if method == "cg" else spla.bicgstab
        M = _jacobi(A)

        def inner(rhs):
            count = [0]

            def cb(_):
                count[0] += 1

            x, flag = fn(A, rhs, rtol=rtol, atol=0.0, maxiter=maxiter or 20 * n, M=M, callback=cb)
            info["iterations"] += count[0]
            if flag != 0:
                res = float(np.linalg.norm(A @ x - rhs))
                raise SolverError(f"{method} did not converge (flag {flag})",
                                  iterations=info["iterations"], residual=res,
                                  rhs_norm=float(np.linalg.norm(rhs)))
            return x
    else:
        raise ValueError(f"unknown method {method!r}")

    x = inner(b)
    if extended:
        x = x.astype(np.longdouble)
    for _ in range(refine):
        x = x - inner(np.asarray(residual(x), dtype=float))
    if not np.all(np.isfinite(x)):
        raise SolverError("solution contains non-finite values", method=method)
    r = np.asarray(residual(x), dtype=float)
    info["residual"] = float(np.linalg.norm(r))
    info["relative_residual"] = info["residual"] / max(float(np.linalg.norm(b)), 1e-300)
    return x, info


def apply_dirichlet(A, b, dofs, values):
    """Identity rows and zeroed columns on ``dofs``; the rhs is adjusted to match."""
    A = sp.csr_matrix(A)
    n = A.shape[0]
    g = np.zeros(n)
    g[dofs] = values
    mask = np.zeros(n)
    mask[dofs] = 1.0
    keep = sp.diags(1.0 - mask)
    rhs = np.asarray(b, dtype=float) - A @ g
    rhs[dofs] = values
    A_mod = (keep @ A @ keep + sp.diags(mask)).tocsr()
    A_mod.eliminate_zeros()
    return A_mod, rhs


def mmatrix_scans(A, rtol=1e-12):
    """Report the three sufficient M-matrix conditions for a sparse matrix.

    Rows must be diagonally dominant (strictly in at least one row),
    off-diagonal entries non-positive and diagonal entries positive. Only the
    dominance test gets the rounding allowance ``rtol * max|a_ij|``.
    """
    A = sp.csr_matrix(A)
    d = A.diagonal()
    absA = abs(A)
    off_abs = np.asarray(absA.sum(axis=1)).ravel() - np.abs(d)
    coo = A.tocoo()
    off = coo.row != coo.col
    scale = max(float(np.abs(A.data).max(initial=0.0)), 1.0)
    dominance = d - off_abs
    return {
        "row_dominant": bool(np.all(dominance >= -rtol * scale)),
        "strict_row": bool(np.any(dominance > rtol * scale)),
        "offdiag_nonpositive": bool(np.all(coo.data[off] <= 0.0)),
        "diag_positive": bool(np.all(d > 0)),
        "max_offdiag": float(coo.data[off].max(initial=-np.inf)),
        "min_dominance": float(dominance.min(initial=np.inf)),
    }
