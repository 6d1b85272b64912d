"""Hot loops with a numba path and a pure-numpy path.

``restrict_elements`` computes ``R_E A_E R_E^T`` for every element and, on
request, adds the local discrete diffusion to every element whose restricted
matrix has a positive off-diagonal entry.

``zalesak_factors`` computes the flux limiter on a CSR pattern.

Both pick the backend through ``fracfem._accel.numba_enabled``.
"""
import numpy as np

from ._accel import njit, numba_enabled, prange


# ---------------------------------------------------------------- restriction
def restrict_elements_numpy(R, A, stabilize):
    Ar = np.einsum("eai,eij,ebj->eab", R, A, R)
    m = Ar.shape[1]
    off = ~np.eye(m, dtype=bool)
    flagged = ((Ar > 0) & off).any(axis=(1, 2))
    if stabilize and flagged.any():
        B = Ar[flagged]
        S = -np.maximum(np.maximum(B, B.transpose(0, 2, 1)), 0.0)
        S[:, ~off] = 0.0
        S[:, np.arange(m), np.arange(m)] = -S.sum(axis=2)
        Ar[flagged] = B + S
    return Ar, flagged


@njit(parallel=True, cache=True)
def _restrict_elements_nb(R, A, stabilize, Ar, flagged):
    n, m, _ = R.shape
    for e in prange(n):
        tmp = np.zeros((m, 4))
        for a in range(m):
            for j in range(4):
                s = 0.0
                for i in range(4):
                    s += R[e, a, i] * A[e, i, j]
                tmp[a, j] = s
        for a in range(m):
            for b in range(m):
                s = 0.0
                for j in range(4):
                    s += tmp[a, j] * R[e, b, j]
                Ar[e, a, b] = s
        pos = False
        for a in range(m):
            for b in range(m):
                if a != b and Ar[e, a, b] > 0.0:
                    pos = True
        flagged[e] = pos
        if stabilize and pos:
            S = np.zeros((m, m))
            for a in range(m):
                for b in range(m):
                    if a != b:
                        v = max(Ar[e, a, b], Ar[e, b, a], 0.0)
                        S[a, b] = -v
                        S[a, a] += v
            for a in range(m):
                for b in range(m):
                    Ar[e, a, b] += S[a, b]


def restrict_elements(R, A, stabilize=False, backend=None):
    """Restricted element matrices ``(nE, m, m)`` and the positivity flags."""
    if backend is None:
        backend = "numba" if numba_enabled() else "numpy"
    R = np.ascontiguousarray(R, dtype=float)
    A = np.ascontiguousarray(A, dtype=float)
    if backend == "numpy":
        return restrict_elements_numpy(R, A, stabilize)
    n, m, _ = R.shape
    Ar = np.empty((n, m, m))
    flagged = np.empty(n, dtype=np.bool_)
    _restrict_elements_nb(R, A, bool(stabilize), Ar, flagged)
    return Ar, flagged


# -------------------------------------------------------------------- limiter
def zalesak_factors_numpy(indptr, indices, F, cmax, cmin, c_low, m_lumped, dt, free):
    n = len(indptr) - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))
    Pp = np.bincount(rows, weights=np.maximum(F, 0.0), minlength=n)
    Pm = np.bincount(rows, weights=np.minimum(F, 0.0), minlength=n)
    Qp = m_lumped * (cmax - c_low) / dt
    Qm = m_lumped * (cmin - c_low) / dt
    Rp = np.ones(n)
    Rm = np.ones(n)
    np.divide(Qp, Pp, out=Rp, where=Pp > 0)
    np.divide(Qm, Pm, out=Rm, where=Pm < 0)
    Rp = np.where(free, np.clip(Rp, 0.0, 1.0), 1.0)
    Rm = np.where(free, np.clip(Rm, 0.0, 1.0), 1.0)
    cols = indices
    alpha = np.where(F > 0, np.minimum(Rp[rows], Rm[cols]), np.minimum(Rm[rows], Rp[cols]))
    return alpha


@njit(parallel=True, cache=True)
def _zalesak_nb(indptr, indices, F, cmax, cmin, c_low, m_lumped, dt, free, alpha):
    n = len(indptr) - 1
    Rp = np.ones(n)
    Rm = np.ones(n)
    for i in prange(n):
        if not free[i]:
            continue
        pp = 0.0
        pm = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            f = F[k]
            if f > 0:
                pp += f
            else:
                pm += f
        if pp > 0:
            Rp[i] = min(1.0, max(0.0, m_lumped[i] * (cmax[i] - c_low[i]) / dt / pp))
        if pm < 0:
            Rm[i] = min(1.0, max(0.0, m_lumped[i] * (cmin[i] - c_low[i]) / dt / pm))
    for i in prange(n):
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if F[k] > 0:
                alpha[k] = min(Rp[i], Rm[j])
            else:
                alpha[k] = min(Rm[i], Rp[j])


def zalesak_factors(indptr, indices, F, cmax, cmin, c_low, m_lumped, dt, free, backend=None):
    """Correction factors ``alpha`` aligned with the CSR entries of ``F``.

    Rows where ``free`` is False (Dirichlet rows) do not limit their neighbours.
    """
    if backend is None:
        backend = "numba" if numba_enabled() else "numpy"
    args = [np.ascontiguousarray(a) for a in (indptr, indices, F, cmax, cmin, c_low, m_lumped)]
    free = np.ascontiguousarray(free, dtype=np.bool_)
    if backend == "numpy":
        return zalesak_factors_numpy(*args, dt, free)
    alpha = np.empty(len(F))
    _zalesak_nb(*args, float(dt), free, alpha)
    return alpha
