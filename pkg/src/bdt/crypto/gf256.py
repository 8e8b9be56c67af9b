"""GF(2^8) arithmetic kernels used by the erasure codec and secret sharing.

Field: AES-style GF(256) with reduction polynomial x^8+x^4+x^3+x+1 (0x11d
generator tables, generator 2).  All bulk operations work on uint8 numpy
arrays.  The matrix-multiply kernel is the hot loop when dispersing large
batches; it has a numba @njit variant selected by the BDT_NUMBA env var:

    BDT_NUMBA=1     require numba (ImportError if missing)
    BDT_NUMBA=0     force the pure-numpy path
    unset / auto    use numba when importable, else numpy

`benchmarks/bench_erasure.py` compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

# --- table construction (generator 2, poly 0x11d) ---

_EXP = np.zeros(512, dtype=np.uint8)   # doubled so log[a]+log[b] never wraps
_LOG = np.zeros(256, dtype=np.int32)

_x = 1
for _i in range(255):
    _EXP[_i] = _x
    _LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= 0x11D
for _i in range(255, 512):
    _EXP[_i] = _EXP[_i - 255]
_LOG[0] = 0  # never dereferenced for zero operands; guarded explicitly

EXP = _EXP
LOG = _LOG


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(EXP[LOG[a] + LOG[b]])


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("gf256 inverse of 0")
    return int(EXP[255 - LOG[a]])


def gf_mul_vec(a: int, v: np.ndarray) -> np.ndarray:
    """Scalar * vector over GF(256)."""
    if a == 0:
        return np.zeros_like(v)
    out = EXP[(LOG[a] + LOG[v.astype(np.int32)]) % 255]
    out = out.copy()
    out[v == 0] = 0
    return out


def _matmul_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """GF(256) matrix product, a: (r,k) uint8, b: (k,c) uint8 -> (r,c)."""
    r, k = a.shape
    c = b.shape[1]
    out = np.zeros((r, c), dtype=np.uint8)
    logb = LOG[b.astype(np.int32)]
    bz = b == 0
    for j in range(k):
        col = a[:, j]
        nz = col != 0
        if not nz.any():
            continue
        prod = EXP[(LOG[col[nz].astype(np.int32)][:, None] + logb[j][None, :]) % 255]
        prod = prod.copy()
        prod[:, bz[j]] = 0
        out[nz] ^= prod
    return out


def _make_numba_matmul():
    from numba import njit

    exp_t = EXP.copy()
    log_t = LOG.astype(np.int64)

    @njit(cache=True)
    def _matmul(a, b):  # pragma: no cover - exercised via dispatch tests
        r, k = a.shape
        c = b.shape[1]
        out = np.zeros((r, c), dtype=np.uint8)
        for i in range(r):
            for j in range(k):
                aij = a[i, j]
                if aij == 0:
                    continue
                la = log_t[aij]
                for t in range(c):
                    bjt = b[j, t]
                    if bjt != 0:
                        out[i, t] ^= exp_t[la + log_t[bjt]]
        return out

    return _matmul


def _select_matmul():
    mode = os.environ.get("BDT_NUMBA", "auto").strip().lower()
    if mode in ("0", "off", "numpy"):
        return _matmul_numpy, "numpy"
    try:
        fn = _make_numba_matmul()
        return fn, "numba"
    except ImportError:
        if mode in ("1", "on", "numba"):
            raise
        return _matmul_numpy, "numpy"


gf_matmul, BACKEND = _select_matmul()


def gf_matmul_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Always-numpy variant, kept callable for tests and benchmarks."""
    return _matmul_numpy(a, b)


def gf_mat_inv(m: np.ndarray) -> np.ndarray:
    """Invert a square GF(256) matrix by Gauss-Jordan elimination."""
    k = m.shape[0]
    a = m.astype(np.uint8).copy()
    inv = np.eye(k, dtype=np.uint8)
    for col in range(k):
        pivot = -1
        for row in range(col, k):
            if a[row, col] != 0:
                pivot = row
                break
        if pivot < 0:
            raise ZeroDivisionError("singular matrix over GF(256)")
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            inv[[col, pivot]] = inv[[pivot, col]]
        pinv = gf_inv(int(a[col, col]))
        a[col] = gf_mul_vec(pinv, a[col])
        inv[col] = gf_mul_vec(pinv, inv[col])
        for row in range(k):
            if row != col and a[row, col] != 0:
                coef = int(a[row, col])
                a[row] ^= gf_mul_vec(coef, a[col])
                inv[row] ^= gf_mul_vec(coef, inv[col])
    return inv


def vandermonde(rows: int, cols: int) -> np.ndarray:
    """v[i,j] = (i+1)^j over GF(256); any `cols` rows are independent."""
    if rows > 255:
        raise ValueError("at most 255 evaluation points in GF(256)")
    v = np.zeros((rows, cols), dtype=np.uint8)
    for i in range(rows):
        acc = 1
        for j in range(cols):
            v[i, j] = acc
            acc = gf_mul(acc, i + 1)
    return v
