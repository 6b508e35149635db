"""Exact linear algebra over prime fields F_p, plus phase-tracked Pauli rows.

Matrices are numpy integer arrays with entries reduced mod p.  Ranks and
nullspaces are exact (no floating point anywhere).  For p = 2 the plain rank
computation uses bit-packed python ints, one per row.

A qudit Pauli on n sites is stored as a length-2n vector v = (x | z) over F_p
together with a phase exponent phi in Z_p, and denotes the operator

    omega^phi * X^{x_1}...X^{x_n} * Z^{z_1}...Z^{z_n},   omega = exp(2 pi i / p),

i.e. all X factors written to the left of all Z factors.  Under this
convention the product rule is

    (u, phi) * (v, psi) = (u + v, phi + psi + u_z . v_x),

which is exact for every prime p including 2 (no fourth roots of unity are
ever needed: Y never appears as a generator, only as an XZ product).
"""

from __future__ import annotations

import numpy as np



def inverse_mod_p(a: int, p: int) -> int:
    """Multiplicative inverse of a nonzero residue mod prime p."""
    return pow(int(a) % p, p - 2, p)


def _rank_gf2_bitpacked(mat: np.ndarray) -> int:
    """Rank over GF(2) using one python int per row."""
    ncols = mat.shape[1]
    rows = []
    for r in mat:
        acc = 0
        for j in np.nonzero(r)[0]:
            acc |= 1 << int(j)
        rows.append(acc)
    rank = 0
    for col in range(ncols):
        bit = 1 << col
        pivot = None
        for i in range(rank, len(rows)):
            if rows[i] & bit:
                pivot = i
                break
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for i in range(len(rows)):
            if i != rank and (rows[i] & bit):
                rows[i] ^= rows[rank]
        rank += 1
        if rank == len(rows):
            break
    return rank


def rank_mod_p(mat: np.ndarray, p: int) -> int:
    """Exact rank of an integer matrix over F_p."""
    m = np.asarray(mat, dtype=np.int64) % p
    if m.size == 0:
        return 0
    if p == 2:
        return _rank_gf2_bitpacked(m)
    m = m.copy()
    nrows, ncols = m.shape
    rank = 0
    for col in range(ncols):
        pivots = np.nonzero(m[rank:, col])[0]
        if pivots.size == 0:
            continue
        piv = rank + int(pivots[0])
        if piv != rank:
            m[[rank, piv]] = m[[piv, rank]]
        m[rank] = (m[rank] * inverse_mod_p(m[rank, col], p)) % p
        below = m[rank + 1:, col]
        nz = np.nonzero(below)[0]
        if nz.size:
            m[rank + 1 + nz] = (m[rank + 1 + nz] - np.outer(below[nz], m[rank])) % p
        rank += 1
        if rank == nrows:
            break
    return rank


def rref_mod_p(mat: np.ndarray, p: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over F_p; returns (rref with zero rows dropped, pivot columns)."""
    m = (np.asarray(mat, dtype=np.int64) % p).copy()
    nrows, ncols = m.shape
    pivots: list[int] = []
    rank = 0
    for col in range(ncols):
        if rank >= nrows:
            break
        nz = np.nonzero(m[rank:, col])[0]
        if nz.size == 0:
            continue
        piv = rank + int(nz[0])
        if piv != rank:
            m[[rank, piv]] = m[[piv, rank]]
        m[rank] = (m[rank] * inverse_mod_p(m[rank, col], p)) % p
        others = np.nonzero(m[:, col])[0]
        others = others[others != rank]
        if others.size:
            m[others] = (m[others] - np.outer(m[others, col], m[rank])) % p
        pivots.append(col)
        rank += 1
    return m[:rank], pivots


def nullspace_mod_p(mat: np.ndarray, p: int) -> np.ndarray:
    """Basis (as rows) of {v : mat @ v = 0 mod p}.  Shape (dim, ncols)."""
    m = np.asarray(mat, dtype=np.int64) % p
    ncols = m.shape[1]
    if m.size == 0:
        return np.eye(ncols, dtype=np.int64)
    red, pivots = rref_mod_p(m, p)
    free = [c for c in range(ncols) if c not in pivots]
    basis = np.zeros((len(free), ncols), dtype=np.int64)
    for i, fc in enumerate(free):
        basis[i, fc] = 1
        for r, pc in enumerate(pivots):
            basis[i, pc] = (-red[r, fc]) % p
    return basis


def left_nullspace_mod_p(mat: np.ndarray, p: int) -> np.ndarray:
    """Basis of {c : c @ mat = 0 mod p} as rows."""
    return nullspace_mod_p(np.asarray(mat).T, p)


# ---------------------------------------------------------------------------
# phase-tracked Pauli rows


def pauli_mul(u: np.ndarray, phi_u: int, v: np.ndarray, phi_v: int, n: int, p: int):
    """Product of two Pauli rows in the XZ-ordered convention."""
    cross = int(u[n:] @ v[:n]) % p
    return (u + v) % p, (phi_u + phi_v + cross) % p


def pauli_pow(u: np.ndarray, phi: int, k: int, n: int, p: int):
    """k-th power of a Pauli row: (u,phi)^k = (k u, k phi + (z.x) k(k-1)/2).

    Reducing k mod p is only valid for elements of a commuting stabilizer
    group (there z.x is forced even when p = 2), which is the only use here.
    """
    k = int(k) % p
    zx = int(u[n:] @ u[:n])
    phase = (k * phi + zx * (k * (k - 1) // 2)) % p
    return (k * u) % p, phase


def combine_rows(gens: np.ndarray, phases: np.ndarray, coeffs: np.ndarray, n: int, p: int):
    """Form prod_i row_i^{c_i} with exact phase.  Rows must pairwise commute."""
    vec = np.zeros(2 * n, dtype=np.int64)
    phi = 0
    for i in np.nonzero(coeffs % p)[0]:
        v, f = pauli_pow(gens[i], int(phases[i]), int(coeffs[i]) % p, n, p)
        vec, phi = pauli_mul(vec, phi, v, f, n, p)
    return vec, phi


def phased_rref(rows: list[tuple[np.ndarray, int]], n: int, p: int) -> list[tuple[np.ndarray, int]]:
    """Canonical form of a list of commuting phased Pauli rows.

    Performs RREF on the symplectic vectors while carrying phases through
    every row operation, then sorts by pivot column.  Two commuting phased
    row sets generate the same phased group iff their canonical forms are
    identical.
    """
    work = [(np.array(v, dtype=np.int64) % p, int(f) % p) for v, f in rows]
    work = [(v, f) for v, f in work if v.any() or f]
    ncols = 2 * n
    out: list[tuple[np.ndarray, int]] = []
    rank = 0
    for col in range(ncols):
        piv = None
        for i in range(rank, len(work)):
            if work[i][0][col] % p:
                piv = i
                break
        if piv is None:
            continue
        work[rank], work[piv] = work[piv], work[rank]
        v, f = work[rank]
        inv = inverse_mod_p(int(v[col]), p)
        if inv != 1:
            v, f = pauli_pow(v, f, inv, n, p)
            work[rank] = (v, f)
        for i in range(len(work)):
            if i == rank:
                continue
            c = int(work[i][0][col]) % p
            if c:
                neg, negf = pauli_pow(v, f, (-c) % p, n, p)
                work[i] = pauli_mul(work[i][0], work[i][1], neg, negf, n, p)
        rank += 1
        if rank == len(work):
            break
    out = work[:rank]
    out.sort(key=lambda vf: next((j for j in range(ncols) if vf[0][j]), ncols))
    return out
