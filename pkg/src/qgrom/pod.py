"""Proper orthogonal decomposition by the method of snapshots.

Dirichlet lifting for the vorticity, volume-weighted correlation matrix,
dense Jacobi eigendecomposition, basis construction with explicit
renormalization, and energy-based truncation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import Field
from .mesh import Mesh


@dataclass
class SnapshotSet:
    """Ordered collection of same-mesh fields with timestamps.

    ``lifting`` holds the field already subtracted from the snapshots
    (present only for homogenized vorticity sets).
    """

    mesh: Mesh
    times: np.ndarray
    fields: list[Field]
    tag: str
    lifting: Field | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.shape != (len(self.fields),):
            raise ValueError("one timestamp per snapshot required")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        for f in self.fields:
            if not f.mesh.same_geometry(self.mesh):
                raise ValueError("snapshot on a different mesh")

    def __len__(self) -> int:
        return len(self.fields)

    def matrix(self) -> np.ndarray:
        """Snapshot matrix, one column per instant (n_cells x N_t)."""
        return np.column_stack([f.values for f in self.fields])


@dataclass
class PodBasis:
    """Orthonormal POD modes with the full eigenvalue spectrum."""

    modes: list[Field]
    eigenvalues: np.ndarray
    retained: int
    tag: str
    lifting: Field | None = None

    @property
    def mesh(self) -> Mesh:
        return self.modes[0].mesh

    def mode_matrix(self) -> np.ndarray:
        return np.column_stack([m.values for m in self.modes])

    def energy_fraction(self, n: int) -> float:
        """Cumulative eigenvalue energy captured by the first n modes."""
        lam = self.eigenvalues
        return float(lam[:n].sum() / lam.sum())


def compute_lifting(snaps: SnapshotSet) -> tuple[Field, SnapshotSet]:
    """Subtract the snapshot time average so the set carries homogeneous
    boundary data; the average becomes the lifting field."""
    if len(snaps) == 0:
        raise ValueError("cannot lift an empty snapshot set")
    mesh = snaps.mesh
    mean = np.mean([f.values for f in snaps.fields], axis=0)
    lifting = Field(mesh, mean)
    homog = [Field(mesh, f.values - mean) for f in snaps.fields]
    return lifting, SnapshotSet(mesh=mesh, times=snaps.times.copy(),
                                fields=homog, tag=snaps.tag, lifting=lifting)


def correlation_matrix(snaps: SnapshotSet) -> np.ndarray:
    """Gram matrix of pairwise discrete-L2 snapshot inner products."""
    s = snaps.matrix()
    weighted = s * snaps.mesh.cell_volumes[:, None]
    c = s.T @ weighted
    return 0.5 * (c + c.T)  # scrub BLAS roundoff asymmetry


def _round_robin_pairs(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic schedule of disjoint index pairs covering every (i, j)
    exactly once per sweep (circle method; a dummy pads odd n)."""
    m = n + (n % 2)
    others = list(range(1, m))
    rounds = []
    for _ in range(m - 1):
        order = [0] + others
        p = np.array(order[: m // 2])
        q = np.array(order[: m // 2 - 1 : -1] if m > 2 else order[1:])
        lo = np.minimum(p, q)
        hi = np.maximum(p, q)
        keep = hi < n  # drop dummy pairings
        rounds.append((lo[keep], hi[keep]))
        others = others[1:] + others[:1]
    return rounds


def _off_norm(m: np.ndarray) -> float:
    # direct evaluation; the squared-norm difference cancels catastrophically
    return float(np.linalg.norm(m - np.diag(m.diagonal())))


def _jacobi_sweeps(a: np.ndarray, v: np.ndarray, threshold: float,
                   max_sweeps: int, rounds) -> None:
    """In-place parallel-ordered cyclic Jacobi sweeps on a symmetric matrix,
    accumulating rotations into the columns of ``v``."""
    n = a.shape[0]
    # pairs already below this leave at most threshold^2/32 of squared
    # off-norm unrotated, so skipping them cannot block convergence
    skip_tol = threshold / (4.0 * n)
    for _ in range(max_sweeps):
        if _off_norm(a) <= threshold:
            return
        for p_all, q_all in rounds:
            apq = a[p_all, q_all]
            active = np.abs(apq) > skip_tol
            if not np.any(active):
                continue
            p, q, apq = p_all[active], q_all[active], apq[active]
            tau = (a[q, q] - a[p, p]) / (2.0 * apq)
            sign = np.where(tau >= 0.0, 1.0, -1.0)
            # hypot keeps the smaller-root formula overflow-safe for huge tau
            t = sign / (np.abs(tau) + np.hypot(1.0, tau))
            cth = 1.0 / np.sqrt(1.0 + t * t)
            sth = t * cth
            # rows, then columns, then accumulated eigenvectors
            ap_r, aq_r = a[p, :], a[q, :]
            a[p, :] = cth[:, None] * ap_r - sth[:, None] * aq_r
            a[q, :] = sth[:, None] * ap_r + cth[:, None] * aq_r
            ap_c, aq_c = a[:, p], a[:, q]
            a[:, p] = ap_c * cth - aq_c * sth
            a[:, q] = ap_c * sth + aq_c * cth
            vp, vq = v[:, p], v[:, q]
            v[:, p] = vp * cth - vq * sth
            v[:, q] = vp * sth + vq * cth


_BLOCK = 64


def _jacobi_blocked(a: np.ndarray, v: np.ndarray, threshold: float,
                    max_sweeps: int) -> None:
    """Blocked variant for large matrices: each cyclic visit to a block pair
    applies a batch of Jacobi rotations (a partial diagonalization of the
    2b x 2b principal submatrix) to the full matrix through small matrix
    products, which is far cheaper per sweep than scattered row updates.

    Block sweeps reduce the off-norm by a roughly constant factor, so they
    are only used for the bulk reduction; once the off-norm is small, the
    element-wise parallel sweeps take over and finish quadratically.
    """
    n = a.shape[0]
    edges = list(range(0, n, _BLOCK)) + [n]
    blocks = [(edges[k], edges[k + 1]) for k in range(len(edges) - 1)]
    nb = len(blocks)
    pair_skip = threshold / (2.0 * nb)
    switch = max(threshold, 1e-5 * np.linalg.norm(a))
    rounds_cache: dict[int, list] = {}
    block_sweeps = 0
    while block_sweeps < max_sweeps:
        if _off_norm(a) <= switch:
            break
        block_sweeps += 1
        for bi in range(nb - 1):
            for bj in range(bi + 1, nb):
                (i0, i1), (j0, j1) = blocks[bi], blocks[bj]
                sub = np.block([[a[i0:i1, i0:i1], a[i0:i1, j0:j1]],
                                [a[j0:j1, i0:i1], a[j0:j1, j0:j1]]])
                if _off_norm(sub) <= pair_skip:
                    continue
                m = sub.shape[0]
                rounds = rounds_cache.setdefault(m, _round_robin_pairs(m))
                u = np.eye(m)
                _jacobi_sweeps(sub, u, pair_skip / 2.0, 2, rounds)
                k = i1 - i0
                rows = u.T @ np.vstack([a[i0:i1, :], a[j0:j1, :]])
                a[i0:i1, :] = rows[:k]
                a[j0:j1, :] = rows[k:]
                cols = np.hstack([a[:, i0:i1], a[:, j0:j1]]) @ u
                a[:, i0:i1] = cols[:, :k]
                a[:, j0:j1] = cols[:, k:]
                vcols = np.hstack([v[:, i0:i1], v[:, j0:j1]]) @ u
                v[:, i0:i1] = vcols[:, :k]
                v[:, j0:j1] = vcols[:, k:]
    _jacobi_sweeps(a, v, threshold, max_sweeps - block_sweeps,
                   _round_robin_pairs(n))


def eigendecompose(c: np.ndarray, rel_off_tol: float = 1e-12,
                   max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric
    matrix by cyclic Jacobi rotations.

    Rotations are applied sweep by sweep in a fixed deterministic ordering
    (round-robin pairs; grouped into block pairs for large matrices) until
    the off-diagonal Frobenius norm falls at or below
    ``rel_off_tol * ||C||_F``. The sign of each eigenvector is fixed by
    making its largest-magnitude component positive.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("matrix must be square")
    n = c.shape[0]
    c_norm = np.linalg.norm(c)
    asym = np.linalg.norm(c - c.T)
    if c_norm > 0 and asym > 1e-10 * c_norm:
        raise ValueError(f"matrix is not symmetric (relative asymmetry {asym / c_norm:.2e})")

    a = 0.5 * (c + c.T)
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    threshold = rel_off_tol * c_norm
    if n <= 2 * _BLOCK:
        _jacobi_sweeps(a, v, threshold, max_sweeps, _round_robin_pairs(n))
    else:
        _jacobi_blocked(a, v, threshold, max_sweeps)
    if _off_norm(a) > threshold:
        raise RuntimeError("Jacobi eigensolver did not reach the off-diagonal threshold")

    lam = a.diagonal().copy()
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    v = v[:, order]
    # deterministic sign: largest-magnitude component of each vector positive
    idx = np.argmax(np.abs(v), axis=0)
    flip = v[idx, np.arange(n)] < 0
    v[:, flip] *= -1.0
    return lam, v


def build_basis(snaps: SnapshotSet, eigvecs: np.ndarray, eigvals: np.ndarray,
                n_r: int) -> PodBasis:
    """Assemble the first ``n_r`` POD modes from snapshot combinations.

    Each mode is the snapshot combination given by one eigenvector,
    renormalized to unit discrete-L2 norm (the correlation matrix carries
    no 1/N_t factor, so the raw combinations are not unit length).
    """
    n_t = len(snaps)
    eigvals = np.asarray(eigvals, dtype=float)
    if eigvecs.shape != (n_t, eigvals.size):
        raise ValueError("eigenvector matrix shape does not match snapshots")
    if n_r < 1 or n_r > n_t:
        raise ValueError(f"cannot retain {n_r} of {n_t} snapshots")
    floor = 1e-14 * eigvals[0] if eigvals.size else 0.0
    if np.any(eigvals[:n_r] <= floor):
        raise ValueError(
            f"rank deficiency: requested {n_r} modes but the spectrum drops "
            f"below 1e-14 * lambda_1 first")

    s = snaps.matrix()
    raw = s @ eigvecs[:, :n_r]
    vol = snaps.mesh.cell_volumes
    norms = np.sqrt(np.einsum("ij,ij->j", raw * vol[:, None], raw))
    modes_mat = raw / norms
    mesh = snaps.mesh
    modes = [Field(mesh, modes_mat[:, k].copy()) for k in range(n_r)]

    basis = PodBasis(modes=modes, eigenvalues=eigvals.copy(), retained=n_r,
                     tag=snaps.tag, lifting=snaps.lifting)
    gram = modes_mat.T @ (modes_mat * vol[:, None])
    if np.abs(gram - np.eye(n_r)).max() > 1e-8:
        raise RuntimeError("POD modes lost orthonormality beyond 1e-8")
    return basis


def select_modes(eigvals: np.ndarray, eps: float) -> int:
    """Smallest mode count whose cumulative eigenvalue energy reaches eps."""
    lam = np.asarray(eigvals, dtype=float)
    if not 0.0 < eps <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    total = lam.sum()
    if total <= 0.0:
        raise ValueError("spectrum carries no energy")
    frac = np.cumsum(lam) / total
    return int(np.searchsorted(frac, eps - 1e-12) + 1)
