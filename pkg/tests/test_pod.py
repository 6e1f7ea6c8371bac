import numpy as np
import pytest

from qgrom.field import Field, inner_product, norm
from qgrom.mesh import build_mesh
from qgrom.pod import (
    SnapshotSet,
    build_basis,
    compute_lifting,
    correlation_matrix,
    eigendecompose,
    select_modes,
)

def make_snaps(mesh, vals_list, tag="q"):
    times = np.arange(1.0, len(vals_list) + 1)
    return SnapshotSet(mesh=mesh, times=times,
                       fields=[Field(mesh, v) for v in vals_list], tag=tag)


def random_snaps(mesh, rng, n_t, tag="q"):
    return make_snaps(mesh, [rng.standard_normal(mesh.n_cells) for _ in range(n_t)],
                      tag=tag)


# --- lifting -----------------------------------------------------------------

def test_lifting_constant_sequence(gyre_mesh_small):
    mesh = gyre_mesh_small
    y = mesh.cell_centroids[:, 1]
    snaps = make_snaps(mesh, [y.copy() for _ in range(5)])
    lift, homog = compute_lifting(snaps)
    np.testing.assert_allclose(lift.values, y, atol=1e-15)
    for f in homog.fields:
        np.testing.assert_allclose(f.values, 0.0, atol=1e-15)
    assert homog.lifting is lift


def test_lifting_two_snapshots(rng, gyre_mesh_small):
    a = rng.standard_normal(gyre_mesh_small.n_cells)
    b = rng.standard_normal(gyre_mesh_small.n_cells)
    lift, homog = compute_lifting(make_snaps(gyre_mesh_small, [a, b]))
    np.testing.assert_allclose(lift.values, 0.5 * (a + b), atol=1e-14)
    np.testing.assert_allclose(homog.fields[0].values, 0.5 * (a - b), atol=1e-14)
    np.testing.assert_allclose(homog.fields[1].values, 0.5 * (b - a), atol=1e-14)


def test_lifting_centers_the_set(rng, gyre_mesh_small):
    snaps = random_snaps(gyre_mesh_small, rng, 7)
    _, homog = compute_lifting(snaps)
    mean = np.mean([f.values for f in homog.fields], axis=0)
    assert np.abs(mean).max() <= 1e-13


def test_lifting_empty_set_rejected(gyre_mesh_small):
    snaps = SnapshotSet(mesh=gyre_mesh_small, times=np.array([]), fields=[], tag="q")
    with pytest.raises(ValueError):
        compute_lifting(snaps)


# --- correlation matrix --------------------------------------------------------

def test_correlation_single_snapshot(gyre_mesh_small):
    v = np.full(gyre_mesh_small.n_cells, 1.0)
    snaps = make_snaps(gyre_mesh_small, [v])
    c = correlation_matrix(snaps)
    area = gyre_mesh_small.cell_volumes.sum()
    np.testing.assert_allclose(c, [[area]], rtol=1e-14)


def test_correlation_orthogonal_equal_norm_snapshots():
    mesh = build_mesh(2, 2, (0, 1, 0, 1))
    a = np.array([2.0, 0.0, 0.0, 0.0])
    b = np.array([0.0, 2.0, 0.0, 0.0])
    c = correlation_matrix(make_snaps(mesh, [a, b]))
    np.testing.assert_allclose(c, np.eye(2), atol=1e-14)


def test_correlation_matches_gram_oracle(rng):
    mesh = build_mesh(4, 4, (0, 1, -1, 1))
    snaps = random_snaps(mesh, rng, 5)
    c = correlation_matrix(snaps)
    oracle = np.empty((5, 5))
    for i in range(5):
        for j in range(5):
            oracle[i, j] = inner_product(snaps.fields[i], snaps.fields[j])
    np.testing.assert_allclose(c, oracle, atol=1e-13)


# --- eigendecomposition --------------------------------------------------------

def test_eigendecompose_diagonal():
    lam, q = eigendecompose(np.diag([2.0, 1.0]))
    np.testing.assert_allclose(lam, [2.0, 1.0])
    np.testing.assert_allclose(q, np.eye(2))


def test_eigendecompose_textbook_2x2():
    lam, q = eigendecompose(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(lam, [1.0, -1.0], atol=1e-14)
    s = 1 / np.sqrt(2)
    np.testing.assert_allclose(np.abs(q), [[s, s], [s, s]], atol=1e-12)
    np.testing.assert_allclose(q[:, 0], [s, s], atol=1e-12)


def test_eigendecompose_reconstruction(rng):
    a = rng.standard_normal((6, 6))
    c = a @ a.T
    lam, q = eigendecompose(c)
    np.testing.assert_allclose(q @ np.diag(lam) @ q.T, c, atol=1e-10)
    np.testing.assert_allclose(q.T @ q, np.eye(6), atol=1e-12)
    assert np.all(np.diff(lam) <= 1e-12)


def test_eigendecompose_matches_lapack(rng):
    a = rng.standard_normal((40, 40))
    c = a @ a.T
    lam, _ = eigendecompose(c)
    np.testing.assert_allclose(lam, np.sort(np.linalg.eigvalsh(c))[::-1],
                               rtol=1e-10, atol=1e-10)


def test_eigendecompose_deterministic_sign(rng):
    a = rng.standard_normal((8, 8))
    c = a @ a.T
    _, q1 = eigendecompose(c)
    _, q2 = eigendecompose(c.copy())
    np.testing.assert_array_equal(q1, q2)
    for k in range(8):
        assert q1[np.argmax(np.abs(q1[:, k])), k] > 0


def test_eigendecompose_rejects_asymmetric():
    with pytest.raises(ValueError):
        eigendecompose(np.array([[1.0, 2.0], [0.0, 1.0]]))


# --- basis construction ---------------------------------------------------------

def test_single_snapshot_basis(rng, gyre_mesh_small):
    snaps = random_snaps(gyre_mesh_small, rng, 1)
    lam, q = eigendecompose(correlation_matrix(snaps))
    basis = build_basis(snaps, q, lam, 1)
    direction = snaps.fields[0].values / norm(snaps.fields[0])
    np.testing.assert_allclose(np.abs(basis.modes[0].values), np.abs(direction),
                               atol=1e-12)
    assert norm(basis.modes[0]) == pytest.approx(1.0, rel=1e-12)


def test_orthogonal_snapshots_basis():
    mesh = build_mesh(2, 2, (0, 1, 0, 1))
    a = np.array([3.0, 0.0, 0.0, 0.0])
    b = np.array([0.0, 0.0, 5.0, 0.0])
    snaps = make_snaps(mesh, [a, b])
    lam, q = eigendecompose(correlation_matrix(snaps))
    basis = build_basis(snaps, q, lam, 2)
    got = sorted(np.flatnonzero(np.abs(m.values) > 1e-12)[0] for m in basis.modes)
    assert got == [0, 2]
    for m in basis.modes:
        assert norm(m) == pytest.approx(1.0, rel=1e-12)


def test_full_rank_reconstruction(rng):
    mesh = build_mesh(4, 4, (0, 1, -1, 1))
    snaps = random_snaps(mesh, rng, 6)
    lam, q = eigendecompose(correlation_matrix(snaps))
    basis = build_basis(snaps, q, lam, 6)
    modes = basis.mode_matrix()
    vol = mesh.cell_volumes
    for f in snaps.fields:
        coeff = modes.T @ (f.values * vol)
        rec = modes @ coeff
        assert np.abs(rec - f.values).max() <= 1e-8 * max(1.0, np.abs(f.values).max())


def test_orthonormality_invariant(rng, gyre_mesh_small):
    snaps = random_snaps(gyre_mesh_small, rng, 10)
    lam, q = eigendecompose(correlation_matrix(snaps))
    basis = build_basis(snaps, q, lam, 10)
    for i in range(10):
        for j in range(10):
            ip = inner_product(basis.modes[i], basis.modes[j])
            assert abs(ip - (1.0 if i == j else 0.0)) <= 1e-8


def test_rank_deficiency_error(rng, gyre_mesh_small):
    v = rng.standard_normal(gyre_mesh_small.n_cells)
    snaps = make_snaps(gyre_mesh_small, [v, 2.0 * v, -v])  # rank one
    lam, q = eigendecompose(correlation_matrix(snaps))
    with pytest.raises(ValueError):
        build_basis(snaps, q, lam, 2)


# --- mode selection --------------------------------------------------------------

def test_select_modes_exact_boundary():
    assert select_modes(np.array([9.0, 1.0]), 0.9) == 1


def test_select_modes_uniform_spectrum():
    assert select_modes(np.array([1.0, 1.0, 1.0, 1.0]), 0.6) == 3


def test_select_modes_full_spectrum():
    assert select_modes(np.array([5.0, 3.0, 2.0]), 1.0) == 3


def test_select_modes_rejects_zero_spectrum():
    with pytest.raises(ValueError):
        select_modes(np.zeros(4), 0.5)
    with pytest.raises(ValueError):
        select_modes(np.array([1.0]), 0.0)


# --- POD identities (brute-force oracles) ------------------------------------------

def test_trace_identity(rng, gyre_mesh_small):
    snaps = random_snaps(gyre_mesh_small, rng, 12)
    lam, _ = eigendecompose(correlation_matrix(snaps))
    total = sum(norm(f) ** 2 for f in snaps.fields)
    assert lam.sum() == pytest.approx(total, rel=1e-10)


def test_pod_optimality_identity(rng):
    mesh = build_mesh(6, 6, (0, 1, -1, 1))
    snaps = random_snaps(mesh, rng, 12)
    lam, q = eigendecompose(correlation_matrix(snaps))
    basis = build_basis(snaps, q, lam, 12)
    modes = basis.mode_matrix()
    vol = mesh.cell_volumes
    for n in (1, 3, 7, 11):
        tail = 0.0
        for f in snaps.fields:
            coeff = modes[:, :n].T @ (f.values * vol)
            res = f.values - modes[:, :n] @ coeff
            tail += np.dot(res * vol, res)
        expected = lam[n:].sum()
        assert tail == pytest.approx(expected, rel=1e-10, abs=1e-12)
