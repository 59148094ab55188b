import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nijenhuis.tensor import (
    CO,
    CONTRA,
    DenseTensor,
    EigenFrame,
    Signature,
    SingularMatrixError,
    TensorError,
    antisymmetrize3,
    contravariant,
    covariant,
    cyclic_sum3,
    frame_transform,
    generalized_eigenframe,
    inverse_frame_transform,
    lower_index,
    raise_index,
)

from oracles import brute_antisym3, brute_cyclic3

finite = st.floats(-10, 10, allow_nan=False)


def cubes(n):
    return arrays(np.float64, (n, n, n), elements=finite)


def test_component_count_and_flat_layout():
    t = covariant(np.arange(27.0).reshape(3, 3, 3))
    assert t.flat.size == 27
    # row-major: (i, j, k) -> 9 i + 3 j + k
    assert t.flat[9 * 1 + 3 * 2 + 0] == t[1, 2, 0]


def test_declared_symmetry_checked_exactly():
    a = np.array([[1.0, 2.0], [2.0, 3.0]])
    covariant(a, (("sym", 0, 1),))
    b = a.copy()
    b[0, 1] += 1e-16 * 0 + 1e-15
    with pytest.raises(TensorError):
        covariant(b, (("sym", 0, 1),))


def test_immutable():
    t = covariant(np.eye(2))
    with pytest.raises(ValueError):
        t.components[0, 0] = 5.0


def test_rejects_bad_shapes():
    with pytest.raises(TensorError):
        covariant(np.zeros((2, 3)))
    with pytest.raises(TensorError):
        covariant(np.zeros((9, 9)))
    with pytest.raises(TensorError):
        DenseTensor(np.zeros((2, 2)), (CO,))


def test_antisymmetrize3_symmetric_pair_gives_zero():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((4, 4, 4))
    a = a + a.transpose(1, 0, 2)
    assert np.all(antisymmetrize3(covariant(a)).components == 0.0)


def test_antisymmetrize3_dim2_is_zero():
    rng = np.random.default_rng(1)
    assert np.all(antisymmetrize3(covariant(rng.standard_normal((2, 2, 2)))).components == 0.0)


def test_antisymmetrize3_single_orbit():
    a = np.zeros((3, 3, 3))
    a[0, 1, 2] = 1.0
    out = antisymmetrize3(covariant(a)).components
    for p, sign in [((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1), ((1, 0, 2), -1), ((0, 2, 1), -1), ((2, 1, 0), -1)]:
        assert out[p] == sign / 6
    assert np.count_nonzero(out) == 6


def test_antisymmetrize3_errors():
    with pytest.raises(TensorError, match="out of range"):
        antisymmetrize3(covariant(np.zeros((3, 3, 3))), (0, 1, 3))
    with pytest.raises(TensorError, match="mixed variance"):
        antisymmetrize3(DenseTensor(np.zeros((3, 3, 3)), (CONTRA, CO, CO)))
    with pytest.raises(TensorError):
        antisymmetrize3(covariant(np.zeros((3, 3))))


def test_antisymmetrize3_other_slots():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((3, 3, 3, 3))
    out = antisymmetrize3(covariant(a), (1, 2, 3)).components
    for i in range(3):
        np.testing.assert_allclose(out[i], brute_antisym3(a[i]), atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(cubes(3))
def test_antisymmetrize3_matches_brute_force_and_is_idempotent(a):
    once = antisymmetrize3(covariant(a))
    np.testing.assert_allclose(once.components, brute_antisym3(a), atol=1e-12)
    twice = antisymmetrize3(once)
    np.testing.assert_allclose(twice.components, once.components, atol=1e-15, rtol=0)


@settings(max_examples=50, deadline=None)
@given(cubes(4))
def test_cyclic_sum_of_antisymmetric_is_three_times(a):
    # cyclic permutations are even, so a totally antisymmetric tensor is cyclic invariant
    anti = antisymmetrize3(covariant(a))
    np.testing.assert_allclose(cyclic_sum3(anti).components, 3 * anti.components, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(cubes(4))
def test_cyclic_sum_kills_pair_symmetric_part_without_total_symmetric_part(a):
    a = 0.5 * (a + a.transpose(1, 0, 2))
    perms = [(0, 1, 2), (1, 2, 0), (2, 0, 1), (1, 0, 2), (0, 2, 1), (2, 1, 0)]
    total = sum(a.transpose(p) for p in perms) / 6
    np.testing.assert_allclose(cyclic_sum3(covariant(a)).components, 3 * total, atol=1e-13)
    np.testing.assert_allclose(cyclic_sum3(covariant(a - total)).components, 0.0, atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(cubes(3))
def test_cyclic_sum_matches_brute_force(a):
    np.testing.assert_allclose(cyclic_sum3(covariant(a)).components, brute_cyclic3(a), atol=1e-13)


def test_cyclic_sum_examples():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((3, 3, 3))
    sym = sum(a.transpose(p) for p in [(0, 1, 2), (1, 2, 0), (2, 0, 1), (1, 0, 2), (0, 2, 1), (2, 1, 0)])
    np.testing.assert_allclose(cyclic_sum3(covariant(sym)).components, 3 * sym, rtol=1e-14)
    t = np.zeros((3, 3, 3))
    t[0, 0, 1] = 1.0
    out = cyclic_sum3(covariant(t)).components
    expected = np.zeros((3, 3, 3))
    expected[0, 0, 1] = expected[0, 1, 0] = expected[1, 0, 0] = 1.0
    assert np.array_equal(out, expected)


def test_cyclic_sum_of_pair_symmetric_is_exactly_symmetric():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((5, 5, 5))
    a = 0.5 * (a + a.transpose(1, 0, 2))
    out = cyclic_sum3(covariant(a, (("sym", 0, 1),)))
    for p in [(1, 0, 2), (0, 2, 1), (2, 1, 0), (1, 2, 0)]:
        assert np.array_equal(out.components, out.components.transpose(p))


def test_raise_index_examples():
    t = covariant([1.0, 1.0])
    assert np.array_equal(raise_index(t, 0, contravariant(np.eye(2))).components, [1.0, 1.0])
    up = raise_index(t, 0, contravariant(np.diag([1.0, -1.0])))
    assert up.variance == (CONTRA,)
    assert np.array_equal(up.components, [1.0, -1.0])
    # g = diag(4, 1): solve g v = (2, 3)
    g = np.diag([4.0, 1.0])
    expected = np.linalg.solve(g, [2.0, 3.0])
    up = raise_index(covariant([2.0, 3.0]), 0, contravariant(np.linalg.inv(g)))
    np.testing.assert_allclose(up.components, expected)
    np.testing.assert_allclose(up.components, [0.5, 3.0])
    back = lower_index(up, 0, covariant(g))
    np.testing.assert_allclose(back.components, [2.0, 3.0])


def test_raise_index_errors():
    with pytest.raises(SingularMatrixError):
        raise_index(covariant([1.0, 2.0]), 0, contravariant(np.array([[1.0, 1.0], [1.0, 1.0]])))
    with pytest.raises(TensorError):
        raise_index(contravariant([1.0, 2.0]), 0, contravariant(np.eye(2)))


def test_frame_transform_examples():
    t = covariant(np.diag([1.0, 2.0]))
    assert np.array_equal(frame_transform(t, np.eye(2)).components, t.components)
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    np.testing.assert_allclose(frame_transform(t, rot).components, np.diag([2.0, 1.0]), atol=1e-15)
    with pytest.raises(SingularMatrixError):
        frame_transform(t, np.zeros((2, 2)))


def test_frame_transform_round_trip_and_invariance():
    rng = np.random.default_rng(5)
    e = rng.standard_normal((4, 4))
    t = DenseTensor(rng.standard_normal((4, 4, 4)), (CONTRA, CO, CO))
    back = inverse_frame_transform(frame_transform(t, e), e)
    np.testing.assert_allclose(back.components, t.components, rtol=1e-12, atol=1e-12 * t.max_abs())
    # full contraction T^a_bc u_a v^b w^c is frame invariant
    u = covariant(rng.standard_normal(4))
    v = contravariant(rng.standard_normal(4))
    w = contravariant(rng.standard_normal(4))

    def scalar(t, u, v, w):
        return np.einsum("abc,a,b,c->", t.components, u.components, v.components, w.components)

    before = scalar(t, u, v, w)
    after = scalar(*(frame_transform(x, e) for x in (t, u, v, w)))
    assert abs(after - before) <= 1e-12 * max(1.0, abs(before)) * 10


def test_eigenframe_of_metric_itself():
    g = covariant(np.array([[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 3.0]]))
    f = generalized_eigenframe(g, g, Signature(3, 0))
    np.testing.assert_allclose(f.eigenvalues, 1.0, atol=1e-12)
    np.testing.assert_allclose(f.frame.T @ g.components @ f.frame, np.eye(3), atol=1e-12)


def test_eigenframe_diagonal():
    f = generalized_eigenframe(covariant(np.diag([3.0, 1.0, 2.0])), covariant(np.eye(3)))
    np.testing.assert_allclose(f.eigenvalues, [1.0, 2.0, 3.0], atol=1e-14)
    np.testing.assert_allclose(np.abs(f.frame), np.eye(3)[:, [1, 2, 0]], atol=1e-14)


def test_eigenframe_complex_eigenvalues_fail():
    c = covariant(np.array([[0.0, 1.0], [1.0, 0.0]]))
    g = covariant(np.diag([1.0, -1.0]))
    # characteristic polynomial of g^-1 c is lambda^2 + 1
    m = np.linalg.solve(g.components, c.components)
    assert np.isclose(np.trace(m), 0.0) and np.isclose(np.linalg.det(m), 1.0)
    assert generalized_eigenframe(c, g, Signature(1, 1)) is None


def test_eigenframe_defective_fails():
    # null vector (1, 1) is an eigenvector of g^-1 c with a Jordan block
    g = np.diag([1.0, -1.0])
    c = np.array([[1.0, -1.0], [-1.0, 1.0]]) + 2.0 * g
    assert generalized_eigenframe(covariant(c), covariant(g)) is None


def test_eigenframe_lorentzian_diagonalizable():
    rng = np.random.default_rng(6)
    g = np.diag([1.0, 1.0, -1.0])
    lam = np.array([0.5, 2.0, -1.0])
    boost = np.array([[np.cosh(0.3), 0, np.sinh(0.3)], [0, 1, 0], [np.sinh(0.3), 0, np.cosh(0.3)]])
    e = boost @ np.diag([1.0, 1.0, 1.0])
    c = np.linalg.inv(e).T @ (g @ np.diag(lam)) @ np.linalg.inv(e)
    f = generalized_eigenframe(covariant(0.5 * (c + c.T)), covariant(g))
    assert f is not None
    np.testing.assert_allclose(f.eigenvalues, np.sort(lam), atol=1e-10)
    gram = f.frame.T @ g @ f.frame
    np.testing.assert_allclose(gram, np.diag(f.normal_squares), atol=1e-10)
    m = np.linalg.solve(g, c)
    np.testing.assert_allclose(m @ f.frame, f.frame * f.eigenvalues, atol=1e-10)
    del rng


def test_repeated_eigenvalues_grouped():
    f = generalized_eigenframe(covariant(np.diag([2.0, 2.0 + 1e-13, 5.0])), covariant(np.eye(3)))
    assert f.eigenvalues[0] == f.eigenvalues[1]
    assert f.multiplicities() == (2, 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_riemannian_eigenframe_invariants(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    g = a @ a.T + n * np.eye(n)
    c = rng.standard_normal((n, n))
    c = c + c.T
    f = generalized_eigenframe(covariant(c), covariant(g), Signature(n, 0))
    assert f is not None
    assert np.all(np.diff(f.eigenvalues) >= 0)
    np.testing.assert_allclose(f.frame.T @ g @ f.frame, np.eye(n), atol=1e-10)
    m = np.linalg.solve(g, c)
    scale = 1 + np.max(np.abs(f.eigenvalues))
    np.testing.assert_allclose(m @ f.frame, f.frame * f.eigenvalues, atol=1e-10 * scale)
    # own eigenframe diagonalizes c
    d = frame_transform(covariant(c), f).components
    np.testing.assert_allclose(d, np.diag(f.eigenvalues * f.normal_squares), atol=1e-10 * scale)


def test_signature():
    assert Signature(3, 0).riemannian
    assert not Signature(1, 2).riemannian
    assert Signature.of(np.diag([1.0, -1.0, -1.0])) == Signature(1, 2)
    with pytest.raises(TensorError):
        Signature(-1, 2)


def test_eigenframe_class():
    f = EigenFrame(np.array([1.0, 1.0, 2.0]), np.eye(3), np.ones(3))
    assert f.multiplicities() == (2, 1)
