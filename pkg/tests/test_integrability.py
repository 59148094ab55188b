import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nijenhuis.geometry import Euclidean, Hyperbolic, MetricTensorField, Minkowski, Sphere
from nijenhuis.integrability import (
    EigenframeUnavailable,
    PointData,
    compare_with_eigenframe,
    condition_residuals,
    covariant_vs_eigenframe_check,
    eigenframe_at,
    eigenframe_residuals,
    haantjes_at,
    torsion_at,
    torsion_from_data,
)
from nijenhuis.killing import KillingTensorField, generator_by_name, parse_killing_text, random_combination
from nijenhuis.tensor import frame_transform
from oracles import brute_antisym3, torsion_bracket

BUILTINS = [Euclidean(3), Minkowski(1, 2), Sphere(3), Hyperbolic(3), Euclidean(4), Sphere(2)]


def square(m, name):
    v = generator_by_name(m, name)
    return KillingTensorField(m, [(1.0, v, v)])


@pytest.mark.parametrize("m", BUILTINS, ids=lambda m: m.describe())
def test_torsion_of_metric_multiple_vanishes(m):
    p = m.random_point(np.random.default_rng(0))
    assert torsion_at(MetricTensorField(m, 2.5), m, p).max_abs() <= 1e-12


def test_torsion_of_constant_field_vanishes():
    m = Euclidean(3)
    k = parse_killing_text("dim = 3\nk[1][1] = 2\nk[1][2] = 0.5\nk[2][3] = -1\nk[3][3] = 4\n", m)
    assert torsion_at(k, m, m.point([0.3, 0.1, -0.8])).max_abs() == 0.0


@pytest.mark.parametrize("m", BUILTINS, ids=lambda m: m.describe())
def test_torsion_matches_bracket_definition(m):
    rng = np.random.default_rng(1)
    for _ in range(5):
        k = random_combination(m, rng)
        p = m.random_point(rng)
        ref = torsion_bracket(k.value, m.matrix, p.x)
        got = torsion_at(k, m, p).components
        assert np.abs(got - ref).max() <= 1e-8 * (1 + np.abs(ref).max())


def test_torsion_is_exactly_antisymmetric():
    m = Hyperbolic(3)
    rng = np.random.default_rng(2)
    n = torsion_at(random_combination(m, rng), m, m.random_point(rng)).components
    assert np.array_equal(n, -np.transpose(n, (0, 2, 1)))


def test_torsion_is_a_tensor():
    # N transforms with one contravariant and two covariant slots under a constant change of basis
    m = Sphere(3)
    rng = np.random.default_rng(3)
    d = PointData.at(random_combination(m, rng), m, m.random_point(rng))
    a = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    ai = np.linalg.inv(a)
    g2 = a.T @ d.g @ a
    k2 = a.T @ d.k @ a
    dk2 = np.einsum("abc,ai,bj,ck->ijk", d.dk, a, a, a)
    d2 = PointData(g2, np.linalg.inv(g2), k2, np.linalg.solve(g2, k2), dk2)
    expected = np.einsum("ia,abc,bj,ck->ijk", ai, torsion_from_data(d), a, a)
    np.testing.assert_allclose(torsion_from_data(d2), expected, atol=1e-10 * (1 + np.abs(expected).max()))


def test_conditions_are_exactly_antisymmetric():
    m = Minkowski(1, 2)
    rng = np.random.default_rng(4)
    res = condition_residuals(random_combination(m, rng), m, m.random_point(rng))
    for c in (res.c1, res.c2, res.c3):
        t = c.components
        assert np.array_equal(t, -np.transpose(t, (1, 0, 2)))
        assert np.array_equal(t, -np.transpose(t, (0, 2, 1)))
        np.testing.assert_allclose(t, brute_antisym3(t), atol=1e-15 * (1 + np.abs(t).max()))


def test_dim2_conditions_are_exactly_zero():
    for m in (Euclidean(2), Sphere(2), Minkowski(1, 1)):
        rng = np.random.default_rng(5)
        res = condition_residuals(random_combination(m, rng), m, m.random_point(rng))
        assert res.norms == (0.0, 0.0, 0.0)
        assert res.verdicts == (True, True, True)


def test_metric_is_integrable():
    m = Sphere(3)
    res = condition_residuals(MetricTensorField(m), m, m.point([0.1, 0.2, 0.3]))
    assert max(res.norms) <= 1e-12


def test_rotation_square_is_integrable():
    m = Euclidean(3)
    res = condition_residuals(square(m, "R12"), m, m.point([1.0, 2.0, 0.5]))
    assert res.verdicts == (True, True, True)
    assert res.integrable


@pytest.mark.parametrize("m", [Euclidean(3), Sphere(3), Minkowski(1, 2), Euclidean(4)], ids=lambda m: m.describe())
def test_haantjes_eigenframe_identity(m):
    rng = np.random.default_rng(6)
    checked = 0
    for _ in range(20):
        k = random_combination(m, rng)
        p = m.random_point(rng)
        frame = eigenframe_at(k, m, p)
        if frame is None or max(frame.multiplicities()) > 1:
            continue
        lam = frame.eigenvalues
        n = frame_transform(torsion_at(k, m, p), frame).components
        h = frame_transform(haantjes_at(k, m, p), frame).components
        expected = (lam[:, None, None] - lam[None, :, None]) * (lam[:, None, None] - lam[None, None, :]) * n
        scale = (1 + np.abs(lam).max()) ** 2 * (1 + np.abs(n).max())
        assert np.abs(h - expected).max() <= 1e-10 * scale
        checked += 1
    assert checked >= 5


def test_eigenframe_residuals_all_equal_eigenvalues():
    s = np.random.default_rng(7).standard_normal((3, 3, 3))
    r = eigenframe_residuals([2.0, 2.0, 2.0], s)
    assert (r.k1, r.k2, r.k3, r.k1p, r.k2p, r.k3p) == (0.0,) * 6


def test_eigenframe_residuals_example():
    s = np.zeros((3, 3, 3))
    s[0, 1, 2], s[1, 2, 0], s[2, 0, 1] = 1.0, 1.0, -2.0
    r = eigenframe_residuals([1.0, 2.0, 3.0], s)
    assert r.raw["k0"] == 0.0
    assert r.raw["k1"] == 6.0
    assert r.k1 == 6.0 / (4.0 * 2.0)


def test_totally_symmetric_s_has_no_k1():
    rng = np.random.default_rng(8)
    a = rng.standard_normal((4, 4, 4))
    t = sum(np.transpose(a, p) for p in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)])
    assert eigenframe_residuals(rng.standard_normal(4), t).k1 <= 1e-15


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_k1_ignores_totally_symmetric_part(seed):
    rng = np.random.default_rng(seed)
    lam = rng.standard_normal(4)
    s = rng.standard_normal((4, 4, 4))
    a = rng.standard_normal((4, 4, 4))
    t = sum(np.transpose(a, p) for p in [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)])
    r1 = eigenframe_residuals(lam, s).raw["k1"]
    r2 = eigenframe_residuals(lam, s + t).raw["k1"]
    assert abs(r1 - r2) <= 1e-12 * (1 + np.abs(lam).max()) * (np.abs(s).max() + np.abs(t).max())


def test_eigenframe_residuals_shape_check():
    with pytest.raises(ValueError):
        eigenframe_residuals([1.0, 2.0], np.zeros((3, 3, 3)))


def test_compare_with_eigenframe_examples():
    m = Euclidean(3)
    assert covariant_vs_eigenframe_check(square(m, "R12"), m, m.point([1.0, 2.0, 0.5]))
    # sum of squares of two rotations about different axes
    r12, r23, t1 = (generator_by_name(m, n) for n in ("R12", "R23", "T1"))
    k = KillingTensorField(m, [(1.0, r12, r12), (2.0, r23, r23), (0.7, t1, r23)])
    cmp = compare_with_eigenframe(k, m, m.point([0.4, -1.1, 0.9]))
    assert cmp.agree
    assert cmp.covariant[0] == (cmp.conditions.norms[0] <= 1e-8)


def test_no_eigenframe_on_minkowski():
    m = Minkowski(1, 2)
    k = parse_killing_text("dim = 3\nk[1][2] = 1\n", m)
    p = m.point([0.0, 0.0, 0.0])
    assert eigenframe_at(k, m, p) is None
    with pytest.raises(EigenframeUnavailable):
        compare_with_eigenframe(k, m, p)


def test_lorentzian_agreement():
    m = Minkowski(1, 2)
    rng = np.random.default_rng(9)
    seen = 0
    for _ in range(30):
        k = random_combination(m, rng)
        p = m.random_point(rng)
        try:
            cmp = compare_with_eigenframe(k, m, p, 1e-7)
        except EigenframeUnavailable:
            continue
        assert cmp.agree
        seen += 1
    assert seen > 0
