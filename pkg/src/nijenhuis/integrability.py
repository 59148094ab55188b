"""Nijenhuis torsion, the three integrability conditions and the Haantjes tensor.

All quantities are evaluated pointwise from K_ab, K_ab;c and the metric.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ChartPoint, MetricField, SymmetricTensorField, covariant_derivative_sym2
from .tensor import (
    CO,
    CONTRA,
    DenseTensor,
    EigenFrame,
    Signature,
    antisymmetrize3,
    cyclic_sum_array,
    frame_transform,
    generalized_eigenframe,
)

DEFAULT_TOL = 1e-8
FD_TOL = 1e-6
TINY = 1e-300


class EigenframeUnavailable(ValueError):
    """g^{-1}K has no real g-orthonormal eigenframe at the point."""


@dataclass(frozen=True)
class PointData:
    """Everything the pointwise checks need at one point."""

    g: np.ndarray
    g_inv: np.ndarray
    k: np.ndarray  # K_ab
    k_mixed: np.ndarray  # K^a_b
    dk: np.ndarray  # K_ab;c

    @classmethod
    def at(cls, k: SymmetricTensorField, m: MetricField, p: ChartPoint) -> "PointData":
        dk = covariant_derivative_sym2(k, m, p).components
        g = m.matrix(p.x)
        g_inv = np.linalg.inv(g)
        kv = k.value(p.x)
        return cls(g, g_inv, kv, g_inv @ kv, np.asarray(dk))


def torsion_from_data(d: PointData) -> np.ndarray:
    # K^a_b;c, using nabla g = 0
    dm = np.einsum("am,mbc->abc", d.g_inv, d.dk)
    x = np.einsum("ad,dbc->abc", d.k_mixed, dm) + np.einsum("db,acd->abc", d.k_mixed, dm)
    return x - np.transpose(x, (0, 2, 1))


def torsion_at(k: SymmetricTensorField, m: MetricField, p: ChartPoint) -> DenseTensor:
    """N^a_bc = K^a_d (K^d_b;c - K^d_c;b) + K^d_b K^a_c;d - K^d_c K^a_b;d.

    Equal to N(X, Y) = K^2[X,Y] - K[KX,Y] - K[X,KY] + [KX,KY] on coordinate fields.
    """
    return DenseTensor(torsion_from_data(PointData.at(k, m, p)), (CONTRA, CO, CO), (("antisym", 1, 2),))


@dataclass(frozen=True)
class ConditionResiduals:
    c1: DenseTensor
    c2: DenseTensor
    c3: DenseTensor
    norms: tuple[float, float, float]
    tolerance: float

    @property
    def verdicts(self) -> tuple[bool, bool, bool]:
        return tuple(bool(n <= self.tolerance) for n in self.norms)

    @property
    def integrable(self) -> bool:
        # the third condition is implied by the first two for Killing tensors
        return self.verdicts[0] and self.verdicts[1]


def _conditions_from_data(d: PointData, tol: float) -> ConditionResiduals:
    n_up = torsion_from_data(d)
    k2 = d.k @ d.k_mixed  # K_ae K^e_d
    tensors = [
        antisymmetrize3(DenseTensor(np.einsum("ad,dbc->abc", w, n_up), (CO, CO, CO)))
        for w in (d.g, d.k, k2)
    ]
    k_norm = 1.0 + float(np.max(np.abs(d.k)))
    dk_norm = max(float(np.max(np.abs(d.dk))), TINY)
    norms = tuple(t.max_abs() / (k_norm ** (i + 1) * dk_norm) for i, t in enumerate(tensors))
    return ConditionResiduals(*tensors, norms=norms, tolerance=tol)


def condition_residuals(k: SymmetricTensorField, m: MetricField, p: ChartPoint, tol: float = DEFAULT_TOL) -> ConditionResiduals:
    """Antisymmetrized contractions of N with g, K and K^2, with scale-free norms.

    Norm of condition i (i = 1, 2, 3) is max|c_i| / ((1 + max|K|)^i * max|nabla K|).
    """
    return _conditions_from_data(PointData.at(k, m, p), tol)


def haantjes_from_data(d: PointData) -> np.ndarray:
    n = torsion_from_data(d)
    km = d.k_mixed
    h = (
        np.einsum("am,mn,nbc->abc", km, km, n)
        - np.einsum("am,mnc,nb->abc", km, n, km)
        - np.einsum("am,mbn,nc->abc", km, n, km)
        + np.einsum("amn,mb,nc->abc", n, km, km)
    )
    return 0.5 * (h - np.transpose(h, (0, 2, 1)))


def haantjes_at(k: SymmetricTensorField, m: MetricField, p: ChartPoint) -> DenseTensor:
    """H(X,Y) = K^2 N(X,Y) - K N(KX,Y) - K N(X,KY) + N(KX,KY)."""
    return DenseTensor(haantjes_from_data(PointData.at(k, m, p)), (CONTRA, CO, CO), (("antisym", 1, 2),))


@dataclass(frozen=True)
class EigenframeResiduals:
    k0: float
    k1: float
    k2: float
    k3: float
    k1p: float
    k2p: float
    k3p: float
    raw: dict

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in ("k0", "k1", "k2", "k3", "k1p", "k2p", "k3p")}


def eigenframe_coefficients(lam) -> dict[str, tuple[int, np.ndarray]]:
    """Coefficient arrays c[a, b, g] multiplying S_abg before the cyclic sum, with their degree in lambda."""
    la = np.asarray(lam, dtype=float)
    a = la[:, None, None]
    b = la[None, :, None]
    g = la[None, None, :]
    n = len(la)
    diff = a - b
    return {
        "k0": (0, np.ones((n, n, n))),
        "k1": (1, np.broadcast_to(diff, (n, n, n))),
        "k2": (2, diff * (a + b - g)),
        "k3": (3, diff * ((a + b) ** 2 - a * b - b * g - g * a)),
        "k1p": (1, np.broadcast_to(diff, (n, n, n))),
        "k2p": (2, np.broadcast_to(diff * (a + b), (n, n, n))),
        "k3p": (3, np.broadcast_to(diff * (a + b) ** 2, (n, n, n))),
    }


def eigenframe_residuals(lam, s) -> EigenframeResiduals:
    """Cyclic-sum residuals of the eigenframe systems for S_abg = K_ab;g in an eigenframe."""
    la = np.asarray(lam, dtype=float)
    sa = np.asarray(s.components if isinstance(s, DenseTensor) else s, dtype=float)
    n = len(la)
    if sa.shape != (n, n, n):
        raise ValueError(f"s has shape {sa.shape}, expected {(n, n, n)}")
    lam_scale = 1.0 + float(np.max(np.abs(la)))
    s_scale = max(float(np.max(np.abs(sa))), TINY)
    idx = np.indices((n, n, n))
    # triples with a repeated index vanish identically except in the Killing sum
    distinct = (idx[0] != idx[1]) & (idx[1] != idx[2]) & (idx[0] != idx[2])
    rel, raw = {}, {}
    for name, (degree, coef) in eigenframe_coefficients(la).items():
        cyc = cyclic_sum_array(coef * sa)
        if name != "k0":
            cyc = np.where(distinct, cyc, 0.0)
        r = float(np.max(np.abs(cyc)))
        raw[name] = r
        rel[name] = r / (lam_scale**degree * s_scale)
    return EigenframeResiduals(raw=raw, **rel)


def eigenframe_at(k: SymmetricTensorField, m: MetricField, p: ChartPoint) -> EigenFrame | None:
    g = m.matrix(p.x)
    return generalized_eigenframe(DenseTensor(k.value(p.x), (CO, CO)), DenseTensor(g, (CO, CO)), Signature.of(g))


@dataclass(frozen=True)
class FrameComparison:
    covariant: tuple[bool, bool, bool]
    eigenframe: tuple[bool, bool, bool]
    residuals: EigenframeResiduals
    conditions: ConditionResiduals

    @property
    def agree(self) -> bool:
        return self.covariant == self.eigenframe


def compare_with_eigenframe(k, m, p, tol: float = DEFAULT_TOL) -> FrameComparison:
    d = PointData.at(k, m, p)
    frame = generalized_eigenframe(DenseTensor(d.k, (CO, CO)), DenseTensor(d.g, (CO, CO)), Signature.of(d.g))
    if frame is None:
        raise EigenframeUnavailable(f"no real orthonormal eigenframe at {p.coords}")
    s = frame_transform(DenseTensor(d.dk, (CO, CO, CO)), frame)
    ef = eigenframe_residuals(frame.eigenvalues, s)
    cov = _conditions_from_data(d, tol)
    ef_verdicts = tuple(bool(r <= tol) for r in (ef.k1, ef.k2, ef.k3))
    return FrameComparison(cov.verdicts, ef_verdicts, ef, cov)


def covariant_vs_eigenframe_check(k, m, p, tol: float = DEFAULT_TOL) -> bool:
    """True when the covariant and eigenframe verdicts agree for all three conditions."""
    return compare_with_eigenframe(k, m, p, tol).agree
