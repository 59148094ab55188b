"""Dense tensors at a single point.

Components live in a numpy array of shape ``(dim,) * order`` (row-major, so
the flat index of ``(i0, ..., ik)`` is ``sum(i_j * dim**(order-1-j))``).
Every slot carries a variance flag, ``CO`` or ``CONTRA``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

CO = "co"
CONTRA = "contra"

# singular values below RANK_RTOL * sigma_max count as zero
RANK_RTOL = 1e-12
# eigenvalues closer than this (times 1 + max|lambda|) are one group
EIGEN_GROUP_RTOL = 1e-9


class TensorError(ValueError):
    pass


class SingularMatrixError(TensorError):
    pass


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Immutable multi-index array with variance flags.

    ``symmetries`` is a tuple of ``("sym" | "antisym", i, j)`` annotations,
    each checked componentwise and exactly on construction.
    """

    components: np.ndarray
    variance: tuple[str, ...]
    symmetries: tuple[tuple[str, int, int], ...] = ()

    def __post_init__(self):
        comps = np.array(self.components, dtype=float)
        order = comps.ndim
        if order > 4:
            raise TensorError(f"order {order} exceeds 4")
        if order > 0:
            dim = comps.shape[0]
            if comps.shape != (dim,) * order:
                raise TensorError(f"components must be hypercubic, got shape {comps.shape}")
            if not 2 <= dim <= 8:
                raise TensorError(f"dim must be in 2..8, got {dim}")
        variance = tuple(self.variance)
        if len(variance) != order:
            raise TensorError(f"{len(variance)} variance flags for an order-{order} tensor")
        for v in variance:
            if v not in (CO, CONTRA):
                raise TensorError(f"unknown variance flag {v!r}")
        symmetries = tuple((kind, int(i), int(j)) for kind, i, j in self.symmetries)
        for kind, i, j in symmetries:
            if kind not in ("sym", "antisym"):
                raise TensorError(f"unknown symmetry kind {kind!r}")
            if not (0 <= i < order and 0 <= j < order and i != j):
                raise TensorError(f"bad symmetry slots ({i}, {j})")
            swapped = np.swapaxes(comps, i, j)
            ok = np.array_equal(comps, swapped) if kind == "sym" else np.array_equal(comps, -swapped)
            if not ok:
                raise TensorError(f"components are not {kind}metric in slots ({i}, {j})")
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "variance", variance)
        object.__setattr__(self, "symmetries", symmetries)

    @property
    def order(self) -> int:
        return self.components.ndim

    @property
    def dim(self) -> int:
        return self.components.shape[0] if self.order else 0

    @property
    def flat(self) -> np.ndarray:
        return self.components.reshape(-1)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.components))) if self.components.size else 0.0

    def __getitem__(self, idx):
        return self.components[idx]

    def __repr__(self):
        return f"DenseTensor(dim={self.dim}, variance={self.variance}, symmetries={self.symmetries})"


def covariant(components, symmetries=()) -> DenseTensor:
    comps = np.asarray(components, dtype=float)
    return DenseTensor(comps, (CO,) * comps.ndim, symmetries)


def contravariant(components, symmetries=()) -> DenseTensor:
    comps = np.asarray(components, dtype=float)
    return DenseTensor(comps, (CONTRA,) * comps.ndim, symmetries)


@dataclass(frozen=True)
class Signature:
    plus: int
    minus: int = 0

    def __post_init__(self):
        if self.plus < 0 or self.minus < 0:
            raise TensorError(f"signature entries must be nonnegative, got ({self.plus}, {self.minus})")

    @property
    def dim(self) -> int:
        return self.plus + self.minus

    @property
    def riemannian(self) -> bool:
        return self.minus == 0

    @property
    def definite(self) -> bool:
        return self.minus == 0 or self.plus == 0

    @classmethod
    def of(cls, g: np.ndarray) -> "Signature":
        w = np.linalg.eigvalsh(np.asarray(g, dtype=float))
        return cls(int(np.sum(w > 0)), int(np.sum(w < 0)))

    def __str__(self):
        return f"{self.plus},{self.minus}"


@dataclass(frozen=True, eq=False)
class EigenFrame:
    """Eigenvalues (ascending) and a g-orthonormal frame; columns of ``frame`` are the e_a."""

    eigenvalues: np.ndarray
    frame: np.ndarray
    normal_squares: np.ndarray

    @property
    def dim(self) -> int:
        return self.frame.shape[0]

    def multiplicities(self) -> tuple[int, ...]:
        return tuple(len(list(g)) for _, g in itertools.groupby(self.eigenvalues.tolist()))


def _check_slots(t: DenseTensor, slots: Sequence[int]) -> tuple[int, int, int]:
    if len(slots) != 3 or len(set(slots)) != 3:
        raise TensorError(f"need three distinct slots, got {tuple(slots)}")
    for s in slots:
        if not 0 <= s < t.order:
            raise TensorError(f"slot {s} out of range for an order-{t.order} tensor")
    if len({t.variance[s] for s in slots}) != 1:
        raise TensorError("mixed variance across slots")
    return tuple(int(s) for s in slots)


def _permute_slots(a: np.ndarray, slots, perm) -> np.ndarray:
    axes = list(range(a.ndim))
    for k, s in enumerate(slots):
        axes[s] = slots[perm[k]]
    return np.transpose(a, axes)


_S3 = [((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1), ((1, 0, 2), -1), ((0, 2, 1), -1), ((2, 1, 0), -1)]


def antisymmetrize3(t: DenseTensor, slots=(0, 1, 2)) -> DenseTensor:
    """(1/6) sum over S3 of sign(s) t o s on three slots.

    The result is filled from its strictly increasing index triples so that
    total antisymmetry holds bit-exactly.
    """
    slots = _check_slots(t, slots)
    a = t.components
    # even and odd terms are summed separately in sorted order, so that a tensor
    # symmetric in any slot pair cancels to exactly zero
    even = np.sort(np.stack([_permute_slots(a, slots, p) for p, sign in _S3 if sign > 0]), axis=0)
    odd = np.sort(np.stack([_permute_slots(a, slots, p) for p, sign in _S3 if sign < 0]), axis=0)
    acc = (((even[0] + even[1]) + even[2]) - ((odd[0] + odd[1]) + odd[2])) / 6.0
    n = t.dim
    idx = np.indices((n,) * t.order)
    mask = (idx[slots[0]] < idx[slots[1]]) & (idx[slots[1]] < idx[slots[2]])
    canon = np.where(mask, acc, 0.0)
    out = sum(sign * _permute_slots(canon, slots, perm) for perm, sign in _S3)
    sym = [("antisym", slots[0], slots[1]), ("antisym", slots[1], slots[2]), ("antisym", slots[0], slots[2])]
    return DenseTensor(out, t.variance, sym)


def cyclic_sum_array(a: np.ndarray, slots=(0, 1, 2)) -> np.ndarray:
    terms = np.stack([_permute_slots(a, slots, p) for p in ((0, 1, 2), (1, 2, 0), (2, 0, 1))])
    # summing the sorted terms makes the result independent of term order
    terms = np.sort(terms, axis=0)
    return (terms[0] + terms[1]) + terms[2]


def cyclic_sum3(t: DenseTensor, slots=(0, 1, 2)) -> DenseTensor:
    """t + t(abc -> bca) + t(abc -> cab) on three slots."""
    slots = _check_slots(t, slots)
    out = cyclic_sum_array(t.components, slots)
    sym = ()
    if any(k == "sym" and {i, j} <= set(slots) for k, i, j in t.symmetries):
        # a pair symmetry plus cyclic invariance gives total symmetry
        sym = (("sym", slots[0], slots[1]), ("sym", slots[1], slots[2]))
    try:
        return DenseTensor(out, t.variance, sym)
    except TensorError:
        return DenseTensor(out, t.variance)


def check_invertible(m: np.ndarray, what: str = "matrix") -> None:
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0 or s[-1] < RANK_RTOL * s[0] or not np.all(np.isfinite(s)):
        raise SingularMatrixError(f"{what} is singular (sigma_min/sigma_max below {RANK_RTOL:g})")


def _contract_slot(t: DenseTensor, slot: int, m: np.ndarray, new_flag: str) -> DenseTensor:
    out = np.moveaxis(np.tensordot(m, t.components, axes=([1], [slot])), 0, slot)
    variance = list(t.variance)
    variance[slot] = new_flag
    return DenseTensor(out, tuple(variance))


def raise_index(t: DenseTensor, slot: int, g_inv: DenseTensor) -> DenseTensor:
    if t.variance[slot] != CO:
        raise TensorError(f"slot {slot} is not covariant")
    check_invertible(g_inv.components, "inverse metric")
    return _contract_slot(t, slot, g_inv.components, CONTRA)


def lower_index(t: DenseTensor, slot: int, g: DenseTensor) -> DenseTensor:
    if t.variance[slot] != CONTRA:
        raise TensorError(f"slot {slot} is not contravariant")
    check_invertible(g.components, "metric")
    return _contract_slot(t, slot, g.components, CO)


def _frame_matrix(frame) -> np.ndarray:
    return np.asarray(frame.frame if isinstance(frame, EigenFrame) else frame, dtype=float)


def frame_transform(t: DenseTensor, frame) -> DenseTensor:
    """Express t in the basis given by the columns of the frame matrix.

    Covariant slots pick up the frame matrix, contravariant slots its inverse.
    """
    e = _frame_matrix(frame)
    if e.shape != (t.dim, t.dim):
        raise TensorError(f"frame shape {e.shape} does not match dim {t.dim}")
    check_invertible(e, "frame matrix")
    e_inv = np.linalg.inv(e)
    out = t.components
    for slot, v in enumerate(t.variance):
        m = e.T if v == CO else e_inv
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [slot])), 0, slot)
    return DenseTensor(out, t.variance)


def inverse_frame_transform(t: DenseTensor, frame) -> DenseTensor:
    e = _frame_matrix(frame)
    check_invertible(e, "frame matrix")
    return frame_transform(t, np.linalg.inv(e))


def _group_eigenvalues(w: np.ndarray) -> list[list[int]]:
    """Indices of ascending eigenvalues, grouped by EIGEN_GROUP_RTOL."""
    tol = EIGEN_GROUP_RTOL * (1.0 + np.max(np.abs(w)))
    groups = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _flatten_groups(w: np.ndarray, groups) -> np.ndarray:
    out = w.copy()
    for g in groups:
        out[g] = np.mean(w[g])
    return out


def generalized_eigenframe(c: DenseTensor, g: DenseTensor, sig: Signature | None = None) -> EigenFrame | None:
    """Eigenframe of g^{-1} c, orthonormal with respect to g.

    Returns None when g^{-1} c is not real-diagonalizable with a
    g-orthonormalizable eigenbasis, which can only happen for indefinite g.
    """
    cm = np.asarray(c.components, dtype=float)
    gm = np.asarray(g.components, dtype=float)
    if not np.array_equal(cm, cm.T):
        cm = 0.5 * (cm + cm.T)
    check_invertible(gm, "metric")
    if sig is None:
        sig = Signature.of(gm)
    if sig.definite:
        sign = 1.0 if sig.minus == 0 else -1.0
        lower = np.linalg.cholesky(sign * gm)
        a = np.linalg.solve(lower, np.linalg.solve(lower, sign * cm).T)
        w, u = np.linalg.eigh(0.5 * (a + a.T))
        frame = np.linalg.solve(lower.T, u)
        groups = _group_eigenvalues(w)
        return EigenFrame(_flatten_groups(w, groups), frame, np.full(len(w), sign))
    return _indefinite_eigenframe(cm, gm)


def _indefinite_eigenframe(cm: np.ndarray, gm: np.ndarray) -> EigenFrame | None:
    n = cm.shape[0]
    m = np.linalg.solve(gm, cm)
    w = np.linalg.eigvals(m)
    scale = 1.0 + np.max(np.abs(w))
    if np.max(np.abs(w.imag)) > EIGEN_GROUP_RTOL * scale:
        return None
    w = np.sort(w.real)
    groups = _group_eigenvalues(w)
    w = _flatten_groups(w, groups)
    cols, squares = [], []
    mscale = 1.0 + np.max(np.abs(m))
    for grp in groups:
        mu = w[grp[0]]
        _, s, vt = np.linalg.svd(m - mu * np.eye(n))
        null = vt[s <= 1e-8 * mscale].T
        if null.shape[1] != len(grp):
            return None
        gram = null.T @ gm @ null
        d, q = np.linalg.eigh(0.5 * (gram + gram.T))
        # nearly null eigenvectors signal a defective or ill-conditioned frame
        if np.min(np.abs(d)) < 1e-6 * np.max(np.abs(gm)):
            return None
        cols.append(null @ q / np.sqrt(np.abs(d)))
        squares.extend(np.sign(d))
    return EigenFrame(w, np.hstack(cols), np.array(squares, dtype=float))
