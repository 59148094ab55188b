"""Pointwise algebraic verification of the redundancy of the third Nijenhuis condition.

At a point, in an orthonormal eigenframe of K, the data is the eigenvalue
vector ``lam`` and S_abg = K_ab;g (symmetric in a, b).  The Killing equation
and the three integrability conditions become linear constraints on S whose
coefficients depend only on ``lam``.  We build those constraints explicitly
and compare solution spaces.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .integrability import eigenframe_coefficients, eigenframe_residuals
from .tensor import cyclic_sum_array

NULLSPACE_RTOL = 1e-10
MIN_GAP = 0.5
CONDITIONS = ("K0", "K1", "K2", "K3", "K1p", "K2p", "K3p")


class PatternError(ValueError):
    pass


def make_rng(seed) -> np.random.Generator:
    """Counter-based Philox stream; pass through an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(int(seed)))


def parse_pattern(text: str) -> tuple[int, ...]:
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise PatternError(f"pattern must be comma-separated positive integers, got {text!r}") from None
    if not parts or min(parts) < 1:
        raise PatternError(f"pattern must be comma-separated positive integers, got {text!r}")
    return parts


def check_pattern(dim: int, pattern) -> tuple[int, ...]:
    pattern = tuple(int(p) for p in pattern)
    if not pattern or min(pattern) < 1 or sum(pattern) != dim:
        raise PatternError(f"pattern {pattern} is not a partition of dim {dim}")
    return pattern


def default_patterns(dim: int) -> list[tuple[int, ...]]:
    """(1,...,1), (2,1,...,1) and (dim), without duplicates."""
    out = []
    for p in [(1,) * dim, (2,) + (1,) * (dim - 2), (dim,)]:
        if p not in out:
            out.append(p)
    return out


@dataclass(frozen=True, eq=False)
class PointwiseKillingData:
    dim: int
    lam: np.ndarray
    s: np.ndarray
    killing: bool = True

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.shape != (self.dim,) * 3 or len(self.lam) != self.dim:
            raise ValueError("shape mismatch")
        if not np.array_equal(s, np.transpose(s, (1, 0, 2))):
            raise ValueError("s must be symmetric in its first two slots")

    def killing_defect(self) -> float:
        """max|cyclic sum of s| relative to max|s|."""
        return float(np.max(np.abs(cyclic_sum_array(self.s)))) / max(float(np.max(np.abs(self.s))), 1e-300)


def sample_eigenvalues(pattern, rng) -> np.ndarray:
    """Group values from standard normals, pushed apart to a gap of at least MIN_GAP."""
    values = np.sort(rng.standard_normal(len(pattern)))
    for i in range(1, len(values)):
        values[i] = max(values[i], values[i - 1] + MIN_GAP)
    return np.repeat(values, pattern)


def symmetrize_pair(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.transpose(a, (1, 0, 2)))


def total_symmetrization(s: np.ndarray) -> np.ndarray:
    perms = itertools.permutations(range(3))
    return sum(np.transpose(s, p) for p in perms) / 6.0


def killing_projection(s: np.ndarray) -> np.ndarray:
    """Remove the totally symmetric part; for pair-symmetric s this kills the cyclic sum."""
    return symmetrize_pair(s - total_symmetrization(s))


def sample_pointwise(dim: int, pattern, seed) -> PointwiseKillingData:
    if not 2 <= dim <= 8:
        raise PatternError(f"dim must be in 2..8, got {dim}")
    pattern = check_pattern(dim, pattern)
    rng = make_rng(seed)
    lam = sample_eigenvalues(pattern, rng)
    raw = rng.standard_normal((dim, dim, dim))
    upper = np.triu_indices(dim)
    s = np.zeros((dim, dim, dim))
    s[upper] = raw[upper]
    s[(upper[1], upper[0])] = raw[upper]
    return PointwiseKillingData(dim, lam, killing_projection(s), killing=True)


class PairSymmetricSpace:
    """Coordinates on pair-symmetric 3-index arrays, isometric for the Frobenius norm."""

    def __init__(self, dim: int):
        self.dim = dim
        pairs = [(a, b) for a in range(dim) for b in range(a, dim)]
        self.size = len(pairs) * dim
        embed = np.zeros((dim**3, self.size))
        col = 0
        for a, b in pairs:
            for c in range(dim):
                if a == b:
                    embed[(a * dim + b) * dim + c, col] = 1.0
                else:
                    embed[(a * dim + b) * dim + c, col] = embed[(b * dim + a) * dim + c, col] = 1 / np.sqrt(2)
                col += 1
        self.embed = embed

    def to_tensor(self, v) -> np.ndarray:
        t = (self.embed @ np.asarray(v, dtype=float)).reshape((self.dim,) * 3)
        return symmetrize_pair(t)

    def to_coords(self, s) -> np.ndarray:
        return self.embed.T @ np.asarray(s, dtype=float).reshape(-1)


def _row(dim, coef, triple) -> np.ndarray:
    """Functional S -> c(a,b,g) S_abg + cyclic on the full n^3 vector."""
    a, b, g = triple
    row = np.zeros(dim**3)
    for x, y, z in ((a, b, g), (b, g, a), (g, a, b)):
        row[(x * dim + y) * dim + z] += coef[x, y, z]
    return row


def constraint_matrix(lam, which) -> np.ndarray:
    """One row per unordered index triple per condition, in pair-symmetric coordinates.

    The Killing condition uses every multiset of indices; the others only triples
    of distinct indices, since repeated indices give identically vanishing rows.
    """
    lam = np.asarray(lam, dtype=float)
    n = len(lam)
    coefs = eigenframe_coefficients(lam)
    space = PairSymmetricSpace(n)
    rows = []
    for name in which:
        if name not in CONDITIONS:
            raise ValueError(f"unknown condition {name!r}")
        _, coef = coefs[name.lower()]
        if name == "K0":
            triples = itertools.combinations_with_replacement(range(n), 3)
        else:
            triples = itertools.combinations(range(n), 3)
        rows.extend(_row(n, coef, t) for t in triples)
    if not rows:
        return np.zeros((0, space.size))
    return np.array(rows) @ space.embed


@dataclass(frozen=True, eq=False)
class SolutionSpace:
    """Orthonormal basis (columns) of the common solution space, in pair-symmetric coordinates."""

    lam: np.ndarray
    which: tuple[str, ...]
    basis: np.ndarray
    singular_values: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def tensor(self, coeffs) -> np.ndarray:
        return PairSymmetricSpace(len(self.lam)).to_tensor(self.basis @ coeffs)


def nullspace(a: np.ndarray, rtol: float = NULLSPACE_RTOL) -> tuple[np.ndarray, np.ndarray]:
    n = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(n), np.zeros(0)
    _, s, vt = np.linalg.svd(a)
    cutoff = rtol * s[0] if s.size and s[0] > 0 else 0.0
    rank = int(np.sum(s > cutoff)) if s.size and s[0] > 0 else 0
    return vt[rank:].T.copy(), s


def constraint_solution_space(lam, which) -> SolutionSpace:
    which = tuple(which)
    if not which:
        raise ValueError("which must name at least one condition")
    basis, s = nullspace(constraint_matrix(lam, which))
    return SolutionSpace(np.asarray(lam, dtype=float), which, basis, s)


@dataclass(frozen=True)
class VandermondeVerdict:
    case: str  # "distinct", "two-equal", "all-equal"
    status: str  # "pass", "fail", "precondition-violated"
    deviations: tuple[float, ...]

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def vandermonde_oracle(lam, triple, data: PointwiseKillingData, tol: float = 1e-10) -> VandermondeVerdict:
    """Check the per-triple consequences of the Killing, first and second conditions.

    The three unknowns of a triple (a, b, g) are S_ab;g, S_bg;a, S_ga;b.  With
    pairwise distinct eigenvalues they vanish; with lam_a != lam_b = lam_g they
    satisfy S_abg = -S_bga / 2 = S_gab; with all equal only their sum vanishes.
    Deviations are measured relative to max|S|.
    """
    lam = np.asarray(lam, dtype=float)
    s = data.s
    if len(set(triple)) != 3:
        raise ValueError(f"triple {triple} must have distinct indices")
    scale = max(float(np.max(np.abs(s))), 1e-300)
    coefs = eigenframe_coefficients(lam)
    pre = []
    for name in ("k0", "k1", "k2"):
        degree, coef = coefs[name]
        row = _row(len(lam), coef, triple)
        pre.append(abs(row @ s.reshape(-1)) / ((1 + np.max(np.abs(lam))) ** degree * scale))
    group_tol = 1e-9 * (1 + np.max(np.abs(lam)))
    la, lb, lg = (lam[i] for i in triple)
    eq_ab, eq_bg, eq_ga = abs(la - lb) <= group_tol, abs(lb - lg) <= group_tol, abs(lg - la) <= group_tol
    if eq_ab and eq_bg:
        case = "all-equal"
    elif not (eq_ab or eq_bg or eq_ga):
        case = "distinct"
    else:
        case = "two-equal"
    if max(pre) > tol:
        return VandermondeVerdict(case, "precondition-violated", tuple(pre))
    if case == "all-equal":
        return VandermondeVerdict(case, "pass", (pre[0],))
    a, b, g = triple
    if case == "distinct":
        devs = tuple(abs(x) / scale for x in (s[a, b, g], s[b, g, a], s[g, a, b]))
    else:
        # rotate so that the odd eigenvalue sits in front
        while not abs(lam[triple[1]] - lam[triple[2]]) <= group_tol:
            triple = triple[1:] + triple[:1]
        a, b, g = triple
        devs = (abs(s[a, b, g] + 0.5 * s[b, g, a]) / scale, abs(s[a, b, g] - s[g, a, b]) / scale)
    status = "pass" if max(devs) <= tol else "fail"
    return VandermondeVerdict(case, status, devs)


@dataclass
class TheoremReport:
    dim: int
    trials: int
    pattern: tuple[int, ...]
    seed: int
    tolerance: float
    max_k3_residual: float = 0.0
    max_k0_residual: float = 0.0
    constraint_dims: tuple[int, int, int, int] = (0, 0, 0, 0)
    dims_equal_all_trials: bool = True
    elapsed: float = field(default=0.0, compare=False)

    @property
    def verified(self) -> bool:
        d0, d01, d012, d0123 = self.constraint_dims
        return self.dims_equal_all_trials and d012 == d0123 and self.max_k3_residual <= self.tolerance

    def as_dict(self) -> dict:
        """Deterministic fields only; elapsed time is left out."""
        return {
            "dim": self.dim,
            "pattern": list(self.pattern),
            "trials": self.trials,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "max_k3_residual": self.max_k3_residual,
            "max_k0_residual": self.max_k0_residual,
            "constraint_dims": list(self.constraint_dims),
            "dims_equal_all_trials": self.dims_equal_all_trials,
            "verified": self.verified,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TheoremReport":
        return cls(
            dim=d["dim"],
            trials=d["trials"],
            pattern=tuple(d["pattern"]),
            seed=d["seed"],
            tolerance=d["tolerance"],
            max_k3_residual=d["max_k3_residual"],
            max_k0_residual=d["max_k0_residual"],
            constraint_dims=tuple(d["constraint_dims"]),
            dims_equal_all_trials=d["dims_equal_all_trials"],
        )


def verify_redundancy(dim: int, pattern, trials: int, seed: int, tol: float = 1e-9) -> TheoremReport:
    """Sample random elements of the {K0, K1, K2} solution space and measure the K3 residual."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    pattern = check_pattern(dim, pattern)
    rng = make_rng(seed)
    report = TheoremReport(dim, trials, pattern, int(seed), tol)
    start = time.perf_counter()
    d0 = constraint_solution_space(np.zeros(dim), ("K0",)).dim
    for trial in range(trials):
        lam = sample_eigenvalues(pattern, rng)
        sol012 = constraint_solution_space(lam, ("K0", "K1", "K2"))
        d0123 = constraint_solution_space(lam, ("K0", "K1", "K2", "K3")).dim
        if trial == 0:
            d01 = constraint_solution_space(lam, ("K0", "K1")).dim
            report.constraint_dims = (d0, d01, sol012.dim, d0123)
        elif (sol012.dim, d0123) != report.constraint_dims[2:]:
            report.dims_equal_all_trials = False
        if sol012.dim != d0123:
            report.dims_equal_all_trials = False
        if sol012.dim == 0:
            continue
        z = rng.standard_normal(sol012.dim)
        s = sol012.tensor(z / np.linalg.norm(z))
        res = eigenframe_residuals(lam, s)
        report.max_k3_residual = max(report.max_k3_residual, res.k3)
        report.max_k0_residual = max(report.max_k0_residual, res.k0)
    report.elapsed = time.perf_counter() - start
    return report


def independence_witness(dim: int, lam, seed, min_residual: float = 0.1) -> PointwiseKillingData | None:
    """Unit-norm S satisfying K0 and K1 but not K2, or None if the two solution spaces coincide."""
    if dim < 3:
        raise ValueError("independence needs dim >= 3")
    lam = np.asarray(lam, dtype=float)
    if len(lam) != dim:
        raise ValueError(f"lam has {len(lam)} entries, expected {dim}")
    sol01 = constraint_solution_space(lam, ("K0", "K1"))
    sol012 = constraint_solution_space(lam, ("K0", "K1", "K2"))
    if sol01.dim == sol012.dim:
        return None
    # orthogonal complement of sol012 inside sol01
    proj = sol01.basis - sol012.basis @ (sol012.basis.T @ sol01.basis)
    u, sv, _ = np.linalg.svd(proj, full_matrices=False)
    comp = u[:, : sol01.dim - sol012.dim]
    space = PairSymmetricSpace(dim)
    rng = make_rng(seed)
    best = None
    for _ in range(64):
        z = rng.standard_normal(comp.shape[1])
        s = space.to_tensor(comp @ (z / np.linalg.norm(z)))
        s = s / np.linalg.norm(s)
        r = eigenframe_residuals(lam, s).k2
        if best is None or r > best[0]:
            best = (r, s)
        if r >= min_residual:
            break
    if best[0] < min_residual:
        return None
    return PointwiseKillingData(dim, lam, best[1], killing=True)
