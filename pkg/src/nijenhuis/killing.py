"""Killing vectors of the built-in spaces and Killing tensors built from them.

Generator names use 1-based axes: ``T1`` translations, ``R12`` rotations,
``B12`` boosts (Minkowski planes mixing a positive and a negative axis).
On the sphere, ``R{i}{n+1}`` are the ambient rotations that leave the chart
plane; on the hyperbolic ball ``B{i}{n+1}`` are the ambient boosts.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import (
    ChartPoint,
    Euclidean,
    ExpressionMetric,
    ExpressionTensorField,
    GeometryError,
    Hyperbolic,
    MetricField,
    Minkowski,
    Sphere,
    SpecFileError,
    SymmetricTensorField,
    covariant_derivative_sym2,
    iter_lines,
    parse_component_file,
)
from .tensor import CO, DenseTensor, cyclic_sum3


class KillingError(GeometryError):
    pass


@dataclass(frozen=True)
class KillingVector:
    """A Killing vector field; ``kind`` is translation, rotation, boost or ambient."""

    space: MetricField
    kind: str
    axes: tuple[int, ...]  # 0-based; one axis for translations, a pair otherwise

    @property
    def name(self) -> str:
        letter = {"translation": "T", "rotation": "R", "boost": "B"}.get(self.kind)
        if letter is None:
            letter = "R" if isinstance(self.space, Sphere) else "B"
        return letter + "".join(str(a + 1) for a in self.axes)

    def contra(self, x) -> np.ndarray:
        """Components V^mu at x."""
        return self._eval(np.asarray(x, dtype=float))[0]

    def jacobian(self, x) -> np.ndarray:
        """J[mu, c] = d_c V^mu."""
        return self._eval(np.asarray(x, dtype=float))[1]

    def _eval(self, x):
        n = len(x)
        v = np.zeros(n)
        jac = np.zeros((n, n))
        if self.kind == "translation":
            v[self.axes[0]] = 1.0
            return v, jac
        i, j = self.axes
        if self.kind in ("rotation", "boost"):
            # lowered (flat) components: V_i = -x_j, V_j = x_i
            eta = np.diag(self.space.matrix(x)) if isinstance(self.space, Minkowski) else np.ones(n)
            v[i], v[j] = -eta[i] * x[j], eta[j] * x[i]
            jac[i, j], jac[j, i] = -eta[i], eta[j]
            return v, jac
        # ambient generator mixing axis i with the (n+1)-th ambient axis
        r = self.space.radius
        s = 1.0 if isinstance(self.space, Sphere) else -1.0
        rr = float(x @ x)
        v = 2 * s * x[i] * x
        v[i] += r**2 - s * rr
        jac = 2 * s * (np.outer(x, np.eye(n)[i]) + x[i] * np.eye(n))
        jac[i] -= 2 * s * x
        return v / (2 * r), jac / (2 * r)

    def lowered(self, x):
        """(V_a, d_c V_a) with the index lowered by the metric at x."""
        x = np.asarray(x, dtype=float)
        v, jac = self._eval(x)
        g = self.space.matrix(x)
        dg = self.space.partials(x)
        return g @ v, np.einsum("abc,b->ac", dg, v) + g @ jac


def killing_vectors(space: MetricField) -> list[KillingVector]:
    n = space.dim
    pairs = list(itertools.combinations(range(n), 2))
    if isinstance(space, Euclidean):
        return [KillingVector(space, "translation", (a,)) for a in range(n)] + [
            KillingVector(space, "rotation", p) for p in pairs
        ]
    if isinstance(space, Minkowski):
        eta = space.diagonal
        return [KillingVector(space, "translation", (a,)) for a in range(n)] + [
            KillingVector(space, "rotation" if eta[i] == eta[j] else "boost", (i, j)) for i, j in pairs
        ]
    if isinstance(space, (Sphere, Hyperbolic)):
        return [KillingVector(space, "rotation", p) for p in pairs] + [
            KillingVector(space, "ambient", (a, n)) for a in range(n)
        ]
    raise KillingError(f"no Killing vector catalog for {space.describe()}")


def generator_by_name(space: MetricField, name: str) -> KillingVector:
    for v in killing_vectors(space):
        if v.name == name:
            return v
    known = ", ".join(v.name for v in killing_vectors(space))
    raise KillingError(f"unknown generator {name!r} for {space.describe()} (known: {known})")


def symmetric_product(v: KillingVector, w: KillingVector, p: ChartPoint) -> DenseTensor:
    """K_ab = (V_a W_b + V_b W_a) / 2 at p."""
    if v.space != w.space:
        raise KillingError("Killing vectors live on different spaces")
    va, _ = v.lowered(p.x)
    wa, _ = w.lowered(p.x)
    k = np.outer(va, wa)
    return DenseTensor(0.5 * (k + k.T), (CO, CO), (("sym", 0, 1),))


class KillingTensorField(SymmetricTensorField):
    """sum_i c_i sym(V_i, W_i) + metric_coeff * g, with analytic partial derivatives."""

    uses_finite_differences = False

    def __init__(self, space: MetricField, terms=(), metric_coeff: float = 0.0):
        self.space = space
        self.dim = space.dim
        self.terms = tuple((float(c), v, w) for c, v, w in terms)
        self.metric_coeff = float(metric_coeff)
        for _, v, w in self.terms:
            if v.space != space or w.space != space:
                raise KillingError("term generator lives on a different space")

    def _lowered(self, x):
        cache = {}
        for _, v, w in self.terms:
            for u in (v, w):
                if u not in cache:
                    cache[u] = u.lowered(x)
        return cache

    def value(self, x):
        x = np.asarray(x, dtype=float)
        low = self._lowered(x)
        k = self.metric_coeff * self.space.matrix(x)
        for c, v, w in self.terms:
            outer = np.outer(low[v][0], low[w][0])
            k = k + 0.5 * c * (outer + outer.T)
        return k

    def partials(self, x):
        x = np.asarray(x, dtype=float)
        low = self._lowered(x)
        dk = self.metric_coeff * self.space.partials(x)
        for c, v, w in self.terms:
            (va, dva), (wa, dwa) = low[v], low[w]
            t = np.einsum("ac,b->abc", dva, wa) + np.einsum("a,bc->abc", va, dwa)
            dk = dk + 0.5 * c * (t + np.transpose(t, (1, 0, 2)))
        return dk

    def scaled(self, s: float) -> "KillingTensorField":
        return KillingTensorField(self.space, [(s * c, v, w) for c, v, w in self.terms], s * self.metric_coeff)

    def __add__(self, other: "KillingTensorField") -> "KillingTensorField":
        if other.space != self.space:
            raise KillingError("cannot add Killing tensors on different spaces")
        return KillingTensorField(self.space, self.terms + other.terms, self.metric_coeff + other.metric_coeff)

    def describe(self) -> str:
        parts = [f"{c:+g} {v.name}*{w.name}" for c, v, w in self.terms]
        if self.metric_coeff:
            parts.append(f"{self.metric_coeff:+g} g")
        return " ".join(parts) or "0"


def combine(fields, coeffs) -> KillingTensorField:
    fields = list(fields)
    out = KillingTensorField(fields[0].space)
    for c, f in zip(coeffs, fields):
        out = out + f.scaled(float(c))
    return out


def killing_basis(space: MetricField) -> list[KillingTensorField]:
    """Symmetric products of all generator pairs (spanning, not necessarily independent)."""
    if isinstance(space, ExpressionMetric):
        raise KillingError("expression metrics have no generator catalog")
    gens = killing_vectors(space)
    return [
        KillingTensorField(space, [(1.0, gens[i], gens[j])])
        for i, j in itertools.combinations_with_replacement(range(len(gens)), 2)
    ]


def killing_residual(k: SymmetricTensorField, m: MetricField, p: ChartPoint) -> DenseTensor:
    """nabla_a K_bc + nabla_b K_ca + nabla_c K_ab at p (totally symmetric)."""
    return cyclic_sum3(covariant_derivative_sym2(k, m, p), (0, 1, 2))


_TERM = re.compile(r"\s*term\s+(\S+)\s+(\S+)\s+(\S+)\s*$")
_METRIC = re.compile(r"\s*metric\s+(\S+)\s*$")


def parse_killing_text(text: str, space: MetricField, source: str = "<string>") -> SymmetricTensorField:
    """Killing tensor file.

    Either generator terms (``term <coeff> <gen1> <gen2>`` and ``metric <coeff>``)
    or component expressions (``dim = n`` then ``k[i][j] = <expr>``).
    """
    if re.search(r"^\s*k\s*\[", text, re.MULTILINE):
        dim, _, entries = parse_component_file(text, "k", source)
        if dim != space.dim:
            raise SpecFileError(f"tensor dim {dim} does not match metric dim {space.dim}", source, 0, 1)
        return ExpressionTensorField(dim, entries)
    terms = []
    metric_coeff = 0.0
    for number, start, line in iter_lines(text):
        lead = len(line) - len(line.lstrip())
        if m := _METRIC.match(line):
            metric_coeff += _coeff(m.group(1), source, start + m.start(1), number)
            continue
        m = _TERM.match(line)
        if not m:
            raise SpecFileError("expected 'term <coeff> <gen1> <gen2>' or 'metric <coeff>'", source, start + lead, number)
        c = _coeff(m.group(1), source, start + m.start(1), number)
        gens = []
        for g in (2, 3):
            try:
                gens.append(generator_by_name(space, m.group(g)))
            except KillingError as exc:
                raise SpecFileError(str(exc), source, start + len(line[: m.start(g)].encode()), number) from None
        terms.append((c, gens[0], gens[1]))
    if not terms and metric_coeff == 0.0:
        raise SpecFileError("no terms", source, 0, 1)
    return KillingTensorField(space, terms, metric_coeff)


def _coeff(text, source, offset, line) -> float:
    try:
        return float(text)
    except ValueError:
        raise SpecFileError(f"bad coefficient {text!r}", source, offset, line) from None


def load_killing_file(path, space: MetricField) -> SymmetricTensorField:
    path = Path(path)
    return parse_killing_text(path.read_text(encoding="utf-8"), space, str(path))


def random_combination(space: MetricField, rng: np.random.Generator) -> KillingTensorField:
    """Standard-normal combination of every killing_basis field."""
    basis = killing_basis(space)
    return combine(basis, rng.standard_normal(len(basis)))


def random_square_sum(space: MetricField, rng: np.random.Generator, squares: int = 1,
                      density: float = 0.3) -> KillingTensorField:
    """a g + sum_k b_k V_k (x) V_k with V_k random sparse combinations of generators.

    Such tensors are integrable often enough to exercise both verdicts.
    """
    gens = killing_vectors(space)
    terms = []
    for _ in range(squares):
        a = rng.standard_normal(len(gens)) * (rng.uniform(size=len(gens)) < density)
        if not a.any():
            a[rng.integers(len(gens))] = 1.0
        w = rng.standard_normal()
        for i, j in itertools.product(range(len(gens)), repeat=2):
            if a[i] and a[j]:
                terms.append((w * a[i] * a[j], gens[i], gens[j]))
    return KillingTensorField(space, terms, rng.standard_normal())
