"""Metric fields, Christoffel symbols and covariant derivatives of symmetric 2-tensors.

Array conventions used throughout:

* ``metric.partials(x)[a, b, c]``  = d_c g_ab
* ``christoffel[a, b, c]``         = Gamma^a_bc
* ``field.partials(x)[a, b, c]``   = d_c K_ab
* ``covariant_derivative_sym2(...)[a, b, c]`` = K_ab;c
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .expr import EvaluationError, Expr, ExpressionError, parse_expression
from .tensor import CO, CONTRA, DenseTensor, Signature, TensorError, check_invertible

EPS = np.finfo(float).eps
HYPERBOLIC_MARGIN = 1e-6


class GeometryError(ValueError):
    pass


class InadmissiblePointError(GeometryError):
    pass


class SingularMetricError(GeometryError):
    pass


def finite_difference(f, x) -> np.ndarray:
    """Central differences with one Richardson level; last axis is the derivative direction.

    Step per coordinate is eps**(1/3) * (1 + |x_i|).
    """
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x), dtype=float)
    out = np.empty(f0.shape + (len(x),))
    for i in range(len(x)):
        h = EPS ** (1 / 3) * (1.0 + abs(x[i]))

        def central(step):
            xp, xm = x.copy(), x.copy()
            xp[i] += step
            xm[i] -= step
            return (np.asarray(f(xp), dtype=float) - np.asarray(f(xm), dtype=float)) / (2 * step)

        out[..., i] = (4.0 * central(h / 2) - central(h)) / 3.0
    return out


@dataclass(frozen=True)
class ChartPoint:
    coords: tuple[float, ...]
    admissible: bool

    @property
    def x(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    @property
    def dim(self) -> int:
        return len(self.coords)


def christoffel_from_partials(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    lowered = 0.5 * (np.transpose(dg, (0, 2, 1)) + dg - np.transpose(dg, (2, 0, 1)))
    gamma = np.einsum("ad,dbc->abc", np.linalg.inv(g), lowered)
    return 0.5 * (gamma + np.transpose(gamma, (0, 2, 1)))


class MetricField:
    """Base class; subclasses supply ``matrix`` and may override ``partials``/``christoffel``."""

    kind: str = "abstract"
    dim: int
    signature: Signature
    closed_form = False

    def matrix(self, x) -> np.ndarray:
        raise NotImplementedError

    def partials(self, x) -> np.ndarray:
        return finite_difference(self.matrix, x)

    def christoffel(self, x) -> np.ndarray:
        return christoffel_from_partials(self.matrix(x), self.partials(x))

    def christoffel_fd(self, x) -> np.ndarray:
        return christoffel_from_partials(self.matrix(x), finite_difference(self.matrix, x))

    def admissible(self, x) -> bool:
        return True

    def point(self, coords) -> ChartPoint:
        coords = tuple(float(c) for c in coords)
        if len(coords) != self.dim:
            raise GeometryError(f"point has {len(coords)} coordinates, metric has dim {self.dim}")
        return ChartPoint(coords, bool(self.admissible(np.array(coords))))

    def random_point(self, rng: np.random.Generator) -> ChartPoint:
        for _ in range(1000):
            p = self.point(rng.uniform(-1.0, 1.0, self.dim))
            if p.admissible:
                return p
        raise GeometryError(f"no admissible point found for {self.describe()}")

    def describe(self) -> str:
        return self.kind


def _check_dim(dim):
    if not 2 <= dim <= 8:
        raise GeometryError(f"dim must be in 2..8, got {dim}")


@dataclass(frozen=True)
class Euclidean(MetricField):
    dim: int
    kind = "euclidean"
    closed_form = True

    def __post_init__(self):
        _check_dim(self.dim)

    @property
    def signature(self):
        return Signature(self.dim, 0)

    def matrix(self, x):
        return np.eye(self.dim)

    def partials(self, x):
        return np.zeros((self.dim,) * 3)

    def christoffel(self, x):
        return np.zeros((self.dim,) * 3)

    def describe(self):
        return f"euclidean({self.dim})"


@dataclass(frozen=True)
class Minkowski(MetricField):
    """diag(+1 x plus, -1 x minus)."""

    plus: int
    minus: int
    kind = "minkowski"
    closed_form = True

    def __post_init__(self):
        _check_dim(self.plus + self.minus)

    @property
    def dim(self):
        return self.plus + self.minus

    @property
    def signature(self):
        return Signature(self.plus, self.minus)

    @property
    def diagonal(self) -> np.ndarray:
        return np.array([1.0] * self.plus + [-1.0] * self.minus)

    def matrix(self, x):
        return np.diag(self.diagonal)

    def partials(self, x):
        return np.zeros((self.dim,) * 3)

    def christoffel(self, x):
        return np.zeros((self.dim,) * 3)

    def describe(self):
        return f"minkowski({self.plus},{self.minus})"


class _ConformallyFlat(MetricField):
    """g = phi(x)^2 delta with phi = 2 R^2 / (R^2 + s |x|^2), s = +1 sphere, -1 ball."""

    closed_form = True
    _s: float

    @property
    def signature(self):
        return Signature(self.dim, 0)

    def _denominator(self, x):
        return self.radius**2 + self._s * float(x @ x)

    def matrix(self, x):
        x = np.asarray(x, dtype=float)
        phi = 2 * self.radius**2 / self._denominator(x)
        return phi**2 * np.eye(self.dim)

    def partials(self, x):
        x = np.asarray(x, dtype=float)
        den = self._denominator(x)
        phi = 2 * self.radius**2 / den
        dphi = -2 * self.radius**2 * (2 * self._s * x) / den**2
        return 2 * phi * np.einsum("ab,c->abc", np.eye(self.dim), dphi)

    def christoffel(self, x):
        x = np.asarray(x, dtype=float)
        df = -2 * self._s * x / self._denominator(x)  # gradient of log(phi)
        eye = np.eye(self.dim)
        return (
            np.einsum("ab,c->abc", eye, df)
            + np.einsum("ac,b->abc", eye, df)
            - np.einsum("bc,a->abc", eye, df)
        )


@dataclass(frozen=True)
class Sphere(_ConformallyFlat):
    """Round sphere of the given radius in stereographic coordinates; chart is all of R^n."""

    dim: int
    radius: float = 1.0
    kind = "sphere_stereographic"
    _s = 1.0

    def __post_init__(self):
        _check_dim(self.dim)
        if not self.radius > 0:
            raise GeometryError("radius must be positive")

    def describe(self):
        return f"sphere({self.dim}, radius={self.radius:g})"


@dataclass(frozen=True)
class Hyperbolic(_ConformallyFlat):
    """Poincare ball of the given radius; chart is |x| < radius (1 - 1e-6)."""

    dim: int
    radius: float = 1.0
    kind = "hyperbolic_ball"
    _s = -1.0

    def __post_init__(self):
        _check_dim(self.dim)
        if not self.radius > 0:
            raise GeometryError("radius must be positive")

    def admissible(self, x):
        return bool(np.linalg.norm(x) < self.radius * (1 - HYPERBOLIC_MARGIN))

    def random_point(self, rng):
        direction = rng.standard_normal(self.dim)
        direction /= np.linalg.norm(direction)
        r = 0.7 * self.radius * rng.uniform() ** (1.0 / self.dim)
        return self.point(r * direction)

    def describe(self):
        return f"hyperbolic({self.dim}, radius={self.radius:g})"


def _eval_matrix(entries, dim, x) -> np.ndarray:
    m = np.zeros((dim, dim))
    for (i, j), e in entries:
        try:
            v = e.evaluate(x)
        except EvaluationError:
            v = np.nan
        m[i, j] = m[j, i] = v
    return m


@dataclass(frozen=True)
class ExpressionMetric(MetricField):
    """Metric from upper-triangle expressions; ``entries`` holds ((i, j), Expr) with 0-based i <= j."""

    dim: int
    entries: tuple[tuple[tuple[int, int], Expr], ...]
    declared_signature: Signature | None = None
    kind = "expression"

    def __post_init__(self):
        _check_dim(self.dim)
        for (i, j), e in self.entries:
            if not 0 <= i <= j < self.dim:
                raise GeometryError(f"entry ({i + 1},{j + 1}) is not in the upper triangle")
            if max(e.variables(), default=0) > self.dim:
                raise GeometryError(f"entry ({i + 1},{j + 1}) uses variables beyond x{self.dim}")

    @property
    def signature(self):
        return self.declared_signature or Signature(self.dim, 0)

    def matrix(self, x):
        return _eval_matrix(self.entries, self.dim, x)

    def admissible(self, x):
        g = self.matrix(x)
        if not np.all(np.isfinite(g)):
            return False
        try:
            check_invertible(g)
        except TensorError:
            return False
        return True

    def describe(self):
        return f"expression({self.dim})"


def builtin_metric(name: str, dim: int, signature: Signature | None = None, radius: float = 1.0) -> MetricField:
    if name == "euclidean":
        return Euclidean(dim)
    if name == "minkowski":
        sig = signature or Signature(1, dim - 1)
        if sig.dim != dim:
            raise GeometryError(f"signature {sig} does not match dim {dim}")
        return Minkowski(sig.plus, sig.minus)
    if name in ("sphere", "sphere_stereographic"):
        return Sphere(dim, radius)
    if name in ("hyperbolic", "hyperbolic_ball"):
        return Hyperbolic(dim, radius)
    raise GeometryError(f"unknown metric {name!r}")


def _require_admissible(m: MetricField, p: ChartPoint) -> np.ndarray:
    if p.dim != m.dim:
        raise GeometryError(f"point has dim {p.dim}, metric has dim {m.dim}")
    if not p.admissible:
        raise InadmissiblePointError(f"point {p.coords} is outside the chart domain of {m.describe()}")
    x = p.x
    try:
        check_invertible(m.matrix(x), "metric")
    except TensorError as exc:
        raise SingularMetricError(f"{exc} at {p.coords}") from None
    return x


def christoffel_at(m: MetricField, p: ChartPoint) -> DenseTensor:
    x = _require_admissible(m, p)
    return DenseTensor(m.christoffel(x), (CONTRA, CO, CO), (("sym", 1, 2),))


class SymmetricTensorField:
    """A covariant symmetric 2-tensor field: ``value(x)`` and ``partials(x)[a, b, c] = d_c K_ab``."""

    dim: int

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def partials(self, x) -> np.ndarray:
        return finite_difference(self.value, x)

    uses_finite_differences = True


class MetricTensorField(SymmetricTensorField):
    """K = scale * g for a given metric."""

    def __init__(self, metric: MetricField, scale: float = 1.0):
        self.metric = metric
        self.scale = scale
        self.dim = metric.dim
        self.uses_finite_differences = not metric.closed_form

    def value(self, x):
        return self.scale * self.metric.matrix(x)

    def partials(self, x):
        return self.scale * self.metric.partials(x)


class ExpressionTensorField(SymmetricTensorField):
    def __init__(self, dim: int, entries):
        self.dim = dim
        self.entries = tuple(entries)

    def value(self, x):
        return _eval_matrix(self.entries, self.dim, x)


def covariant_derivative_sym2(k: SymmetricTensorField, m: MetricField, p: ChartPoint) -> DenseTensor:
    """K_ab;c = d_c K_ab - Gamma^d_ca K_db - Gamma^d_cb K_ad, symmetrized in ab."""
    x = _require_admissible(m, p)
    if k.dim != m.dim:
        raise GeometryError(f"tensor field has dim {k.dim}, metric has dim {m.dim}")
    kv = k.value(x)
    gamma = m.christoffel(x)
    d = k.partials(x) - np.einsum("dca,db->abc", gamma, kv) - np.einsum("dcb,ad->abc", gamma, kv)
    d = 0.5 * (d + np.transpose(d, (1, 0, 2)))
    return DenseTensor(d, (CO, CO, CO), (("sym", 0, 1),))


_DIM_LINE = re.compile(r"dim\s*=\s*(\S+)\s*$")
_SIG_LINE = re.compile(r"signature\s*=\s*(.+?)\s*$")


class SpecFileError(GeometryError):
    """File-format error with a byte offset into the file."""

    def __init__(self, message: str, source: str, offset: int, line: int):
        super().__init__(f"{source}: line {line}, byte offset {offset}: {message}")
        self.reason = message
        self.source = source
        self.offset = offset
        self.line = line


def iter_lines(text: str):
    """Yield (line number, byte offset of line start, stripped-right line) for content lines."""
    offset = 0
    for number, raw in enumerate(text.splitlines(keepends=True), start=1):
        line = raw.rstrip("\r\n")
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            yield number, offset, line
        offset += len(raw.encode("utf-8"))


def _byte_len(s: str) -> int:
    return len(s.encode("utf-8"))


def parse_signature(text: str) -> Signature:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise ValueError(f"signature must be 'p,q', got {text!r}")
    return Signature(int(parts[0]), int(parts[1]))


def parse_component_file(text: str, letter: str, source: str = "<string>"):
    """Parse ``dim = n`` / ``signature = p,q`` headers and ``<letter>[i][j] = expr`` lines.

    Returns (dim, signature or None, entries) with 0-based upper-triangle keys.
    """
    entry_re = re.compile(rf"\s*{letter}\s*\[\s*(\d+)\s*\]\s*\[\s*(\d+)\s*\]\s*=")
    dim = None
    signature = None
    entries = {}
    for number, start, line in iter_lines(text):
        lead = len(line) - len(line.lstrip())
        body = line.strip()
        if m := _DIM_LINE.match(body):
            if not m.group(1).isdigit() or not 2 <= int(m.group(1)) <= 8:
                raise SpecFileError("dim must be in 2..8", source, start + _byte_len(line[: lead + m.start(1)]), number)
            dim = int(m.group(1))
            continue
        if m := _SIG_LINE.match(body):
            try:
                signature = parse_signature(m.group(1))
            except ValueError as exc:
                raise SpecFileError(str(exc), source, start + _byte_len(line[: lead + m.start(1)]), number) from None
            continue
        m = entry_re.match(line)
        if not m:
            raise SpecFileError(f"expected 'dim = n' or '{letter}[i][j] = <expr>'", source, start + lead, number)
        if dim is None:
            raise SpecFileError("'dim = n' must precede component lines", source, start + lead, number)
        i, j = int(m.group(1)), int(m.group(2))
        if not (1 <= i <= j <= dim):
            raise SpecFileError(
                f"index [{i}][{j}] is not in the upper triangle of a {dim}x{dim} matrix", source, start + lead, number
            )
        if (i - 1, j - 1) in entries:
            raise SpecFileError(f"duplicate entry [{i}][{j}]", source, start + lead, number)
        src = line[m.end():]
        try:
            expr = parse_expression(src, dim)
        except ExpressionError as exc:
            raise SpecFileError(exc.reason, source, start + _byte_len(line[: m.end()]) + exc.offset, number) from None
        entries[(i - 1, j - 1)] = expr
    if dim is None:
        raise SpecFileError("missing 'dim = n' header", source, 0, 1)
    if signature is not None and signature.dim != dim:
        raise SpecFileError(f"signature {signature} does not match dim {dim}", source, 0, 1)
    return dim, signature, tuple(sorted(entries.items()))


def parse_metric_text(text: str, source: str = "<string>") -> ExpressionMetric:
    """Metric file: ``dim = n``, optional ``signature = p,q``, then ``g[i][j] = <expr>`` (1-based, i <= j).

    Missing upper-triangle entries are zero.
    """
    dim, signature, entries = parse_component_file(text, "g", source)
    return ExpressionMetric(dim, entries, signature)


def load_metric_file(path) -> ExpressionMetric:
    path = Path(path)
    return parse_metric_text(path.read_text(encoding="utf-8"), str(path))
