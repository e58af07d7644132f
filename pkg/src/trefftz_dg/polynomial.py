"""
Multivariate space-time polynomials.

A polynomial in one time variable ``t`` and ``d`` spatial variables is stored
as a mapping from exponent tuples ``(k, a_1, ..., a_d)`` to real coefficients,
where ``k`` is the time exponent.
"""

import itertools
import logging
from collections.abc import Iterable, Mapping, Sequence
from functools import cached_property

import numpy as np

from trefftz_dg.errors import DimensionMismatchError

log = logging.getLogger(__name__)

MAX_DEGREE = 32

TIME = "t"


def multi_indices(d: int, degree: int) -> list[tuple[int, ...]]:
    """
    All spatial multi-indices of length ``d`` with total degree <= ``degree``,
    ordered by total degree, then lexicographically (descending).
    """
    if degree < 0:
        return []
    indices = []
    for total in range(degree + 1):
        for alpha in itertools.product(range(total, -1, -1), repeat=d):
            if sum(alpha) == total:
                indices.append(alpha)
    return indices


class SpaceTimePolynomial:
    """
    Immutable space-time polynomial in canonical form (no stored zeros).

    Parameters
    ----------
    d : int
        Spatial dimension.
    coeffs : Mapping[tuple[int, ...], float]
        Map from ``(k, a_1, ..., a_d)`` to coefficient.
    """

    def __init__(self, d: int, coeffs: Mapping[tuple[int, ...], float] | None = None):
        if d < 1:
            raise DimensionMismatchError(f"Spatial dimension must be >= 1, got {d}")
        self.d = d
        canonical = {}
        for exponent, value in (coeffs or {}).items():
            exponent = tuple(int(e) for e in exponent)
            if len(exponent) != d + 1:
                raise DimensionMismatchError(
                    f"Exponent {exponent} does not match spatial dimension {d}"
                )
            if any(e < 0 for e in exponent):
                raise ValueError(f"Negative exponent in {exponent}")
            value = float(value)
            if value != 0.0:
                canonical[exponent] = canonical.get(exponent, 0.0) + value
                if canonical[exponent] == 0.0:
                    del canonical[exponent]
        self._coeffs = canonical
        if self.degree > MAX_DEGREE:
            raise ValueError(
                f"Polynomial degree {self.degree} exceeds the supported maximum {MAX_DEGREE}"
            )

    @classmethod
    def constant(cls, d: int, value: float = 1.0) -> "SpaceTimePolynomial":
        return cls(d, {(0,) * (d + 1): value})

    @classmethod
    def monomial(cls, d: int, k: int, alpha: Sequence[int], value: float = 1.0):
        return cls(d, {(k, *alpha): value})

    @classmethod
    def variable(cls, d: int, axis: str | int) -> "SpaceTimePolynomial":
        """The coordinate polynomial ``t`` (axis ``"t"``) or ``x_{axis+1}``."""
        exponent = [0] * (d + 1)
        exponent[_axis_position(d, axis)] = 1
        return cls(d, {tuple(exponent): 1.0})

    @property
    def coeffs(self) -> dict[tuple[int, ...], float]:
        return dict(self._coeffs)

    @cached_property
    def degree(self) -> int:
        if not self._coeffs:
            return 0
        return max(sum(exponent) for exponent in self._coeffs)

    def is_zero(self) -> bool:
        return not self._coeffs

    @cached_property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._coeffs:
            return np.zeros((0, self.d + 1), dtype=int), np.zeros(0)
        exponents = np.array(sorted(self._coeffs), dtype=int)
        values = np.array([self._coeffs[tuple(e)] for e in exponents])
        return exponents, values

    def evaluate(self, x, t) -> float | np.ndarray:
        """
        Evaluate at spatial point(s) ``x`` and time(s) ``t``.

        ``x`` has shape ``(d,)`` or ``(n, d)``; ``t`` is a scalar or shape ``(n,)``.
        Returns a float for a single point, an array of shape ``(n,)`` otherwise.
        """
        points, single = _stack_points(self.d, x, t)
        exponents, values = self._arrays
        result = monomial_values(exponents, points) @ values
        return float(result[0]) if single else result

    def derivative(self, axis: str | int) -> "SpaceTimePolynomial":
        """Exact derivative with respect to ``"t"`` or spatial index ``axis``."""
        position = _axis_position(self.d, axis)
        out = {}
        for exponent, value in self._coeffs.items():
            power = exponent[position]
            if power == 0:
                continue
            lowered = list(exponent)
            lowered[position] -= 1
            out[tuple(lowered)] = value * power
        return SpaceTimePolynomial(self.d, out)

    def gradient(self) -> list["SpaceTimePolynomial"]:
        return [self.derivative(i) for i in range(self.d)]

    def laplacian(self) -> "SpaceTimePolynomial":
        result = SpaceTimePolynomial(self.d)
        for i in range(self.d):
            result = result + self.derivative(i).derivative(i)
        return result

    def compose_linear(self, M) -> "SpaceTimePolynomial":
        """
        Return ``q`` with ``q(x, t) = p(M x, t)``.

        The expansion of ``(M x)^alpha`` is carried out with exact polynomial
        products of the linear forms ``(M x)_m``.
        """
        M = np.asarray(M, dtype=float)
        if M.shape != (self.d, self.d):
            raise DimensionMismatchError(
                f"Matrix of shape {M.shape} cannot act on dimension {self.d}"
            )
        linear_forms = [
            SpaceTimePolynomial(
                self.d,
                {(0, *np.eye(self.d, dtype=int)[j]): M[m, j] for j in range(self.d)},
            )
            for m in range(self.d)
        ]
        powers: dict[tuple[int, int], SpaceTimePolynomial] = {}

        def power(m: int, e: int) -> SpaceTimePolynomial:
            if e == 0:
                return SpaceTimePolynomial.constant(self.d)
            if (m, e) not in powers:
                powers[(m, e)] = power(m, e - 1) * linear_forms[m]
            return powers[(m, e)]

        result = {}
        for exponent, value in self._coeffs.items():
            term = SpaceTimePolynomial.monomial(self.d, exponent[0], (0,) * self.d, value)
            for m, e in enumerate(exponent[1:]):
                term = term * power(m, e)
            for key, coefficient in term._coeffs.items():
                result[key] = result.get(key, 0.0) + coefficient
        return SpaceTimePolynomial(self.d, result)

    def scale_variables(self, spatial_scale: float, time_scale: float = 1.0):
        """Return ``q(x, t) = p(spatial_scale * x, time_scale * t)``."""
        out = {}
        for exponent, value in self._coeffs.items():
            out[exponent] = value * time_scale ** exponent[0] * spatial_scale ** sum(exponent[1:])
        return SpaceTimePolynomial(self.d, out)

    def max_abs_coefficient(self) -> float:
        return max((abs(v) for v in self._coeffs.values()), default=0.0)

    def coefficient_vector(self, exponents: Sequence[tuple[int, ...]]) -> np.ndarray:
        return np.array([self._coeffs.get(tuple(e), 0.0) for e in exponents])

    def _check_compatible(self, other: "SpaceTimePolynomial"):
        if other.d != self.d:
            raise DimensionMismatchError(
                f"Cannot combine polynomials of dimension {self.d} and {other.d}"
            )

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = SpaceTimePolynomial.constant(self.d, other)
        self._check_compatible(other)
        out = dict(self._coeffs)
        for exponent, value in other._coeffs.items():
            out[exponent] = out.get(exponent, 0.0) + value
        return SpaceTimePolynomial(self.d, out)

    __radd__ = __add__

    def __neg__(self):
        return SpaceTimePolynomial(self.d, {e: -v for e, v in self._coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return SpaceTimePolynomial(self.d, {e: v * other for e, v in self._coeffs.items()})
        self._check_compatible(other)
        out: dict[tuple[int, ...], float] = {}
        for e1, v1 in self._coeffs.items():
            for e2, v2 in other._coeffs.items():
                key = tuple(a + b for a, b in zip(e1, e2))
                out[key] = out.get(key, 0.0) + v1 * v2
        return SpaceTimePolynomial(self.d, out)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpaceTimePolynomial):
            return NotImplemented
        return self.d == other.d and self._coeffs == other._coeffs

    def __hash__(self):
        return hash((self.d, frozenset(self._coeffs.items())))

    def __repr__(self) -> str:
        if not self._coeffs:
            return "SpaceTimePolynomial(0)"
        terms = []
        for exponent in sorted(self._coeffs, key=lambda e: (sum(e), e)):
            factors = []
            if exponent[0]:
                factors.append(f"t^{exponent[0]}")
            factors.extend(f"x{i + 1}^{e}" for i, e in enumerate(exponent[1:]) if e)
            terms.append(f"{self._coeffs[exponent]:g}" + "".join(f"*{f}" for f in factors))
        return f"SpaceTimePolynomial({' + '.join(terms)})"


def _axis_position(d: int, axis: str | int) -> int:
    if axis == TIME:
        return 0
    if isinstance(axis, (int, np.integer)) and 0 <= axis < d:
        return int(axis) + 1
    raise DimensionMismatchError(f"Axis {axis!r} is not 't' or a spatial index below {d}")


def _stack_points(d: int, x, t) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        single = True
        x = x.reshape(1, 1)
    elif x.ndim == 1 and x.shape[0] == d:
        single = True
        x = x[None, :]
    elif x.ndim == 1 and d == 1:
        single = False
        x = x[:, None]
    else:
        single = False
    if x.ndim != 2 or x.shape[1] != d:
        raise DimensionMismatchError(f"Points of shape {x.shape} given, expected dimension {d}")
    t = np.broadcast_to(np.asarray(t, dtype=float).reshape(-1), (x.shape[0],))
    return np.column_stack([t, x]), single


def monomial_values(exponents: np.ndarray, points: np.ndarray) -> np.ndarray:
    """
    Values of the monomials ``exponents`` (m, d+1) at ``points`` (n, d+1)
    whose first column is time. Returns shape (n, m).
    """
    if exponents.shape[0] == 0:
        return np.zeros((points.shape[0], 0))
    max_power = int(exponents.max())
    # powers[v][q, e] = points[q, v] ** e
    powers = points[:, :, None] ** np.arange(max_power + 1)[None, None, :]
    values = np.ones((points.shape[0], exponents.shape[0]))
    for v in range(points.shape[1]):
        values *= powers[:, v, exponents[:, v]]
    return values


class PolynomialStack:
    """
    A fixed list of polynomials sharing one monomial table, evaluated together.

    Used to tabulate whole bases at quadrature points with a single
    monomial evaluation.
    """

    def __init__(self, polynomials: Iterable[SpaceTimePolynomial], d: int):
        self.polynomials = list(polynomials)
        self.d = d
        exponents = sorted({e for p in self.polynomials for e in p._coeffs})
        self.exponents = (
            np.array(exponents, dtype=int) if exponents else np.zeros((0, d + 1), dtype=int)
        )
        self.matrix = np.column_stack(
            [p.coefficient_vector(exponents) for p in self.polynomials]
        ) if self.polynomials else np.zeros((len(exponents), 0))

    def __len__(self) -> int:
        return len(self.polynomials)

    def evaluate(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Values at points, shape (n, len(stack))."""
        points, _ = _stack_points(self.d, x, t)
        return monomial_values(self.exponents, points) @ self.matrix
