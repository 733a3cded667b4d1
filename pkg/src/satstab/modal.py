"""Finite-dimensional truncation of the controlled dynamics.

Assembles the unstable-subsystem matrices, the actuator coefficient table,
the projection/split of modal states, and the boundary lifting used when the
control enters through the wall slope with an integrator.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import CriticalLength
from .spectral import (
    BoundaryCondition,
    EigenSystem,
    composite_gauss_legendre,
    critical_set_member,
)


@dataclass(frozen=True)
class Indicator:
    """Characteristic-function actuator on the window (a, b)."""

    a: float
    b: float

    def __post_init__(self):
        if not 0.0 <= self.a:
            raise ValueError(f"indicator window must start at >= 0, got {self.a}")
        if not self.a < self.b:
            raise ValueError(f"indicator window ({self.a}, {self.b}) is empty")


@dataclass(frozen=True)
class ModeCombination:
    """Actuator shaped as a finite combination of eigenfunctions."""

    coefficients: tuple

    def __init__(self, coefficients):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in coefficients))
        if len(self.coefficients) == 0:
            raise ValueError("mode combination needs at least one coefficient")


@dataclass(frozen=True)
class Lifting:
    """Cubic lifting d(x) = x^3/L^2 - 2x^2/L + x carrying the wall input.

    d(0) = d(L) = 0, d'(0) = 1, d'(L) = 0; the transformed state sees the
    forcings a(x) = -lam * d''(x) and b(x) = -d(x).
    """

    length: float

    def d(self, x):
        L = self.length
        x = np.asarray(x, dtype=float)
        return x**3 / L**2 - 2.0 * x**2 / L + x

    def d1(self, x):
        L = self.length
        x = np.asarray(x, dtype=float)
        return 3.0 * x**2 / L**2 - 4.0 * x / L + 1.0

    def d2(self, x):
        L = self.length
        x = np.asarray(x, dtype=float)
        return 6.0 * x / L**2 - 4.0 / L

    def a(self, x, lam):
        return -lam * self.d2(x)

    def b(self, x):
        return -self.d(x)

    def d_norm_sq(self):
        return self.length**3 / 105.0

    def a_norm_sq(self, lam):
        return 4.0 * lam**2 / self.length


@dataclass(frozen=True)
class ModalSystem:
    """Truncation data: head matrices plus tail forcing coefficients.

    Internal mode: state z holds the n unstable modal coordinates,
    A = diag(sigma_1..sigma_n), B the head rows of the coefficient table.
    Boundary mode: state z = (u, w_1..w_n) with an integrator first row;
    a_tail carries the tail forcing proportional to u.
    """

    es: EigenSystem
    n: int
    A: np.ndarray
    B: np.ndarray
    b_tail: np.ndarray
    mode: str  # "internal" | "boundary"
    shape_norms_sq: np.ndarray
    a_tail: np.ndarray | None = None
    lifting: Lifting | None = None

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


def _indicator_closed_form(es, shape, count):
    """Analytic window integrals of the closed-form trig modes."""
    L = es.params.length
    out = np.empty(count)
    for row in range(count):
        k = int(es.mode_index[row])
        if k == 0:
            out[row] = (shape.b - shape.a) / math.sqrt(L)
            continue
        f = k * math.pi / L
        amp = math.sqrt(2.0 / L)
        if es.bc == BoundaryCondition.HINGED:
            out[row] = amp / f * (math.cos(f * shape.a) - math.cos(f * shape.b))
        else:
            out[row] = amp / f * (math.sin(f * shape.b) - math.sin(f * shape.a))
    return out


def _indicator_quadrature(es, shape, count):
    k_max = int(np.max(es.mode_index)) if len(es.mode_index) else 1
    width_fraction = (shape.b - shape.a) / es.params.length
    panels = max(4, int(math.ceil(1.5 * k_max * width_fraction)) + 2)
    rule = composite_gauss_legendre(shape.b - shape.a, panels)
    x = rule.nodes + shape.a
    return np.array(
        [rule.weights @ es.modes[row](x) for row in range(count)]
    )


def actuator_coefficients(es, shapes, count=None):
    """Coefficient table <b_k, e_j> for j < count, one column per channel.

    Hinged/Neumann indicator windows use the analytic integrals; everything
    else goes through quadrature.
    """
    if count is None:
        count = es.count
    if count > es.count:
        raise ValueError(f"requested {count} rows but only {es.count} modes computed")
    cols = []
    for shape in shapes:
        if isinstance(shape, Indicator):
            if shape.b > es.params.length:
                raise ValueError(
                    f"indicator window ends at {shape.b} beyond length {es.params.length}"
                )
            if es.bc in (BoundaryCondition.HINGED, BoundaryCondition.NEUMANN_CH) and (
                es.solver == "closed-form"
            ):
                cols.append(_indicator_closed_form(es, shape, count))
            else:
                cols.append(_indicator_quadrature(es, shape, count))
        elif isinstance(shape, ModeCombination):
            c = np.zeros(count)
            coeffs = np.asarray(shape.coefficients)
            if len(coeffs) > es.count:
                raise ValueError("mode combination longer than the retained basis")
            c[: min(count, len(coeffs))] = coeffs[:count]
            cols.append(c)
        else:
            raise TypeError(f"unknown actuator shape {shape!r}")
    return np.column_stack(cols) if cols else np.zeros((count, 0))


def actuator_norms_sq(es, shapes):
    """Squared L2 norms of the actuator shape functions."""
    out = []
    for shape in shapes:
        if isinstance(shape, Indicator):
            out.append(shape.b - shape.a)
        elif isinstance(shape, ModeCombination):
            out.append(float(np.sum(np.asarray(shape.coefficients) ** 2)))
        else:
            raise TypeError(f"unknown actuator shape {shape!r}")
    return np.array(out)


def assemble_internal(es, coeffs, n, shape_norms_sq=None):
    """Head/tail split of the internally actuated modal dynamics."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    if coeffs.shape[0] != es.count:
        raise ValueError("coefficient table must have one row per retained mode")
    if shape_norms_sq is None:
        shape_norms_sq = np.sum(coeffs**2, axis=0)
    return ModalSystem(
        es=es,
        n=n,
        A=np.diag(es.values[:n]),
        B=coeffs[:n].copy(),
        b_tail=coeffs[n:].copy(),
        mode="internal",
        shape_norms_sq=np.asarray(shape_norms_sq, dtype=float),
    )


def assemble_boundary(es, lifting, n, critical_tol=1e-8):
    """Integrator-augmented system for wall-slope actuation.

    State z = (u, w_1..w_n): the first equation integrates the saturated
    input, the modal rows see sigma_j w_j + a_j u + b_j sat(h).  Requires the
    clamped family and an anti-diffusion coefficient outside the critical
    set, otherwise the augmented pair is not stabilizable.
    """
    if es.bc != BoundaryCondition.CLAMPED:
        raise ValueError("boundary assembly requires the clamped family")
    if critical_set_member(es.params.lam, critical_tol):
        raise CriticalLength(
            f"anti-diffusion coefficient {es.params.lam} lies in the critical set; "
            "the boundary pair is not stabilizable"
        )
    x = es.quadrature.nodes
    w = es.quadrature.weights
    a_vals = lifting.a(x, es.params.lam)
    b_vals = lifting.b(x)
    a_coeff = es.basis @ (w * a_vals)
    b_coeff = es.basis @ (w * b_vals)

    A = np.zeros((n + 1, n + 1))
    A[1:, 0] = a_coeff[:n]
    A[1:, 1:] = np.diag(es.values[:n])
    B = np.concatenate(([1.0], b_coeff[:n]))[:, None]
    return ModalSystem(
        es=es,
        n=n,
        A=A,
        B=B,
        b_tail=b_coeff[n:, None].copy(),
        mode="boundary",
        shape_norms_sq=np.array([lifting.d_norm_sq()]),
        a_tail=a_coeff[n:].copy(),
        lifting=lifting,
    )


def project(state, n):
    """Split modal coefficients into the leading n entries and the tail."""
    state = np.asarray(state, dtype=float)
    if state.shape[0] < n:
        raise ValueError(f"state of length {state.shape[0]} cannot hold {n} head modes")
    return state[:n].copy(), state[n:].copy()


def _multiplicity_groups(values, tol=1e-9):
    groups = []
    start = 0
    for j in range(1, len(values) + 1):
        if j == len(values) or abs(values[j] - values[start]) > tol * max(
            1.0, abs(values[start])
        ):
            groups.append(list(range(start, j)))
            start = j
    return groups


def suggest_actuators(es, shapes, n):
    """Extra channels restoring controllability under repeated eigenvalues.

    Returns one mode-combination shape per level of the largest eigenvalue
    multiplicity among the unstable modes; the k-th suggestion excites the
    (k+1)-th member of every multiplicity group, which completes the rank of
    the controllability matrix.  Empty when the current shapes already pass.
    """
    coeffs = actuator_coefficients(es, shapes, n)
    A = np.diag(es.values[:n])
    if n == 0:
        return []
    kalman = np.hstack([np.linalg.matrix_power(A, i) @ coeffs for i in range(n)])
    if np.linalg.matrix_rank(kalman) == n:
        return []
    groups = _multiplicity_groups(es.values[:n])
    extra = max(len(g) for g in groups)
    suggestions = []
    for level in range(extra):
        c = np.zeros(n)
        for g in groups:
            if level < len(g):
                c[g[level]] = 1.0
        suggestions.append(ModeCombination(c))
    return suggestions
