"""Physical operator parameters and their characteristic polynomials.

Maps the knobs of the learning operator (dissipation rate theta, regularizer
weights alpha, sign gamma, mass mu) to polynomial coefficients and back,
checks Routh-Hurwitz stability, and designs root sets with a prescribed
memory span.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .rootspace import NumericError, PolyCoeffs, RootSet, characteristic_poly

__all__ = [
    "OperatorParams",
    "StabilityCondition",
    "StabilityReport",
    "DesignSpec",
    "DesignWarning",
    "InfeasibleRootsError",
    "SecondOrderParameterization",
    "char_poly_first_order",
    "char_poly_second_order",
    "poly_from_params",
    "routh_hurwitz",
    "poly_roots",
    "params_from_roots_first_order",
    "params_from_roots_second_order",
    "design_roots",
]


class InfeasibleRootsError(ValueError):
    """The requested roots cannot be produced by any (theta, alpha) choice."""


class DesignWarning(UserWarning):
    """A designed root set deviates from the dissipation balance."""


@dataclass(frozen=True)
class OperatorParams:
    """Knobs of one learning operator.

    ``order`` is the order of the regularizing differential operator: order 1
    uses ``alphas = (a0, a1)`` and yields a degree-2 characteristic
    polynomial, order 2 uses ``(a0, a1, a2)`` and yields degree 4.  ``gamma``
    (+1 or -1) flips the supervision forcing, ``mu`` is the weight mass and
    ``tau`` the sampling step.
    """

    order: int
    theta: float
    alphas: tuple[float, ...]
    gamma: int = -1
    mu: float = 1.0
    tau: float = 0.01

    def __post_init__(self) -> None:
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.order not in (1, 2):
            raise ValueError("operator order must be 1 or 2")
        if len(self.alphas) != self.order + 1:
            raise ValueError(f"order {self.order} needs {self.order + 1} alpha coefficients")
        if self.alphas[-1] == 0.0:
            raise ValueError("the leading alpha coefficient must be nonzero")
        if not self.theta > 0.0:
            raise ValueError("theta must be positive")
        if not self.mu > 0.0:
            raise ValueError("mu must be positive")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if self.gamma not in (-1, 1):
            raise ValueError("gamma must be -1 or +1")


def char_poly_first_order(theta: float, alpha0: float, alpha1: float) -> PolyCoeffs:
    """Degree-2 characteristic polynomial s**2 + theta*s + beta of the order-1 operator."""
    if alpha1 == 0.0:
        raise ValueError("alpha1 must be nonzero")
    beta = (alpha0 * alpha1 * theta - alpha0**2) / alpha1**2
    return PolyCoeffs((beta, theta))


def char_poly_second_order(theta: float, alpha0: float, alpha1: float, alpha2: float) -> PolyCoeffs:
    """Degree-4 characteristic polynomial of the order-2 operator; b3 = 2*theta always."""
    if alpha2 == 0.0:
        raise ValueError("alpha2 must be nonzero")
    a2sq = alpha2**2
    b0 = (alpha0 * alpha2 * theta**2 - alpha0 * alpha1 * theta + alpha0**2) / a2sq
    b1 = (alpha1 * alpha2 * theta**2 + (2 * alpha0 * alpha2 - alpha1**2) * theta) / a2sq
    b2 = (a2sq * theta**2 + alpha1 * alpha2 * theta + 2 * alpha0 * alpha2 - alpha1**2) / a2sq
    b3 = 2.0 * theta
    return PolyCoeffs((b0, b1, b2, b3))


def poly_from_params(params: OperatorParams) -> PolyCoeffs:
    if params.order == 1:
        return char_poly_first_order(params.theta, *params.alphas)
    return char_poly_second_order(params.theta, *params.alphas)


@dataclass(frozen=True)
class StabilityCondition:
    name: str
    satisfied: bool
    margin: float


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    conditions: tuple[StabilityCondition, ...]

    def margin(self, name: str) -> float:
        for cond in self.conditions:
            if cond.name == name:
                return cond.margin
        raise KeyError(name)


def routh_hurwitz(poly: PolyCoeffs) -> StabilityReport:
    """Routh-Hurwitz verdict for monic polynomials of degree 2 or 4.

    Degree 2 requires both coefficients positive; degree 4 additionally needs
    b3*b2 > b1 and b3*b2*b1 > b1**2 + b3**2*b0.  Margins are reported as
    lhs - rhs, so positive means satisfied.
    """
    c = poly.coeffs
    if poly.degree == 2:
        conds = [
            StabilityCondition("b1 > 0", c[1] > 0.0, c[1]),
            StabilityCondition("b0 > 0", c[0] > 0.0, c[0]),
        ]
    elif poly.degree == 4:
        b0, b1, b2, b3 = c
        conds = [StabilityCondition(f"b{q} > 0", c[q] > 0.0, c[q]) for q in range(4)]
        conds.append(StabilityCondition("b3*b2 > b1", b3 * b2 > b1, b3 * b2 - b1))
        conds.append(
            StabilityCondition(
                "b3*b2*b1 > b1^2 + b3^2*b0",
                b3 * b2 * b1 > b1**2 + b3**2 * b0,
                b3 * b2 * b1 - b1**2 - b3**2 * b0,
            )
        )
    else:
        raise ValueError(f"unsupported polynomial degree {poly.degree} (expected 2 or 4)")
    return StabilityReport(all(cond.satisfied for cond in conds), tuple(conds))


def poly_roots(poly: PolyCoeffs, max_iter: int = 500, tol: float = 1e-12) -> RootSet:
    """All roots with multiplicities via Durand-Kerner iteration.

    Deterministic start on a complex circle at the Cauchy bound; after the
    sweep the roots are clustered into multiplicities and conjugate-snapped.
    A root of multiplicity m is simple on the (m-1)-th derivative, so cluster
    means are polished there by a few Newton steps (the plain iteration stalls
    near sqrt(eps) accuracy at multiple roots).  The residual of the monic
    polynomial at every root must stay below 1e-8 times the coefficient norm.
    """
    coeffs = poly.full()
    n = poly.degree
    descending = coeffs[::-1]
    radius = 1.0 + float(np.abs(coeffs[:-1]).max())
    z = radius * (0.4 + 0.9j) ** np.arange(1, n + 1)
    for _ in range(max_iter):
        values = np.polyval(descending, z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        steps = values / diff.prod(axis=1)
        z = z - steps
        if np.abs(steps).max() < tol * (1.0 + np.abs(z).max()):
            break
    roots = RootSet.from_values(z)
    if any(mult > 1 for _, mult in roots.roots):
        polished: list[complex] = []
        for value, mult in roots.roots:
            if mult > 1:
                deriv = descending
                for _ in range(mult - 1):
                    deriv = np.polyder(deriv)
                slope = np.polyder(deriv)
                for _ in range(8):
                    denom = np.polyval(slope, value)
                    if denom == 0:
                        break
                    value = value - np.polyval(deriv, value) / denom
            polished.extend([value] * mult)
        roots = RootSet.from_values(polished)
    norm = float(np.linalg.norm(coeffs))
    for value, _ in roots.roots:
        if abs(np.polyval(descending, value)) >= 1e-8 * norm:
            raise NumericError("root iteration did not converge to the requested residual")
    return roots


def params_from_roots_first_order(lam1: float, lam2: float) -> tuple[float, tuple[float, float]]:
    """Recover theta and the alpha0/alpha1 candidates from two real negative roots.

    theta = -(lam1 + lam2); the ratio nu = alpha0/alpha1 solves
    nu**2 - theta*nu + beta = 0, whose roots are exactly (-lam1, -lam2).
    """
    for lam in (lam1, lam2):
        if isinstance(lam, complex) and abs(lam.imag) > 0.0:
            raise ValueError("first-order design handles real roots only")
    lam1, lam2 = float(np.real(lam1)), float(np.real(lam2))
    if lam1 >= 0.0 or lam2 >= 0.0:
        raise ValueError("roots must be negative for a stable first-order design")
    theta = -(lam1 + lam2)
    nus = tuple(sorted((-lam1, -lam2)))
    return theta, nus


@dataclass(frozen=True)
class SecondOrderParameterization:
    """Feasible (nu0, nu1) = (alpha0/alpha2, alpha1/alpha2) branches for given roots.

    ``branches`` holds (nu0, nu1, alpha1) triples where alpha1 is the value
    implied by fixing alpha0 = alpha2 = 1; every branch reproduces the same
    characteristic polynomial.
    """

    theta: float
    branches: tuple[tuple[float, float, float], ...]


def params_from_roots_second_order(roots: RootSet) -> SecondOrderParameterization:
    """Invert a degree-4 root set into operator parameters.

    Checks the coefficient constraint b1 = b3*b2/2 - b3**3/8 that any
    (theta, alpha) parameterization must satisfy, then solves the quartic in
    nu1 and keeps every branch with nu0 > 0 and nu1 > 0.
    """
    if roots.n != 4:
        raise ValueError("second-order inversion needs a degree-4 root set")
    total = sum(v * r for v, r in roots.roots)
    theta = -total.real / 2.0
    if theta <= 0.0:
        raise InfeasibleRootsError("root sum implies a nonpositive theta")
    poly = characteristic_poly(roots)
    b0, b1, b2, b3 = poly.coeffs
    target = b3 * b2 / 2.0 - b3**3 / 8.0
    if abs(b1 - target) > 1e-8 * max(1.0, abs(b1)):
        raise InfeasibleRootsError(
            f"roots violate the coefficient relation b1 = b3*b2/2 - b3^3/8 "
            f"({b1:.6g} vs {target:.6g}); no (theta, alpha) set produces them"
        )
    quartic = PolyCoeffs(
        (
            2.0 * theta * b1 + b1**2 / theta**2 - 4.0 * b0,
            -2.0 * theta**3 - 4.0 * b1,
            5.0 * theta**2 + 2.0 * b1 / theta,
            -4.0 * theta,
        )
    )
    candidates = poly_roots(quartic)
    branches = []
    for value, _ in candidates.roots:
        if abs(value.imag) > 0.0 or value.real <= 0.0:
            continue
        nu1 = value.real
        nu0 = (b1 + nu1**2 * theta - nu1 * theta**2) / (2.0 * theta)
        if nu0 <= 0.0:
            continue
        alpha1 = (nu0 * theta**2 + nu0**2 - b0) / (nu0 * theta)
        branches.append((nu0, nu1, alpha1))
    if not branches:
        raise InfeasibleRootsError("no real positive (nu0, nu1) branch exists for these roots")
    return SecondOrderParameterization(theta, tuple(sorted(branches)))


@dataclass(frozen=True)
class DesignSpec:
    """Root design: a slow memory root -1/memory_span plus three fast real roots.

    ``fractions`` place the fast roots at -fraction*theta; with the default
    split (0.60, 0.65, 0.75) they sum to 2, so the designed roots satisfy the
    dissipation balance -sum(roots) = 2*theta up to the 1/memory_span term.
    """

    memory_span: float
    fractions: tuple[float, float, float] = (0.60, 0.65, 0.75)

    def __post_init__(self) -> None:
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        if not self.memory_span > 0.0:
            raise ValueError("memory_span must be positive")
        if len(self.fractions) != 3 or any(f <= 0.0 for f in self.fractions):
            raise ValueError("fractions must be three positive numbers")


def design_roots(spec: DesignSpec, theta: float) -> RootSet:
    """Build the designed degree-4 root set for a dissipation rate theta.

    Emits a :class:`DesignWarning` when -sum(roots) strays from 2*theta by
    more than 1e-6, which happens when the memory root -1/memory_span is not
    small against theta.
    """
    if not theta > 0.0:
        raise ValueError("theta must be positive")
    values = [-1.0 / spec.memory_span] + [-f * theta for f in spec.fractions]
    imbalance = -sum(values) - 2.0 * theta
    if abs(imbalance) > 1e-6 * max(1.0, 2.0 * theta):
        warnings.warn(
            f"designed roots miss the dissipation balance -sum = 2*theta by {imbalance:.3g}; "
            "the memory root is not small against theta",
            DesignWarning,
            stacklevel=2,
        )
    return RootSet.from_values(values)
