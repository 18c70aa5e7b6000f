"""Exact discretization of the forced weight ODE.

The n-th order scalar equation becomes a companion-form state system; one
sampling step is then exactly ``state <- e^{A tau} state`` plus, when a
supervision fires mid-step, an increment that adds ``kappa * zeta * g(t - h)``
to the weight trajectory from that point on.  No integration error is
introduced: matrix exponentials are the whole discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import OperatorParams, char_poly_first_order, char_poly_second_order
from .rootspace import NumericError, PolyCoeffs

__all__ = [
    "CompanionSystem",
    "DynamicsEngine",
    "WeightState",
    "StateBank",
    "companion_system",
    "matrix_exponential",
    "build_engine",
    "engine_from_poly",
    "step",
    "weight_value",
]

DIVERGENCE_THRESHOLD = 1e6

# Degree-13 diagonal Pade numerator coefficients and the 1-norm bound below
# which no scaling is needed (Higham's scaling-and-squaring constants).
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_PADE13_BOUND = 5.371920351148152


def matrix_exponential(m) -> np.ndarray:
    """e^M by scaling-and-squaring with the degree-13 diagonal Pade approximant."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix_exponential needs a square matrix")
    if not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite")
    norm = float(np.linalg.norm(a, 1))
    if norm == 0.0:
        return np.eye(a.shape[0])
    squarings = 0
    if norm > _PADE13_BOUND:
        squarings = int(math.ceil(math.log2(norm / _PADE13_BOUND)))
        a = a / 2.0**squarings
    n = a.shape[0]
    ident = np.eye(n)
    b = _PADE13
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6
        + b[5] * a4
        + b[3] * a2
        + b[1] * ident
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6
        + b[4] * a4
        + b[2] * a2
        + b[0] * ident
    )
    try:
        result = np.linalg.solve(v - u, v + u)
    except np.linalg.LinAlgError as exc:
        raise NumericError("Pade denominator is singular") from exc
    for _ in range(squarings):
        result = result @ result
    if not np.isfinite(result).all():
        raise NumericError("matrix exponential overflowed")
    return result


@dataclass(frozen=True)
class CompanionSystem:
    """Companion-form realization: 1s on the superdiagonal, -coeffs in the last row.

    The forcing enters through ``b_vector = (0, ..., 0, -1)``, so the transfer
    from input to the first state component is -1/p(s).
    """

    a_matrix: np.ndarray
    b_vector: np.ndarray

    @property
    def n(self) -> int:
        return self.a_matrix.shape[0]


def companion_system(poly: PolyCoeffs) -> CompanionSystem:
    n = poly.degree
    a = np.zeros((n, n))
    if n > 1:
        a[np.arange(n - 1), np.arange(1, n)] = 1.0
    a[-1, :] = -np.asarray(poly.coeffs)
    b = np.zeros(n)
    b[-1] = -1.0
    a.flags.writeable = False
    b.flags.writeable = False
    return CompanionSystem(a, b)


@dataclass(frozen=True)
class DynamicsEngine:
    """Precomputed one-step propagator for a weight ODE.

    ``step_matrix`` = e^{A tau} advances a free step; ``half_input`` =
    e^{A tau/2} B is the raw mid-step input map (B carries the -1).  ``kick``
    = -kappa * half_input is the state increment per unit gradient magnitude:
    because the input-to-weight transfer is -g, the extra minus makes a unit
    supervision add exactly +kappa * g(t - h) to the weight trajectory, with
    kappa = gamma/(mu*a1^2) for order-1 operators and -gamma/(mu*a2^2) for
    order-2 ones.
    """

    system: CompanionSystem
    tau: float
    kappa: float
    step_matrix: np.ndarray
    half_matrix: np.ndarray
    half_input: np.ndarray
    kick: np.ndarray
    divergence_threshold: float = DIVERGENCE_THRESHOLD

    @property
    def n(self) -> int:
        return self.system.n


def engine_from_poly(
    poly: PolyCoeffs,
    tau: float,
    kappa: float,
    divergence_threshold: float = DIVERGENCE_THRESHOLD,
) -> DynamicsEngine:
    """Build an engine directly from characteristic-polynomial coefficients."""
    if not tau > 0.0:
        raise ValueError("tau must be positive")
    system = companion_system(poly)
    full = matrix_exponential(system.a_matrix * tau)
    half = matrix_exponential(system.a_matrix * (tau / 2.0))
    half_input = half @ system.b_vector
    kick = -kappa * half_input
    for arr in (full, half, half_input, kick):
        arr.flags.writeable = False
    return DynamicsEngine(
        system, tau, kappa, full, half, half_input, kick, divergence_threshold
    )


def build_engine(
    params: OperatorParams, divergence_threshold: float = DIVERGENCE_THRESHOLD
) -> DynamicsEngine:
    """Engine for an operator-parameter set; stability is not required.

    Divergent regimes are legitimate study objects, so no Routh-Hurwitz gate
    is applied here.
    """
    if params.order == 1:
        poly = char_poly_first_order(params.theta, *params.alphas)
        kappa = params.gamma / (params.mu * params.alphas[1] ** 2)
    else:
        poly = char_poly_second_order(params.theta, *params.alphas)
        kappa = -params.gamma / (params.mu * params.alphas[2] ** 2)
    return engine_from_poly(poly, params.tau, kappa, divergence_threshold)


@dataclass
class WeightState:
    """State of one weight: its value and the n-1 derivatives."""

    vec: np.ndarray
    divergent: bool = False

    def __post_init__(self) -> None:
        self.vec = np.asarray(self.vec, dtype=float).reshape(-1)


def _advance(step_matrix: np.ndarray, values: np.ndarray) -> np.ndarray:
    # Elementwise accumulation in a fixed order: a column's result does not
    # depend on the batch width, so banks and single states agree bitwise.
    out = step_matrix[:, 0:1] * values[0:1]
    for k in range(1, step_matrix.shape[0]):
        out += step_matrix[:, k : k + 1] * values[k : k + 1]
    return out


def _step_block(engine: DynamicsEngine, values, divergent, zetas):
    out = _advance(engine.step_matrix, values)
    if zetas is not None:
        out += engine.kick[:, None] * np.asarray(zetas, dtype=float)[None, :]
    if not divergent.any():
        # Fast path: one scalar reduction; NaN fails the <= comparison too.
        peak = float(np.abs(out).max(initial=0.0))
        if peak <= engine.divergence_threshold:
            return out, divergent
    finite = np.isfinite(out).all(axis=0)
    bad = ~finite
    if bad.any():
        out[:, bad] = values[:, bad]
    with np.errstate(over="ignore", invalid="ignore"):
        peak_cols = np.abs(out).max(axis=0)
    flags = divergent | bad | (peak_cols > engine.divergence_threshold)
    if divergent.any():
        out[:, divergent] = values[:, divergent]
    return out, flags


class StateBank:
    """Dynamics states for a batch of weights, one column each, sharing an engine.

    Columns flagged divergent are frozen: their values stop updating so later
    arithmetic never touches overflowing numbers, but the flag keeps being
    reported.
    """

    __slots__ = ("values", "divergent")

    def __init__(self, n: int, count: int):
        self.values = np.zeros((n, count))
        self.divergent = np.zeros(count, dtype=bool)

    @property
    def count(self) -> int:
        return self.values.shape[1]

    def set_column(self, idx: int, vec) -> None:
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.shape[0] != self.values.shape[0]:
            raise ValueError(
                f"state vector must have length {self.values.shape[0]}, got {vec.shape[0]}"
            )
        self.values[:, idx] = vec

    def weight_values(self) -> np.ndarray:
        """Row of weight values (first state component), one per column."""
        return self.values[0]

    def step(self, engine: DynamicsEngine, zetas=None) -> None:
        self.values, self.divergent = _step_block(engine, self.values, self.divergent, zetas)


def step(engine: DynamicsEngine, state: WeightState, zeta=None) -> WeightState:
    """One sampling step for a single weight; ``zeta`` is the gradient magnitude.

    Without ``zeta`` the state evolves freely; with it the mid-step supervision
    impulse is applied.  ``zeta = 0`` and ``zeta = None`` coincide.
    """
    if state.vec.shape[0] != engine.n:
        raise ValueError(f"state dimension {state.vec.shape[0]} does not match engine {engine.n}")
    if state.divergent:
        return WeightState(state.vec.copy(), True)
    zetas = None if zeta is None else np.array([float(zeta)])
    values, flags = _step_block(
        engine, state.vec[:, None], np.array([False]), zetas
    )
    return WeightState(values[:, 0], bool(flags[0]))


def weight_value(state: WeightState) -> float:
    """The weight itself: component 0 of the state (flag or not)."""
    return float(state.vec[0])
