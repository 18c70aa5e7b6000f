"""Closed-form machinery for n-th order linear constant-coefficient ODEs.

Everything here is synthesized from the characteristic roots.  The impulse
response g(t) comes from a partial-fraction expansion of 1/p(s); the
zero-input solution y(t) from a confluent Vandermonde system pinned to the
initial conditions.  Conjugate root pairs are evaluated in a real
trigonometric form, so sampled responses never carry imaginary residue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CLUSTER_TOL",
    "NumericError",
    "RootSet",
    "PolyCoeffs",
    "CoefficientSet",
    "characteristic_poly",
    "partial_fraction_coefficients",
    "impulse_response_eval",
    "homogeneous_coefficients",
    "homogeneous_eval",
    "closed_form_response",
    "closed_form_on_grid",
    "expansion_terms",
]

# Relative tolerance used to merge numerically coincident roots and to decide
# whether a root counts as real.
CLUSTER_TOL = 1e-6


class NumericError(RuntimeError):
    """A numerical routine could not produce a trustworthy result."""


def _scale(values) -> float:
    return 1.0 + max(abs(complex(v)) for v in values)


@dataclass(frozen=True)
class RootSet:
    """Characteristic roots with multiplicities, ``roots = ((value, mult), ...)``.

    Non-real values must appear in conjugate pairs of equal multiplicity, and
    distinct values must be separated by more than the clustering tolerance;
    numerically coincident values belong in one entry with a higher
    multiplicity (see :meth:`from_values`).
    """

    roots: tuple[tuple[complex, int], ...]

    def __post_init__(self) -> None:
        entries = tuple((complex(v), int(r)) for v, r in self.roots)
        if not entries:
            raise ValueError("a RootSet needs at least one root")
        if any(r < 1 for _, r in entries):
            raise ValueError("multiplicities must be >= 1")
        object.__setattr__(self, "roots", entries)
        values = [v for v, _ in entries]
        tol = CLUSTER_TOL * _scale(values)
        for a in range(len(values)):
            for b in range(a + 1, len(values)):
                if abs(values[a] - values[b]) <= tol:
                    raise ValueError(
                        f"roots {values[a]} and {values[b]} coincide within the "
                        "clustering tolerance; merge them into one multiplicity"
                    )
        for v, r in entries:
            if abs(v.imag) <= tol:
                continue
            partners = [r2 for v2, r2 in entries if abs(v2 - v.conjugate()) <= tol]
            if not partners or partners[0] != r:
                raise ValueError(
                    f"non-real root {v} lacks a conjugate partner of equal multiplicity"
                )

    @property
    def n(self) -> int:
        """Total degree, multiplicities included."""
        return sum(r for _, r in self.roots)

    def min_decay_rate(self) -> float:
        """Smallest |Re| over the roots; sets the slowest time scale."""
        return min(abs(v.real) for v, _ in self.roots)

    def max_real_part(self) -> float:
        return max(v.real for v, _ in self.roots)

    @classmethod
    def from_values(cls, values, tol: float = CLUSTER_TOL) -> "RootSet":
        """Cluster near-coincident values into multiplicities, snapping conjugates.

        Values within ``tol * (1 + max|value|)`` of each other are merged into
        a single root at their mean.  Clusters with a tiny imaginary part are
        flattened to real roots; the rest must pair up into exact conjugates.
        """
        vals = [complex(v) for v in values]
        if not vals:
            raise ValueError("no roots given")
        eps = tol * _scale(vals)
        clusters: list[list[complex]] = []
        for v in sorted(vals, key=lambda z: (z.real, z.imag)):
            for members in clusters:
                if abs(v - sum(members) / len(members)) <= eps:
                    members.append(v)
                    break
            else:
                clusters.append([v])
        merged = [(sum(c) / len(c), len(c)) for c in clusters]
        out: list[tuple[complex, int]] = []
        used = [False] * len(merged)
        for i, (v, r) in enumerate(merged):
            if used[i]:
                continue
            used[i] = True
            if abs(v.imag) <= eps:
                out.append((complex(v.real), r))
                continue
            for j in range(i + 1, len(merged)):
                v2, r2 = merged[j]
                if not used[j] and r2 == r and abs(v2 - v.conjugate()) <= 2 * eps:
                    used[j] = True
                    z = (v + v2.conjugate()) / 2
                    if z.imag < 0:
                        z = z.conjugate()
                    out.extend([(z, r), (z.conjugate(), r)])
                    break
            else:
                raise ValueError(f"non-real root {v} lacks a conjugate partner")
        return cls(tuple(out))


@dataclass(frozen=True)
class PolyCoeffs:
    """Real monic polynomial; ``coeffs[q]`` multiplies s**q, the leading 1 is implicit."""

    coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        c = tuple(float(v) for v in self.coeffs)
        if not c:
            raise ValueError("polynomial degree must be >= 1")
        if not all(math.isfinite(v) for v in c):
            raise ValueError("polynomial coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def full(self) -> np.ndarray:
        """Ascending coefficient vector including the leading 1."""
        return np.append(np.asarray(self.coeffs, dtype=float), 1.0)

    def __call__(self, s):
        return np.polyval(self.full()[::-1], s)


@dataclass(frozen=True)
class CoefficientSet:
    """Expansion coefficients grouped per root.

    ``per_root[j][i-1]`` pairs with the mode ``t**(i-1) * exp(root_j * t)``;
    ``kind`` records whether they expand the impulse response (where the
    coefficient of ``1/(s-root)**i`` still carries a 1/(i-1)! on inversion) or
    the homogeneous solution (plain basis coefficients).
    """

    per_root: tuple[tuple[complex, ...], ...]
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in ("impulse-response", "homogeneous"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        object.__setattr__(
            self, "per_root", tuple(tuple(complex(c) for c in grp) for grp in self.per_root)
        )


def characteristic_poly(roots: RootSet) -> PolyCoeffs:
    """Expand ``prod (s - root)**mult`` into monic real coefficients."""
    p = np.ones(1, dtype=complex)
    for value, mult in roots.roots:
        factor = np.array([-value, 1.0], dtype=complex)
        for _ in range(mult):
            p = np.convolve(p, factor)
    residue = np.abs(p.imag).max()
    if residue > 1e-12 * max(1.0, np.abs(p).max()):
        raise ValueError("root set is not conjugate-symmetric: complex coefficients remain")
    return PolyCoeffs(tuple(p.real[:-1]))


def _power_poly(value: complex, m: int) -> np.ndarray:
    """Ascending coefficients of (s - value)**m."""
    p = np.ones(1, dtype=complex)
    factor = np.array([-value, 1.0], dtype=complex)
    for _ in range(m):
        p = np.convolve(p, factor)
    return p


def partial_fraction_coefficients(roots: RootSet) -> CoefficientSet:
    """Coefficients of ``1/prod(s-root_j)**r_j = sum_j sum_i c_ji/(s-root_j)**i``.

    Each unknown c_ji multiplies the polynomial
    ``(s-root_j)**(r_j-i) * prod_{k!=j}(s-root_k)**r_k`` of degree n-i; matching
    the expansion against the constant 1 gives a square linear system, solved
    by LU with partial pivoting.
    """
    n = roots.n
    entries = roots.roots
    columns: list[np.ndarray] = []
    for j, (value, mult) in enumerate(entries):
        others = np.ones(1, dtype=complex)
        for k, (v2, m2) in enumerate(entries):
            if k != j:
                others = np.convolve(others, _power_poly(v2, m2))
        for i in range(1, mult + 1):
            num = np.convolve(others, _power_poly(value, mult - i))
            col = np.zeros(n, dtype=complex)
            col[: num.size] = num
            columns.append(col)
    system = np.column_stack(columns)
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = 1.0
    try:
        c = np.linalg.solve(system, rhs)
        # one step of iterative refinement: the residual is computed to full
        # precision, so this squeezes the forward error well below the
        # reconstruction tolerance even for clustered roots
        c -= np.linalg.solve(system, system @ c - rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            "partial-fraction system is singular; merge numerically coincident roots"
        ) from exc
    grouped, pos = [], 0
    for _, mult in entries:
        grouped.append(tuple(c[pos : pos + mult]))
        pos += mult
    return CoefficientSet(tuple(grouped), "impulse-response")


def _check_alignment(coeffs: CoefficientSet, roots: RootSet) -> None:
    if len(coeffs.per_root) != len(roots.roots) or any(
        len(grp) != mult for grp, (_, mult) in zip(coeffs.per_root, roots.roots)
    ):
        raise ValueError("coefficient set does not match the root set layout")


def expansion_terms(coeffs: CoefficientSet, roots: RootSet):
    """Flatten to ``(rate, power, coefficient)`` triples of sum coef*t**power*e^{rate t}.

    Impulse-response coefficients are rescaled by 1/(i-1)! so the triples are
    the exact inverse transform of c/(s-rate)**i; homogeneous coefficients
    already multiply the plain basis.
    """
    _check_alignment(coeffs, roots)
    impulse = coeffs.kind == "impulse-response"
    terms = []
    for (value, _), grp in zip(roots.roots, coeffs.per_root):
        for i, c in enumerate(grp, start=1):
            coef = c / math.factorial(i - 1) if impulse else c
            terms.append((value, i - 1, coef))
    return tuple(terms)


def _time_array(t):
    arr = np.asarray(t, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _eval_real(coeffs: CoefficientSet, roots: RootSet, t_arr: np.ndarray) -> np.ndarray:
    """Real-form evaluation; conjugate pairs collapse to cos/sin envelopes."""
    _check_alignment(coeffs, roots)
    entries = roots.roots
    tol = CLUSTER_TOL * _scale([v for v, _ in entries])
    impulse = coeffs.kind == "impulse-response"

    def scaled(j):
        return [
            c / math.factorial(i) if impulse else c
            for i, c in enumerate(coeffs.per_root[j])
        ]

    out = np.zeros_like(t_arr)
    consumed = [False] * len(entries)
    for j, (value, mult) in enumerate(entries):
        if consumed[j]:
            continue
        consumed[j] = True
        cs = scaled(j)
        if abs(value.imag) <= tol:
            envelope = np.exp(value.real * t_arr)
            for p, c in enumerate(cs):
                out += c.real * t_arr**p * envelope
            continue
        partner = next(
            (
                k
                for k, (v2, _) in enumerate(entries)
                if not consumed[k] and abs(v2 - value.conjugate()) <= tol
            ),
            None,
        )
        if partner is None:
            raise ValueError(f"non-real root {value} lacks a conjugate partner")
        consumed[partner] = True
        other = scaled(partner)
        lam = value
        if lam.imag < 0:
            lam, cs, other = lam.conjugate(), other, cs
        envelope = np.exp(lam.real * t_arr)
        cos_wt = np.cos(lam.imag * t_arr)
        sin_wt = np.sin(lam.imag * t_arr)
        for p in range(mult):
            c = (cs[p] + other[p].conjugate()) / 2
            out += 2.0 * t_arr**p * envelope * (c.real * cos_wt - c.imag * sin_wt)
    return out


def impulse_response_eval(coeffs: CoefficientSet, roots: RootSet, t):
    """Evaluate the causal impulse response g(t); negative times are rejected."""
    if coeffs.kind != "impulse-response":
        raise ValueError("expected impulse-response coefficients")
    arr, scalar = _time_array(t)
    if np.any(arr < 0.0):
        raise ValueError("the impulse response is causal: t >= 0 required")
    vals = _eval_real(coeffs, roots, arr)
    return float(vals[0]) if scalar else vals


def homogeneous_coefficients(roots: RootSet, ic) -> CoefficientSet:
    """Basis coefficients of the zero-input solution matching the initial conditions.

    Row v of the confluent system is the v-th derivative of t**(i-1) e^{lam t}
    at t=0, which is C(v, i-1) * (i-1)! * lam**(v-i+1) for v >= i-1 and zero
    below; simple roots reduce it to the plain Vandermonde rows lam**v.
    """
    y0 = np.asarray(ic, dtype=float)
    n = roots.n
    if y0.shape != (n,):
        raise ValueError(f"initial conditions must have length {n}, got shape {y0.shape}")
    system = np.zeros((n, n), dtype=complex)
    col = 0
    for value, mult in roots.roots:
        for i in range(1, mult + 1):
            for v in range(n):
                if v >= i - 1:
                    system[v, col] = (
                        math.comb(v, i - 1) * math.factorial(i - 1) * value ** (v - i + 1)
                    )
            col += 1
    try:
        k = np.linalg.solve(system, y0.astype(complex))
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            "initial-condition system is singular; merge numerically coincident roots"
        ) from exc
    grouped, pos = [], 0
    for _, mult in roots.roots:
        grouped.append(tuple(k[pos : pos + mult]))
        pos += mult
    return CoefficientSet(tuple(grouped), "homogeneous")


def homogeneous_eval(coeffs: CoefficientSet, roots: RootSet, t):
    """Evaluate the zero-input solution.

    Unlike g(t) this is defined on all of R; negative times are allowed (they
    feed, for example, centered finite-difference checks of the initial
    conditions).
    """
    if coeffs.kind != "homogeneous":
        raise ValueError("expected homogeneous coefficients")
    arr, scalar = _time_array(t)
    vals = _eval_real(coeffs, roots, arr)
    return float(vals[0]) if scalar else vals


def closed_form_response(roots: RootSet, ic, impulses, t):
    """Zero-input response plus superposed impulse tails.

    ``impulses`` is a sequence of ``(time, magnitude)`` with strictly
    increasing times; magnitudes must already carry the signed gain, so each
    contributes ``magnitude * g(t - time)`` once its time has passed.  This is
    the grid-free oracle the discretized engine is checked against.
    """
    arr, scalar = _time_array(t)
    impulses = list(impulses)
    for (h0, _), (h1, _) in zip(impulses, impulses[1:]):
        if not h1 > h0:
            raise ValueError("impulse times must be strictly increasing")
    out = np.zeros_like(arr)
    if ic is not None and np.any(np.asarray(ic, dtype=float) != 0.0):
        k = homogeneous_coefficients(roots, ic)
        out += _eval_real(k, roots, arr)
    if impulses:
        g = partial_fraction_coefficients(roots)
        for h, m in impulses:
            mask = arr >= h
            if mask.any():
                out[mask] += m * _eval_real(g, roots, arr[mask] - h)
    return float(out[0]) if scalar else out


def closed_form_on_grid(roots: RootSet, ic, magnitudes, tau: float) -> np.ndarray:
    """Trajectory y(K*tau), K = 0..len(magnitudes), impulses fired at (K+1/2)*tau.

    Algebraic regrouping of :func:`closed_form_response` for grid evaluation:
    with distinct roots every impulse tail is a pure exponential, so per-root
    prefix sums evaluate the whole train in one pass over the grid.  Repeated
    roots fall back to direct superposition.
    """
    mags = np.asarray(magnitudes, dtype=float)
    if mags.ndim != 1:
        raise ValueError("magnitudes must be a 1-d sequence, one entry per step")
    steps = mags.size
    grid = tau * np.arange(steps + 1)
    out = np.zeros(steps + 1)
    if ic is not None and np.any(np.asarray(ic, dtype=float) != 0.0):
        k = homogeneous_coefficients(roots, ic)
        out += _eval_real(k, roots, grid)
    if steps == 0 or not mags.any():
        return out
    fire = (np.arange(steps) + 0.5) * tau
    coeffs = partial_fraction_coefficients(roots)
    if all(mult == 1 for _, mult in roots.roots):
        acc = np.zeros(steps + 1, dtype=complex)
        for (value, _), grp in zip(roots.roots, coeffs.per_root):
            prefix = np.concatenate(([0.0], np.cumsum(mags * np.exp(-value * fire))))
            acc += grp[0] * np.exp(value * grid) * prefix
        out += acc.real
    else:
        for k in np.flatnonzero(mags):
            mask = grid >= fire[k]
            out[mask] += mags[k] * _eval_real(coeffs, roots, grid[mask] - fire[k])
    return out
