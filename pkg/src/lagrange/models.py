"""Learnable functions whose weights ride the ODE dynamics.

Two models: a scalar affine unit and a one-hidden-layer rectifier network.
Every scalar parameter owns one dynamics state (a column in a shared
:class:`~lagrange.dynamics.StateBank`); a supervised event turns the loss
gradient per weight into the impulse magnitudes for one step, an unsupervised
event is a free step.
"""

from __future__ import annotations

import numpy as np

from .dynamics import DynamicsEngine, StateBank
from .streams import TrainingEvent

__all__ = ["LinearUnit", "MLP", "splitmix_uniform"]

_MASK64 = (1 << 64) - 1


def splitmix_uniform(seed: int, count: int) -> np.ndarray:
    """Deterministic uniform draws on [0, 1) from a splitmix64 bit mixer.

    Pure-integer recurrence, so initialization is reproducible across numpy
    versions and platforms.
    """
    x = seed & _MASK64
    out = np.empty(count)
    for i in range(count):
        x = (x + 0x9E3779B97F4A7C15) & _MASK64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z = z ^ (z >> 31)
        out[i] = (z >> 11) * 2.0**-53
    return out


def _zeta_for(model, event: TrainingEvent, engine: DynamicsEngine, at_half_step: bool):
    if at_half_step:
        # Gradient from the weights propagated half a step forward instead of
        # the step-start values; comparison switch, off by default.
        row = (engine.half_matrix @ model.bank.values)[0]
    else:
        row = model.bank.values[0]
    return model.gradients(event.u, event.target, weights=row)


class LinearUnit:
    """f(u) = y*u + b; the two coefficients share one engine but own their states."""

    weight_ids = ("y", "b")

    def __init__(self, engine: DynamicsEngine, ic: dict | None = None):
        self.bank = StateBank(engine.n, 2)
        if ic:
            for name, vec in ic.items():
                if name not in self.weight_ids:
                    raise ValueError(f"unknown weight {name!r}; expected one of {self.weight_ids}")
                self.bank.set_column(self.weight_ids.index(name), vec)

    def forward(self, u):
        """Model output; broadcasts over scalars, (1,) vectors, or (N, 1) batches."""
        y, b = self.bank.weight_values()
        return y * np.asarray(u, dtype=float) + b

    def gradients(self, u, target, weights=None) -> np.ndarray:
        """zeta = (residual * u, residual) for the squared loss 0.5*(f - target)**2."""
        if weights is None:
            weights = self.bank.weight_values()
        y, b = float(weights[0]), float(weights[1])
        u0 = float(np.asarray(u, dtype=float).reshape(-1)[0])
        f0 = float(np.asarray(target, dtype=float).reshape(-1)[0])
        residual = y * u0 + b - f0
        return np.array([residual * u0, residual])

    def advance(self, engine: DynamicsEngine, event: TrainingEvent | None = None,
                at_half_step: bool = False) -> None:
        """One sampling step: supervised events fire gradient impulses, the rest are free."""
        if event is not None and event.target is not None:
            self.bank.step(engine, _zeta_for(self, event, engine, at_half_step))
        else:
            self.bank.step(engine, None)


class MLP:
    """One-hidden-layer rectifier network with an identity output map.

    Parameter order (and therefore state-bank column order) is
    w1 row-major, b1, w2 row-major, b2.  Weight values are initialized
    uniformly on [-0.5, 0.5) from the seeded splitmix generator; derivatives
    start at zero.
    """

    def __init__(self, engine: DynamicsEngine, n_inputs: int, n_units: int,
                 n_outputs: int, seed: int = 0):
        if min(n_inputs, n_units, n_outputs) < 1:
            raise ValueError("layer sizes must be >= 1")
        self.n_inputs = n_inputs
        self.n_units = n_units
        self.n_outputs = n_outputs
        w1 = n_units * n_inputs
        w2 = n_outputs * n_units
        self._slices = (
            slice(0, w1),
            slice(w1, w1 + n_units),
            slice(w1 + n_units, w1 + n_units + w2),
            slice(w1 + n_units + w2, w1 + n_units + w2 + n_outputs),
        )
        count = w1 + n_units + w2 + n_outputs
        self.bank = StateBank(engine.n, count)
        self.bank.values[0, :] = splitmix_uniform(seed, count) - 0.5

    @property
    def weight_ids(self) -> tuple[str, ...]:
        ids = []
        ids += [f"w1[{i},{j}]" for i in range(self.n_units) for j in range(self.n_inputs)]
        ids += [f"b1[{i}]" for i in range(self.n_units)]
        ids += [f"w2[{k},{i}]" for k in range(self.n_outputs) for i in range(self.n_units)]
        ids += [f"b2[{k}]" for k in range(self.n_outputs)]
        return tuple(ids)

    def _unpack(self, row):
        s = self._slices
        w1 = row[s[0]].reshape(self.n_units, self.n_inputs)
        b1 = row[s[1]]
        w2 = row[s[2]].reshape(self.n_outputs, self.n_units)
        b2 = row[s[3]]
        return w1, b1, w2, b2

    def forward(self, u):
        """Single example (d,) -> (o,) or batch (N, d) -> (N, o)."""
        w1, b1, w2, b2 = self._unpack(self.bank.weight_values())
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            hidden = np.maximum(w1 @ u + b1, 0.0)
            return w2 @ hidden + b2
        hidden = np.maximum(u @ w1.T + b1, 0.0)
        return hidden @ w2.T + b2

    def gradients(self, u, target, weights=None) -> np.ndarray:
        """Reverse-mode zeta for 0.5*||f - target||^2, flattened in parameter order.

        The rectifier derivative at exactly zero is taken as 0.
        """
        row = self.bank.weight_values() if weights is None else weights
        w1, b1, w2, b2 = self._unpack(row)
        u = np.asarray(u, dtype=float).reshape(-1)
        target = np.asarray(target, dtype=float).reshape(-1)
        pre = w1 @ u + b1
        hidden = np.maximum(pre, 0.0)
        residual = (w2 @ hidden + b2) - target
        grad_w2 = residual[:, None] * hidden[None, :]
        grad_b2 = residual
        back = (w2.T @ residual) * (pre > 0.0)
        grad_w1 = back[:, None] * u[None, :]
        grad_b1 = back
        return np.concatenate([grad_w1.ravel(), grad_b1, grad_w2.ravel(), grad_b2])

    def advance(self, engine: DynamicsEngine, event: TrainingEvent | None = None,
                at_half_step: bool = False) -> None:
        if event is not None and event.target is not None:
            self.bank.step(engine, _zeta_for(self, event, engine, at_half_step))
        else:
            self.bank.step(engine, None)
