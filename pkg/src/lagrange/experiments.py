"""Experiment runner: streams in, weight traces and metrics out.

A run builds one engine per sampling step in use, one model, and feeds the
stream event by event.  The first example arrives one step after t = 0 and
every supervision impulse fires half a step after its example, so stepped
trajectories line up exactly with the closed-form superposition oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import DIVERGENCE_THRESHOLD, DynamicsEngine, engine_from_poly, build_engine
from .models import MLP, LinearUnit
from .operators import DesignSpec, OperatorParams, design_roots, poly_from_params
from .rootspace import PolyCoeffs, RootSet, characteristic_poly
from .streams import TrainingEvent, TrainingStream, ingest_csv, interval_classification, interval_sweep, trajectory_2d

__all__ = [
    "ConfigError",
    "RootEngineSpec",
    "ModelSpec",
    "Phase",
    "Metrics",
    "MetricsSnapshot",
    "TraceLog",
    "ExperimentConfig",
    "evaluate",
    "run_experiment",
    "config_from_dict",
    "load_config",
    "operator_poly",
    "read_trace_csv",
]

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """An experiment configuration is malformed."""


@dataclass(frozen=True)
class RootEngineSpec:
    """Engine specified by its roots and the effective gain eta = gamma/mu.

    ``order`` only decides the sign rule: the per-impulse weight gain is +eta
    for order-1 operators and -eta for order-2 ones.
    """

    roots: RootSet
    eta: float
    tau: float
    order: int = 2

    def __post_init__(self) -> None:
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    units: int = 20
    outputs: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "mlp"):
            raise ValueError("model kind must be 'linear' or 'mlp'")


@dataclass(frozen=True)
class Phase:
    """One stage of a run; ``tau = None`` keeps the operator's base step."""

    iterations: int
    tau: float | None = None
    supervised: bool = True


@dataclass(frozen=True)
class Metrics:
    mse: float
    accuracy: float | None = None


@dataclass(frozen=True)
class MetricsSnapshot:
    epoch: int
    mse: float
    accuracy: float | None = None


@dataclass
class TraceLog:
    """Recorded run: weight values per step (wide form) plus per-epoch metrics."""

    weight_ids: tuple[str, ...]
    times: np.ndarray
    values: np.ndarray
    divergent: np.ndarray
    epoch_rows: tuple[int, ...]
    metrics: tuple[MetricsSnapshot, ...]

    def weight_index(self, weight_id: str) -> int:
        try:
            return self.weight_ids.index(weight_id)
        except ValueError:
            raise KeyError(weight_id) from None

    def weight_trace(self, weight_id: str) -> tuple[np.ndarray, np.ndarray]:
        idx = self.weight_index(weight_id)
        return self.times, self.values[:, idx]

    def epoch_slice(self, epoch: int) -> slice:
        """Row slice of the steps recorded during one epoch (stride-1 traces)."""
        stops = self.epoch_rows
        if not -len(stops) <= epoch < len(stops):
            raise IndexError(f"epoch {epoch} out of range")
        epoch = epoch % len(stops)
        start = stops[epoch - 1] + 1 if epoch else 1
        return slice(start, stops[epoch] + 1)

    def epoch_mean(self, epoch: int, weight_id: str) -> float:
        rows = self.epoch_slice(epoch)
        return float(self.values[rows, self.weight_index(weight_id)].mean())

    def any_divergent(self) -> bool:
        return bool(self.divergent.any()) if self.divergent.size else False

    def final_metrics(self) -> MetricsSnapshot | None:
        return self.metrics[-1] if self.metrics else None

    def write_csv(self, path) -> None:
        """Long-form trace: t,weight,value,divergent with full float precision."""
        with open(path, "w") as fh:
            fh.write("t,weight,value,divergent\n")
            for r in range(self.times.shape[0]):
                t = format(self.times[r], ".17g")
                for c, wid in enumerate(self.weight_ids):
                    fh.write(
                        f"{t},{wid},{format(self.values[r, c], '.17g')},"
                        f"{int(self.divergent[r, c])}\n"
                    )

    def write_metrics_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,mse,accuracy\n")
            for snap in self.metrics:
                acc = "" if snap.accuracy is None else format(snap.accuracy, ".17g")
                fh.write(f"{snap.epoch},{format(snap.mse, '.17g')},{acc}\n")


def read_trace_csv(path) -> TraceLog:
    """Rebuild the wide-form trace from a trace.csv file (inverse of write_csv)."""
    ids: list[str] = []
    times: list[float] = []
    rows: list[list[float]] = []
    flags: list[list[bool]] = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t,weight,value,divergent":
            raise ValueError(f"unexpected trace header {header!r}")
        for line in fh:
            t_str, wid, val, div = line.rstrip("\n").split(",")
            t = float(t_str)
            if not times or t != times[-1]:
                times.append(t)
                rows.append([])
                flags.append([])
            if len(times) == 1:
                ids.append(wid)
            rows[-1].append(float(val))
            flags[-1].append(div == "1")
    return TraceLog(
        weight_ids=tuple(ids),
        times=np.asarray(times),
        values=np.asarray(rows),
        divergent=np.asarray(flags, dtype=bool),
        epoch_rows=(),
        metrics=(),
    )


@dataclass
class ExperimentConfig:
    operator: OperatorParams | RootEngineSpec
    model: ModelSpec
    stream: TrainingStream
    phases: tuple[Phase, ...]
    seed: int = 0
    ic: dict | None = None
    divergence_threshold: float = DIVERGENCE_THRESHOLD
    record_trace: bool = True
    trace_stride: int = 1
    metrics_stride: int = 1
    grad_at_half_step: bool = False
    abort_on_divergence: bool = False

    @property
    def base_tau(self) -> float:
        return self.operator.tau


def operator_poly(operator: OperatorParams | RootEngineSpec) -> PolyCoeffs:
    """Characteristic polynomial of the configured operator."""
    if isinstance(operator, OperatorParams):
        return poly_from_params(operator)
    return characteristic_poly(operator.roots)


def _make_engine(config: ExperimentConfig, tau: float) -> DynamicsEngine:
    op = config.operator
    if isinstance(op, OperatorParams):
        params = replace(op, tau=tau)
        return build_engine(params, config.divergence_threshold)
    kappa = op.eta if op.order == 1 else -op.eta
    return engine_from_poly(
        characteristic_poly(op.roots), tau, kappa, config.divergence_threshold
    )


def _make_model(config: ExperimentConfig, engine: DynamicsEngine):
    if config.model.kind == "linear":
        if config.stream.input_dim != 1 or config.stream.target_dim != 1:
            raise ConfigError("the linear model needs a 1-d stream with scalar targets")
        return LinearUnit(engine, ic=config.ic)
    if config.ic is not None:
        raise ConfigError("explicit initial conditions are only supported for the linear model")
    return MLP(
        engine,
        n_inputs=config.stream.input_dim,
        n_units=config.model.units,
        n_outputs=config.model.outputs,
        seed=config.seed,
    )


def evaluate(model, stream: TrainingStream) -> Metrics:
    """Plain mean squared error over the labeled points; accuracy for classifiers.

    MSE is the unscaled mean of ||f - target||^2 (the 1/2 of the training loss
    lives only in the gradient definition); accuracy is the argmax match rate.
    """
    mask = stream.labeled
    if not mask.any():
        raise ValueError("evaluation set has no labeled points")
    outputs = np.atleast_2d(model.forward(stream.inputs[mask]))
    targets = stream.targets[mask]
    mse = float(((outputs - targets) ** 2).sum(axis=1).mean())
    accuracy = None
    if stream.classification:
        accuracy = float(
            (np.argmax(outputs, axis=1) == np.argmax(targets, axis=1)).mean()
        )
    return Metrics(mse, accuracy)


def run_experiment(config: ExperimentConfig) -> TraceLog:
    """Drive a full run and return its trace.

    The first example arrives at t = tau (one free lead-in step from t = 0);
    each example at t = K*tau contributes its impulse at K*tau + tau/2 using
    the gradient evaluated at the step start.  Metrics are captured per epoch
    on the labeled points; the trace records every weight at every recorded
    step.
    """
    stream = config.stream
    if not config.phases:
        raise ConfigError("at least one phase is required")
    engines: dict[float, DynamicsEngine] = {}

    def engine_for(tau: float) -> DynamicsEngine:
        if tau not in engines:
            engines[tau] = _make_engine(config, tau)
        return engines[tau]

    base_engine = engine_for(config.base_tau)
    model = _make_model(config, base_engine)
    weight_ids = tuple(model.weight_ids)

    times: list[float] = [0.0]
    rows: list[np.ndarray] = [model.bank.weight_values().copy()]
    flags: list[np.ndarray] = [model.bank.divergent.copy()]
    epoch_rows: list[int] = []
    snapshots: list[MetricsSnapshot] = []

    t = 0.0
    step_counter = 0
    epoch = 0
    started = False
    can_score = bool(stream.labeled.any())
    aborted = False

    def record() -> None:
        if config.record_trace and step_counter % config.trace_stride == 0:
            times.append(t)
            rows.append(model.bank.weight_values().copy())
            flags.append(model.bank.divergent.copy())

    total_epochs = sum(phase.iterations for phase in config.phases)
    inputs, targets = stream.inputs, stream.targets
    recording = config.record_trace
    at_half = config.grad_at_half_step
    for phase in config.phases:
        engine = engine_for(phase.tau if phase.tau is not None else config.base_tau)
        tau = engine.tau
        advance = model.advance
        for _ in range(phase.iterations):
            order = stream.order(epoch)
            sup_mask = stream.supervised & phase.supervised
            for idx in order:
                if not started:
                    # Lead-in: the first example arrives one step after start.
                    advance(engine, None)
                    t += tau
                    step_counter += 1
                    if recording:
                        record()
                    started = True
                if sup_mask[idx]:
                    event = TrainingEvent(index=idx, time=t, u=inputs[idx], target=targets[idx])
                    advance(engine, event, at_half_step=at_half)
                else:
                    advance(engine, None)
                t += tau
                step_counter += 1
                if recording:
                    record()
            epoch += 1
            if recording:
                epoch_rows.append(len(rows) - 1)
            if can_score and (epoch % config.metrics_stride == 0 or epoch == total_epochs):
                m = evaluate(model, stream)
                snapshots.append(MetricsSnapshot(epoch, m.mse, m.accuracy))
            if config.abort_on_divergence and model.bank.divergent.any():
                aborted = True
                break
        if aborted:
            break

    if config.record_trace:
        values = np.vstack(rows)
        divergent = np.vstack(flags)
        trace_times = np.asarray(times)
    else:
        # trace off: keep only the endpoints; per-epoch slicing is meaningless
        values = np.vstack([rows[0], model.bank.weight_values()[None, :]])
        divergent = np.vstack([flags[0], model.bank.divergent[None, :]])
        trace_times = np.array([0.0, t])
        epoch_rows = []
    return TraceLog(
        weight_ids=weight_ids,
        times=trace_times,
        values=values,
        divergent=divergent,
        epoch_rows=tuple(epoch_rows),
        metrics=tuple(snapshots),
    )


# --- JSON configuration -----------------------------------------------------

def _require_keys(doc: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")
    missing = required - set(doc)
    if missing:
        raise ConfigError(f"missing key(s) {sorted(missing)} in {where}")


def _parse_operator(doc) -> OperatorParams | RootEngineSpec:
    if not isinstance(doc, dict):
        raise ConfigError("'operator' must be an object")
    if "order" in doc and "roots" not in doc and "design" not in doc:
        _require_keys(
            doc,
            {"order", "theta", "alphas", "gamma", "mu", "tau"},
            {"order", "theta", "alphas", "tau"},
            "operator",
        )
        try:
            return OperatorParams(
                order=int(doc["order"]),
                theta=float(doc["theta"]),
                alphas=tuple(float(a) for a in doc["alphas"]),
                gamma=int(doc.get("gamma", -1)),
                mu=float(doc.get("mu", 1.0)),
                tau=float(doc["tau"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad operator parameters: {exc}") from exc
    if "roots" in doc:
        _require_keys(doc, {"roots", "eta", "tau", "order"}, {"roots", "eta", "tau"}, "operator")
        values = []
        for item in doc["roots"]:
            if isinstance(item, (list, tuple)):
                if len(item) != 2:
                    raise ConfigError("complex roots are [re, im] pairs")
                values.append(complex(float(item[0]), float(item[1])))
            else:
                values.append(complex(float(item)))
        return RootEngineSpec(
            roots=RootSet.from_values(values),
            eta=float(doc["eta"]),
            tau=float(doc["tau"]),
            order=int(doc.get("order", 2)),
        )
    if "design" in doc:
        _require_keys(doc, {"design", "eta", "tau", "order"}, {"design", "eta", "tau"}, "operator")
        design = doc["design"]
        _require_keys(
            design,
            {"memory_span", "theta", "fractions"},
            {"memory_span", "theta"},
            "operator.design",
        )
        spec = DesignSpec(
            memory_span=float(design["memory_span"]),
            fractions=tuple(design.get("fractions", (0.60, 0.65, 0.75))),
        )
        return RootEngineSpec(
            roots=design_roots(spec, float(design["theta"])),
            eta=float(doc["eta"]),
            tau=float(doc["tau"]),
            order=int(doc.get("order", 2)),
        )
    raise ConfigError("operator must give (order, theta, alphas, ...), roots, or a design")


def _parse_stream(doc) -> TrainingStream:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("'stream' must be an object with a 'kind'")
    kind = doc["kind"]
    if kind == "interval":
        _require_keys(
            doc,
            {"kind", "low", "high", "count", "slope", "intercept", "supervised", "traversal"},
            {"kind", "low", "high", "count", "slope", "intercept"},
            "stream",
        )
        return interval_sweep(
            float(doc["low"]),
            float(doc["high"]),
            int(doc["count"]),
            float(doc["slope"]),
            float(doc["intercept"]),
            supervised_count=None if "supervised" not in doc else int(doc["supervised"]),
            traversal=doc.get("traversal", "forward-backward"),
        )
    if kind == "interval-classification":
        _require_keys(
            doc,
            {"kind", "low", "high", "count", "supervised", "half_width", "traversal"},
            {"kind", "low", "high", "count"},
            "stream",
        )
        return interval_classification(
            float(doc["low"]),
            float(doc["high"]),
            int(doc["count"]),
            supervised_count=None if "supervised" not in doc else int(doc["supervised"]),
            half_width=float(doc.get("half_width", 0.5)),
            traversal=doc.get("traversal", "forward-backward"),
        )
    if kind in ("spiral", "flower"):
        _require_keys(doc, {"kind", "steps"}, {"kind"}, "stream")
        return trajectory_2d(kind, steps=int(doc.get("steps", 100)))
    if kind == "csv":
        _require_keys(doc, {"kind", "path"}, {"kind", "path"}, "stream")
        return ingest_csv(doc["path"])
    raise ConfigError(f"unknown stream kind {kind!r}")


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a JSON-style dict against the versioned schema; unknown keys fail."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    _require_keys(
        doc,
        {
            "version",
            "seed",
            "operator",
            "model",
            "stream",
            "iterations",
            "phases",
            "ic",
            "divergence_threshold",
            "record",
            "gradient_at_half_step",
            "abort_on_divergence",
        },
        {"version", "operator", "model", "stream"},
        "configuration",
    )
    if doc["version"] != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {doc['version']!r} (expected {CONFIG_VERSION})")
    model_doc = doc["model"]
    _require_keys(model_doc, {"kind", "units", "outputs"}, {"kind"}, "model")
    try:
        model = ModelSpec(
            kind=model_doc["kind"],
            units=int(model_doc.get("units", 20)),
            outputs=int(model_doc.get("outputs", 1)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if "phases" in doc:
        phases = []
        for i, ph in enumerate(doc["phases"]):
            _require_keys(ph, {"iterations", "tau", "supervised"}, {"iterations"}, f"phases[{i}]")
            phases.append(
                Phase(
                    iterations=int(ph["iterations"]),
                    tau=None if ph.get("tau") is None else float(ph["tau"]),
                    supervised=bool(ph.get("supervised", True)),
                )
            )
        phases = tuple(phases)
    elif "iterations" in doc:
        phases = (Phase(iterations=int(doc["iterations"])),)
    else:
        raise ConfigError("configuration needs 'iterations' or 'phases'")
    record = doc.get("record", {})
    _require_keys(record, {"trace", "trace_stride", "metrics_stride"}, set(), "record")
    ic = doc.get("ic")
    if ic is not None:
        if not isinstance(ic, dict):
            raise ConfigError("'ic' must map weight names to state vectors")
        ic = {name: [float(v) for v in vec] for name, vec in ic.items()}
    return ExperimentConfig(
        operator=_parse_operator(doc["operator"]),
        model=model,
        stream=_parse_stream(doc["stream"]),
        phases=phases,
        seed=int(doc.get("seed", 0)),
        ic=ic,
        divergence_threshold=float(doc.get("divergence_threshold", DIVERGENCE_THRESHOLD)),
        record_trace=bool(record.get("trace", True)),
        trace_stride=int(record.get("trace_stride", 1)),
        metrics_stride=int(record.get("metrics_stride", 1)),
        grad_at_half_step=bool(doc.get("gradient_at_half_step", False)),
        abort_on_divergence=bool(doc.get("abort_on_divergence", False)),
    )


def load_config(path) -> ExperimentConfig:
    """Load and validate a JSON config file; JSON errors propagate with line/column."""
    with open(path) as fh:
        doc = json.load(fh)
    return config_from_dict(doc)
