import json

import numpy as np
import pytest

from lagrange import (
    ConfigError,
    ExperimentConfig,
    ModelSpec,
    OperatorParams,
    Phase,
    RootEngineSpec,
    config_from_dict,
    evaluate,
    homogeneous_coefficients,
    homogeneous_eval,
    interval_sweep,
    load_config,
    operator_poly,
    read_trace_csv,
    run_experiment,
)
from lagrange.models import LinearUnit
from lagrange.dynamics import build_engine


def linear_config(theta=5.0, gamma=-1, mu=1.0, iterations=40, count=20, ic=None,
                  traversal="loop", supervised=None, phases=None, **kw):
    params = OperatorParams(order=1, theta=theta, alphas=(1.0, 1.0), gamma=gamma, mu=mu, tau=0.01)
    stream = interval_sweep(-1.0, 1.0, count, 2.0, -1.0,
                            supervised_count=supervised, traversal=traversal)
    return ExperimentConfig(
        operator=params,
        model=ModelSpec("linear"),
        stream=stream,
        phases=phases or (Phase(iterations),),
        ic=ic,
        **kw,
    )


class TestEvaluate:
    def test_perfect_model(self):
        cfg = linear_config()
        engine = build_engine(cfg.operator)
        unit = LinearUnit(engine)
        unit.bank.values[0] = [2.0, -1.0]
        metrics = evaluate(unit, cfg.stream)
        assert metrics.mse == pytest.approx(0.0, abs=1e-28)
        assert metrics.accuracy is None

    def test_zero_model_reference_value(self):
        # targets (-3, -1, 1) against 0 give mean squared error 11/3 (unscaled)
        stream = interval_sweep(-1.0, 1.0, 3, 2.0, -1.0)
        engine = build_engine(linear_config().operator)
        unit = LinearUnit(engine)
        assert evaluate(unit, stream).mse == pytest.approx(11.0 / 3.0)

    def test_accuracy_half(self):
        from lagrange import interval_classification
        from lagrange.models import MLP

        stream = interval_classification(-1.0, 1.0, 4)  # classes (0,1,1,0)
        engine = build_engine(linear_config().operator)
        net = MLP(engine, 1, 2, 2, seed=0)
        net.bank.values[0, :] = 0.0
        # all-zero net predicts class 0 everywhere; two of four points are class 0
        assert evaluate(net, stream).accuracy == pytest.approx(0.5)

    def test_empty_set_rejected(self):
        stream = interval_sweep(-1.0, 1.0, 3, 2.0, -1.0)
        stream.labeled = np.zeros(3, dtype=bool)
        engine = build_engine(linear_config().operator)
        with pytest.raises(ValueError, match="labeled"):
            evaluate(LinearUnit(engine), stream)


class TestRunExperiment:
    def test_zero_iterations_trace_has_initial_state_only(self):
        trace = run_experiment(linear_config(phases=(Phase(0),)))
        assert trace.times.shape == (1,)
        assert trace.values.shape == (1, 2)
        assert trace.metrics == ()

    def test_determinism_bitwise(self):
        a = run_experiment(linear_config(iterations=6))
        b = run_experiment(linear_config(iterations=6))
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.times, b.times)
        assert a.metrics == b.metrics

    def test_converging_regime_reference(self):
        trace = run_experiment(linear_config())
        assert 1.7 <= trace.epoch_mean(-1, "y") <= 2.0
        assert -1.0 <= trace.epoch_mean(-1, "b") <= -0.7
        assert not trace.any_divergent()

    def test_event_timing_first_example_after_lead_in(self):
        # times advance by tau; one lead-in step precedes the first example
        trace = run_experiment(linear_config(iterations=1, count=5))
        np.testing.assert_allclose(np.diff(trace.times), 0.01)
        assert trace.times.shape == (7,)  # initial + lead-in + 5 events

    def test_supervision_off_matches_homogeneous_oracle(self):
        ic = {"y": [1.5, -0.5], "b": [-0.7, 0.2]}
        cfg = linear_config(ic=ic, phases=(Phase(10, supervised=False),))
        trace = run_experiment(cfg)
        roots_vals = {"y": [1.5, -0.5], "b": [-0.7, 0.2]}
        from lagrange import poly_roots

        roots = poly_roots(operator_poly(cfg.operator))
        for wid, y0 in roots_vals.items():
            k = homogeneous_coefficients(roots, y0)
            times, values = trace.weight_trace(wid)
            oracle = homogeneous_eval(k, roots, times)
            scale = max(1.0, np.abs(oracle).max())
            assert np.abs(values - oracle).max() < 1e-8 * scale

    def test_steady_state_cyclicity(self):
        # at steady state the trace repeats with the sweep period within 1%
        cfg = linear_config()
        trace = run_experiment(cfg)
        period = cfg.stream.size
        last = trace.values[trace.epoch_slice(-1), 0]
        prev = trace.values[trace.epoch_slice(-2), 0]
        amplitude = trace.values[:, 0].max() - trace.values[:, 0].min()
        assert np.abs(last - prev).max() < 0.01 * amplitude
        assert last.shape[0] == period

    def test_theta_regularization_trend(self):
        means = [
            run_experiment(linear_config(theta=t)).epoch_mean(-1, "y") for t in (2, 5, 10)
        ]
        assert means[0] > means[1] > means[2]

    def test_divergence_flag_recorded_and_preserved(self):
        trace = run_experiment(linear_config(gamma=1, iterations=12))
        assert trace.any_divergent()
        assert np.isfinite(trace.values).all()
        # flags are sticky once set
        col = trace.divergent[:, trace.divergent.any(axis=0).argmax()]
        first = np.flatnonzero(col)
        assert col[first[0]:].all()

    def test_abort_on_divergence_stops_early(self):
        full = run_experiment(linear_config(gamma=1, iterations=12))
        aborted = run_experiment(linear_config(gamma=1, iterations=12, abort_on_divergence=True))
        assert aborted.times.shape[0] < full.times.shape[0]

    def test_phases_switch_tau_and_supervision(self):
        cfg = linear_config(phases=(Phase(4), Phase(3, tau=1.0, supervised=False)))
        trace = run_experiment(cfg)
        # time step jumps from 0.01 to 1.0 at the phase boundary
        gaps = np.diff(trace.times)
        assert gaps[0] == pytest.approx(0.01)
        assert gaps[-1] == pytest.approx(1.0)
        assert trace.times.shape[0] == 1 + 1 + 4 * 20 + 3 * 20

    def test_metrics_stride(self):
        cfg = linear_config(iterations=10, metrics_stride=4)
        trace = run_experiment(cfg)
        assert [m.epoch for m in trace.metrics] == [4, 8, 10]

    def test_trace_stride_thins_rows(self):
        cfg = linear_config(iterations=2, trace_stride=5)
        trace = run_experiment(cfg)
        assert trace.times.shape[0] == 1 + (2 * 20 + 1) // 5

    def test_record_trace_off_keeps_endpoints(self):
        cfg = linear_config(iterations=3, record_trace=False)
        trace = run_experiment(cfg)
        assert trace.times.shape == (2,)
        assert trace.metrics  # metrics still collected

    def test_root_engine_spec_runs(self):
        from lagrange import DesignSpec, design_roots

        roots = design_roots(DesignSpec(1e8), 1.0)
        cfg = ExperimentConfig(
            operator=RootEngineSpec(roots=roots, eta=1e-4, tau=0.01, order=2),
            model=ModelSpec("mlp", units=4, outputs=1),
            stream=interval_sweep(-1.0, 1.0, 10, 2.0, -1.0, supervised_count=2),
            phases=(Phase(3),),
            record_trace=False,
        )
        trace = run_experiment(cfg)
        assert trace.metrics[-1].epoch == 3

    def test_mlp_rejects_explicit_ic(self):
        cfg = linear_config()
        cfg = ExperimentConfig(
            operator=cfg.operator,
            model=ModelSpec("mlp", units=4, outputs=1),
            stream=cfg.stream,
            phases=cfg.phases,
            ic={"y": [0.0, 0.0]},
        )
        with pytest.raises(ConfigError, match="linear"):
            run_experiment(cfg)


class TestTraceCsv:
    def test_roundtrip_exact(self, tmp_path):
        trace = run_experiment(linear_config(iterations=3))
        path = tmp_path / "trace.csv"
        trace.write_csv(path)
        back = read_trace_csv(path)
        assert back.weight_ids == trace.weight_ids
        np.testing.assert_array_equal(back.times, trace.times)
        np.testing.assert_array_equal(back.values, trace.values)
        np.testing.assert_array_equal(back.divergent, trace.divergent)

    def test_metrics_csv(self, tmp_path):
        trace = run_experiment(linear_config(iterations=3))
        path = tmp_path / "metrics.csv"
        trace.write_metrics_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,mse,accuracy"
        assert len(lines) == 4


BASE_DOC = {
    "version": 1,
    "seed": 0,
    "operator": {"order": 1, "theta": 5.0, "alphas": [1.0, 1.0], "gamma": -1, "mu": 1.0, "tau": 0.01},
    "model": {"kind": "linear"},
    "stream": {"kind": "interval", "low": -1.0, "high": 1.0, "count": 20,
               "slope": 2.0, "intercept": -1.0, "traversal": "loop"},
    "iterations": 40,
}


class TestConfigParsing:
    def test_reference_document(self):
        cfg = config_from_dict(BASE_DOC)
        assert isinstance(cfg.operator, OperatorParams)
        assert cfg.phases == (Phase(40),)
        assert cfg.stream.traversal == "loop"

    def test_unknown_top_level_key(self):
        doc = dict(BASE_DOC, typo=1)
        with pytest.raises(ConfigError, match="typo"):
            config_from_dict(doc)

    def test_unknown_nested_key(self):
        doc = dict(BASE_DOC, operator=dict(BASE_DOC["operator"], thetaa=1.0))
        with pytest.raises(ConfigError, match="thetaa"):
            config_from_dict(doc)

    def test_version_checked(self):
        with pytest.raises(ConfigError, match="version"):
            config_from_dict(dict(BASE_DOC, version=99))

    def test_missing_iterations(self):
        doc = dict(BASE_DOC)
        del doc["iterations"]
        with pytest.raises(ConfigError, match="iterations"):
            config_from_dict(doc)

    def test_phases_override_iterations(self):
        doc = dict(BASE_DOC, phases=[{"iterations": 5}, {"iterations": 2, "tau": 1.0, "supervised": False}])
        cfg = config_from_dict(doc)
        assert cfg.phases == (Phase(5), Phase(2, tau=1.0, supervised=False))

    def test_design_operator(self):
        doc = dict(
            BASE_DOC,
            operator={"design": {"memory_span": 1e8, "theta": 1.0}, "eta": 1e-4, "tau": 0.01},
        )
        cfg = config_from_dict(doc)
        assert isinstance(cfg.operator, RootEngineSpec)
        assert cfg.operator.roots.n == 4

    def test_roots_operator_with_complex_pairs(self):
        doc = dict(
            BASE_DOC,
            operator={"roots": [[-0.1, 1.0], [-0.1, -1.0], -1.2, -1.0], "eta": 1e-3, "tau": 0.01},
        )
        cfg = config_from_dict(doc)
        assert cfg.operator.roots.n == 4

    def test_ic_parsing(self):
        doc = dict(BASE_DOC, ic={"y": [-5, -2], "b": [3, 4]})
        cfg = config_from_dict(doc)
        assert cfg.ic == {"y": [-5.0, -2.0], "b": [3.0, 4.0]}

    def test_load_config_reports_json_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"version": 1,\n  "oops"\n}')
        with pytest.raises(json.JSONDecodeError) as err:
            load_config(path)
        assert (err.value.lineno, err.value.colno) == (3, 1)

    def test_record_block(self):
        doc = dict(BASE_DOC, record={"trace": False, "metrics_stride": 10})
        cfg = config_from_dict(doc)
        assert cfg.record_trace is False
        assert cfg.metrics_stride == 10

    def test_csv_stream_kind(self, tmp_path):
        path = tmp_path / "stream.csv"
        path.write_text("dim=1,labeled=1\n0.1,0\n0.2,1\n")
        doc = dict(
            BASE_DOC,
            model={"kind": "mlp", "units": 3, "outputs": 2},
            stream={"kind": "csv", "path": str(path)},
        )
        cfg = config_from_dict(doc)
        assert cfg.stream.size == 2 and cfg.stream.classification

    def test_behavior_switches(self):
        doc = dict(BASE_DOC, gradient_at_half_step=True, abort_on_divergence=True,
                   divergence_threshold=1e3)
        cfg = config_from_dict(doc)
        assert cfg.grad_at_half_step and cfg.abort_on_divergence
        assert cfg.divergence_threshold == 1e3
