import numpy as np

from solver_trace import BASE_COLUMNS, MOMENTUM_COLUMNS, TraceRecorder, load_trace, save_trace


def _recorded(momentum=False, iterations=3):
    recorder = TraceRecorder(2, momentum=momentum)
    for k in range(iterations):
        extra = dict(r_norm=0.5 * k, v_norm=float(k), batch_size=2) if momentum else {}
        recorder.capture(k, 1.0 / (k + 1), k % 2, np.array([k, -k], dtype=float), **extra)
        recorder.count(langevin_steps=10, grad_evals=11)
    return recorder


def test_finish_selects_the_recorded_iterate():
    trace = _recorded().finish(1, np.zeros(2), meta={"solver": "sdro_double"})
    assert len(trace) == 3
    np.testing.assert_array_equal(trace.theta_hat, [1.0, -1.0])
    np.testing.assert_array_equal(trace.theta_last, [2.0, -2.0])
    assert trace.total_langevin_steps == 30
    assert trace.total_grad_evals == 33
    summary = trace.summary()
    assert summary["selected_index"] == 1
    assert summary["solver"] == "sdro_double"
    assert summary["theta_hat"] == [1.0, -1.0]


def test_empty_trace_falls_back_to_the_start():
    trace = TraceRecorder(2).finish(0, np.array([0.3, 0.4]))
    assert len(trace) == 0
    np.testing.assert_array_equal(trace.theta_hat, [0.3, 0.4])
    np.testing.assert_array_equal(trace.theta_last, [0.3, 0.4])


def test_csv_header_and_values(tmp_path):
    trace = _recorded(momentum=True).finish(0, np.zeros(2))
    path = tmp_path / "trace.csv"
    save_trace(str(path), trace)
    header, table = load_trace(str(path))
    assert header == list(BASE_COLUMNS + MOMENTUM_COLUMNS) + ["theta_0", "theta_1"]
    np.testing.assert_array_equal(table[:, :6], trace.table)
    np.testing.assert_array_equal(table[:, 6:], trace.thetas)
    assert path.read_text().splitlines()[1].startswith("0,1,0,0,0,2,")


def test_csv_without_theta_columns(tmp_path):
    trace = _recorded().finish(0, np.zeros(2))
    path = tmp_path / "nested" / "trace.csv"
    save_trace(str(path), trace, log_theta=False)
    header, table = load_trace(str(path))
    assert header == list(BASE_COLUMNS)
    assert table.shape == (3, 3)
