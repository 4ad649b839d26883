import math

import pytest

import lqe


def test_grades_follow_table_rows():
    assert lqe.GRADES == ("very_bad", "bad", "intermediate", "good", "very_good")
    assert lqe.grade_of(-84.0) == "very_good"
    assert lqe.grade_of(-84.01) == "good"
    assert lqe.grade_of(-95.0) == "intermediate"
    assert lqe.grade_of(-105.0) == "bad"
    assert lqe.grade_of(-115.0) == "very_bad"
    with pytest.raises(ValueError):
        lqe.grade_of(math.nan)


def test_decompose_reconstructs_input():
    x = [-90.0, -92.5, -88.0, -101.0, -97.25]
    trend, noise = lqe.decompose([x], tau=3.0)
    assert trend[0][0] == x[0]
    assert trend[0][1] == pytest.approx(0.5 * x[1] + 0.5 * x[0])
    for t in range(len(x)):
        assert trend[0][t] + noise[0][t] == pytest.approx(x[t], abs=1e-12)
    with pytest.raises(ValueError):
        lqe.decompose([x], tau=0.5)


def test_metrics_worked_example():
    truth = ["good", "good", "bad"]
    pred = ["good", "bad", "bad"]
    assert lqe.accuracy(truth, pred) == pytest.approx(2 / 3)
    assert lqe.macro_f1(truth, pred) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        lqe.accuracy(["good"], ["excellent"])


def test_trace_round_trip(tmp_path):
    trace = lqe.generate_synthetic_trace(200, seed=4)
    assert len(trace) == 200
    assert trace.feature_names == ["rsrp_dbm", "sinr_db"]
    path = str(tmp_path / "t.csv")
    lqe.write_trace_csv(path, [trace])
    back = lqe.read_trace_csv(path)
    assert len(back) == 1
    assert back[0].timestamps == trace.timestamps
    assert back[0].values(0) == trace.values(0)
    with pytest.raises(OSError):
        lqe.read_trace_csv(str(tmp_path / "missing.csv"))


def test_train_forecast_evaluate_save(tmp_path):
    trace = lqe.generate_synthetic_trace(
        600, seed=9, rsrp_autocorr=0.3, rsrp_amplitude=15.0, rsrp_period=120.0
    )
    result = lqe.train([trace], window=20, hidden=8, batch=16, epochs=3, seed=2)
    assert result.stopped_epoch == 3
    assert len(result.validation_loss) == 3
    assert result.train_windows + result.validation_windows + result.test_windows == 580

    model = result.model
    assert (model.window, model.hidden, model.layers, model.feature_count) == (20, 8, 2, 2)

    preds = lqe.forecast(model, [trace])
    assert len(preds) == 600 - 20
    assert all(p.grade in lqe.GRADES for p in preds)
    assert preds[0].timestamp_s == 20
    assert preds[0].rsrp_dbm == pytest.approx(preds[0].trend_dbm + preds[0].noise_dbm)

    report = lqe.evaluate(model, [trace], subset="test")
    assert report.samples == result.test_windows
    assert 0.0 <= report.accuracy <= 1.0
    assert sum(sum(row) for row in report.confusion) == report.samples

    path = str(tmp_path / "m.lqem")
    lqe.save_model(path, model)
    assert lqe.load_model(path) == model
    (tmp_path / "bad.lqem").write_bytes(b"XXXX")
    with pytest.raises(ValueError):
        lqe.load_model(str(tmp_path / "bad.lqem"))


def test_short_trace_is_rejected():
    trace = lqe.generate_synthetic_trace(25, seed=1)
    with pytest.raises(ValueError, match="N"):
        lqe.train([trace], window=30, hidden=4, epochs=1)
