import pytest
import ujson

from .common import INF
from .mc import ProbEstimate, RateCurveEntry
from .report import BoundReport, RateCurve, TheoremPart, Verdict, report_timestamp
from .sets import SetDescriptor

def curve():
    return [RateCurveEntry.from_estimate(t, ProbEstimate.from_counts(hits, 1000, 0.99))
            for t, hits in ((10.0, 120), (20.0, 30), (40.0, 0))]

@pytest.fixture
def bound_report():
    return BoundReport(TheoremPart.c, SetDescriptor.closed_ball([2.0], 0.05), 0.3522, curve(), Verdict.consistent,
                       0.05, {"family": "exp_unit", "params": {"rate": 1.0}}, seed=42, timestamp="2024-01-01T00:00:00Z",
                       details={"note": None})

class TestBoundReport:
    def test_save_and_load(self, tmp_path, bound_report):
        file = tmp_path / "report.json"
        bound_report.save(file)
        loaded = BoundReport.load(file)
        assert loaded.verdict == Verdict.consistent
        assert loaded.set.radius == 0.05
        assert loaded.empirical_curve == bound_report.empirical_curve
        assert loaded.empirical_curve[-1].rate_hi == INF
        assert str(loaded.tool_version) == str(bound_report.tool_version)
        assert file.read_text(encoding='utf-8').endswith('}\n')

    def test_encoded_fields(self, bound_report):
        serial = ujson.loads(bound_report.serialize())
        assert serial["theorem_part"] == "c"
        assert serial["trend"] == "decreasing"
        assert serial["empirical_curve"][-1]["rate_hi"] == "+inf"
        assert serial["empirical_curve"][-1]["rate"] is None
        assert serial["seed"] == 42

    def test_serialization_is_stable(self, bound_report):
        assert bound_report.serialize() == BoundReport.deserialize(jsonstring=bound_report.serialize()).serialize()

    def test_wrong_extension(self, tmp_path, bound_report):
        with pytest.raises(ValueError):
            bound_report.save(tmp_path / "report.txt")
        with pytest.raises(ValueError):
            BoundReport.load(tmp_path / "report.csv")

    def test_deserialize_needs_a_source(self):
        with pytest.raises(TypeError):
            BoundReport.deserialize()

    def test_infinite_theoretical_value(self, bound_report):
        bound_report.theoretical_inf = INF
        assert ujson.loads(bound_report.serialize())["theoretical_inf"] == "+inf"

def test_rate_curve(tmp_path):
    record = RateCurve({"family": "exp_unit", "params": {}}, SetDescriptor.open_ball([1.0], 0.1), curve(), 7,
                       "2024-01-01T00:00:00Z")
    record.save(tmp_path / "curve.json")
    loaded = RateCurve.load(tmp_path / "curve.json")
    assert loaded.entries == record.entries
    assert loaded.seed == 7

class TestTimestamp:
    def test_pinned(self, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
        assert report_timestamp("2020-02-02T02:02:02Z") == "2020-02-02T02:02:02Z"

    def test_source_date_epoch(self, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "86400")
        assert report_timestamp() == "1970-01-02T00:00:00Z"

    def test_now(self, monkeypatch):
        monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
        stamp = report_timestamp()
        assert len(stamp) == 20 and stamp.endswith("Z")
