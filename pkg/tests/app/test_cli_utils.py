import numpy as np
import pytest

from app.utils.records import BenchRecord, MetricRecord, header, read_records, write_records
from app.utils.stripes import NOISE, make_stripes, stripes_dataset


class TestRecords:
    def test_bench_header(self):
        assert header(BenchRecord) == ["kind", "H", "W", "d_model", "heads", "k", "d", "time_ns", "macs", "attn_state"]

    def test_metric_round_trip(self, tmp_path):
        path = tmp_path / "m.csv"
        records = [MetricRecord(0, 0.6931471805599453, 0.5), MetricRecord(1, 0.1 + 0.2, 1.0)]
        write_records(path, records, MetricRecord)
        assert read_records(path, MetricRecord) == records

    def test_overwrite(self, tmp_path):
        path = tmp_path / "m.csv"
        write_records(path, [MetricRecord(0, 1.0, 0.0)], MetricRecord)
        write_records(path, [MetricRecord(5, 2.0, 1.0)], MetricRecord)
        assert read_records(path, MetricRecord) == [MetricRecord(5, 2.0, 1.0)]

    def test_append_skips_header(self, tmp_path):
        path = tmp_path / "b.csv"
        row = BenchRecord("hydra", 8, 8, 16, 4, "3/5", "1/1", 10, 20, 30)
        write_records(path, [row], BenchRecord, append=True)
        write_records(path, [row], BenchRecord, append=True)
        assert path.read_text().count("kind,") == 1
        assert read_records(path, BenchRecord) == [row, row]

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "m.csv"
        write_records(path, [MetricRecord(0, 1.0, 0.0)], MetricRecord)
        with pytest.raises(ValueError):
            read_records(path, BenchRecord)


class TestStripes:
    def test_shapes_and_labels(self, rng):
        split = make_stripes(6, rng, size=12)
        assert split.images.shape == (6, 1, 12, 12)
        assert len(split) == 6
        np.testing.assert_array_equal(split.labels, [0, 1, 0, 1, 0, 1])

    def test_orientation(self):
        split = make_stripes(2, np.random.default_rng(0), noise=0.0)
        horizontal, vertical = split.images[0, 0], split.images[1, 0]
        assert (horizontal == horizontal[:, :1]).all()
        assert (vertical == vertical[:1, :]).all()
        assert set(np.unique(horizontal)) == {-1.0, 1.0}

    def test_noise_level(self, rng):
        split = make_stripes(64, rng)
        residual = split.images - np.sign(split.images)
        assert abs(residual.std() - NOISE) < 0.01

    def test_seeded(self):
        a_train, a_test = stripes_dataset(2)
        b_train, b_test = stripes_dataset(2)
        np.testing.assert_array_equal(a_train.images, b_train.images)
        np.testing.assert_array_equal(a_test.images, b_test.images)
        assert (len(a_train), len(a_test)) == (256, 64)
        assert not np.array_equal(a_train.images[:64], a_test.images)
