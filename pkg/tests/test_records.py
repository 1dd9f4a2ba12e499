"""Record store round-trips and table output."""
import json

from loclim.records import append_record, iter_records, read_records, write_tables


def sample_record(h=0.1):
    return {
        "schema": "loclim.experiment.v1",
        "kind": "rate",
        "config": {"hurst": h, "eps_grid": [0.0625, 0.03125]},
        "config_hash": "abc123",
        "regime": "lp_limit",
        "results": {
            "eps": [0.0625, 0.03125],
            "mean_abs_delta": [0.1, 0.049999999999999996],
            "se_mean_abs_delta": [0.01, 0.005],
            "sd_delta": [0.02, 0.01],
            "slope": 1.0000000000000002,
            "intercept": 0.0,
            "slope_se": 0.05,
        },
    }


class TestRoundTrip:
    def test_write_read_write_idempotent(self, tmp_path):
        """Byte-level idempotence, shortest-repr floats included."""
        store = tmp_path / "records.jsonl"
        append_record(store, sample_record())
        first = store.read_bytes()
        rec = read_records(store)[0]
        store2 = tmp_path / "again.jsonl"
        append_record(store2, rec)
        assert store2.read_bytes() == first

    def test_floats_survive_exactly(self, tmp_path):
        store = tmp_path / "records.jsonl"
        append_record(store, sample_record())
        rec = read_records(store)[0]
        assert rec["results"]["slope"] == 1.0000000000000002
        assert rec["results"]["mean_abs_delta"][1] == 0.049999999999999996

    def test_append_only(self, tmp_path):
        store = tmp_path / "records.jsonl"
        append_record(store, sample_record(0.1))
        append_record(store, sample_record(0.2))
        recs = list(iter_records(store))
        assert len(recs) == 2
        assert recs[0]["config"]["hurst"] == 0.1
        assert recs[1]["config"]["hurst"] == 0.2

    def test_lines_are_json(self, tmp_path):
        store = tmp_path / "records.jsonl"
        append_record(store, sample_record())
        for line in store.read_text().splitlines():
            json.loads(line)


class TestTables:
    def test_rate_table(self, tmp_path):
        paths = write_tables([sample_record()], tmp_path / "tables")
        assert len(paths) == 1
        lines = paths[0].read_text().splitlines()
        assert lines[0] == "eps,mean_abs_delta,se_mean_abs_delta,sd_delta"
        assert len(lines) == 3
        assert float(lines[1].split(",")[0]) == 0.0625

    def test_header_row_present(self, tmp_path):
        paths = write_tables([sample_record()], tmp_path)
        assert paths[0].read_text().startswith("eps,")
