"""Run manifests: canonical hashing and reproducibility bookkeeping."""

import hashlib
import json

import pytest

from dyadnet.errors import DataError
from dyadnet.manifest import (RunManifest, canonical_json, config_digest,
                              file_digest, read_manifest, utc_timestamp)


class TestCanonicalJson:
    def test_sorted_and_compact(self):
        assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'

    def test_digest_is_order_insensitive(self):
        a = {"x": 1, "y": {"k": 2, "j": 3}}
        b = {"y": {"j": 3, "k": 2}, "x": 1}
        assert config_digest(a) == config_digest(b)

    def test_digest_changes_with_content(self):
        assert config_digest({"x": 1}) != config_digest({"x": 2})


class TestFileDigest:
    def test_matches_hashlib(self, tmp_path):
        p = tmp_path / "blob.bin"
        payload = b"\x00\x01" * 5000
        p.write_bytes(payload)
        assert file_digest(p) == hashlib.sha256(payload).hexdigest()

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="missing"):
            file_digest(tmp_path / "nope.bin")


class TestRunManifest:
    def build(self, tmp_path, seed=3):
        inp = tmp_path / "input.txt"
        inp.write_text("hello")
        return RunManifest.start("ingest", {"k": 1}, [inp], seed=seed,
                                 threads=1), inp

    def test_start_and_finish(self, tmp_path):
        m, inp = self.build(tmp_path)
        assert m.config_digest == config_digest({"k": 1})
        assert m.input_digests == {str(inp): file_digest(inp)}
        assert m.seed == 3 and m.command == "ingest"
        assert m.finished_at == ""
        m.finish()
        assert m.finished_at != ""

    def test_write_read_round_trip(self, tmp_path):
        m, _ = self.build(tmp_path)
        m.finish()
        path = tmp_path / "manifest.json"
        m.write(path)
        back = read_manifest(path)
        assert back == m

    def test_same_inputs(self, tmp_path):
        a, inp = self.build(tmp_path)
        b, _ = self.build(tmp_path)
        assert a.same_inputs(b)
        inp.write_text("changed")
        c = RunManifest.start("ingest", {"k": 1}, [inp], seed=3, threads=1)
        assert not a.same_inputs(c)
        d = RunManifest.start("ingest", {"k": 1}, [inp], seed=4, threads=1)
        assert not c.same_inputs(d)

    def test_from_dict_missing_field(self):
        with pytest.raises(DataError, match="seed"):
            RunManifest.from_dict({"tool_version": "1", "command": "x",
                                   "config_digest": "d",
                                   "input_digests": {},
                                   "started_at": "t", "threads": 1})

    def test_read_errors(self, tmp_path):
        with pytest.raises(DataError, match="missing manifest"):
            read_manifest(tmp_path / "absent.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(DataError, match="invalid manifest"):
            read_manifest(bad)

    def test_timestamp_shape(self):
        ts = utc_timestamp()
        assert len(ts) == 20 and ts.endswith("Z") and ts[4] == "-"

    def test_extra_round_trips(self, tmp_path):
        m, _ = self.build(tmp_path)
        m.extra["graph_digest"] = "abc"
        path = tmp_path / "m.json"
        m.write(path)
        assert read_manifest(path).extra == {"graph_digest": "abc"}
