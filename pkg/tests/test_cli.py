from __future__ import annotations

import json
import math

import numpy as np
import pytest

from singlet_selftest.cli import main
from singlet_selftest.device import make_device
from singlet_selftest.documents import (
    DocumentError,
    device_from_document,
    device_to_document,
    document_digest,
    load_device,
    save_device,
)
from singlet_selftest.explorer import (
    SearchResult,
    canonical_chsh_device,
    canonical_my_device,
)
from singlet_selftest.linalg import PAULI_X, PAULI_Z


@pytest.fixture
def chsh_doc_path(tmp_path):
    path = tmp_path / "canonical_chsh.json"
    save_device(path, canonical_chsh_device())
    return path


class TestDocuments:
    def test_round_trip_value_identical(self, tmp_path):
        device = canonical_chsh_device()
        path = tmp_path / "dev.json"
        save_device(path, device, {"note": "round trip"})
        loaded = load_device(path)
        assert loaded.dims == device.dims
        assert np.array_equal(loaded.state, device.state)
        for name in device.alice_obs:
            assert np.array_equal(loaded.alice_obs[name], device.alice_obs[name])
        for name in device.bob_obs:
            assert np.array_equal(loaded.bob_obs[name], device.bob_obs[name])
        # digest is stable across serialize/deserialize cycles
        assert document_digest(device_to_document(device)) == document_digest(
            device_to_document(loaded)
        )

    def test_round_trip_random_amplitudes(self, tmp_path):
        rng = np.random.default_rng(5)
        state = rng.normal(size=6) + 1j * rng.normal(size=6)
        state /= np.linalg.norm(state)
        device = make_device((3, 2), state, {"A0": np.eye(3)}, {"B0": PAULI_Z})
        path = tmp_path / "dev.json"
        save_device(path, device)
        loaded = load_device(path)
        assert np.array_equal(loaded.state, device.state)

    def test_truncated_file_reports_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"schemaVersion": "1", "dims": [2', encoding="utf-8")
        with pytest.raises(DocumentError, match="parse error at line"):
            load_device(path)

    def test_unknown_schema_version(self):
        doc = device_to_document(canonical_chsh_device())
        doc["schemaVersion"] = "99"
        with pytest.raises(DocumentError, match="schemaVersion"):
            device_from_document(doc)

    def test_bad_matrix_rows_named(self):
        doc = device_to_document(canonical_chsh_device())
        doc["observables"]["alice"]["A0"][0] = [[1.0, 0.0]]
        with pytest.raises(DocumentError, match="observables.alice.A0"):
            device_from_document(doc)

    def test_invariant_violation_is_fatal(self, tmp_path):
        base = canonical_chsh_device()
        broken = make_device(
            (2, 2), base.state,
            {"A0": 0.5 * PAULI_X, "A1": PAULI_Z},
            dict(base.bob_obs),
        )
        path = tmp_path / "bad.json"
        save_device(path, broken)
        from singlet_selftest.device import DeviceValidationError

        with pytest.raises(DeviceValidationError, match="A0"):
            load_device(path)


class TestCertifyCommand:
    def test_canonical_passes(self, chsh_doc_path, tmp_path):
        out = tmp_path / "report.json"
        code = main([
            "certify", "--device", str(chsh_doc_path), "--mode", "chsh",
            "--out", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["report"]["allPass"] is True
        assert len(report["report"]["rows"]) == 35
        assert report["inputsDigest"].startswith("sha256:")
        for row in report["report"]["rows"]:
            assert {"name", "measured", "bound", "pass", "formula"} <= set(row)

    def test_failing_device_exits_one(self, tmp_path):
        # valid device whose deviation is >= 1: budget rows fail
        base = canonical_chsh_device()
        state = np.array([1.0, 0.0, 0.0, 0.0], dtype=complex)
        device = make_device((2, 2), state, dict(base.alice_obs), dict(base.bob_obs))
        path = tmp_path / "product.json"
        save_device(path, device)
        out = tmp_path / "report.json"
        code = main(["certify", "--device", str(path), "--mode", "chsh", "--out", str(out)])
        assert code == 1
        report = json.loads(out.read_text())
        assert report["report"]["allPass"] is False

    def test_invalid_device_exits_two_without_output(self, tmp_path):
        base = canonical_chsh_device()
        broken = make_device(
            (2, 2), base.state,
            {"A0": 0.5 * PAULI_X, "A1": PAULI_Z},
            dict(base.bob_obs),
        )
        path = tmp_path / "bad.json"
        save_device(path, broken)
        out = tmp_path / "report.json"
        code = main(["certify", "--device", str(path), "--mode", "chsh", "--out", str(out)])
        assert code == 2
        assert not out.exists()

    def test_truncated_input_exits_two(self, tmp_path):
        path = tmp_path / "trunc.json"
        path.write_text("{", encoding="utf-8")
        out = tmp_path / "report.json"
        code = main(["certify", "--device", str(path), "--mode", "chsh", "--out", str(out)])
        assert code == 2
        assert not out.exists()

    def test_missing_mode_is_usage_error(self, chsh_doc_path, tmp_path):
        code = main([
            "certify", "--device", str(chsh_doc_path), "--out", str(tmp_path / "r.json"),
        ])
        assert code == 2

    def test_wrong_mode_for_device_exits_two(self, tmp_path):
        # an MY device has no A0/A1/B0/B1; asking for chsh mode is an input error
        path = tmp_path / "my.json"
        save_device(path, canonical_my_device())
        out = tmp_path / "report.json"
        code = main(["certify", "--device", str(path), "--mode", "chsh", "--out", str(out)])
        assert code == 2
        assert not out.exists()

    def test_unwritable_output_exits_two(self, chsh_doc_path, tmp_path):
        out_dir = tmp_path / "adir"
        out_dir.mkdir()
        code = main([
            "certify", "--device", str(chsh_doc_path), "--mode", "chsh",
            "--out", str(out_dir),
        ])
        assert code == 2

    def test_my_mode(self, tmp_path):
        path = tmp_path / "my.json"
        save_device(path, canonical_my_device())
        out = tmp_path / "report.json"
        code = main(["certify", "--device", str(path), "--mode", "my", "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert len(report["report"]["rows"]) == 25

    def test_tilted_device_passes_with_slack_columns(self, tmp_path):
        from conftest import tilted_device

        path = tmp_path / "tilted.json"
        save_device(path, tilted_device(math.pi / 8))
        out = tmp_path / "report.json"
        code = main(["certify", "--device", str(path), "--mode", "chsh", "--out", str(out)])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["report"]["epsilon"] > 0.1
        slacks = [row["slack"] for row in report["report"]["rows"]]
        assert all(s is not None and s >= -1e-9 for s in slacks)

    def test_degenerate_device_report_is_clean_json(self, tmp_path):
        base = canonical_chsh_device()
        device = make_device(
            (2, 2), np.array([0, 0, 0, 1], dtype=complex),
            dict(base.alice_obs), dict(base.bob_obs),
        )
        path = tmp_path / "degenerate.json"
        save_device(path, device)
        out = tmp_path / "report.json"
        code = main(["certify", "--device", str(path), "--mode", "chsh", "--out", str(out)])
        assert code == 1
        report = json.loads(out.read_text())  # NaNs serialized as null
        assert report["report"]["junk"]["degenerate"] is True
        extraction = [r for r in report["report"]["rows"] if r["category"] == "extraction"]
        assert all(r["measured"] is None and r["pass"] is False for r in extraction)

    def test_no_stray_temp_files_on_unwritable_output(self, chsh_doc_path, tmp_path):
        out_dir = tmp_path / "adir"
        out_dir.mkdir()
        before = sorted(p.name for p in tmp_path.iterdir())
        code = main([
            "certify", "--device", str(chsh_doc_path), "--mode", "chsh",
            "--out", str(out_dir),
        ])
        assert code == 2
        assert sorted(p.name for p in tmp_path.iterdir()) == before


class TestCorrelationsCommand:
    def test_chsh_table_summing_to_2p80(self, tmp_path, capsys):
        table = tmp_path / "table.json"
        table.write_text(json.dumps(
            {"A0_B0": 0.70, "A0_B1": 0.70, "A1_B0": 0.70, "A1_B1": -0.70}
        ))
        code = main(["correlations", "--table", str(table), "--mode", "chsh"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["epsilon"] == pytest.approx(0.028427124746190469, abs=1e-15)
        assert doc["budgets"]["eps1"] == pytest.approx(
            2.0 * math.sqrt(doc["epsilon"] * math.sqrt(2.0)), rel=1e-12
        )
        assert doc["bounds"]["bOperator"] > 0
        assert "device model" in doc["note"]

    def test_exact_table_gives_zero_budgets(self, tmp_path, capsys):
        c = 1.0 / math.sqrt(2.0)
        table = tmp_path / "table.json"
        table.write_text(json.dumps({"A0_B0": c, "A0_B1": c, "A1_B0": c, "A1_B1": -c}))
        code = main(["correlations", "--table", str(table), "--mode", "chsh"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        # the sum reproduces 2*sqrt(2) to an ulp; everything collapses with it
        assert doc["epsilon"] <= 1e-12
        assert doc["budgets"]["eps1"] <= 1e-5 and doc["budgets"]["eps2"] <= 1e-2
        assert doc["bounds"]["extractionError"] <= 1e-2

    def test_my_table(self, tmp_path, capsys):
        c = 1.0 / math.sqrt(2.0)
        values = {
            "XA_XB": 0.99, "XA_ZB": 0.0, "XA_DB": c,
            "ZA_XB": 0.0, "ZA_ZB": 1.0, "ZA_DB": c,
        }
        table = tmp_path / "table.json"
        table.write_text(json.dumps(values))
        code = main(["correlations", "--table", str(table), "--mode", "my"])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["epsilon"] == pytest.approx(0.01, abs=1e-12)
        assert doc["budgets"]["eps2"] == pytest.approx(math.sqrt(0.02), rel=1e-12)
        assert doc["fidelity"]["discrepancy"] is True

    def test_missing_entry_exits_two(self, tmp_path):
        table = tmp_path / "table.json"
        table.write_text(json.dumps({"A0_B0": 0.7}))
        assert main(["correlations", "--table", str(table), "--mode", "chsh"]) == 2

    def test_out_of_range_value_exits_two(self, tmp_path):
        table = tmp_path / "table.json"
        table.write_text(json.dumps(
            {"A0_B0": 1.5, "A0_B1": 0.7, "A1_B0": 0.7, "A1_B1": -0.7}
        ))
        assert main(["correlations", "--table", str(table), "--mode", "chsh"]) == 2

    def test_output_file(self, tmp_path):
        c = 1.0 / math.sqrt(2.0)
        table = tmp_path / "table.json"
        table.write_text(json.dumps({"A0_B0": c, "A0_B1": c, "A1_B0": c, "A1_B1": -c}))
        out = tmp_path / "summary.json"
        code = main([
            "correlations", "--table", str(table), "--mode", "chsh", "--out", str(out),
        ])
        assert code == 0
        assert json.loads(out.read_text())["epsilon"] <= 1e-12


class TestSweepCommand:
    def write_spec(self, tmp_path):
        spec = {
            "kind": "tilted",
            "mode": "chsh",
            "dims": [2, 2],
            "seed": 42,
            "parameters": {
                "theta": {"start": math.pi / 4, "stop": math.pi / 8, "steps": 20}
            },
        }
        path = tmp_path / "family.json"
        path.write_text(json.dumps(spec))
        return path

    def test_row_count_and_header(self, tmp_path):
        spec = self.write_spec(tmp_path)
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--family", str(spec), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "theta,epsilon,eps1,eps2,maxError,bound,slack"
        assert len(lines) == 21

    def test_byte_identical_reruns(self, tmp_path):
        spec = self.write_spec(tmp_path)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["sweep", "--family", str(spec), "--out", str(out1)]) == 0
        assert main(["sweep", "--family", str(spec), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_thread_width_does_not_change_bytes(self, tmp_path, monkeypatch):
        spec = self.write_spec(tmp_path)
        out1, out2 = tmp_path / "serial.csv", tmp_path / "wide.csv"
        monkeypatch.setenv("SELFTEST_THREADS", "1")
        assert main(["sweep", "--family", str(spec), "--out", str(out1)]) == 0
        monkeypatch.setenv("SELFTEST_THREADS", "4")
        assert main(["sweep", "--family", str(spec), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_bad_family_kind_exits_two(self, tmp_path):
        path = tmp_path / "family.json"
        path.write_text(json.dumps({"kind": "bogus", "parameters": {"count": 2}}))
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--family", str(path), "--out", str(out)]) == 2
        assert not out.exists()

    def test_unknown_field_exits_two(self, tmp_path):
        path = tmp_path / "family.json"
        path.write_text(json.dumps({"kind": "tilted", "theta": 0.5}))
        assert main(["sweep", "--family", str(path), "--out", str(tmp_path / "s.csv")]) == 2

    def test_degenerate_row_written_as_nan(self, tmp_path):
        spec = {
            "kind": "tilted",
            "parameters": {"theta": {"start": math.pi / 4, "stop": math.pi / 2, "steps": 3}},
        }
        path = tmp_path / "family.json"
        path.write_text(json.dumps(spec))
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--family", str(path), "--out", str(out)]) == 0
        last = out.read_text().splitlines()[-1].split(",")
        assert last[4] == "nan" and last[6] == "nan"  # maxError, slack


class TestSearchCommand:
    def test_search_writes_device_and_report(self, tmp_path):
        out = tmp_path / "best.json"
        code = main([
            "search", "--mode", "chsh", "--epsilon-ceiling", "0.01",
            "--dims", "2,2", "--budget", "60", "--seed", "5", "--out", str(out),
        ])
        assert code == 0
        device = load_device(out)
        assert device.dims == (2, 2)
        report_path = tmp_path / "best.json.report.json"
        report = json.loads(report_path.read_text())
        assert report["report"]["epsilon"] <= 0.01 + 1e-12

    def test_zero_budget_exits_two(self, tmp_path):
        code = main([
            "search", "--mode", "chsh", "--epsilon-ceiling", "0.01",
            "--budget", "0", "--out", str(tmp_path / "x.json"),
        ])
        assert code == 2

    def test_not_found_exits_one(self, tmp_path, monkeypatch):
        import singlet_selftest.cli as cli_module

        monkeypatch.setattr(
            cli_module,
            "worst_case_search",
            lambda *a, **k: SearchResult(False, None, None, 10),
        )
        code = main([
            "search", "--mode", "chsh", "--epsilon-ceiling", "0.01",
            "--budget", "10", "--out", str(tmp_path / "x.json"),
        ])
        assert code == 1
        assert not (tmp_path / "x.json").exists()


class TestCanonicalCommand:
    def test_stdout_document(self, capsys):
        assert main(["canonical", "--mode", "my"]) == 0
        doc = json.loads(capsys.readouterr().out)
        device = device_from_document(doc)
        assert set(device.bob_obs) == {"XB", "ZB", "DB"}

    def test_file_output(self, tmp_path):
        out = tmp_path / "canon.json"
        assert main(["canonical", "--mode", "chsh", "--out", str(out)]) == 0
        device = load_device(out)
        assert set(device.alice_obs) == {"A0", "A1"}


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "certify" in capsys.readouterr().out
