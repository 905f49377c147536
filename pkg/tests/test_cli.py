import json

import numpy as np
import pytest

from resoforge.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, main


@pytest.fixture
def free_params_file(tmp_path):
    path = tmp_path / "params.json"
    path.write_text(json.dumps(
        {"mode": "free", "n": 2, "s": 1.0, "alpha": 0.05, "K0": 2, "K": 5}
    ))
    return str(path)


class TestSampleAndCheck:
    def test_sample_then_check(self, tmp_path):
        pot = tmp_path / "f.json"
        assert main(["sample", "--n", "2", "--s", "1.0", "--kmax", "6",
                     "--seed", "7", "--out", str(pot)]) == EXIT_OK
        out = tmp_path / "report.json"
        code = main(["check-generic", "--potential", str(pot), "--delta", "0.9",
                     "--beta", "0.01", "--kmax", "70", "--out", str(out)])
        doc = json.loads(out.read_text())
        assert doc["report"]["in_class"] in (True, False)
        assert code in (EXIT_OK, EXIT_INVARIANT)
        assert doc["report"]["window"][1] == 70

    def test_sample_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["sample", "--kmax", "5", "--seed", "3", "--out", str(a)])
        main(["sample", "--kmax", "5", "--seed", "3", "--out", str(b)])
        assert a.read_text() == b.read_text()

    def test_lacunary_preset_in_class(self, tmp_path):
        out = tmp_path / "rep.json"
        code = main(["check-generic", "--potential", "lacunary:n=2,s=4.0,kmax=20",
                     "--delta", "1.0", "--beta", "1e-30", "--kmax", "20",
                     "--out", str(out)])
        assert code == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["report"]["in_class"] is True
        assert doc["report"]["proved_beyond_cutoff"] is True


class TestBezout:
    def test_known_completion(self, tmp_path, capsys):
        assert main(["bezout", "--k", "2,3"]) == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["A"] == [[2, 3], [1, 2]]
        assert doc["A_inv"] == [[2, -3], [-1, 2]]
        assert doc["bounds"]["det"] == 1
        assert doc["U"]["U_num"][0] == [1, -8]
        assert doc["U"]["U_den"][0] == [1, 13]

    def test_gcd_two_is_config_error(self, capsys):
        assert main(["bezout", "--k", "2,4"]) == EXIT_CONFIG
        assert "not a generator" in capsys.readouterr().err


class TestCover:
    def test_classify_point(self, free_params_file, capsys):
        code = main(["cover", "classify", "--y", "0.31,0.47",
                     "--params", free_params_file])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert any(lab["kind"] == "R0" for lab in doc["labels"])

    def test_classify_outside_ball_is_config_error(self, free_params_file, capsys):
        code = main(["cover", "classify", "--y", "0.9,0.9",
                     "--params", free_params_file])
        assert code == EXIT_CONFIG
        assert "outside unit ball" in capsys.readouterr().err

    def test_measure_with_csv(self, free_params_file, tmp_path, capsys):
        csv_path = tmp_path / "labels.csv"
        code = main(["cover", "measure", "--params", free_params_file,
                     "--samples", "20000", "--seed", "1",
                     "--csv", str(csv_path), "--csv-rows", "100"])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["estimate"]["measure_any"] > 0
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "sample_index,y1,y2,label_kind,k,l"
        assert len(lines) == 101

    def test_raster(self, free_params_file, tmp_path, capsys):
        csv_path = tmp_path / "raster.csv"
        code = main(["cover", "raster", "--params", free_params_file,
                     "--grid", "32", "--csv", str(csv_path)])
        assert code == EXIT_OK
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "y1,y2,region_code"
        codes = {line.split(",")[2] for line in lines[1:]}
        assert codes <= {"0", "1", "2"} and codes

    def test_determinism_modulo_timestamp(self, free_params_file, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub / "est.json"
            out.parent.mkdir()
            main(["cover", "measure", "--params", free_params_file,
                  "--samples", "5000", "--seed", "9", "--out", str(out)])
            doc = json.loads(out.read_text())
            doc.pop("timestamp")
            doc["config"].pop("out")
            outs.append(json.dumps(doc, sort_keys=True))
        assert outs[0] == outs[1]


class TestNormalize:
    def test_resonant_normal_form(self, tmp_path):
        out = tmp_path / "nf.json"
        code = main(["normalize", "--potential", "two-mode:s=1.0",
                     "--eps", "1e-3", "--k0", "2", "--K", "6", "--alpha", "0.03",
                     "--order", "2", "--degree", "3",
                     "--base-point", "0.5,-0.5", "--resonant-k", "1,1",
                     "--out", str(out)])
        assert code == EXIT_OK
        doc = json.loads(out.read_text())
        nf = doc["normal_form"]
        assert nf["kind"] == "resonant" and nf["order"] == 2
        assert doc["band_coefficient_max"] == 0.0
        assert nf["divisor_log"]

    def test_nonresonant_normal_form(self, tmp_path):
        out = tmp_path / "nf.json"
        code = main(["normalize", "--potential", "two-mode:s=1.0",
                     "--eps", "1e-3", "--k0", "2", "--K", "6", "--alpha", "0.02",
                     "--base-point", "0.7,0.31", "--out", str(out)])
        assert code == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["normal_form"]["kind"] == "nonresonant"

    def test_small_divisor_exit(self, tmp_path, capsys):
        code = main(["normalize", "--potential", "two-mode:s=1.0",
                     "--eps", "1e-3", "--k0", "2", "--K", "6", "--alpha", "0.5",
                     "--base-point", "0.1,0.1"])
        assert code == EXIT_INVARIANT

    def test_paper_preset_requires_cutoff_order(self, capsys):
        code = main(["normalize", "--potential", "two-mode:s=1.0",
                     "--eps", "1e-3", "--k0", "2", "--K", "6",
                     "--base-point", "0.7,0.31"])
        # K < 6 K0: configuration error from the preset validation
        assert code == EXIT_CONFIG


class TestStandardize:
    def test_two_mode_pipeline(self, tmp_path):
        params = tmp_path / "p.json"
        params.write_text(json.dumps(
            {"mode": "free", "n": 2, "s": 1.0, "alpha": 0.03, "K0": 2, "K": 6}
        ))
        out = tmp_path / "sf.json"
        code = main(["standardize", "--potential", "two-mode:s=1.0",
                     "--eps", "1e-6", "--k", "1,1", "--params", str(params),
                     "--y0", "0.5,-0.5", "--beta", "0.05", "--out", str(out)])
        assert code == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["kappa"] == pytest.approx(113.13708498984761)
        assert doc["fixed_point"]["hypothesis_ok"] is True
        assert doc["reduction_identity_residual"] < 1e-8
        assert len(doc["grids"]["G_bar"]) == 64
