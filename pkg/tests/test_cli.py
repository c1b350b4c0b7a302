import json

import pytest

from polypseg.cli import main
from polypseg.features import read_features_csv
from polypseg.manifest import load_manifest, save_manifest
from polypseg.slic import load_label_map


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Small synthetic dataset plus a config whose superpixel sizes match the
    downscaled polyps, processed through segment/features/train once."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    out = root / "out"
    assert main(["synth", "--out", str(data), "--count", "10", "--seed", "3", "--size", "192", "--patients", "4"]) == 0
    cfg = {"k_list": [16, 36], "train_k": 36, "min_polyp_px": 30}
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    args = ["--manifest", str(data / "manifest.json"), "--config", str(cfg_path), "--out", str(out)]
    assert main(["segment", *args]) == 0
    assert main(["features", *args]) == 0
    assert main(["train", *args]) == 0
    return {"root": root, "data": data, "out": out, "cfg_path": cfg_path, "args": args}


class TestSynthCommand:
    def test_zero_count_is_usage_error(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path), "--count", "0", "--seed", "1"]) == 2

    def test_missing_required_flag_exits_2(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--out", str(tmp_path)])
        assert exc.value.code == 2


class TestSegmentCommand:
    def test_artifacts_exist_with_sidecar_metadata(self, workspace):
        manifest = load_manifest(workspace["data"] / "manifest.json")
        for entry in manifest.frames:
            for k in (16, 36):
                png = workspace["out"] / "labelmaps" / entry.frame_id / f"k{k}.png"
                sidecar = png.with_suffix(".json")
                assert png.exists() and sidecar.exists()
                meta = json.loads(sidecar.read_text())
                assert meta["k"] == k and "config_hash" in meta

    def test_label_count_near_requested(self, tmp_path):
        from polypseg.synth import generate_dataset

        generate_dataset(tmp_path / "d", count=1, seed=9, patients=2, size=576)
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps({"k_list": [100]}))
        rc = main([
            "segment", "--manifest", str(tmp_path / "d" / "manifest.json"),
            "--config", str(cfg_path), "--out", str(tmp_path / "o"),
        ])
        assert rc == 0
        lm, meta = load_label_map(
            tmp_path / "o" / "labelmaps" / "synth0000" / "k100.png",
            tmp_path / "o" / "labelmaps" / "synth0000" / "k100.json",
        )
        assert 80 <= lm.num_labels <= 120

    def test_empty_manifest_is_usage_error(self, tmp_path, capsys):
        save_manifest([], tmp_path / "m.json")
        rc = main(["segment", "--manifest", str(tmp_path / "m.json"), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "no frames" in capsys.readouterr().err

    def test_corrupt_png_warns_but_succeeds(self, tmp_path, caplog):
        from polypseg.synth import generate_dataset

        generate_dataset(tmp_path / "d", count=3, seed=1, patients=2, size=96)
        (tmp_path / "d" / "images" / "synth0001.png").write_bytes(b"garbage")
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps({"k_list": [4], "min_polyp_px": 16}))
        with caplog.at_level("WARNING"):
            rc = main([
                "segment", "--manifest", str(tmp_path / "d" / "manifest.json"),
                "--config", str(cfg_path), "--out", str(tmp_path / "o"),
            ])
        assert rc == 0
        assert any("synth0001" in rec.message for rec in caplog.records)


class TestFeaturesCommand:
    def test_csv_shape_and_labels(self, workspace):
        records, chash = read_features_csv(workspace["out"] / "features" / "features_k36.csv")
        assert chash is not None
        assert all(r[2] in ("1", "-1") for r in records)  # every synth frame has a mask
        header = (workspace["out"] / "features" / "features_k36.csv").read_text().splitlines()[1]
        assert len(header.split(",")) == 164 + 3

    def test_unknown_label_without_mask(self, tmp_path):
        from polypseg.synth import generate_dataset

        src = generate_dataset(tmp_path / "d", count=2, seed=5, patients=2, size=96)
        manifest = json.loads(src.read_text())
        manifest["frames"][0]["mask_path"] = None
        (tmp_path / "d" / "manifest.json").write_text(json.dumps(manifest))
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps({"k_list": [4], "min_polyp_px": 16}))
        args = ["--manifest", str(tmp_path / "d" / "manifest.json"), "--config", str(cfg_path), "--out", str(tmp_path / "o")]
        assert main(["segment", *args]) == 0
        assert main(["features", *args]) == 0
        records, _ = read_features_csv(tmp_path / "o" / "features" / "features_k4.csv")
        by_frame = {}
        for frame_id, _sp, label, _v in records:
            by_frame.setdefault(frame_id, set()).add(label)
        assert by_frame["synth0000"] == {"unknown"}
        assert "unknown" not in by_frame["synth0001"]

    def test_missing_label_maps_is_instructive_hard_error(self, tmp_path, capsys):
        from polypseg.synth import generate_dataset

        generate_dataset(tmp_path / "d", count=1, seed=5, patients=2, size=96)
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps({"k_list": [4], "min_polyp_px": 16}))
        rc = main([
            "features", "--manifest", str(tmp_path / "d" / "manifest.json"),
            "--config", str(cfg_path), "--out", str(tmp_path / "o"),
        ])
        assert rc == 1
        err = capsys.readouterr().err
        assert "missing label map" in err and "segment" in err


class TestTrainCommand:
    def test_model_written_with_hash(self, workspace):
        doc = json.loads((workspace["out"] / "model.json").read_text())
        assert set(doc) >= {"sigma", "gamma", "bias", "alphas", "training_vectors", "normalizer", "feature_order_hash"}
        assert "config_hash" in doc

    def test_patient_leakage_is_hard_error(self, workspace, tmp_path, capsys):
        manifest = json.loads((workspace["data"] / "manifest.json").read_text())
        for frame in manifest["frames"]:
            frame["image_path"] = str(workspace["data"] / frame["image_path"])
            frame["mask_path"] = str(workspace["data"] / frame["mask_path"])
        manifest["frames"][0]["split"] = "train"
        manifest["frames"][0]["patient_id"] = manifest["frames"][-1]["patient_id"]
        manifest["frames"][-1]["split"] = "test"
        leaky = tmp_path / "leaky.json"
        leaky.write_text(json.dumps(manifest))
        rc = main([
            "train", "--manifest", str(leaky),
            "--config", str(workspace["cfg_path"]), "--out", str(workspace["out"]),
        ])
        assert rc == 1
        assert "leakage" in capsys.readouterr().err

    def test_single_class_is_hard_error(self, tmp_path, capsys):
        # train split built from polyp-free frames only
        from polypseg.evaluation import read_mask
        from polypseg.synth import generate_dataset

        src = generate_dataset(tmp_path / "d", count=8, seed=3, patients=4, size=96)
        doc = json.loads(src.read_text())
        for frame in doc["frames"]:
            empty = not read_mask(tmp_path / "d" / frame["mask_path"]).mask.any()
            frame["split"] = "train" if empty else "test"
            frame["patient_id"] = "pa" if empty else "pb"
        src.write_text(json.dumps(doc))
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps({"k_list": [9], "train_k": 9, "min_polyp_px": 16}))
        args = ["--manifest", str(src), "--config", str(cfg_path), "--out", str(tmp_path / "o")]
        assert main(["segment", *args]) == 0
        assert main(["features", *args]) == 0
        rc = main(["train", *args])
        assert rc == 1
        assert "both classes" in capsys.readouterr().err


class TestEvaluateCommand:
    def test_reports_and_charts_written(self, workspace):
        rc = main(["evaluate", *workspace["args"]])
        assert rc == 0
        rdir = workspace["out"] / "reports"
        assert (rdir / "metrics.csv").exists()
        assert (rdir / "metrics.json").exists()
        svg = (rdir / "classified_pixel.svg").read_text()
        assert svg.startswith("<svg") and "sensitivity" in svg

    def test_per_k_error_for_missing_artifacts(self, workspace, tmp_path):
        import shutil

        out_copy = tmp_path / "out"
        shutil.copytree(workspace["out"], out_copy)
        # removing a test frame's k=16 label map voids that k but not k=36
        for f in (out_copy / "labelmaps" / "synth0006").glob("k16.*"):
            f.unlink()
        rc = main([
            "evaluate", "--manifest", str(workspace["data"] / "manifest.json"),
            "--config", str(workspace["cfg_path"]), "--out", str(out_copy),
        ])
        assert rc == 0
        doc = json.loads((out_copy / "reports" / "metrics.json").read_text())
        assert [r["k"] for r in doc["results"]] == [36]
        assert any("k=16" in note for note in doc["notes"])

    def test_mixed_hash_inputs_refused(self, workspace, tmp_path, capsys):
        other_cfg = tmp_path / "other.json"
        other_cfg.write_text(json.dumps({"k_list": [16, 36], "train_k": 36, "min_polyp_px": 30, "tau": 0.6}))
        rc = main([
            "evaluate", "--manifest", str(workspace["data"] / "manifest.json"),
            "--config", str(other_cfg), "--out", str(workspace["out"]),
        ])
        assert rc == 1
        assert "hash" in capsys.readouterr().err

    def test_missing_model_is_hard_error(self, workspace, tmp_path, capsys):
        rc = main([
            "evaluate", "--manifest", str(workspace["data"] / "manifest.json"),
            "--config", str(workspace["cfg_path"]), "--out", str(tmp_path / "empty_out"),
        ])
        assert rc == 1
        assert "model" in capsys.readouterr().err

    def test_pixel_report_skipped_without_test_masks(self, workspace, tmp_path):
        manifest = json.loads((workspace["data"] / "manifest.json").read_text())
        for frame in manifest["frames"]:
            frame["image_path"] = str(workspace["data"] / frame["image_path"])
            if frame["split"] == "test":
                frame["mask_path"] = None
            else:
                frame["mask_path"] = str(workspace["data"] / frame["mask_path"])
        maskless = tmp_path / "maskless.json"
        maskless.write_text(json.dumps(manifest))
        rc = main([
            "evaluate", "--manifest", str(maskless),
            "--config", str(workspace["cfg_path"]), "--out", str(workspace["out"]),
        ])
        assert rc == 0
        doc = json.loads((workspace["out"] / "reports" / "metrics.json").read_text())
        assert all(r["classified_pixel"] is None for r in doc["results"])
        assert any("skipped" in note for note in doc["notes"])


class TestDeterminism:
    def test_rerun_produces_identical_artifacts(self, workspace, tmp_path):
        out2 = tmp_path / "out2"
        args = ["--manifest", str(workspace["data"] / "manifest.json"),
                "--config", str(workspace["cfg_path"]), "--out", str(out2)]
        assert main(["segment", *args]) == 0
        assert main(["features", *args]) == 0
        assert main(["train", *args]) == 0
        for k in (16, 36):
            a = (workspace["out"] / "features" / f"features_k{k}.csv").read_bytes()
            b = (out2 / "features" / f"features_k{k}.csv").read_bytes()
            assert a == b
        assert (workspace["out"] / "model.json").read_bytes() == (out2 / "model.json").read_bytes()


class TestSweepCommand:
    def test_oracle_only_sweep(self, workspace):
        rc = main(["sweep", *workspace["args"]])
        assert rc == 0
        doc = json.loads((workspace["out"] / "reports" / "metrics.json").read_text())
        ks = [r["k"] for r in doc["results"]]
        assert ks == [16, 36]
        assert all(r["oracle_pixel"] is not None for r in doc["results"])
        assert (workspace["out"] / "reports" / "oracle_pixel.svg").exists()

    def test_sweep_with_model_adds_classified_series(self, workspace):
        rc = main(["sweep", *workspace["args"], "--model", str(workspace["out"] / "model.json")])
        assert rc == 0
        doc = json.loads((workspace["out"] / "reports" / "metrics.json").read_text())
        assert all(r["classified_frame"] is not None for r in doc["results"])
