import csv
import io
import json

import numpy as np
import pytest

from edgeintel import cli, delivery, metrics
from edgeintel.raster import Annotation, BoundingBox, Image, load_pnm, save_pnm, write_annotations


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def pair(tmp_path, rng):
    a = Image(rng.integers(0, 256, (20, 24, 3), dtype=np.uint8))
    b = Image(np.clip(a.pixels.astype(int) + rng.integers(-6, 7, a.pixels.shape), 0, 255))
    pa, pb = tmp_path / "a.ppm", tmp_path / "b.ppm"
    save_pnm(a, pa)
    save_pnm(b, pb)
    return a, b, pa, pb


@pytest.fixture
def scene(tmp_path, capsys):
    code, out, _ = run(capsys, "scene", "--side", 64, "--objects", 3, "--seed", 4,
                       "--image-id", "s", "--out-dir", tmp_path)
    assert code == 0 and json.loads(out)["objects"] == 3
    return tmp_path / "s.ppm", tmp_path / "s.jsonl"


def test_metrics_identical(pair, capsys):
    _, _, pa, _ = pair
    code, out, _ = run(capsys, "metrics", pa, pa)
    doc = json.loads(out)
    assert code == 0 and doc["psnr_db"] == "inf" and doc["ssim"] == 1.0
    assert doc["config"]["command"] == "metrics"


def test_metrics_match_library(pair, capsys):
    a, b, pa, pb = pair
    doc = json.loads(run(capsys, "metrics", pa, pb)[1])
    assert abs(doc["mse"] - metrics.mse(a, b)) <= 1e-9
    assert abs(doc["psnr_db"] - metrics.psnr(a, b)) <= 1e-9
    assert abs(doc["ssim"] - metrics.ssim(a, b)) <= 1e-9


def test_metrics_csv(pair, capsys):
    _, _, pa, pb = pair
    rows = list(csv.DictReader(io.StringIO(run(capsys, "--format", "csv", "metrics", pa, pb)[1])))
    assert len(rows) == 1 and float(rows[0]["mse"]) > 0


def test_metrics_dimension_mismatch(tmp_path, pair, capsys):
    _, _, pa, _ = pair
    save_pnm(Image(np.zeros((5, 5, 3), np.uint8)), tmp_path / "small.ppm")
    code, _, err = run(capsys, "metrics", pa, tmp_path / "small.ppm")
    assert code == 2 and "error" in err


def test_missing_file_is_io_error(tmp_path, capsys):
    assert run(capsys, "metrics", tmp_path / "nope.ppm", tmp_path / "nope.ppm")[0] == 1


def test_predictive_roundtrip(pair, tmp_path, capsys):
    _, _, pa, _ = pair
    code, out, _ = run(capsys, "codec", "encode", pa, tmp_path / "a.imcp")
    doc = json.loads(out)
    assert code == 0 and doc["bytes_in"] == pa.stat().st_size
    assert doc["bitrate_bpp"] == (tmp_path / "a.imcp").stat().st_size * 8 / (20 * 24)
    assert run(capsys, "codec", "decode", tmp_path / "a.imcp", tmp_path / "back.ppm")[0] == 0
    assert (tmp_path / "back.ppm").read_bytes() == pa.read_bytes()


def test_dct_ratio_grows_with_quality(scene, tmp_path, capsys):
    img, _ = scene
    ratios = []
    for q in (5, 95):
        doc = json.loads(run(capsys, "codec", "encode", img, tmp_path / f"q{q}.imcp",
                             "--codec", "dct", "--quality", q)[1])
        ratios.append(doc["ratio_pct"])
    assert ratios[0] < ratios[1]


def test_unknown_codec(pair, tmp_path, capsys):
    _, _, pa, _ = pair
    assert run(capsys, "codec", "encode", pa, tmp_path / "x", "--codec", "jpeg2k")[0] == 2


def test_corrupt_blob(tmp_path, capsys):
    (tmp_path / "bad.imcp").write_bytes(b"IMCP" + bytes(30))
    assert run(capsys, "codec", "decode", tmp_path / "bad.imcp", tmp_path / "o.ppm")[0] == 2


def test_ablate_sizes_only_is_reproducible(tmp_path, capsys):
    args = ["ablate", "--sizes-only", "--input-side", 64, "--blocks", "0,2",
            "--out-dir", tmp_path, "--format", "csv"]
    code, first, _ = run(capsys, *args)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(first)))
    assert [r["Compression"] for r in rows] == ["100.00", "6.25"]
    assert run(capsys, *args)[1] == first
    side = json.loads((tmp_path / "ablation.csv.config.json").read_text())
    assert side["blocks"] == [0, 2] and side["sizes_only"] is True


def test_ablate_bad_block(tmp_path, capsys):
    assert run(capsys, "ablate", "--sizes-only", "--blocks", "7", "--out-dir", tmp_path)[0] == 2


def test_ablate_tiny_training_run(tmp_path, capsys):
    code, out, _ = run(capsys, "ablate", "--synthetic", 10, "--input-side", 8, "--blocks", "1",
                       "--epochs", 2, "--batch-size", 4, "--base-width", 2,
                       "--out-dir", tmp_path)
    doc = json.loads(out)
    assert code == 0 and doc["rows"][0]["blocks"] == 1
    assert (tmp_path / "curves_b1.csv").exists()


def test_dataset_too_small(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--synthetic", 1, "--input-side", 8, "--epochs", 1,
                       "--out-dir", tmp_path)
    assert code == 2 and "error" in err


def test_numerical_failure_exit_code(tmp_path, capsys, monkeypatch):
    from edgeintel.autoencoder import train as train_mod
    from edgeintel.autoencoder.model import NumericalError

    def boom(*a, **k):
        raise NumericalError("non-finite loss nan")
    monkeypatch.setattr(train_mod, "train", boom)
    code, _, err = run(capsys, "train", "--synthetic", 10, "--input-side", 8,
                       "--out-dir", tmp_path)
    assert code == 3 and "numerical" in err


def test_caption_and_cutout(scene, tmp_path, capsys):
    img, ann = scene
    code, out, _ = run(capsys, "caption", ann, "--out-dir", tmp_path)
    doc = json.loads(out)
    assert code == 0 and doc["caption"].endswith("detected.")
    assert (tmp_path / "caption.txt").read_text() == doc["caption"]
    code, out, _ = run(capsys, "cutout", img, ann, "--min-confidence", 0, "--out-dir",
                       tmp_path / "cuts")
    cuts = json.loads(out)["cutouts"]
    assert code == 0 and len(cuts) == 3


def test_pipeline_order_and_timeline(scene, tmp_path, capsys):
    img, ann = scene
    out_dir = tmp_path / "run"
    code, out, err = run(capsys, "pipeline", img, ann, "--min-confidence", 0,
                         "--out-dir", out_dir, "--bandwidth-bps", 5000, "--latency-s", 0.01)
    assert code == 0 and "no --model" in err
    doc = json.loads(out)
    assert doc["order"][0] == "caption"
    assert doc["order"][-1] == "raw_image"
    manifest = json.loads((out_dir / "manifest.json").read_text())
    items = [delivery.SizedItem(e["kind"], e["byte_size"]) for e in manifest["payloads"]]
    expected = delivery.simulate(items, delivery.LinkModel(5000.0, 0.01))
    assert delivery.DeliveryTimeline.from_csv((out_dir / "timeline.csv").read_text()) == expected
    assert (out_dir / "policies.csv").exists()


def test_pipeline_zero_objects_caption_first(tmp_path, capsys):
    save_pnm(Image(np.full((16, 16, 3), 90, np.uint8)), tmp_path / "e.ppm")
    (tmp_path / "e.jsonl").write_bytes(write_annotations([]))
    doc = json.loads(run(capsys, "pipeline", tmp_path / "e.ppm", tmp_path / "e.jsonl",
                         "--out-dir", tmp_path)[1])
    assert doc["caption"] == "no objects detected."
    assert doc["order"][0] == "caption" and "cutout" not in doc["order"]


def test_simulate_sizes(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--sizes", "raw_image:1000000,caption:100,cutout:10000",
                       "--out-dir", tmp_path)
    doc = json.loads(out)
    assert code == 0
    assert [e["arrival"] for e in doc["timeline"]] == [0.01, 1.01, 101.01]
    pol = {p["policy"]: p for p in doc["policies"]}
    assert pol["hierarchical"]["time_to_first_intelligence"] == 0.01


def test_simulate_bad_args(tmp_path, capsys):
    assert run(capsys, "simulate", "--out-dir", tmp_path)[0] == 2
    assert run(capsys, "simulate", "--sizes", "video:3", "--out-dir", tmp_path)[0] == 2
    assert run(capsys, "simulate", "--sizes", "caption:3", "--bandwidth-bps", 0,
               "--out-dir", tmp_path)[0] == 2


def test_global_flags_after_subcommand(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--sizes", "caption:10", "--format", "csv",
                       "--out-dir", tmp_path)
    assert code == 0 and out.startswith("index,kind")
