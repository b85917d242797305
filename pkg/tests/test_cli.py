"""End-to-end CLI runs against tiny synthetic inputs, in process."""

import json
import os

import numpy as np
import pytest

from gridfuse.cli import main, build_parser
from gridfuse.cameras import load_cameras
from gridfuse.depth import render_depth_map, load_depth_npy
from gridfuse.fusion import load_model
from gridfuse.manifest import load_manifest, manifests_equal
from gridfuse.submission import read_submission
from gridfuse.transfer import TransferConfig, transfer_labels

K = 4


def camera_record(image, x=0.0, y=0.0, z=40.0, kappa=0.0, k1=0.0):
    return {
        "image": image, "width": 32, "height": 32, "f": 16.0,
        "cx": 0.0, "cy": 0.0, "b1": 0.0, "b2": 0.0,
        "k1": k1, "k2": 0.0, "k3": 0.0, "k4": 0.0, "k5": 0.0,
        "p1": 0.0, "p2": 0.0, "p3": 0.0, "p4": 0.0,
        "x": x, "y": y, "z": z, "omega": 0.0, "phi": 0.0, "kappa": kappa,
    }


@pytest.fixture
def scene(tmp_path):
    """Two nadir-ish cameras over a small ground patch, plus logits."""
    cams = tmp_path / "cameras.json"
    cams.write_text(json.dumps({"cameras": [
        camera_record("IMG_0001"),
        camera_record("IMG_0002", x=5.0, kappa=15.0, k1=0.01),
    ]}))
    rng = np.random.default_rng(11)
    pts = np.column_stack([
        rng.uniform(-15, 15, 300), rng.uniform(-15, 15, 300),
        rng.uniform(0, 3, 300),
    ])
    cloud = tmp_path / "cloud.npy"
    np.save(cloud, pts)
    logits = tmp_path / "logits"
    logits.mkdir()
    for name in ("IMG_0001", "IMG_0002"):
        arr = rng.normal(0, 0.3, (32, 32, K))
        iy, ix = np.mgrid[0:32, 0:32]
        arr[iy, ix, (ix + iy) % K] += 4.0
        np.save(logits / f"{name}.npy", arr)
    return {"cameras": cams, "cloud": cloud, "logits": logits, "points": pts}


# ---------------------------------------------------------------------------
# argument handling

def test_version_exits_zero(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0


def test_no_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 2


def test_missing_required_flag():
    with pytest.raises(SystemExit) as e:
        main(["project", "--camera", "IMG_0001"])
    assert e.value.code == 2


def test_threads_env(monkeypatch):
    argv = ["c2c", "--cloud-a", "a", "--cloud-b", "b", "--out", "o"]
    monkeypatch.setenv("GRIDFUSE_THREADS", "3")
    assert build_parser().parse_args(argv).threads == 3
    monkeypatch.setenv("GRIDFUSE_THREADS", "0")
    assert build_parser().parse_args(argv).threads == 1
    monkeypatch.setenv("GRIDFUSE_THREADS", "junk")
    assert build_parser().parse_args(argv).threads >= 1


def test_subcommand_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as e:
        main(["transfer", "--help"])
    assert e.value.code == 0
    text = capsys.readouterr().out
    assert "0.15" in text            # tau default is visible
    assert "--weighting" in text


# ---------------------------------------------------------------------------
# project / depthmap / transfer

def test_project_outputs(scene, tmp_path, capsys):
    out = tmp_path / "proj"
    rc = main(["project", "--cameras", str(scene["cameras"]),
               "--camera", "IMG_0001", "--points", str(scene["cloud"]),
               "--out", str(out)])
    assert rc == 0
    arr = np.load(out / "projections.npy")
    assert arr.shape == (300, 4)
    assert set(np.unique(arr[:, 3])) <= {0.0, 1.0, 2.0}
    doc = load_manifest(out / "manifest.json")
    assert doc["command"] == "project"
    assert doc["parameters"] == {"camera": "IMG_0001"}
    assert len(doc["inputs"]) == 2
    assert "in frame" in capsys.readouterr().out


def test_project_missing_points(scene, tmp_path):
    rc = main(["project", "--cameras", str(scene["cameras"]),
               "--camera", "IMG_0001", "--points", str(tmp_path / "no.npy"),
               "--out", str(tmp_path / "o")])
    assert rc == 3


def test_project_unknown_camera(scene, tmp_path, capsys):
    rc = main(["project", "--cameras", str(scene["cameras"]),
               "--camera", "IMG_9999", "--points", str(scene["cloud"]),
               "--out", str(tmp_path / "o")])
    assert rc == 3
    assert "IMG_9999" in capsys.readouterr().err


def test_project_rejects_malformed_cloud(scene, tmp_path):
    bad = tmp_path / "bad.npy"
    np.save(bad, np.zeros((5, 2)))
    rc = main(["project", "--cameras", str(scene["cameras"]),
               "--camera", "IMG_0001", "--points", str(bad),
               "--out", str(tmp_path / "o")])
    assert rc == 3


def test_depthmap_outputs(scene, tmp_path):
    out = tmp_path / "depth"
    rc = main(["depthmap", "--cameras", str(scene["cameras"]),
               "--cloud", str(scene["cloud"]), "--buffer", "1",
               "--figures", "--out", str(out)])
    assert rc == 0
    cams = load_cameras(scene["cameras"])
    for cam in cams:
        stored = load_depth_npy(out / f"{cam.image}.npy", buffer_radius=1)
        direct = render_depth_map(cam.intrinsics, cam.pose, scene["points"],
                                  buffer_radius=1)
        np.testing.assert_array_equal(stored.grid, direct.grid)
        assert (out / f"{cam.image}.png").exists()


def test_depthmap_single_camera(scene, tmp_path):
    out = tmp_path / "depth"
    rc = main(["depthmap", "--cameras", str(scene["cameras"]),
               "--camera", "IMG_0002", "--cloud", str(scene["cloud"]),
               "--out", str(out)])
    assert rc == 0
    assert (out / "IMG_0002.npy").exists()
    assert not (out / "IMG_0001.npy").exists()


def test_transfer_matches_library(scene, tmp_path):
    out = tmp_path / "labels"
    rc = main(["transfer", "--cameras", str(scene["cameras"]),
               "--cloud", str(scene["cloud"]), "--logits", str(scene["logits"]),
               "--tau", "0.5", "--buffer", "1", "--out", str(out)])
    assert rc == 0
    got = np.load(out / "labels.npy")
    cams = load_cameras(scene["cameras"])
    dms = [render_depth_map(c.intrinsics, c.pose, scene["points"], buffer_radius=1)
           for c in cams]
    logit_imgs = [np.load(scene["logits"] / f"{c.image}.npy") for c in cams]
    want = transfer_labels(scene["points"], cams, dms, logit_imgs,
                           TransferConfig(tau_z=0.5))
    np.testing.assert_array_equal(got, want)
    assert got.dtype == np.uint8
    assert (got != 255).any()


def test_transfer_reuses_depthmaps(scene, tmp_path):
    depth = tmp_path / "depth"
    main(["depthmap", "--cameras", str(scene["cameras"]),
          "--cloud", str(scene["cloud"]), "--buffer", "2", "--out", str(depth)])
    fresh, reused = tmp_path / "fresh", tmp_path / "reused"
    common = ["transfer", "--cameras", str(scene["cameras"]),
              "--cloud", str(scene["cloud"]), "--logits", str(scene["logits"])]
    assert main(common + ["--out", str(fresh)]) == 0
    assert main(common + ["--depthmaps", str(depth), "--out", str(reused)]) == 0
    np.testing.assert_array_equal(np.load(fresh / "labels.npy"),
                                  np.load(reused / "labels.npy"))


def test_transfer_missing_logit_image(scene, tmp_path, capsys):
    os.remove(scene["logits"] / "IMG_0002.npy")
    rc = main(["transfer", "--cameras", str(scene["cameras"]),
               "--cloud", str(scene["cloud"]), "--logits", str(scene["logits"]),
               "--out", str(tmp_path / "o")])
    assert rc == 3
    assert "IMG_0002" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# fusion

@pytest.fixture
def fusion_files(tmp_path):
    rng = np.random.default_rng(5)
    n, k = 80, 3
    y = rng.integers(0, k, n)
    a = rng.normal(0, 0.4, (n, k))
    b = rng.normal(0, 0.4, (n, k))
    a[np.arange(n), y] += 2.0
    for name, arr in (("a.npy", a), ("b.npy", b), ("y.npy", y)):
        np.save(tmp_path / name, arr)
    return tmp_path


def test_fuse_train_then_predict(fusion_files, capsys):
    out = fusion_files / "model"
    rc = main(["fuse-train", "--image-logits", str(fusion_files / "a.npy"),
               "--point-logits", str(fusion_files / "b.npy"),
               "--labels", str(fusion_files / "y.npy"),
               "--epochs", "5", "--batch", "16", "--hidden", "8",
               "--out", str(out)])
    assert rc == 0
    assert "parameter head" in capsys.readouterr().out
    log = (out / "training_log.csv").read_text().splitlines()
    assert log[0] == "epoch,loss,accuracy"
    assert len(log) == 6
    assert (out / "training_curve.png").exists()

    pred_dir = fusion_files / "pred"
    rc = main(["fuse-predict", "--model", str(out / "model.bin"),
               "--image-logits", str(fusion_files / "a.npy"),
               "--point-logits", str(fusion_files / "b.npy"),
               "--out", str(pred_dir)])
    assert rc == 0
    labels = np.load(pred_dir / "labels.npy")
    model = load_model(out / "model.bin")
    a = np.load(fusion_files / "a.npy")
    b = np.load(fusion_files / "b.npy")
    want = np.argmax(model.forward(np.concatenate([a, b], axis=1)), axis=1)
    np.testing.assert_array_equal(labels, want.astype(np.uint8))


def test_fuse_predict_shape_mismatch(fusion_files, tmp_path):
    out = fusion_files / "model"
    main(["fuse-train", "--image-logits", str(fusion_files / "a.npy"),
          "--point-logits", str(fusion_files / "b.npy"),
          "--labels", str(fusion_files / "y.npy"),
          "--epochs", "1", "--hidden", "8", "--out", str(out)])
    short = tmp_path / "short.npy"
    np.save(short, np.zeros((80, 2)))
    rc = main(["fuse-predict", "--model", str(out / "model.bin"),
               "--image-logits", str(fusion_files / "a.npy"),
               "--point-logits", str(short), "--out", str(tmp_path / "p")])
    assert rc == 3


def test_fuse_train_bad_hidden_spec(fusion_files, tmp_path):
    rc = main(["fuse-train", "--image-logits", str(fusion_files / "a.npy"),
               "--point-logits", str(fusion_files / "b.npy"),
               "--labels", str(fusion_files / "y.npy"),
               "--hidden", "8,oops", "--out", str(tmp_path / "o")])
    assert rc == 2


# ---------------------------------------------------------------------------
# eval / stats / submit

def test_eval_hand_example(tmp_path, capsys):
    np.save(tmp_path / "gt.npy", np.array([0, 0, 0, 1, 1, 1], dtype=np.uint8))
    np.save(tmp_path / "pred.npy", np.array([0, 0, 1, 1, 1, 0], dtype=np.uint8))
    out = tmp_path / "report"
    rc = main(["eval", "--pred", str(tmp_path / "pred.npy"),
               "--gt", str(tmp_path / "gt.npy"), "--classes", "2",
               "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "mIoU" in text and "0.5000" in text
    for f in ("per_class_iou.csv", "confusion.csv", "confusion.png", "iou.png"):
        assert (out / f).exists()
    rows = (out / "per_class_iou.csv").read_text().splitlines()
    assert rows[-1].endswith("0.500000")


def test_eval_merges_zone_directories(tmp_path, capsys):
    rng = np.random.default_rng(7)
    pred_d, gt_d = tmp_path / "pred", tmp_path / "gt"
    pred_d.mkdir(); gt_d.mkdir()
    for zone, n in (("za", 50), ("zb", 70)):
        np.save(gt_d / f"{zone}.npy", rng.integers(0, 3, n).astype(np.uint8))
        np.save(pred_d / f"{zone}.npy", rng.integers(0, 3, n).astype(np.uint8))
    rc = main(["eval", "--pred", str(pred_d), "--gt", str(gt_d),
               "--classes", "3"])
    assert rc == 0
    from gridfuse.metrics import confusion, miou
    gt = np.concatenate([np.load(gt_d / "za.npy"), np.load(gt_d / "zb.npy")])
    pr = np.concatenate([np.load(pred_d / "za.npy"), np.load(pred_d / "zb.npy")])
    _, want = miou(confusion(pr, gt, 3))
    assert f"{want:.4f}" in capsys.readouterr().out


def test_eval_length_mismatch(tmp_path):
    np.save(tmp_path / "gt.npy", np.zeros(6, dtype=np.uint8))
    np.save(tmp_path / "pred.npy", np.zeros(5, dtype=np.uint8))
    rc = main(["eval", "--pred", str(tmp_path / "pred.npy"),
               "--gt", str(tmp_path / "gt.npy"), "--classes", "2"])
    assert rc == 3


def test_stats_from_counts_csv(tmp_path, capsys):
    splits = tmp_path / "splits.txt"
    splits.write_text("za train\nzb val\nzc test\n")
    counts = tmp_path / "counts.csv"
    counts.write_text("zone,class,count\nza,0,100\nza,1,50\nzb,0,30\nzc,1,20\n")
    out = tmp_path / "report"
    rc = main(["stats", "--splits", str(splits), "--counts", str(counts),
               "--classes", "2", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "TOTAL" in text
    rows = (out / "split_stats.csv").read_text().splitlines()
    assert rows[1].split(",")[2:6] == ["100", "30", "0", "130"]
    assert (out / "split_distribution.png").exists()


def test_stats_rejects_bad_counts_header(tmp_path):
    splits = tmp_path / "splits.txt"
    splits.write_text("za train\n")
    counts = tmp_path / "counts.csv"
    counts.write_text("region,label,n\nza,0,100\n")
    rc = main(["stats", "--splits", str(splits), "--counts", str(counts),
               "--classes", "2"])
    assert rc == 3


def test_stats_labels_and_counts_exclusive(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["stats", "--labels", "x", "--counts", "y"])
    assert e.value.code == 2


def test_submit_then_eval(tmp_path, capsys):
    zones = tmp_path / "zones.txt"
    zones.write_text("za test\nzb test\nzc train\n")
    labels = tmp_path / "labels"
    labels.mkdir()
    rng = np.random.default_rng(3)
    for z, n in (("za", 40), ("zb", 25)):
        np.save(labels / f"{z}.npy", rng.integers(0, 11, n).astype(np.uint8))
    archive = tmp_path / "sub.npz"
    rc = main(["submit", "--labels", str(labels), "--zones", str(zones),
               "--subset", "test", "--out", str(archive)])
    assert rc == 0
    assert "2 zones, 65 labels" in capsys.readouterr().out
    stored = read_submission(archive)
    np.testing.assert_array_equal(stored["za"], np.load(labels / "za.npy"))
    rc = main(["eval", "--pred", str(archive), "--gt", str(labels)])
    assert rc == 0
    assert "1.0000" in capsys.readouterr().out   # archive matches its source


def test_submit_missing_zone(tmp_path, capsys):
    zones = tmp_path / "zones.txt"
    zones.write_text("za test\nzb test\n")
    labels = tmp_path / "labels"
    labels.mkdir()
    np.save(labels / "za.npy", np.zeros(5, dtype=np.uint8))
    rc = main(["submit", "--labels", str(labels), "--zones", str(zones),
               "--subset", "test", "--out", str(tmp_path / "s.npz")])
    assert rc == 3
    assert "zb" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# c2c / plan

def test_c2c_identical_clouds(tmp_path, capsys):
    pts = np.random.default_rng(1).uniform(-5, 5, (60, 3))
    np.save(tmp_path / "a.npy", pts)
    np.save(tmp_path / "b.npy", pts[::-1].copy())
    out = tmp_path / "c2c"
    rc = main(["c2c", "--cloud-a", str(tmp_path / "a.npy"),
               "--cloud-b", str(tmp_path / "b.npy"), "--out", str(out)])
    assert rc == 0
    assert np.load(out / "distances.npy").max() == 0.0
    assert "median: 0.0000 m" in capsys.readouterr().out
    assert (out / "c2c_summary.csv").exists()
    assert (out / "c2c_hist.png").exists()


def test_plan_outputs(tmp_path, capsys):
    pylons = tmp_path / "pylons.txt"
    pylons.write_text("# id x y z_top\nP1 0 0 30\nP2 80 0 34\nP3 80 60 30\n")
    out = tmp_path / "plan"
    rc = main(["plan", "--pylons", str(pylons), "--out", str(out)])
    assert rc == 0
    assert "waypoints" in capsys.readouterr().out
    assert (out / "waypoints.txt").exists()
    assert (out / "plan_top.png").exists()
    assert (out / "plan_profile.png").exists()


def test_plan_single_pylon(tmp_path):
    pylons = tmp_path / "pylons.txt"
    pylons.write_text("P1 0 0 30\n")
    rc = main(["plan", "--pylons", str(pylons), "--out", str(tmp_path / "o")])
    assert rc == 2


# ---------------------------------------------------------------------------
# determinism

def test_outputs_are_idempotent(scene, tmp_path):
    args = ["depthmap", "--cameras", str(scene["cameras"]),
            "--cloud", str(scene["cloud"]), "--figures"]
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    names = sorted(os.listdir(out1))
    assert names == sorted(os.listdir(out2))
    for name in names:
        if name == "manifest.json":
            continue
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name
    assert manifests_equal(load_manifest(out1 / "manifest.json"),
                           load_manifest(out2 / "manifest.json"))
