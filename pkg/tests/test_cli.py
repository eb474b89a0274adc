import csv
import json
import os

import numpy as np
import pytest

from specfuse.cli import DEFAULTS, EVALUATE_COLUMNS, SWEEP_COLUMNS, build_parser, main, resolve
from specfuse.imageio import read_image, write_image
from specfuse.metrics import centroid_offset, ssim
from specfuse.regularizers import grayscale
from specfuse.synth import shift_image

SMALL = ["--data-size", "8", "--kernel-size", "5", "--sampling", "4"]


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.setenv("SPECFUSE_THREADS", "1")


@pytest.fixture
def bundle(tmp_path):
    out = tmp_path / "bundle"
    assert main(["simulate", "--out", str(out), "--shift", "1", "1", "--seed", "4"] + SMALL) == 0
    return out


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_default_settings():
    assert DEFAULTS["gamma"] == 0.9995 and DEFAULTS["epsilon"] == 0.003
    assert DEFAULTS["theta"] == 1.1 and DEFAULTS["eta"] == 2.0
    assert DEFAULTS["iterations"] == 2000 and DEFAULTS["kernel_size"] == (41, 41)
    assert DEFAULTS["sampling"] == 4 and DEFAULTS["alpha"] == 0.0
    assert DEFAULTS["algorithm"] == "palm"


def test_config_file_and_flag_precedence(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("# settings\nlambda-u = 0.5\niterations = 7\nkernel_size = 9 7\n")
    args = build_parser().parse_args(["fuse", "--config", str(cfg_path), "--iterations", "3"])
    cfg = resolve(args)
    assert cfg["lambda_u"] == 0.5 and cfg["iterations"] == 3 and cfg["kernel_size"] == (9, 7)
    assert cfg["lambda_k"] == 10.0
    cfg_path.write_text("bogus = 1\n")
    assert main(["fuse", "--config", str(cfg_path), "--out", str(tmp_path / "x")]) == 1


def test_simulate_bundle(bundle):
    names = set(os.listdir(bundle))
    for name in ("f.txt", "v.txt", "truth_image.txt", "truth_kernel.txt", "truth_registered.txt",
                 "bundle.json", "manifest.json", "f.png", "truth_kernel.png", "f.txt.meta"):
        assert name in names
    k = read_image(bundle / "truth_kernel.txt")
    assert np.allclose(centroid_offset(k), 0.0, atol=1e-12)
    meta = json.loads((bundle / "bundle.json").read_text())
    assert meta["spec"]["side_info_shift"] == [1, 1]
    manifest = json.loads((bundle / "manifest.json").read_text())
    listed = {a["path"] for a in manifest["artifacts"]}
    assert "f.txt" in listed and manifest["status"] == "ok"


def test_simulate_side_info_is_shifted(tmp_path):
    out = tmp_path / "b"
    main(["simulate", "--out", str(out), "--shift", "2", "0", "--noise", "0"] + SMALL)
    v = read_image(out / "v.txt")
    meta = json.loads((out / "bundle.json").read_text())
    assert meta["spec"]["noise_variance"] == 0.0
    from specfuse.synth import make_scene

    scene = make_scene(v.shape, seed=0)
    np.testing.assert_array_equal(v, shift_image(grayscale(scene), (2, 0)))


def test_simulate_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["simulate", "--out", str(tmp_path / name), "--seed", "3"] + SMALL) == 0
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())["artifacts"]
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())["artifacts"]
    assert ma == mb


def test_fuse_outputs_and_evaluate(tmp_path, bundle):
    run = tmp_path / "run"
    assert main(["fuse", "--bundle", str(bundle), "--out", str(run), "--iterations", "5",
                 "--lambda-k", "1"]) == 0
    for name in ("ch0_image.txt", "ch0_kernel.txt", "ch0_image.png", "ch0_kernel.png",
                 "ch0_trace.csv", "ch0_trace.png", "manifest.json"):
        assert (run / name).exists(), name
    u = read_image(run / "ch0_image.txt")
    assert u.shape == (32, 32)
    trace = _rows(run / "ch0_trace.csv")
    assert trace[0] == ["iter", "objective", "data_fidelity", "reg_u", "reg_k", "L_u", "L_k",
                        "retries", "seconds"]
    assert len(trace) == 7

    ev = tmp_path / "ev"
    assert main(["evaluate", "--run", str(run), "--truth", str(bundle / "truth_registered.txt"),
                 "--out", str(ev)]) == 0
    rows = _rows(ev / "evaluation.csv")
    assert tuple(rows[0]) == EVALUATE_COLUMNS
    assert rows[1][0] == "0" and rows[1][4] == "NA"
    assert float(rows[1][5]) == float(trace[-1][1])


def test_evaluate_truth_against_itself(tmp_path, bundle):
    run = tmp_path / "run"
    run.mkdir()
    truth = read_image(bundle / "truth_image.txt")
    write_image(run / "ch0_image.txt", truth[2:-2, 2:-2])
    ev = tmp_path / "ev"
    assert main(["evaluate", "--run", str(run), "--truth", str(bundle / "truth_image.txt"),
                 "--out", str(ev)]) == 0
    row = _rows(ev / "evaluation.csv")[1]
    assert float(row[1]) == 1.0 and float(row[2]) == 0.0 and row[5] == "NA"


def test_evaluate_shape_mismatch(tmp_path, bundle):
    run = tmp_path / "run"
    run.mkdir()
    write_image(run / "ch0_image.txt", np.zeros((5, 5)))
    assert main(["evaluate", "--run", str(run), "--truth", str(bundle / "truth_image.txt"),
                 "--out", str(tmp_path / "ev")]) == 1


def test_ipalm_alpha_zero_matches_palm(tmp_path, bundle):
    common = ["--bundle", str(bundle), "--iterations", "6"]
    assert main(["fuse", "--out", str(tmp_path / "p")] + common) == 0
    assert main(["fuse", "--out", str(tmp_path / "i"), "--algorithm", "ipalm", "--alpha", "0"]
                + common) == 0
    for name in ("ch0_image.txt", "ch0_kernel.txt"):
        assert (tmp_path / "p" / name).read_bytes() == (tmp_path / "i" / name).read_bytes()


def test_fuse_with_pure_tv_and_pam(tmp_path, bundle):
    assert main(["fuse", "--bundle", str(bundle), "--out", str(tmp_path / "tv"), "--gamma", "0",
                 "--iterations", "3"]) == 0
    assert main(["fuse", "--bundle", str(bundle), "--out", str(tmp_path / "pam"),
                 "--algorithm", "pam", "--iterations", "2"]) == 0
    rows = _rows(tmp_path / "pam" / "ch0_trace.csv")
    assert rows[1][5] == "nan"


def test_fuse_geometry_mismatch(tmp_path, bundle):
    code = main(["fuse", "--data", str(bundle / "f.txt"), "--side-info", str(bundle / "v.txt"),
                 "--kernel-size", "7", "--sampling", "4", "--out", str(tmp_path / "r")])
    assert code == 1


def test_fuse_several_channels_in_workers(tmp_path, bundle, monkeypatch):
    monkeypatch.setenv("SPECFUSE_THREADS", "2")
    f = str(bundle / "f.txt")
    out = tmp_path / "multi"
    assert main(["fuse", "--data", f, f, "--side-info", str(bundle / "v.txt"), "--kernel-size", "5",
                 "--out", str(out), "--iterations", "3"]) == 0
    assert (out / "ch0_image.txt").read_bytes() == (out / "ch1_image.txt").read_bytes()
    assert main(["fuse", "--data", f, "--side-info", str(bundle / "v.txt"), "--channels", "3",
                 "--out", str(out)]) == 1


def test_sweep_single_cell_equals_fuse_then_evaluate(tmp_path, bundle):
    sweep = tmp_path / "sweep"
    assert main(["sweep", "--bundle", str(bundle), "--out", str(sweep), "--lambda-u", "0.1",
                 "--lambda-k", "1", "--gamma", "0.9995", "--iterations", "5"]) == 0
    rows = _rows(sweep / "sweep.csv")
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert len(rows) == 2 and rows[1][-1] == "ok"
    assert (sweep / "sweep_ssim.png").exists() and (sweep / "sweep_psnr.png").exists()

    run, ev = tmp_path / "run", tmp_path / "ev"
    main(["fuse", "--bundle", str(bundle), "--out", str(run), "--lambda-u", "0.1",
          "--lambda-k", "1", "--iterations", "5"])
    main(["evaluate", "--run", str(run), "--truth", str(bundle / "truth_registered.txt"),
          "--out", str(ev)])
    ev_row = _rows(ev / "evaluation.csv")[1]
    assert rows[1][3] == ev_row[1] and rows[1][6] == ev_row[5]


def test_sweep_grid_and_failed_cells(tmp_path, bundle):
    sweep = tmp_path / "sweep"
    code = main(["sweep", "--bundle", str(bundle), "--out", str(sweep), "--lambda-u", "0.1", "1",
                 "--lambda-k", "1", "--gamma", "0.9995", "2", "--iterations", "2"])
    assert code == 1
    rows = _rows(sweep / "sweep.csv")[1:]
    assert len(rows) == 4
    status = {(r[0], r[2]): r[-1] for r in rows}
    assert status[("0.1", "0.9995")] == "ok"
    assert status[("0.1", "2.0")].startswith("failed")
    assert [r[3] for r in rows if r[2] == "2.0"] == ["NA", "NA"]
    manifest = json.loads((sweep / "manifest.json").read_text())
    assert manifest["status"] == "2 failed"


def test_manifest_hashes_match(tmp_path, bundle):
    import hashlib

    manifest = json.loads((bundle / "manifest.json").read_text())
    for entry in manifest["artifacts"]:
        digest = hashlib.sha256((bundle / entry["path"]).read_bytes()).hexdigest()
        assert digest == entry["sha256"]


def test_evaluate_ranks_baseline_below_palm(tmp_path):
    # a longer solve on a slightly larger bundle
    b = tmp_path / "b"
    main(["simulate", "--out", str(b), "--data-size", "16", "--kernel-size", "7", "--seed", "1",
          "--shift", "0", "0"])
    run = tmp_path / "run"
    assert main(["fuse", "--bundle", str(b), "--out", str(run), "--iterations", "150",
                 "--lambda-k", "1"]) == 0
    truth = read_image(b / "truth_registered.txt")[3:-3, 3:-3]
    f = read_image(b / "f.txt")
    baseline = np.repeat(np.repeat(f, 4, axis=0), 4, axis=1)
    recon = read_image(run / "ch0_image.txt")
    assert ssim(baseline, truth) < ssim(recon, truth)
