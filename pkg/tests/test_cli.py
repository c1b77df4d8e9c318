import json
import subprocess
import sys

import numpy as np
import pytest

from mme_eval import LabelVolume, Spacing
from mme_eval.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from mme_eval.io import ReportDocument, read_report, write_fixture

from niftis import nifti_bytes, write
from scenes import spots_scene, split_organ_scene, perturb, random_blobs


def put(path, volume):
    write_fixture(volume, path)
    return str(path)


@pytest.fixture
def pair(tmp_path):
    gt, pred = split_organ_scene()
    return put(tmp_path / "gt.txt", gt), put(tmp_path / "pred.txt", pred)


def load(path):
    return json.loads(open(path).read())


def test_single_pair(tmp_path, pair):
    out = tmp_path / "r.json"
    assert main(["evaluate", "--gt", pair[0], "--pred", pair[1], "--classes", "1", "--out", str(out)]) == EXIT_OK
    data = load(out)
    (entry,) = data["entries"]
    assert entry["class_id"] == 1
    assert set(entry["mme"]) == set("DUBTR")
    assert entry["mme"]["U"]["recall"] == 0.5
    assert entry["baseline"]["dice"] > 0
    assert entry["params"]["tau"] == [1.0, 5.0]


def test_single_pair_nifti_gz(tmp_path):
    gt, pred = spots_scene("two_of_three")
    g = write(tmp_path / "g.nii.gz", nifti_bytes(gt.labels, dtype="i2"), gz=True)
    p = write(tmp_path / "p.nii.gz", nifti_bytes(pred.labels, dtype="i2"), gz=True)
    out = tmp_path / "r.json"
    assert main(["evaluate", "--gt", str(g), "--pred", str(p), "--out", str(out)]) == EXIT_OK
    assert load(out)["entries"][0]["mme"]["D"]["recall"] == pytest.approx(2 / 3, abs=1e-6)


def make_dirs(tmp_path, n=3, extra=None):
    rng = np.random.default_rng(0)
    gdir, pdir = tmp_path / "gt", tmp_path / "pred"
    gdir.mkdir()
    pdir.mkdir()
    for i in range(n):
        gt = random_blobs(rng, shape=(12, 12, 6))
        put(gdir / f"case{i}.txt", gt)
        put(pdir / f"case{i}.txt", perturb(rng, gt))
    if extra:
        put(gdir / extra, random_blobs(rng, shape=(12, 12, 6)))
    return str(gdir), str(pdir)


def test_directory_mode_aggregate(tmp_path):
    g, p = make_dirs(tmp_path)
    out = tmp_path / "r.json"
    assert main(["evaluate", "--gt", g, "--pred", p, "--out", str(out)]) == EXIT_OK
    data = load(out)
    assert [e["image_id"] for e in data["entries"]] == ["case0", "case1", "case2"]
    block = data["aggregate"]["classes"]["1"]
    assert block["n"] == 3
    recalls = [e["mme"]["T"]["recall"] for e in data["entries"]]
    assert block["mme"]["T"]["recall"]["mean"] == pytest.approx(np.mean(recalls), abs=1e-5)
    assert block["mme"]["T"]["recall"]["std"] == pytest.approx(np.std(recalls), abs=1e-5)


def test_directory_unmatched_file_is_error(tmp_path):
    g, p = make_dirs(tmp_path, n=2, extra="lonely.txt")
    out = tmp_path / "r.json"
    assert main(["evaluate", "--gt", g, "--pred", p, "--out", str(out)]) == EXIT_FAILURE
    data = load(out)
    assert len(data["entries"]) == 2
    assert data["errors"][0]["image_id"] == "lonely"


def test_beta_two_reweights(tmp_path, pair):
    out1, out2 = tmp_path / "b1.json", tmp_path / "b2.json"
    main(["evaluate", "--gt", pair[0], "--pred", pair[1], "--out", str(out1)])
    main(["evaluate", "--gt", pair[0], "--pred", pair[1], "--beta", "2", "--out", str(out2)])
    u1, u2 = load(out1)["entries"][0]["mme"]["U"], load(out2)["entries"][0]["mme"]["U"]
    p, r = u2["precision"], u2["recall"]
    assert (p, r) == (1.0, 0.5)
    assert u2["fbeta"] == pytest.approx(5 * p * r / (4 * p + r), abs=1e-6)
    assert u2["fbeta"] < u1["fbeta"]


def test_csv_tau_columns(tmp_path, pair):
    out = tmp_path / "r.csv"
    assert main(["baselines", "--gt", pair[0], "--pred", pair[1], "--tau", "1,5", "--out", str(out)]) == EXIT_OK
    header, row = out.read_text().splitlines()
    assert header.split(",")[-2:] == ["nsd@1", "nsd@5"]
    assert row.split(",")[2] == ""  # no property rows for baselines-only output


def test_baselines_identical(tmp_path):
    gt, _ = split_organ_scene()
    g = put(tmp_path / "g.txt", gt)
    out = tmp_path / "r.json"
    assert main(["baselines", "--gt", g, "--pred", g, "--out", str(out)]) == EXIT_OK
    b = load(out)["entries"][0]["baseline"]
    assert b["dice"] == b["iou"] == b["volume_similarity"] == 1
    assert b["hd_max"] == b["hd_avg"] == 0


def test_baselines_empty_prediction_excluded(tmp_path):
    gt, _ = split_organ_scene()
    g = put(tmp_path / "g.txt", gt)
    p = put(tmp_path / "p.txt", LabelVolume(np.zeros(gt.dims, int)))
    out = tmp_path / "r.json"
    assert main(["baselines", "--gt", g, "--pred", p, "--classes", "1", "--out", str(out)]) == EXIT_OK
    data = load(out)
    assert data["entries"][0]["baseline"]["hd_max"] is None
    hd = data["aggregate"]["classes"]["1"]["baseline"]["hd_max"]
    assert hd["excluded"] == 1 and hd["n"] == 0


def test_dims_mismatch_is_failure(tmp_path):
    g = put(tmp_path / "g.txt", LabelVolume(np.ones((3, 3, 1), int)))
    p = put(tmp_path / "p.txt", LabelVolume(np.ones((4, 3, 1), int)))
    out = tmp_path / "r.json"
    assert main(["evaluate", "--gt", g, "--pred", p, "--out", str(out)]) == EXIT_FAILURE
    assert load(out)["errors"]


def test_unreadable_file_is_failure(tmp_path, pair):
    out = tmp_path / "r.json"
    assert main(["evaluate", "--gt", pair[0], "--pred", str(tmp_path / "nope.txt"), "--out", str(out)]) == EXIT_FAILURE


@pytest.mark.parametrize("argv", [
    ["evaluate", "--gt", "a.txt", "--out", "r.json"],
    ["evaluate", "--gt", "a.txt", "--pred", "b.txt", "--out", "r.json", "--beta", "0"],
    ["evaluate", "--gt", "a.txt", "--pred", "b.txt", "--out", "r.json", "--connectivity", "8"],
    ["evaluate", "--gt", "a.txt", "--pred", "b.txt", "--out", "r.json", "--tau", "1,x"],
])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == EXIT_USAGE


def test_empty_directories_are_usage_error(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    assert main(["evaluate", "--gt", str(tmp_path / "a"), "--pred", str(tmp_path / "b"),
                 "--out", str(tmp_path / "r.json")]) == EXIT_USAGE


def test_jobs_matches_sequential(tmp_path, monkeypatch):
    g, p = make_dirs(tmp_path, n=4)
    seq, par, env = tmp_path / "s.json", tmp_path / "p.json", tmp_path / "e.json"
    main(["evaluate", "--gt", g, "--pred", p, "--out", str(seq)])
    main(["evaluate", "--gt", g, "--pred", p, "--jobs", "4", "--out", str(par)])
    monkeypatch.setenv("MME_EVAL_JOBS", "2")
    main(["evaluate", "--gt", g, "--pred", p, "--out", str(env)])
    assert seq.read_bytes() == par.read_bytes() == env.read_bytes()


def test_repeated_runs_identical(tmp_path, pair):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["evaluate", "--gt", pair[0], "--pred", pair[1], "--out", str(a)])
    main(["evaluate", "--gt", pair[0], "--pred", pair[1], "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_aggregate_equals_recomputed(tmp_path):
    g, p = make_dirs(tmp_path)
    out = tmp_path / "r.json"
    main(["evaluate", "--gt", g, "--pred", p, "--out", str(out)])
    doc = read_report(out)
    # entries in the file are already rounded, so allow the last digit to move
    assert flatten(ReportDocument.build(doc.entries).aggregate) == pytest.approx(flatten(load(out)["aggregate"]), rel=1e-5, abs=1e-6)


def flatten(tree, prefix=""):
    if isinstance(tree, dict):
        out = {}
        for k, v in tree.items():
            out.update(flatten(v, f"{prefix}/{k}"))
        return out
    return {prefix: tree}


def test_module_entry_point(tmp_path, pair):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "mme_eval", "evaluate", "--gt", pair[0], "--pred", pair[1],
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()


# -- chart ----------------------------------------------------------------------


def chart_report(tmp_path, gt, pred, name="img"):
    g, p = put(tmp_path / f"{name}.txt", gt), put(tmp_path / f"{name}_p.txt", pred)
    out = tmp_path / "r.json"
    assert main(["evaluate", "--gt", g, "--pred", p, "--out", str(out)]) == EXIT_OK
    return str(out)


def test_chart_deterministic(tmp_path):
    report = chart_report(tmp_path, *split_organ_scene())
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    assert main(["chart", report, "--image", "img", "--class", "1", "--out", str(a)]) == EXIT_OK
    assert main(["chart", report, "--image", "img", "--class", "1", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert text.startswith("<svg") and 'id="precision"' in text and 'id="recall"' in text


def test_chart_missing_entry(tmp_path):
    report = chart_report(tmp_path, *split_organ_scene())
    assert main(["chart", report, "--image", "other", "--class", "1", "--out", str(tmp_path / "x.svg")]) == EXIT_FAILURE


def test_chart_from_merged_scene_places_u_vertex(tmp_path):
    import re

    from mme_eval.chart import SpiderChartSpec, vertex

    report = chart_report(tmp_path, *spots_scene("merged"))
    svg = tmp_path / "c.svg"
    main(["chart", report, "--image", "img", "--class", "1", "--out", str(svg)])
    points = re.search(r'id="precision" points="([^"]+)"', svg.read_text()).group(1).split()
    x, y = (float(v) for v in points[1].split(","))
    spec = SpiderChartSpec((1,) * 5, (1,) * 5)
    ux, uy = vertex(spec, 1, 1.0)
    frac = np.hypot(x - spec.center, y - spec.center) / np.hypot(ux - spec.center, uy - spec.center)
    assert frac == pytest.approx(1 / 3, abs=1e-3)


def test_spacing_flags_pass_through(tmp_path):
    gt, pred = split_organ_scene()
    gt = LabelVolume(gt.labels, Spacing(0.5, 0.5, 3.0))
    pred = LabelVolume(pred.labels, Spacing(0.5, 0.5, 3.0))
    out = tmp_path / "r.json"
    assert main(["evaluate", "--gt", put(tmp_path / "g.txt", gt), "--pred", put(tmp_path / "p.txt", pred),
                 "--out", str(out)]) == EXIT_OK
