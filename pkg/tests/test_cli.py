import filecmp

import numpy as np
import pytest

from ocular import cli, corpus, pipelines
from ocular.dataset import FRAME_NAME
from ocular.reports import read_csv


def table(path):
    head, rows = read_csv(path)
    return [dict(zip(head, r)) for r in rows]


def ocular(*argv):
    return cli.run([str(a) for a in argv] + ["--quiet"])


@pytest.fixture(scope="module")
def perclos_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("perclos")
    corpus.perclos_stream(root / "data", seed=4, frames=1800, closed=360)
    assert ocular("perclos", "--dataset", root / "data", "--out", root / "out") == 0
    return root


def test_perclos_stream_final_window(perclos_run):
    rows = table(perclos_run / "out" / "perclos.csv")
    assert [r["minute"] for r in rows] == ["1", "2", "3"]
    final = rows[-1]
    assert final["flag"] == "" and final["known"] == "1800"
    assert float(final["perclos"]) == pytest.approx(20.0, abs=0.5)


def test_perclos_frame_rows(perclos_run):
    frames = table(perclos_run / "out" / "frames.csv")
    truth = table(perclos_run / "data" / "truth.csv")
    assert [int(r["frame"]) for r in frames] == list(range(1800))
    assert all(r["status"] == "ok" for r in frames)
    agree = sum(f["state"] == t["state"] for f, t in zip(frames, truth))
    assert agree >= 0.98 * 1800
    for r in frames:
        for p in ("face", "eye"):
            x, y, w, h = (int(r[f"{p}_{k}"]) for k in "xywh")
            assert x >= 0 and y >= 0 and w > 0 and h > 0 and x + w <= 320 and y + h <= 240


def test_report_format(perclos_run):
    text = (perclos_run / "out" / "perclos.csv").read_text().splitlines()
    assert text[0] == "minute,perclos,closed,known,flag"
    assert text[-1].split(",")[1].split(".")[1].__len__() == 6
    assert (perclos_run / "out" / "config_used.cfg").read_text().startswith("seed = 0\n")


def test_blank_frames_undefined(tmp_path):
    corpus.blank_stream(tmp_path / "d", frames=30)
    assert ocular("perclos", "--dataset", tmp_path / "d", "--out", tmp_path / "o",
                  "--set", "window_s=3", "--set", "stride_s=1") == 0
    assert {r["state"] for r in table(tmp_path / "o" / "frames.csv")} == {"unknown"}
    rows = table(tmp_path / "o" / "perclos.csv")
    assert len(rows) == 3 and all(r["flag"] == "undefined" and r["perclos"] == "" for r in rows)


def test_error_rows_keep_frame_index(tmp_path):
    corpus.blank_stream(tmp_path / "d", frames=6)
    (tmp_path / "d" / FRAME_NAME.format(2)).write_bytes(b"P5\n3 3\n255\nxx")
    (tmp_path / "d" / FRAME_NAME.format(4)).unlink()
    assert ocular("perclos", "--dataset", tmp_path / "d", "--out", tmp_path / "o", "--set", "window_s=0.3",
                  "--set", "stride_s=0.1") == 0
    rows = table(tmp_path / "o" / "frames.csv")
    assert [r["frame"] for r in rows] == [str(k) for k in range(6)]
    assert [r["status"] for r in rows] == ["no_face", "no_face", "error", "no_face", "error", "no_face"]
    assert rows[2]["error"] and rows[4]["error"]


def test_saccade_sr_near_analytic(tmp_path):
    corpus.saccade_set(tmp_path / "d", seed=1)
    assert ocular("saccade", "--dataset", tmp_path / "d", "--out", tmp_path / "o") == 0
    rows = table(tmp_path / "o" / "saccades.csv")
    assert len(rows) == 1
    expect = corpus.analytic_sr(0.3, 0.008)
    assert abs(float(rows[0]["sr"]) - expect) <= 0.1 * expect
    assert abs(float(rows[0]["amplitude"])) == pytest.approx(0.3, abs=0.03)


def test_static_clip_no_saccades(tmp_path):
    corpus.saccade_set(tmp_path / "d", static=True, n=120)
    assert ocular("saccade", "--dataset", tmp_path / "d", "--out", tmp_path / "o") == 0
    assert table(tmp_path / "o" / "saccades.csv") == []
    assert len(table(tmp_path / "o" / "track.csv")) == 120


def test_identical_series_correlate_exactly():
    pairs = [(i, a, a, 2 * a, 2 * a) for i, a in enumerate([0.2, 0.5, 0.3, 0.9])]
    _, summary = pipelines.correlation_report(pairs)
    assert {row[0]: row[1] for row in summary} == {"amplitude": 1.0, "peak_velocity": 1.0}


def test_saccade_with_eog(tmp_path):
    corpus.saccade_set(tmp_path / "d", steps=corpus.SACCADE_STEPS, n=380, with_eog=True)
    assert ocular("saccade", "--dataset", tmp_path / "d", "--out", tmp_path / "o",
                  "--eog", tmp_path / "d" / "eog.csv") == 0
    assert len(table(tmp_path / "o" / "saccades.csv")) == 4
    summary = {r["parameter"]: r for r in table(tmp_path / "o" / "correlation_summary.csv")}
    assert int(summary["amplitude"]["pairs"]) == 4
    assert float(summary["amplitude"]["pearson"]) > 0.5


def test_spectacles_cli(tmp_path):
    corpus.spectacle_set(tmp_path / "d", each=5)
    assert ocular("spectacles", "--dataset", tmp_path / "d", "--out", tmp_path / "o") == 0
    rows = table(tmp_path / "o" / "spectacles.csv")
    hits = [r["detected"] == "1" for r in rows]
    assert sum(hits[:5]) >= 4 and sum(hits[5:]) <= 1


def test_roc_cli(tmp_path):
    (tmp_path / "s.csv").write_text("score,label\n0.9,1\n0.8,1\n0.3,0\n0.1,0\n")
    assert ocular("roc", "--scores", tmp_path / "s.csv", "--out", tmp_path / "o") == 0
    assert table(tmp_path / "o" / "auc.csv")[0]["auc"] == "1.000000"
    (tmp_path / "bad.csv").write_text("score,label\n0.9,1\n")
    with pytest.raises(SystemExit) as e:
        cli.main(["roc", "--scores", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "o2")])
    assert e.value.code == 2


def metric(path):
    return {r["metric"]: float(r["value"]) for r in table(path)}


def test_train_cascade_held_out(tmp_path):
    corpus.window_corpus(tmp_path / "d")
    assert ocular("train", "--mode", "cascade", "--dataset", tmp_path / "d", "--out", tmp_path / "o") == 0
    m = metric(tmp_path / "o" / "train_cascade.csv")
    assert m["heldout_tpr"] >= 0.9 and m["heldout_fpr"] <= 0.1
    assert (tmp_path / "o" / "face_cascade.txt").exists()


@pytest.fixture(scope="module")
def eyes(tmp_path_factory):
    root = tmp_path_factory.mktemp("eyes")
    corpus.eye_corpus(root, frames=60)
    return root


def test_train_subspace_auc(eyes, tmp_path):
    assert ocular("train", "--mode", "subspace", "--dataset", eyes, "--out", tmp_path) == 0
    m = metric(tmp_path / "train_subspace.csv")
    assert m["k"] == 15 and m["heldout_auc"] >= 0.9


def test_train_same_seed_same_models(eyes, tmp_path):
    for rep in "ab":
        assert ocular("train", "--mode", "svm", "--dataset", eyes, "--out", tmp_path / rep, "--seed", 7) == 0
    names = ["eye_subspace.txt", "eye_svm.txt", "train_svm.csv"]
    assert filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)[0] == names
    assert metric(tmp_path / "a" / "train_svm.csv")["heldout_accuracy"] >= 0.9


def test_train_insufficient_samples(tmp_path):
    corpus.window_corpus(tmp_path / "d", positives=5, negatives=30)
    with pytest.raises(SystemExit) as e:
        cli.main(["train", "--mode", "cascade", "--dataset", str(tmp_path / "d"), "--out", str(tmp_path / "o")])
    assert e.value.code == 2


@pytest.mark.parametrize("argv", [
    ["--set", "sf=40"],
    ["--set", "bogus=1"],
    ["--set", "noequals"],
])
def test_bad_config_exit_2(tmp_path, argv, capsys):
    corpus.blank_stream(tmp_path / "d", frames=2)
    with pytest.raises(SystemExit) as e:
        cli.main(["perclos", "--dataset", str(tmp_path / "d"), "--out", str(tmp_path / "o"), *argv])
    assert e.value.code == 2
    assert "ocular: error:" in capsys.readouterr().err


def test_missing_dataset_exit_2(tmp_path):
    with pytest.raises(SystemExit) as e:
        cli.main(["spectacles", "--dataset", str(tmp_path / "nothing"), "--out", str(tmp_path / "o")])
    assert e.value.code == 2


def test_fps_override(tmp_path):
    corpus.blank_stream(tmp_path / "d", frames=40, fps=10)
    assert ocular("perclos", "--dataset", tmp_path / "d", "--out", tmp_path / "o", "--fps", 20,
                  "--set", "window_s=1", "--set", "stride_s=1") == 0
    assert len(table(tmp_path / "o" / "perclos.csv")) == 2
    assert np.isclose(20.0, float((tmp_path / "o" / "config_used.cfg").read_text().split("fps = ")[1].split()[0]))
