import json
import logging
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from cbyte.cli import id_color, main, manifest_path
from cbyte.mot_io import parse_mot

from .test_metrics import hand_example

SYNTH_CFG = """\
frames = 20
width = 240
height = 180
num_objects = 4
object_size = 28
layout_margin = 24
pan_x = 1.5
det_noise_px = 0.5
seed = 5
"""


def tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def seq_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    cfg = root / "synth.cfg"
    cfg.write_text(SYNTH_CFG)
    assert main(["synth", "--config", str(cfg), "--out", str(root / "seq")]) == 0
    return root / "seq"


@pytest.fixture(scope="module")
def tracked(seq_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("track") / "res.txt"
    assert main(["track", "--frames", str(seq_dir / "frames"), "--dets", str(seq_dir / "det.txt"), "--out", str(out)]) == 0
    return out


def track(seq_dir, out, *extra):
    return main(["track", "--frames", str(seq_dir / "frames"), "--dets", str(seq_dir / "det.txt"), "--out", str(out), *extra])


def eval_lines(capsys, gt, res):
    assert main(["eval", "--gt", str(gt), "--results", str(res)]) == 0
    out = capsys.readouterr().out
    return dict(line.split("=", 1) for line in out.splitlines() if "=" in line)


class TestSynth:
    def test_layout(self, seq_dir):
        assert sorted(p.name for p in seq_dir.iterdir()) == ["det.txt", "frames", "gt.txt", "planted_motion.txt"]
        assert len(list((seq_dir / "frames").iterdir())) == 20
        lines = (seq_dir / "planted_motion.txt").read_text().splitlines()
        assert len(lines) == 19
        assert all(len(line.split()) == 6 for line in lines)
        np.testing.assert_allclose([float(v) for v in lines[0].split()], [1, 0, 1.5, 0, 1, 0])

    def test_reproducible_tree(self, seq_dir, tmp_path):
        cfg = tmp_path / "synth.cfg"
        cfg.write_text(SYNTH_CFG)
        assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "again")]) == 0
        assert tree(tmp_path / "again") == tree(seq_dir)

    def test_refuses_non_empty_dir(self, tmp_path):
        (tmp_path / "out").mkdir()
        (tmp_path / "out" / "keep.txt").write_text("x")
        cfg = tmp_path / "synth.cfg"
        cfg.write_text(SYNTH_CFG)
        assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 1
        assert [p.name for p in (tmp_path / "out").iterdir()] == ["keep.txt"]


class TestTrack:
    def test_results_parse(self, tracked):
        recs = parse_mot(tracked.read_text())
        assert recs and all(r.id >= 1 for rs in recs.values() for r in rs)

    def test_manifest(self, tracked, seq_dir):
        m = json.loads(manifest_path(tracked).read_text())
        assert m["frame_count"] == 20 and m["enable_cmc"] is True
        assert m["config"]["cmc.theta_th"] == 0.9 and m["config"]["tau_high"] == 0.6
        assert m["inputs"]["dets"] == str((seq_dir / "det.txt").resolve())
        assert set(m["timings_ms"]) == {"predict", "cmc", "associate", "bookkeeping", "step"}
        assert all(v >= 0 for t in m["timings_ms"].values() for v in t.values())

    def test_no_cmc(self, seq_dir, tmp_path):
        out = tmp_path / "res.txt"
        assert track(seq_dir, out, "--no-cmc") == 0
        m = json.loads(manifest_path(out).read_text())
        assert m["enable_cmc"] is False and m["config"]["enable_cmc"] is False
        assert m["timings_ms"]["cmc"] == {"median": 0.0, "mean": 0.0}

    def test_byte_identical_rerun(self, seq_dir, tracked, tmp_path):
        out = tmp_path / "res.txt"
        assert track(seq_dir, out) == 0
        assert out.read_bytes() == tracked.read_bytes()

    def test_config_and_seed(self, seq_dir, tmp_path):
        cfg = tmp_path / "t.cfg"
        cfg.write_text("min_hits_to_confirm = 1\ncmc.seed = 3\n")
        out = tmp_path / "res.txt"
        assert track(seq_dir, out, "--config", str(cfg), "--seed", "8") == 0
        conf = json.loads(manifest_path(out).read_text())["config"]
        assert conf["min_hits_to_confirm"] == 1 and conf["cmc.seed"] == 8

    def test_unknown_config_key(self, seq_dir, tmp_path, caplog):
        cfg = tmp_path / "t.cfg"
        cfg.write_text("tau_hgih = 0.5\n")
        out = tmp_path / "res.txt"
        with caplog.at_level(logging.ERROR):
            assert track(seq_dir, out, "--config", str(cfg)) == 1
        assert "tau_hgih" in caplog.text
        assert not out.exists()

    def test_missing_frame(self, seq_dir, tmp_path, caplog):
        frames = tmp_path / "frames"
        frames.mkdir()
        for p in sorted((seq_dir / "frames").iterdir())[:-3]:
            (frames / p.name).write_bytes(p.read_bytes())
        out = tmp_path / "res.txt"
        with caplog.at_level(logging.ERROR):
            rc = main(["track", "--frames", str(frames), "--dets", str(seq_dir / "det.txt"), "--out", str(out)])
        assert rc == 1
        assert "frame 18" in caplog.text
        assert not out.exists() and not manifest_path(out).exists()
        assert list(tmp_path.glob(".*")) == []


class TestEval:
    def test_perfect(self, seq_dir, capsys):
        vals = eval_lines(capsys, seq_dir / "gt.txt", seq_dir / "gt.txt")
        assert vals["MOTA"] == "1.000" and vals["IDF1"] == "1.000" and vals["IDSW"] == "0"

    def test_tracked_reasonable(self, seq_dir, tracked, capsys):
        vals = eval_lines(capsys, seq_dir / "gt.txt", tracked)
        assert float(vals["MOTA"]) > 0.8

    def test_empty_results(self, seq_dir, tmp_path, capsys):
        empty = tmp_path / "empty.txt"
        empty.write_text("")
        assert eval_lines(capsys, seq_dir / "gt.txt", empty)["MOTA"] == "0.000"

    def test_hand_example(self, tmp_path, capsys):
        from cbyte.mot_io import serialize_records

        gt, res = hand_example()
        (tmp_path / "gt.txt").write_text(serialize_records(gt))
        (tmp_path / "res.txt").write_text(serialize_records(res))
        vals = eval_lines(capsys, tmp_path / "gt.txt", tmp_path / "res.txt")
        assert (vals["MOTA"], vals["FP"], vals["FN"], vals["IDSW"]) == ("0.600", "1", "2", "1")

    def test_table_and_keys(self, seq_dir, capsys):
        main(["eval", "--gt", str(seq_dir / "gt.txt"), "--results", str(seq_dir / "gt.txt")])
        out = capsys.readouterr().out.splitlines()
        keys = [line.split("=")[0] for line in out if "=" in line]
        assert keys[:7] == ["MOTA", "IDF1", "IDP", "IDR", "FP", "FN", "IDSW"]
        assert out[0].split() == ["metric", "value"]

    def test_disjoint_warns(self, tmp_path, capsys, caplog):
        (tmp_path / "gt.txt").write_text("1,1,0,0,10,10,1,1,1,1\n")
        (tmp_path / "res.txt").write_text("5,1,0,0,10,10,1,-1,-1,-1\n")
        with caplog.at_level(logging.WARNING):
            vals = eval_lines(capsys, tmp_path / "gt.txt", tmp_path / "res.txt")
        assert "disjoint" in caplog.text
        assert (vals["FP"], vals["FN"]) == ("1", "1")

    def test_ignored_gt_rows(self, tmp_path, capsys):
        (tmp_path / "gt.txt").write_text("1,1,0,0,10,10,1,1,1\n1,2,50,50,10,10,0,1,1\n")
        (tmp_path / "res.txt").write_text("1,7,0,0,10,10,1,-1,-1,-1\n")
        assert eval_lines(capsys, tmp_path / "gt.txt", tmp_path / "res.txt")["GT"] == "1"

    def test_parse_error_exit_code(self, tmp_path):
        (tmp_path / "gt.txt").write_text("1,x,0,0,1,1,1\n")
        assert main(["eval", "--gt", str(tmp_path / "gt.txt"), "--results", str(tmp_path / "gt.txt")]) == 1


class TestRender:
    def test_empty_results_copies_frames(self, seq_dir, tmp_path):
        empty = tmp_path / "empty.txt"
        empty.write_text("")
        out = tmp_path / "vis"
        assert main(["render", "--frames", str(seq_dir / "frames"), "--results", str(empty), "--out", str(out)]) == 0
        pngs = sorted(out.iterdir())
        assert len(pngs) == 20
        src = np.asarray(Image.open(seq_dir / "frames" / "000001.pgm"))
        got = np.asarray(Image.open(pngs[0]))
        assert got.shape == src.shape + (3,)
        assert all(np.array_equal(got[..., c], src) for c in range(3))

    def test_consistent_color(self, seq_dir, tmp_path):
        res = tmp_path / "res.txt"
        res.write_text("".join(f"{f},7,20,30,40,40,1,-1,-1,-1\n" for f in (1, 2, 3)))
        out = tmp_path / "vis"
        assert main(["render", "--frames", str(seq_dir / "frames"), "--results", str(res), "--out", str(out)]) == 0
        for f in (1, 2, 3):
            img = np.asarray(Image.open(out / f"{f:06d}.png"))
            assert tuple(img[30, 40]) == id_color(7)  # a pixel on the box's top edge

    def test_color_mapping(self):
        assert id_color(3) == id_color(3)
        assert len({id_color(i) for i in range(1, 30)}) == 29

    def test_missing_frames_skipped(self, seq_dir, tmp_path, caplog):
        res = tmp_path / "res.txt"
        res.write_text("999,1,0,0,5,5,1,-1,-1,-1\n")
        with caplog.at_level(logging.WARNING):
            assert main(["render", "--frames", str(seq_dir / "frames"), "--results", str(res), "--out", str(tmp_path / "v")]) == 0
        assert "999" in caplog.text


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cbyte", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "track" in proc.stdout
