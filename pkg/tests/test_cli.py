"""Command-line interface: parsing, outputs, exit codes, round trips."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sparseq.channel import (
    PowerProfile,
    channel_to_json,
    make_sparse_cir,
    map_bits,
    profile_to_json,
    simulate_channel,
)
from sparseq.cli import main
from sparseq.harness import ExperimentConfig, config_from_json, config_to_json
from sparseq.analysis import mfb_static

WORKED = make_sparse_cir([math.sqrt(0.5), math.sqrt(0.1), math.sqrt(0.4)], [2, 0])
H1 = make_sparse_cir([math.sqrt(0.5), math.sqrt(0.1), math.sqrt(0.4)], [5, 1])
H2 = make_sparse_cir([math.sqrt(0.5), math.sqrt(0.1), math.sqrt(0.4)], [6, 0])


@pytest.fixture
def chan_files(tmp_path):
    paths = {}
    for name, cir in (("worked", WORKED), ("h1", H1), ("h2", H2)):
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(channel_to_json(cir)))
        paths[name] = str(p)
    prof = tmp_path / "profile.json"
    prof.write_text(
        json.dumps(profile_to_json(PowerProfile(((0, 0.5), (2, 0.5)))))
    )
    paths["profile"] = str(prof)
    return paths


def _rows(csv_text):
    lines = [l for l in csv_text.strip().split("\n") if l]
    head = lines[0].split(",")
    return [dict(zip(head, line.split(","))) for line in lines[1:]]


def test_minphase_reproduces_known_taps(chan_files, capsys):
    assert main(["minphase", "--channel", chan_files["worked"]]) == 0
    out = capsys.readouterr().out
    rows = _rows(out)
    zeros = [r for r in rows if r["kind"] == "zero"]
    taps = [r for r in rows if r["kind"] == "tap"]
    assert len(zeros) == 4 and len(taps) == 5
    got = [float(r["re"]) for r in taps]
    np.testing.assert_allclose(
        got, [0.79, 0.12, -0.02, 0.20, 0.56], atol=0.01
    )
    assert sum(int(r["reflected"]) for r in zeros) == 2
    mags = sorted(float(r["magnitude"]) for r in zeros)
    np.testing.assert_allclose(mags, [0.89, 0.89, 1.06, 1.06], atol=0.01)


def test_minphase_writes_file(chan_files, tmp_path):
    out = tmp_path / "mp.csv"
    assert main(["minphase", "--channel", chan_files["worked"],
                 "--out", str(out)]) == 0
    assert out.read_text().startswith("kind,index,re,im,magnitude,reflected")


def test_analyze_reports_structure(chan_files, capsys):
    assert main(["analyze", "--channel", chan_files["h1"]]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["zero_pad"] == {"spacing": 1, "base_length": 4}
    assert doc["complexity"]["decomposable"] is True
    assert doc["complexity"]["conventional_branches"] == 512
    assert doc["complexity"]["parallel_branches"] == 64
    assert doc["influence"]["offsets"] == list(range(0, 17, 2))
    assert doc["suggested_memory"] == 3

    assert main(["analyze", "--channel", chan_files["h2"]]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["zero_pad"] is None
    assert doc["complexity"]["decomposable"] is False
    assert doc["complexity"]["merge_variant_branches"] == 2548


def test_designwmf_then_equalize_round_trip(chan_files, tmp_path, capsys):
    wmf = tmp_path / "wmf.json"
    assert main(["designwmf", "--channel", chan_files["worked"],
                 "--taps", "40", "--out", str(wmf)]) == 0
    doc = json.loads(wmf.read_text())
    assert doc["delay"] == 39
    assert len(doc["taps"]) == 40
    assert doc["design_error"] == pytest.approx(1.5577854542e-2, rel=1e-6)

    rng = np.random.default_rng(50)
    bits = rng.integers(0, 2, 80)
    sig = simulate_channel(map_bits(bits, 2), WORKED, 0.05, seed=4)
    sig_path = tmp_path / "sig.json"
    sig_path.write_text(json.dumps({
        "samples": [[float(s.real), float(s.imag)] for s in sig.samples],
        "noise_var": sig.noise_var,
    }))
    assert main(["equalize", "--channel", chan_files["worked"],
                 "--signal", str(sig_path), "--algo", "ddfse",
                 "--memory", "2", "--prefilter", str(wmf)]) == 0
    got = json.loads(capsys.readouterr().out)["bits"]
    assert np.count_nonzero(np.array(got) != bits) == 0


@pytest.mark.parametrize("algo", ["va", "pva", "bcjr"])
def test_equalize_algorithms(chan_files, tmp_path, capsys, algo):
    rng = np.random.default_rng(51)
    bits = rng.integers(0, 2, 40)
    sig = simulate_channel(map_bits(bits, 2), H1, 0.1, seed=6)
    sig_path = tmp_path / "sig.json"
    sig_path.write_text(json.dumps({
        "samples": [[float(s.real), float(s.imag)] for s in sig.samples],
        "noise_var": sig.noise_var,
    }))
    assert main(["equalize", "--channel", chan_files["h1"],
                 "--signal", str(sig_path), "--algo", algo]) == 0
    got = json.loads(capsys.readouterr().out)["bits"]
    np.testing.assert_array_equal(got, bits)


def test_equalize_ddfse_requires_memory(chan_files, tmp_path, capsys):
    sig_path = tmp_path / "sig.json"
    sig_path.write_text(json.dumps({
        "samples": [[0.0, 0.0]] * 20, "noise_var": 0.1,
    }))
    rc = main(["equalize", "--channel", chan_files["h1"],
               "--signal", str(sig_path), "--algo", "ddfse"])
    assert rc == 2


def test_mfb_static_csv(chan_files, capsys):
    assert main(["mfb", "--channel", chan_files["worked"],
                 "--grid", "4", "6.79", "8"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert [r["ebn0_db"] for r in rows] == ["4", "6.79", "8"]
    assert float(rows[1]["ber"]) == pytest.approx(mfb_static(6.79), rel=1e-8)
    assert all(float(r["stderr"]) == 0.0 for r in rows)


def test_mfb_fading_csv(chan_files, capsys):
    assert main(["mfb", "--channel", chan_files["profile"],
                 "--grid", "8", "12", "--draws", "20000"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert len(rows) == 2
    assert float(rows[0]["ber"]) > float(rows[1]["ber"])
    assert all(float(r["stderr"]) > 0 for r in rows)


@pytest.fixture
def tiny_config(tmp_path):
    cfg = ExperimentConfig(
        channel=make_sparse_cir([1.0], []),
        equalizer="va",
        ebn0_db=(5.0, 7.0),
        min_errors=150,
        max_bits=300_000,
        seed=11,
    )
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(config_to_json(cfg)))
    return str(p), cfg


def _strip_wall_time(csv_text):
    # drop the trailing seconds column: the only field that may vary between
    # two runs of one config
    return [line.rsplit(",", 1)[0] for line in csv_text.strip().split("\n")]


def test_ber_stdout_and_repeatability(tiny_config, capsys):
    path, cfg = tiny_config
    assert main(["ber", "--config", path]) == 0
    first = capsys.readouterr().out
    assert main(["ber", "--config", path]) == 0
    second = capsys.readouterr().out
    assert _strip_wall_time(first) == _strip_wall_time(second)
    rows = _rows(first)
    assert len(rows) == 2
    assert int(rows[0]["errors"]) >= 150


def test_ber_writes_outdir_with_manifest(tiny_config, tmp_path, capsys):
    path, cfg = tiny_config
    out = tmp_path / "run"
    assert main(["ber", "--config", path, "--out", str(out),
                 "--threads", "2"]) == 0
    csv_text = (out / "results.csv").read_text()
    assert csv_text.startswith("ebn0_db,bits,errors,ber,stderr,seconds")
    man = json.loads((out / "manifest.json").read_text())
    assert config_from_json(man["config"]) == cfg
    assert man["threads"] == 2
    assert man["versions"]["sparseq"]


def test_ber_seed_override_changes_manifest(tiny_config, tmp_path):
    path, cfg = tiny_config
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["ber", "--config", path, "--out", str(out_a)]) == 0
    assert main(["ber", "--config", path, "--seed", "99",
                 "--out", str(out_b)]) == 0
    ha = json.loads((out_a / "manifest.json").read_text())["config_hash"]
    hb = json.loads((out_b / "manifest.json").read_text())["config_hash"]
    assert ha != hb


def test_ber_rejects_bad_config(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert main(["ber", "--config", str(missing)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["ber", "--config", str(bad)]) == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"channel": {"coeffs": [[1, 0]], "gaps": []},
                                   "equalizer": "va", "ebn0_db": [5.0],
                                   "mystery": 1}))
    assert main(["ber", "--config", str(unknown)]) == 2


def test_channel_file_errors(tmp_path, capsys):
    prof = tmp_path / "p.json"
    prof.write_text(json.dumps(profile_to_json(PowerProfile(((0, 1.0),)))))
    # minphase needs a fixed channel, not a fading profile
    assert main(["minphase", "--channel", str(prof)]) == 2


def test_console_script_help():
    proc = subprocess.run(
        [sys.executable, "-m", "sparseq.cli", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    for sub in ("minphase", "designwmf", "analyze", "equalize", "mfb", "ber"):
        assert sub in proc.stdout
    for preset in ("fig3", "fig4-L6", "fig4-L12", "fig4-L20"):
        assert preset in proc.stdout
