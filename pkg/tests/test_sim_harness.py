"""Monte-Carlo BER engine: configs, reproducibility, stopping, gap readout."""

import json
import math

import numpy as np
import pytest

from sparseq.analysis import mfb_curve_static, mfb_static
from sparseq.channel import PowerProfile, make_sparse_cir
from sparseq.harness import (
    BerRecord,
    ExperimentConfig,
    config_from_json,
    config_hash,
    config_to_json,
    gap_at_ber,
    load_config,
    records_to_csv,
    run_experiment,
    run_manifest,
)

IDENTITY = make_sparse_cir([1.0], [])
TWO_PATH = PowerProfile(((0, 0.5), (2, 0.5)))


def _quick(channel=IDENTITY, **kw):
    base = dict(
        channel=channel,
        equalizer="va",
        ebn0_db=(6.79,),
        min_errors=400,
        max_bits=2_000_000,
        seed=0,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation_errors():
    with pytest.raises(ValueError):
        _quick(equalizer="magic")
    with pytest.raises(ValueError):
        _quick(ebn0_db=())
    with pytest.raises(ValueError):
        _quick(ebn0_db=(8.0, 7.0))
    with pytest.raises(ValueError):
        _quick(min_errors=10)  # too few for a usable estimate
    _quick(min_errors=10, allow_small_runs=True)  # explicit override passes
    with pytest.raises(ValueError):
        _quick(equalizer="ddfse")  # needs trellis_memory
    with pytest.raises(ValueError):
        _quick(prefilter_taps=20)  # prefilter only pairs with ddfse
    with pytest.raises(ValueError):
        _quick(equalizer="bcjr", trellis_memory=3)
    with pytest.raises(ValueError):
        _quick(
            channel=make_sparse_cir([1.0, 0.5], [200]),
            block_symbols=256,
        )  # block shorter than twice the channel memory


def test_config_json_round_trip():
    cfg = _quick(
        channel=TWO_PATH, equalizer="ddfse", trellis_memory=2,
        prefilter_taps=8, ebn0_db=(4.0, 8.0), seed=5,
    )
    doc = json.loads(json.dumps(config_to_json(cfg)))
    assert config_from_json(doc) == cfg
    assert config_hash(config_from_json(doc)) == config_hash(cfg)


def test_config_from_json_rejects_unknown_keys():
    doc = config_to_json(_quick())
    doc["typo_field"] = 1
    with pytest.raises(ValueError):
        config_from_json(doc)
    with pytest.raises(ValueError):
        config_from_json({"equalizer": "va"})  # channel missing


def test_config_hash_tracks_content():
    a = _quick(seed=0)
    b = _quick(seed=1)
    assert config_hash(a) != config_hash(b)
    assert config_hash(a) == config_hash(_quick(seed=0))
    assert a.with_seed(1) == b


def test_load_config_presets_and_path(tmp_path):
    for name in ("fig3", "fig4-L6", "fig4-L12", "fig4-L20"):
        cfg = load_config(name)
        assert cfg.ebn0_db[0] == 4.0
    p = tmp_path / "mine.json"
    p.write_text(json.dumps(config_to_json(_quick())))
    assert load_config(str(p)) == _quick()


def test_identity_channel_hits_matched_filter_rate():
    cfg = _quick()
    (rec,) = run_experiment(cfg)
    assert rec.bits >= 100_000
    expect = mfb_static(6.79)
    assert abs(rec.ber - expect) < 3 * rec.stderr
    assert rec.stderr == pytest.approx(
        math.sqrt(rec.ber * (1 - rec.ber) / rec.bits)
    )
    assert rec.config_hash == config_hash(cfg)


def test_records_deterministic_and_thread_invariant():
    cfg = _quick(channel=TWO_PATH, ebn0_db=(8.0,), min_errors=150,
                 max_bits=400_000)
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    c = run_experiment(cfg, threads=3)
    for x, y in ((a, b), (a, c)):
        for r, s in zip(x, y):
            assert (r.ebn0_db, r.bits, r.errors, r.ber, r.stderr) == (
                s.ebn0_db, s.bits, s.errors, s.ber, s.stderr
            )
            assert r.config_hash == s.config_hash


def test_seed_changes_results():
    cfg = _quick(ebn0_db=(6.0,), min_errors=150, max_bits=300_000)
    (a,) = run_experiment(cfg)
    (b,) = run_experiment(cfg.with_seed(99))
    assert a.errors != b.errors or a.ber != b.ber


def test_doubling_error_target_shrinks_stderr_by_sqrt2():
    lo = _quick(min_errors=400)
    hi = _quick(min_errors=800)
    (r_lo,) = run_experiment(lo)
    (r_hi,) = run_experiment(hi)
    ratio = r_lo.stderr / r_hi.stderr
    assert ratio == pytest.approx(math.sqrt(2.0), rel=0.2)


def test_ber_monotone_in_snr_within_3se():
    cfg = _quick(ebn0_db=(4.0, 6.0, 8.0), min_errors=300, max_bits=1_000_000)
    recs = run_experiment(cfg)
    for a, b in zip(recs, recs[1:]):
        assert b.ber <= a.ber + 3 * (a.stderr + b.stderr)


def test_infeasible_pairing_raises():
    dense = make_sparse_cir([math.sqrt(0.5), math.sqrt(0.1), math.sqrt(0.4)],
                            [6, 0])
    cfg = _quick(channel=dense, equalizer="pva", ebn0_db=(8.0,),
                 min_errors=100, max_bits=100_000)
    with pytest.raises(ValueError):
        run_experiment(cfg)


def test_fading_with_prefilter_runs_and_repeats():
    cfg = ExperimentConfig(
        channel=TWO_PATH, equalizer="ddfse", trellis_memory=1,
        prefilter_taps=8, ebn0_db=(8.0,), min_errors=100, max_bits=200_000,
        seed=3,
    )
    (a,) = run_experiment(cfg)
    (b,) = run_experiment(cfg, threads=2)
    assert (a.bits, a.errors) == (b.bits, b.errors)
    assert a.errors >= 100


def test_bcjr_equalizer_path():
    cfg = _quick(equalizer="bcjr", ebn0_db=(6.0,), min_errors=150,
                 max_bits=300_000)
    (rec,) = run_experiment(cfg)
    # hard MAP decisions on a memoryless channel equal the matched filter
    assert abs(rec.ber - mfb_static(6.0)) < 4 * rec.stderr


def test_run_manifest_contents():
    cfg = _quick()
    man = run_manifest(cfg)
    assert man["config_hash"] == config_hash(cfg)
    assert config_from_json(man["config"]) == cfg
    assert set(man["versions"]) == {"sparseq", "numpy", "scipy", "numba"}


def test_records_to_csv_format():
    rec = BerRecord(
        ebn0_db=6.0, bits=1000, errors=10, ber=0.01,
        stderr=math.sqrt(0.01 * 0.99 / 1000), seconds=0.5,
        config_hash="abc", seed=0,
    )
    text = records_to_csv([rec])
    lines = text.strip().split("\n")
    assert lines[0] == "ebn0_db,bits,errors,ber,stderr,seconds"
    assert lines[1].startswith("6,1000,10,1.00000000e-02,")


def _fake_records(curve, shift_db=0.0):
    recs = []
    for db, ber in curve.points:
        recs.append(
            BerRecord(
                ebn0_db=db + shift_db, bits=10**7,
                errors=int(ber * 10**7), ber=ber,
                stderr=math.sqrt(ber * (1 - ber) / 10**7),
                seconds=0.0, config_hash="x", seed=0,
            )
        )
    return recs


def test_gap_at_ber_zero_for_reference_itself():
    curve = mfb_curve_static([5.0, 6.0, 7.0, 8.0])
    recs = _fake_records(curve)
    assert gap_at_ber(recs, curve, 1e-3) == pytest.approx(0.0, abs=1e-9)


def test_gap_at_ber_reads_synthetic_shift():
    curve = mfb_curve_static([5.0, 6.0, 7.0, 8.0])
    recs = _fake_records(curve, shift_db=1.0)
    assert gap_at_ber(recs, curve, 1e-3) == pytest.approx(1.0, abs=0.05)


def test_gap_at_ber_requires_bracketing():
    curve = mfb_curve_static([5.0, 6.0, 7.0, 8.0])
    recs = _fake_records(curve)
    with pytest.raises(ValueError):
        gap_at_ber(recs, curve, 1e-9)
