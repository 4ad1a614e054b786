"""Sparsity analysis, the decimated parallel detector, and reduced-state DDFSE."""

import math

import numpy as np
import pytest

from sparseq.channel import (
    alphabet_for,
    cir_from_dense,
    make_sparse_cir,
    map_bits,
    simulate_channel,
)
from sparseq.prefilter import design_wmf, apply_filter, minimum_phase
from sparseq.sparse_eq import (
    DdfseConfig,
    choose_k,
    ddfse,
    decompose,
    influence_set,
    mva_reference_count,
    pva_mlse,
)
from sparseq.trellis import viterbi_mlse

H1 = make_sparse_cir([math.sqrt(0.5), math.sqrt(0.1), math.sqrt(0.4)], [5, 1])
H2 = make_sparse_cir([math.sqrt(0.5), math.sqrt(0.1), math.sqrt(0.4)], [6, 0])


def _random_padded_cir(rng):
    """Random channel whose delays share a factor >= 2."""
    m = int(rng.integers(2, 4))
    base_delays = [0] + sorted(
        rng.choice(np.arange(1, 5), rng.integers(1, 3), replace=False).tolist()
    )
    delays = [d * m for d in base_delays]
    coeffs = rng.normal(size=len(delays)) + 1j * rng.normal(size=len(delays))
    coeffs[np.abs(coeffs) < 0.15] += 0.3
    gaps = [b - a - 1 for a, b in zip(delays, delays[1:])]
    return make_sparse_cir(coeffs, gaps)


def test_influence_set_spread_channel():
    infl = influence_set(H1, 0, horizon=2)
    assert infl.indices == tuple(range(0, 17, 2))
    assert infl.offsets() == tuple(range(0, 17, 2))
    # shifting the origin translates the whole set
    assert influence_set(H1, 5, horizon=2).indices == tuple(range(5, 22, 2))


def test_influence_set_dense_channel():
    infl = influence_set(H2, 0, horizon=2)
    assert infl.indices == tuple(range(0, 17))


def test_influence_set_isolated_symbol():
    cir = make_sparse_cir([1.0], [])
    infl = influence_set(cir, 3, horizon=2)
    assert infl.indices == (3,)


def test_decompose_padded_channel():
    d = decompose(H1)
    assert d.decomposable
    assert d.m == 2
    assert d.sub_memory == 4
    assert d.state_count(2) == 16
    assert d.residue_classes(7) == ((0, 2, 4, 6), (1, 3, 5))


def test_decompose_dense_channel():
    d = decompose(H2)
    assert not d.decomposable
    assert d.m == 1
    assert d.sub_memory == H2.memory


def test_pva_equals_viterbi_on_h1():
    rng = np.random.default_rng(30)
    for _ in range(50):
        bits = rng.integers(0, 2, 60)
        sig = simulate_channel(
            map_bits(bits, 2), H1, noise_var=float(rng.uniform(0.05, 0.8)),
            seed=int(rng.integers(1 << 30)),
        )
        va = viterbi_mlse(sig, H1)
        pv = pva_mlse(sig, H1)
        np.testing.assert_array_equal(va.indices(), pv.indices())


def test_pva_equals_viterbi_on_random_padded_channels():
    rng = np.random.default_rng(31)
    for _ in range(40):
        cir = _random_padded_cir(rng)
        n = int(rng.integers(2 * cir.memory + 2, 3 * cir.memory + 20))
        bits = rng.integers(0, 2, n)
        sig = simulate_channel(
            map_bits(bits, 2), cir, noise_var=float(rng.uniform(0.05, 0.6)),
            seed=int(rng.integers(1 << 30)),
        )
        np.testing.assert_array_equal(
            viterbi_mlse(sig, cir).indices(), pva_mlse(sig, cir).indices()
        )


def test_pva_qpsk():
    rng = np.random.default_rng(32)
    ab = alphabet_for(4)
    cir = make_sparse_cir([0.8, 0.4 + 0.3j], [3])
    for _ in range(10):
        bits = rng.integers(0, 2, 2 * 30)
        sig = simulate_channel(
            map_bits(bits, ab), cir, 0.2, seed=int(rng.integers(1 << 30))
        )
        np.testing.assert_array_equal(
            viterbi_mlse(sig, cir, ab).indices(),
            pva_mlse(sig, cir, ab).indices(),
        )


def test_pva_rejects_dense_channel():
    y = np.zeros(40, dtype=complex)
    with pytest.raises(ValueError):
        pva_mlse(y, H2, n_data=20)


def test_pva_work_advantage():
    rng = np.random.default_rng(33)
    bits = rng.integers(0, 2, 120)
    sig = simulate_channel(map_bits(bits, 2), H1, 0.05, seed=2)
    _, full = viterbi_mlse(sig, H1, detail=True)
    _, subs = pva_mlse(sig, H1, detail=True)
    assert len(subs) == 2
    total = sum(s.work for s in subs)
    # steady-state ratio is M^9 / (2 M^5) = 8; block edges dilute it a bit
    assert full.work / total > 8
    assert full.work == 59902
    assert [s.work for s in subs] == [1886, 1886]


def test_pva_interleaves_subblock_decisions():
    rng = np.random.default_rng(34)
    bits = rng.integers(0, 2, 61)  # odd length exercises uneven residues
    sig = simulate_channel(map_bits(bits, 2), H1, 0.0)
    out = pva_mlse(sig, H1)
    np.testing.assert_array_equal(out.indices(), bits)


def test_ddfse_full_memory_equals_viterbi():
    rng = np.random.default_rng(35)
    cir = make_sparse_cir([0.9, -0.4, 0.25], [2, 3])
    for _ in range(25):
        bits = rng.integers(0, 2, 50)
        sig = simulate_channel(
            map_bits(bits, 2), cir, float(rng.uniform(0.1, 0.7)),
            seed=int(rng.integers(1 << 30)),
        )
        np.testing.assert_array_equal(
            ddfse(sig, cir, cir.memory).indices(),
            viterbi_mlse(sig, cir).indices(),
        )


def test_ddfse_reduced_memory_noiseless_minimum_phase():
    # on a minimum-phase cascade the feedback taps are weak, so even a
    # heavily truncated trellis decodes clean observations exactly
    mp = minimum_phase(
        make_sparse_cir(
            [math.sqrt(0.5), math.sqrt(0.1), math.sqrt(0.4)], [2, 0]
        ).dense()
    )
    cir = mp.cir()
    rng = np.random.default_rng(36)
    bits = rng.integers(0, 2, 120)
    sig = simulate_channel(map_bits(bits, 2), cir, 0.0)
    for K in (0, 1, 2, 4):
        out = ddfse(sig, cir, K)
        np.testing.assert_array_equal(out.indices(), bits)


def test_ddfse_behind_prefilter_recovers_data():
    rng = np.random.default_rng(37)
    fir = design_wmf(H1, 40)
    model = cir_from_dense(np.where(np.abs(fir.target) > 1e-10, fir.target, 0))
    errors = 0
    for _ in range(20):
        bits = rng.integers(0, 2, 200)
        sig = simulate_channel(
            map_bits(bits, 2), H1, 0.05, seed=int(rng.integers(1 << 30))
        )
        z = apply_filter(sig, fir)
        out = ddfse(z, model, 3)
        errors += int(np.count_nonzero(out.indices() != bits))
    assert errors <= 2  # mild noise: nearly error-free through the prefilter


def test_ddfse_memory_validation():
    y = np.zeros(30, dtype=complex)
    with pytest.raises(ValueError):
        ddfse(y, H1, -1, n_data=10)
    with pytest.raises(ValueError):
        ddfse(y, H1, H1.memory + 1, n_data=10)


def test_ddfse_config_for_cir():
    cfg = DdfseConfig.for_cir(H1, 3)
    assert cfg.memory == 3
    assert cfg.feedback_depth == H1.memory - 3
    assert cfg.state_count(2) == 8
    with pytest.raises(ValueError):
        DdfseConfig.for_cir(H1, H1.memory + 1)


@pytest.mark.parametrize(
    "f,G,M,expect",
    [
        (1, 2, 2, 3),   # one interleaved zero, three taps
        (0, 2, 2, 2),   # no padding: memory equals the tap span
        (3, 2, 2, 4),
        (3, 2, 4, 3),
        (0, 8, 2, 8),
    ],
)
def test_choose_k(f, G, M, expect):
    assert choose_k(f, G, M) == expect


def test_mva_reference_count_values():
    assert mva_reference_count(2) == 2548
    assert mva_reference_count(4) == 961168
    # never better than the full-state detector for this tap layout
    for M in (2, 3, 4):
        assert mva_reference_count(M) >= M**9
