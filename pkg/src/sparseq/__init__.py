"""Equalization toolkit for sparse intersymbol-interference channels.

Detectors that exploit long zero runs in the channel impulse response:
exact sequence detection on the full trellis, a parallel decomposition for
zero-padded channels, delayed-feedback state reduction behind a whitening
prefilter, plus soft-output symbol MAP, matched-filter-bound references,
and a reproducible Monte-Carlo BER harness.
"""

__version__ = "0.1.0"

from .channel import (
    Alphabet,
    PowerProfile,
    ReceivedSignal,
    SparseCir,
    SymbolSequence,
    ZeroPadStructure,
    alphabet_for,
    bpsk,
    channel_from_json,
    channel_to_json,
    cir_from_dense,
    detect_zero_pad,
    draw_fading_cir,
    load_channel_or_profile,
    make_sparse_cir,
    map_bits,
    profile_from_json,
    profile_to_json,
    qpsk,
    simulate_channel,
    unmap_symbols,
)
from .prefilter import (
    MinPhaseResult,
    PolynomialZeros,
    PrefilterFir,
    RootFindingError,
    apply_filter,
    design_wmf,
    find_zeros,
    minimum_phase,
    whiteness_metric,
    zero_pad_expand,
)
from .trellis import (
    PosteriorSequence,
    SurvivorSet,
    TrellisSpec,
    bcjr_map,
    branch_metric_count,
    exhaustive_mlse,
    viterbi_mlse,
)
from .sparse_eq import (
    DdfseConfig,
    Decomposition,
    InfluenceSet,
    choose_k,
    ddfse,
    decompose,
    influence_set,
    mva_reference_count,
    pva_mlse,
)
from .analysis import (
    MfbCurve,
    complexity_report,
    mfb_curve_fading,
    mfb_curve_static,
    mfb_fading,
    mfb_static,
    qfunc,
    rayleigh_reference,
)
from .harness import (
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

__all__ = [
    "Alphabet",
    "BerRecord",
    "DdfseConfig",
    "Decomposition",
    "ExperimentConfig",
    "InfluenceSet",
    "MfbCurve",
    "MinPhaseResult",
    "PolynomialZeros",
    "PosteriorSequence",
    "PowerProfile",
    "PrefilterFir",
    "ReceivedSignal",
    "RootFindingError",
    "SparseCir",
    "SurvivorSet",
    "SymbolSequence",
    "TrellisSpec",
    "ZeroPadStructure",
    "alphabet_for",
    "apply_filter",
    "bcjr_map",
    "bpsk",
    "branch_metric_count",
    "channel_from_json",
    "channel_to_json",
    "choose_k",
    "cir_from_dense",
    "complexity_report",
    "config_from_json",
    "config_hash",
    "config_to_json",
    "ddfse",
    "decompose",
    "design_wmf",
    "detect_zero_pad",
    "draw_fading_cir",
    "exhaustive_mlse",
    "find_zeros",
    "gap_at_ber",
    "influence_set",
    "load_channel_or_profile",
    "load_config",
    "make_sparse_cir",
    "map_bits",
    "mfb_curve_fading",
    "mfb_curve_static",
    "mfb_fading",
    "mfb_static",
    "minimum_phase",
    "mva_reference_count",
    "profile_from_json",
    "profile_to_json",
    "pva_mlse",
    "qfunc",
    "qpsk",
    "rayleigh_reference",
    "records_to_csv",
    "run_experiment",
    "run_manifest",
    "simulate_channel",
    "unmap_symbols",
    "viterbi_mlse",
    "whiteness_metric",
    "zero_pad_expand",
]
