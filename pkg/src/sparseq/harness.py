"""Seeded Monte-Carlo BER experiment engine.

Sweeps Eb/N0 over a grid, runs channel -> (optional prefilter) -> detector
chains block by block, and aggregates bit errors into one record per grid
point.  Every random quantity in block ``bi`` of grid point ``gi`` derives
from the tuple (master seed, gi, bi), so results are identical no matter
how blocks are scheduled across threads, and stopping is checked only at
fixed batch boundaries so the simulated bit count is scheduling-independent
too.

Conventions: Eb/N0 in dB converts to total complex noise variance as
1/(Eb/N0 linear * bits-per-symbol); static channels are normalized to unit
energy, fading profiles carry unit mean energy by construction.  Errors are
counted on data bits only; the known zero preamble and tail runout carry no
bits.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from time import perf_counter

import numpy as np

from . import __version__
from .analysis import MfbCurve
from .channel import (
    PowerProfile,
    SparseCir,
    alphabet_for,
    channel_to_json,
    cir_from_dense,
    draw_fading_cir,
    load_channel_or_profile,
    map_bits,
    profile_to_json,
    simulate_channel,
    unmap_symbols,
)
from .prefilter import apply_filter, design_wmf
from .sparse_eq import ddfse, pva_mlse
from .trellis import bcjr_map, viterbi_mlse

__all__ = [
    "EQUALIZERS",
    "PRESETS",
    "ExperimentConfig",
    "BerRecord",
    "config_to_json",
    "config_from_json",
    "config_hash",
    "load_config",
    "run_experiment",
    "run_manifest",
    "records_to_csv",
    "gap_at_ber",
]

EQUALIZERS = ("va", "pva", "bcjr", "ddfse")
PRESETS = ("fig3", "fig4-L6", "fig4-L12", "fig4-L20")

_BATCH = 64  # blocks between stopping-rule checks; fixed so that thread
# count cannot change how many blocks a grid point simulates


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a BER sweep depends on; hashable to a run identity."""

    channel: SparseCir | PowerProfile
    equalizer: str
    ebn0_db: tuple[float, ...]
    trellis_memory: int | None = None
    prefilter_taps: int | None = None
    min_errors: int = 200
    max_bits: int = 20_000_000
    block_symbols: int = 512
    alphabet_size: int = 2
    seed: int = 0
    allow_small_runs: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ebn0_db", tuple(float(x) for x in self.ebn0_db))
        if self.equalizer not in EQUALIZERS:
            raise ValueError(f"unknown equalizer {self.equalizer!r}")
        if not self.ebn0_db:
            raise ValueError("empty Eb/N0 grid")
        if any(b <= a for a, b in zip(self.ebn0_db, self.ebn0_db[1:])):
            raise ValueError("Eb/N0 grid must be strictly increasing")
        if self.min_errors < 100 and not self.allow_small_runs:
            raise ValueError(
                "min_errors below 100 yields unusable estimates; "
                "set allow_small_runs=True to override"
            )
        if self.min_errors < 1 or self.max_bits < 1:
            raise ValueError("stopping rule must be positive")
        if self.equalizer == "ddfse":
            if self.trellis_memory is None:
                raise ValueError("ddfse needs trellis_memory (K)")
        elif self.prefilter_taps is not None:
            raise ValueError("prefilter is only meaningful with ddfse")
        elif self.trellis_memory is not None:
            raise ValueError(f"{self.equalizer} does not take trellis_memory")
        if self.prefilter_taps is not None and self.prefilter_taps < 1:
            raise ValueError("prefilter needs at least one tap")
        L = _memory_of(self.channel)
        if self.block_symbols <= 2 * L:
            raise ValueError(
                f"block of {self.block_symbols} symbols is too short for "
                f"channel memory {L}"
            )

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))


def _memory_of(channel) -> int:
    if isinstance(channel, SparseCir):
        return channel.memory
    return max(channel.delays)


@dataclass(frozen=True)
class BerRecord:
    """One measured grid point."""

    ebn0_db: float
    bits: int
    errors: int
    ber: float
    stderr: float
    seconds: float
    config_hash: str
    seed: int


def config_to_json(cfg: ExperimentConfig) -> dict:
    if isinstance(cfg.channel, SparseCir):
        chan = channel_to_json(cfg.channel)
    else:
        chan = profile_to_json(cfg.channel)
    doc = {
        "channel": chan,
        "equalizer": cfg.equalizer,
        "ebn0_db": list(cfg.ebn0_db),
        "min_errors": cfg.min_errors,
        "max_bits": cfg.max_bits,
        "block_symbols": cfg.block_symbols,
        "alphabet_size": cfg.alphabet_size,
        "seed": cfg.seed,
    }
    if cfg.trellis_memory is not None:
        doc["trellis_memory"] = cfg.trellis_memory
    if cfg.prefilter_taps is not None:
        doc["prefilter_taps"] = cfg.prefilter_taps
    if cfg.allow_small_runs:
        doc["allow_small_runs"] = True
    return doc


def config_from_json(doc: dict) -> ExperimentConfig:
    known = {
        "equalizer",
        "ebn0_db",
        "trellis_memory",
        "prefilter_taps",
        "min_errors",
        "max_bits",
        "block_symbols",
        "alphabet_size",
        "seed",
        "allow_small_runs",
    }
    extra = set(doc) - known - {"channel"}
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    if "channel" not in doc:
        raise ValueError("config needs a 'channel' entry")
    kwargs = {k: doc[k] for k in known & set(doc)}
    kwargs["ebn0_db"] = tuple(kwargs.get("ebn0_db", ()))
    return ExperimentConfig(
        channel=load_channel_or_profile(doc["channel"]), **kwargs
    )


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(config_to_json(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(name_or_path) -> ExperimentConfig:
    """Read a config from a JSON file, or by built-in preset name."""
    name = str(name_or_path)
    if name in PRESETS:
        text = (
            resources.files("sparseq").joinpath(f"presets/{name}.json").read_text()
        )
        return config_from_json(json.loads(text))
    with open(name_or_path, "r", encoding="utf-8") as fh:
        return config_from_json(json.load(fh))


def _model_cir(taps) -> SparseCir:
    # dust from the factorization would otherwise widen the detector's tap set
    t = np.asarray(taps, dtype=np.complex128).copy()
    t[np.abs(t) <= 1e-10 * np.abs(t).max()] = 0.0
    return cir_from_dense(t)


class _Chain:
    """Per-experiment state: resolved channel, detector and prefilter plan."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.ab = alphabet_for(cfg.alphabet_size)
        self.fading = isinstance(cfg.channel, PowerProfile)
        self.profile = cfg.channel if self.fading else None
        self.static_cir = None if self.fading else cfg.channel.normalized()
        self.fir = None
        self.model = None
        if not self.fading and cfg.equalizer == "ddfse":
            if cfg.prefilter_taps:
                # fixed channel: one design serves every block
                self.fir = design_wmf(self.static_cir, cfg.prefilter_taps)
                self.model = _model_cir(self.fir.target)
            else:
                self.model = self.static_cir

    def run_block(self, gi: int, bi: int, noise_var: float) -> int:
        cfg = self.cfg
        rng = np.random.default_rng((cfg.seed, gi, bi))
        n_bits = cfg.block_symbols * self.ab.bits_per_symbol
        bits = rng.integers(0, 2, n_bits)
        x = map_bits(bits, self.ab)
        cir = self.static_cir
        if self.fading:
            cir = draw_fading_cir(self.profile, rng)
        sig = simulate_channel(x, cir, noise_var, rng)
        n = cfg.block_symbols
        if cfg.equalizer == "va":
            seq = viterbi_mlse(sig, cir, self.ab, n_data=n)
        elif cfg.equalizer == "pva":
            seq = pva_mlse(sig, cir, self.ab, n_data=n)
        elif cfg.equalizer == "bcjr":
            seq = bcjr_map(sig, cir, noise_var, alphabet=self.ab, n_data=n).decisions()
        else:
            if cfg.prefilter_taps:
                fir = self.fir or design_wmf(cir, cfg.prefilter_taps)
                model = self.model or _model_cir(fir.target)
                z = apply_filter(sig, fir)
                seq = ddfse(z, model, cfg.trellis_memory, self.ab, n_data=n)
            else:
                seq = ddfse(sig, cir, cfg.trellis_memory, self.ab, n_data=n)
        return int(np.count_nonzero(unmap_symbols(seq) != bits))


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> list[BerRecord]:
    """Measure BER at every grid point; reproducible from (config, seed).

    Blocks are independent; with ``threads > 1`` they run concurrently with
    identical results.  Each grid point stops at the first batch boundary
    where ``min_errors`` has been reached, or at ``max_bits``.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    chain = _Chain(cfg)
    bits_per_block = cfg.block_symbols * chain.ab.bits_per_symbol
    chash = config_hash(cfg)
    records = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for gi, db in enumerate(cfg.ebn0_db):
            t0 = perf_counter()
            noise_var = 10.0 ** (-db / 10.0) / chain.ab.bits_per_symbol
            errors = 0
            blocks = 0
            while errors < cfg.min_errors and blocks * bits_per_block < cfg.max_bits:
                batch = range(blocks, blocks + _BATCH)
                if pool is not None:
                    counts = pool.map(
                        lambda bi: chain.run_block(gi, bi, noise_var), batch
                    )
                else:
                    counts = (chain.run_block(gi, bi, noise_var) for bi in batch)
                errors += sum(counts)
                blocks += _BATCH
            bits = blocks * bits_per_block
            ber = errors / bits
            records.append(
                BerRecord(
                    ebn0_db=float(db),
                    bits=bits,
                    errors=errors,
                    ber=ber,
                    stderr=math.sqrt(ber * (1.0 - ber) / bits),
                    seconds=perf_counter() - t0,
                    config_hash=chash,
                    seed=cfg.seed,
                )
            )
    finally:
        if pool is not None:
            pool.shutdown()
    return records


def run_manifest(cfg: ExperimentConfig) -> dict:
    """Machine-readable identity of a run: config, hash, and versions."""
    import numba
    import scipy

    return {
        "config": config_to_json(cfg),
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "versions": {
            "sparseq": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
    }


def records_to_csv(records) -> str:
    lines = ["ebn0_db,bits,errors,ber,stderr,seconds"]
    for r in records:
        lines.append(
            f"{r.ebn0_db:g},{r.bits},{r.errors},{r.ber:.8e},"
            f"{r.stderr:.8e},{r.seconds:.3f}"
        )
    return "\n".join(lines) + "\n"


def gap_at_ber(records, reference: MfbCurve, target_ber: float) -> float:
    """Horizontal dB distance between a measured curve and a reference.

    Both curves are interpolated linearly in (dB, log10 BER); the records
    must bracket the target BER with nonzero estimates.
    """
    pts = [(r.ebn0_db, r.ber) for r in records if r.ber > 0]
    if len(pts) < 2:
        raise ValueError("need at least two nonzero BER records")
    meas_db = None
    for (d0, b0), (d1, b1) in zip(pts, pts[1:]):
        if b0 >= target_ber >= b1:
            l0, l1 = math.log10(b0), math.log10(b1)
            t = math.log10(target_ber)
            w = 0.0 if l1 == l0 else (t - l0) / (l1 - l0)
            meas_db = d0 + w * (d1 - d0)
            break
    if meas_db is None:
        raise ValueError(f"records do not bracket BER {target_ber}")
    return meas_db - reference.db_at(target_ber)
