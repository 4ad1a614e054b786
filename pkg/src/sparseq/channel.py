"""Sparse ISI channel model: tap layout, symbol mapping, AWGN and block-fading simulation.

A sparse channel impulse response (CIR) has a large memory length ``L`` but
only ``G+1`` nonzero coefficients.  This module owns the canonical tap
representation, the zero-pad structure test, bit/symbol mapping, and the
discrete-time channel simulator used by every equalizer experiment.

All containers are immutable after construction; simulation functions are
pure given an explicit seed, so everything here is safe to share across
threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from math import gcd

import numpy as np

__all__ = [
    "Alphabet",
    "SparseCir",
    "ZeroPadStructure",
    "SymbolSequence",
    "PowerProfile",
    "ReceivedSignal",
    "bpsk",
    "qpsk",
    "alphabet_for",
    "make_sparse_cir",
    "cir_from_dense",
    "detect_zero_pad",
    "simulate_channel",
    "draw_fading_cir",
    "map_bits",
    "unmap_symbols",
    "channel_to_json",
    "channel_from_json",
    "profile_to_json",
    "profile_from_json",
    "load_channel_or_profile",
]


# ---------------------------------------------------------------------------
# Alphabets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Alphabet:
    """M-ary complex symbol alphabet with per-symbol bit labels.

    ``symbols[i]`` carries the bit tuple ``labels[i]``.  Symbol index order
    is significant: deterministic tie-breaking in the sequence detectors
    prefers lower indices.
    """

    symbols: tuple[complex, ...]
    labels: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.symbols) < 2:
            raise ValueError("alphabet needs at least 2 symbols")
        if len(self.labels) != len(self.symbols):
            raise ValueError("one bit label per symbol required")
        k = self.bits_per_symbol
        if 2 ** k != len(self.symbols):
            raise ValueError("alphabet size must be a power of 2")
        if any(len(lab) != k for lab in self.labels):
            raise ValueError("all bit labels must have equal length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("bit labels must be distinct")

    @property
    def M(self) -> int:
        return len(self.symbols)

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(len(self.symbols))))

    def array(self) -> np.ndarray:
        a = np.asarray(self.symbols, dtype=np.complex128)
        a.setflags(write=False)
        return a

    def nearest(self, values: np.ndarray) -> np.ndarray:
        """Indices of the closest alphabet symbols (lowest index on ties)."""
        v = np.atleast_1d(np.asarray(values, dtype=np.complex128))
        d = np.abs(v[:, None] - self.array()[None, :])
        return np.argmin(d, axis=1)


def bpsk() -> Alphabet:
    """Binary antipodal alphabet: bit 0 maps to +1, bit 1 to -1."""
    return Alphabet(symbols=(1.0 + 0.0j, -1.0 + 0.0j), labels=((0,), (1,)))


def qpsk() -> Alphabet:
    """Unit-energy Gray-labelled QPSK."""
    a = 1.0 / math.sqrt(2.0)
    return Alphabet(
        symbols=(a + 1j * a, -a + 1j * a, a - 1j * a, -a - 1j * a),
        labels=((0, 0), (0, 1), (1, 0), (1, 1)),
    )


def alphabet_for(M: int) -> Alphabet:
    if M == 2:
        return bpsk()
    if M == 4:
        return qpsk()
    raise ValueError(f"no built-in alphabet of size {M} (supported: 2, 4)")


def _as_alphabet(alphabet: "Alphabet | int") -> Alphabet:
    return alphabet if isinstance(alphabet, Alphabet) else alphabet_for(int(alphabet))


# ---------------------------------------------------------------------------
# Channel impulse responses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SparseCir:
    """Canonical sparse CIR: nonzero taps at strictly increasing integer delays.

    The first delay is always 0 and the last equals the memory length; leading
    and trailing coefficients are nonzero.  ``G + 1`` taps span memory
    ``L = delays[-1]``.
    """

    delays: tuple[int, ...]
    coeffs: tuple[complex, ...]

    def __post_init__(self):
        if len(self.delays) == 0 or len(self.delays) != len(self.coeffs):
            raise ValueError("need matching, nonempty delay/coefficient lists")
        if self.delays[0] != 0:
            raise ValueError("canonical CIR starts at delay 0")
        if any(b <= a for a, b in zip(self.delays, self.delays[1:])):
            raise ValueError("delays must be strictly increasing")
        if self.coeffs[0] == 0 or self.coeffs[-1] == 0:
            raise ValueError("leading/trailing coefficients must be nonzero")
        if any(c == 0 for c in self.coeffs):
            raise ValueError("canonical CIR stores only nonzero taps")

    @property
    def memory(self) -> int:
        """Channel memory length L."""
        return self.delays[-1]

    @property
    def num_taps(self) -> int:
        """Number of nonzero coefficients, G + 1."""
        return len(self.delays)

    @property
    def gaps(self) -> tuple[int, ...]:
        """Zero-run lengths between consecutive taps."""
        return tuple(b - a - 1 for a, b in zip(self.delays, self.delays[1:]))

    def dense(self) -> np.ndarray:
        """Full-length coefficient vector of length L + 1."""
        h = np.zeros(self.memory + 1, dtype=np.complex128)
        h[list(self.delays)] = self.coeffs
        return h

    def energy(self) -> float:
        return float(sum(abs(c) ** 2 for c in self.coeffs))

    def scaled(self, factor: complex) -> "SparseCir":
        if factor == 0:
            raise ValueError("zero scale factor")
        return SparseCir(self.delays, tuple(c * factor for c in self.coeffs))

    def normalized(self) -> "SparseCir":
        """Same tap layout scaled to unit energy."""
        return self.scaled(1.0 / math.sqrt(self.energy()))


def make_sparse_cir(coeffs, gaps) -> SparseCir:
    """Build a canonical :class:`SparseCir` from coefficients and gap sizes.

    ``coeffs`` holds the G+1 nonzero values; ``gaps[i]`` zeros sit between
    coefficient i and i+1.  The resulting memory is ``sum(g + 1 for g in gaps)``.
    """
    coeffs = [complex(c) for c in coeffs]
    gaps = [int(g) for g in gaps]
    if len(coeffs) != len(gaps) + 1:
        raise ValueError("need exactly one more coefficient than gaps")
    if any(g < 0 for g in gaps):
        raise ValueError("gap sizes must be nonnegative")
    delays = [0]
    for g in gaps:
        delays.append(delays[-1] + g + 1)
    return SparseCir(tuple(delays), tuple(coeffs))


def cir_from_dense(dense) -> SparseCir:
    """Canonicalize a dense coefficient vector (drops exact-zero taps)."""
    arr = np.asarray(dense, dtype=np.complex128).ravel()
    nz = np.flatnonzero(arr != 0)
    if nz.size == 0:
        raise ValueError("all-zero impulse response")
    if nz[0] != 0:
        raise ValueError("dense CIR must have a nonzero leading coefficient")
    return SparseCir(tuple(int(d) for d in nz), tuple(complex(arr[d]) for d in nz))


@dataclass(frozen=True)
class ZeroPadStructure:
    """Uniform zero padding: every tap delay is a multiple of ``spacing + 1``."""

    spacing: int
    base_length: int

    def __post_init__(self):
        if self.spacing < 1:
            raise ValueError("zero-pad spacing must be >= 1")
        if self.base_length < 1:
            raise ValueError("base length must be positive")


def detect_zero_pad(cir: SparseCir) -> ZeroPadStructure | None:
    """Find the maximal uniform zero-pad grid of a CIR, if any.

    Returns the structure with the largest spacing ``f >= 1`` such that all
    tap delays are multiples of ``f + 1`` (equivalently, the gcd of the
    nonzero delays minus one), or ``None`` when the delays are coprime or
    the channel is memoryless.
    """
    if cir.memory == 0:
        return None
    g = 0
    for d in cir.delays[1:]:
        g = gcd(g, d)
    if g < 2:
        return None
    return ZeroPadStructure(spacing=g - 1, base_length=cir.memory // g)


# ---------------------------------------------------------------------------
# Symbols and bits
# ---------------------------------------------------------------------------

class SymbolSequence:
    """A block of data symbols drawn from a declared M-ary alphabet."""

    __slots__ = ("symbols", "alphabet")

    def __init__(self, symbols, alphabet: Alphabet | int = 2):
        alphabet = _as_alphabet(alphabet)
        arr = np.asarray(symbols, dtype=np.complex128).ravel().copy()
        ref = alphabet.array()
        if arr.size:
            d = np.abs(arr[:, None] - ref[None, :]).min(axis=1)
            if np.any(d > 1e-9):
                raise ValueError("symbol outside the declared alphabet")
        arr.setflags(write=False)
        self.symbols = arr
        self.alphabet = alphabet

    def __len__(self) -> int:
        return int(self.symbols.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SymbolSequence)
            and self.alphabet == other.alphabet
            and np.array_equal(self.symbols, other.symbols)
        )

    @property
    def M(self) -> int:
        return self.alphabet.M

    def indices(self) -> np.ndarray:
        """Alphabet index of each symbol."""
        return self.alphabet.nearest(self.symbols)

    @classmethod
    def from_indices(cls, indices, alphabet: Alphabet | int = 2) -> "SymbolSequence":
        alphabet = _as_alphabet(alphabet)
        idx = np.asarray(indices, dtype=np.int64)
        return cls(alphabet.array()[idx], alphabet)


def map_bits(bits, alphabet: Alphabet | int = 2) -> SymbolSequence:
    """Map a bit vector onto alphabet symbols (bit 0 -> +1 for binary)."""
    alphabet = _as_alphabet(alphabet)
    b = np.asarray(bits, dtype=np.int64).ravel()
    if b.size and not np.isin(b, (0, 1)).all():
        raise ValueError("bits must be 0 or 1")
    k = alphabet.bits_per_symbol
    if b.size % k:
        raise ValueError(f"bit count must be a multiple of {k}")
    codes = b.reshape(-1, k) @ (1 << np.arange(k - 1, -1, -1))
    label_codes = np.array(
        [sum(bit << (k - 1 - i) for i, bit in enumerate(lab)) for lab in alphabet.labels]
    )
    inv = np.empty(alphabet.M, dtype=np.int64)
    inv[label_codes] = np.arange(alphabet.M)
    return SymbolSequence.from_indices(inv[codes], alphabet)


def unmap_symbols(decisions, alphabet: Alphabet | int = 2) -> np.ndarray:
    """Nearest-symbol decide a (possibly noisy) value sequence back to bits."""
    if isinstance(decisions, SymbolSequence):
        alphabet = decisions.alphabet
        idx = decisions.indices()
    else:
        alphabet = _as_alphabet(alphabet)
        idx = alphabet.nearest(np.asarray(decisions, dtype=np.complex128).ravel())
    labels = np.asarray(alphabet.labels, dtype=np.int64)
    return labels[idx].ravel()


# ---------------------------------------------------------------------------
# Fading profiles and the channel simulator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerProfile:
    """Per-delay tap variances of an independently fading sparse CIR."""

    entries: tuple[tuple[int, float], ...]
    total: float = 1.0

    def __post_init__(self):
        if not self.entries:
            raise ValueError("empty power profile")
        delays = [d for d, _ in self.entries]
        if delays[0] != 0:
            raise ValueError("profile must start at delay 0")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("profile delays must be strictly increasing")
        if any(v < 0 for _, v in self.entries):
            raise ValueError("variances must be nonnegative")
        s = sum(v for _, v in self.entries)
        if abs(s - self.total) > 1e-12:
            raise ValueError(f"variances sum to {s}, declared total {self.total}")

    @property
    def delays(self) -> tuple[int, ...]:
        return tuple(d for d, _ in self.entries)

    @property
    def variances(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.entries)

    def scaled(self, factor: float) -> "PowerProfile":
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return PowerProfile(
            tuple((d, v * factor) for d, v in self.entries), self.total * factor
        )


@dataclass(frozen=True)
class ReceivedSignal:
    """Complex baseband samples together with the total noise variance."""

    samples: np.ndarray
    noise_var: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128).ravel()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if self.noise_var < 0:
            raise ValueError("noise variance must be nonnegative")

    def __len__(self) -> int:
        return int(self.samples.size)


def simulate_channel(
    x: SymbolSequence,
    cir: SparseCir,
    noise_var: float,
    seed=None,
) -> ReceivedSignal:
    """Push a symbol block through the discrete-time channel.

    The block is framed with a known all-zero preamble and an implicit
    all-zero tail: the output is the full convolution of the N data symbols
    with the CIR (N + L samples, one per transmitted symbol including the
    L-symbol runout) plus circularly-symmetric complex Gaussian noise of
    total variance ``noise_var``.

    ``seed`` is anything ``numpy.random.default_rng`` accepts, including an
    existing generator; results are deterministic for a fixed seed.
    """
    if noise_var < 0:
        raise ValueError("noise variance must be nonnegative")
    n = len(x)
    if n <= cir.memory:
        raise ValueError(f"block length {n} must exceed channel memory {cir.memory}")
    clean = np.convolve(x.symbols, cir.dense())
    if noise_var > 0:
        rng = np.random.default_rng(seed)
        scale = math.sqrt(noise_var / 2.0)
        noise = rng.standard_normal(clean.size) + 1j * rng.standard_normal(clean.size)
        clean = clean + scale * noise
    return ReceivedSignal(clean, float(noise_var))


def draw_fading_cir(profile: PowerProfile, seed) -> SparseCir:
    """Draw one block-fading CIR realization from a power profile.

    Each tap is an independent circularly-symmetric complex Gaussian with the
    profile's variance; zero-variance positions are omitted.  The result is
    shifted so its first tap sits at delay 0 (pure delay is immaterial).
    """
    active = [(d, v) for d, v in profile.entries if v > 0]
    if not active:
        raise ValueError("profile has no positive-variance taps")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(len(active)) + 1j * rng.standard_normal(len(active))
    base = active[0][0]
    delays = tuple(d - base for d, _ in active)
    coeffs = tuple(
        complex(g[i] * math.sqrt(v / 2.0)) for i, (_, v) in enumerate(active)
    )
    return SparseCir(delays, coeffs)


# ---------------------------------------------------------------------------
# JSON descriptions
# ---------------------------------------------------------------------------

def _pairs(values) -> list[list[float]]:
    return [[float(np.real(v)), float(np.imag(v))] for v in values]


def channel_to_json(cir: SparseCir) -> dict:
    return {"coeffs": _pairs(cir.coeffs), "gaps": list(cir.gaps)}


def channel_from_json(doc: dict) -> SparseCir:
    coeffs = [complex(re, im) for re, im in doc["coeffs"]]
    return make_sparse_cir(coeffs, doc["gaps"])


def profile_to_json(profile: PowerProfile) -> dict:
    return {
        "profile": [
            {"delay": int(d), "variance": float(v)} for d, v in profile.entries
        ]
    }


def profile_from_json(doc: dict) -> PowerProfile:
    entries = tuple(
        (int(e["delay"]), float(e["variance"])) for e in doc["profile"]
    )
    total = sum(v for _, v in entries)
    return PowerProfile(entries, total=total)


def load_channel_or_profile(path_or_doc) -> SparseCir | PowerProfile:
    """Read a channel description: either static taps or a fading profile."""
    if isinstance(path_or_doc, dict):
        doc = path_or_doc
    else:
        with open(path_or_doc, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    if "profile" in doc:
        return profile_from_json(doc)
    if "coeffs" in doc:
        return channel_from_json(doc)
    raise ValueError("channel document needs either 'coeffs'/'gaps' or 'profile'")
