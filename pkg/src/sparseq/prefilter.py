"""Minimum-phase factorization and whitened-matched-filter FIR design.

Decision-feedback style detectors want the energy of the effective impulse
response concentrated in its leading taps.  The route here: find the zeros
of the channel polynomial, reflect every zero outside the unit circle to
its conjugate-reciprocal position (which preserves the magnitude spectrum),
and approximate the filter that maps the actual channel onto that
minimum-phase equivalent with a finite-length least-squares FIR.

The FIR design solves the normal equations with a banded Hermitian Toeplitz
solver, so cost grows linearly in the number of filter taps rather than
cubically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import ReceivedSignal, SparseCir, cir_from_dense

__all__ = [
    "RootFindingError",
    "PolynomialZeros",
    "MinPhaseResult",
    "PrefilterFir",
    "find_zeros",
    "minimum_phase",
    "zero_pad_expand",
    "design_wmf",
    "apply_filter",
    "whiteness_metric",
]

_REFLECT_TOL = 1e-6       # |z| beyond this of 1.0 counts as outside
_RESIDUAL_TOL = 1e-10     # max componentwise backward error after polishing


class RootFindingError(RuntimeError):
    """Zeros of the channel polynomial could not be located accurately."""


@dataclass(frozen=True)
class PolynomialZeros:
    """Zeros of a polynomial, its leading coefficient, and a residual bound.

    ``leading * prod(z - zeros[i])`` reproduces the coefficient vector, so
    the pair (zeros, leading) is a lossless factorization.
    """

    zeros: np.ndarray
    leading: complex
    max_residual: float

    def __post_init__(self):
        z = np.asarray(self.zeros, dtype=np.complex128).ravel()
        z.setflags(write=False)
        object.__setattr__(self, "zeros", z)

    def num_outside(self, tol: float = _REFLECT_TOL) -> int:
        return int(np.count_nonzero(np.abs(self.zeros) > 1.0 + tol))

    def reconstruct(self) -> np.ndarray:
        """Coefficient vector rebuilt from the factored form."""
        return self.leading * np.poly(self.zeros).astype(np.complex128)


@dataclass(frozen=True)
class MinPhaseResult:
    """Minimum-phase equivalent of an impulse response.

    ``taps`` is the dense coefficient vector (same length and same Euclidean
    norm as the input).  ``input_zeros`` are the zeros of the original
    response and ``output_zeros`` those of ``taps`` (outside zeros replaced
    by conjugate reciprocals).  ``whiteness`` measures how well the
    equivalent preserves the input autocorrelation: the largest normalized
    deviation over all lags, 0 for an exact spectral factorization.
    """

    taps: np.ndarray
    input_zeros: np.ndarray
    output_zeros: np.ndarray
    whiteness: float

    def __post_init__(self):
        for name in ("taps", "input_zeros", "output_zeros"):
            a = np.asarray(getattr(self, name), dtype=np.complex128).ravel()
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def memory(self) -> int:
        return int(self.taps.size - 1)

    @property
    def num_reflected(self) -> int:
        """How many zeros were moved inside the unit circle."""
        return int(
            np.count_nonzero(np.abs(self.input_zeros) > 1.0 + _REFLECT_TOL)
        )

    def cir(self, drop_tol: float = 0.0) -> SparseCir:
        """Canonical sparse view; taps with |h| <= drop_tol are removed."""
        t = self.taps.copy()
        if drop_tol > 0:
            t[np.abs(t) <= drop_tol] = 0.0
        return cir_from_dense(t)


@dataclass(frozen=True)
class PrefilterFir:
    """Least-squares FIR prefilter with its decision delay and design report.

    Filtering shifts the useful signal by ``delay`` samples; ``design_error``
    is the Euclidean mismatch between the cascade channel*filter and the
    delayed minimum-phase target; ``whiteness`` bounds the residual noise
    correlation after filtering (0 = white).
    """

    taps: np.ndarray
    delay: int
    target: np.ndarray
    design_error: float
    noise_gain: float
    whiteness: float

    def __post_init__(self):
        for name in ("taps", "target"):
            a = np.asarray(getattr(self, name), dtype=np.complex128).ravel()
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not 0 <= self.delay < self.taps.size + self.target.size:
            raise ValueError("decision delay outside the cascade support")

    def __len__(self) -> int:
        return int(self.taps.size)


def _dense(h) -> np.ndarray:
    if isinstance(h, SparseCir):
        return h.dense()
    if isinstance(h, MinPhaseResult):
        return np.array(h.taps)
    return np.asarray(h, dtype=np.complex128).ravel()


def _polish(coeffs: np.ndarray, zeros: np.ndarray, iters: int = 3) -> np.ndarray:
    # A few Newton steps sharpen the eigenvalue-based roots; keep a step only
    # if it does not blow up (derivative near zero at multiple roots).
    deriv = np.polyder(coeffs)
    z = zeros.copy()
    for _ in range(iters):
        p = np.polyval(coeffs, z)
        d = np.polyval(deriv, z)
        ok = np.abs(d) > 1e-30
        step = np.where(ok, p / np.where(ok, d, 1.0), 0.0)
        cand = z - step
        better = np.abs(np.polyval(coeffs, cand)) <= np.abs(p)
        z = np.where(better, cand, z)
    return z


def find_zeros(h) -> PolynomialZeros:
    """Zeros of the transfer polynomial ``sum_n h[n] z^-n`` (as roots in z).

    Eigenvalue root finding followed by Newton polishing.  Raises
    :class:`RootFindingError` when the polished roots still fail to satisfy
    the polynomial to near machine accuracy.
    """
    dense = _dense(h)
    if dense.size < 2:
        lead = complex(dense[0]) if dense.size else 0.0 + 0.0j
        return PolynomialZeros(np.zeros(0, dtype=np.complex128), lead, 0.0)
    if dense[0] == 0 or dense[-1] == 0:
        raise ValueError("leading and trailing coefficients must be nonzero")
    z = np.roots(dense)
    z = _polish(dense, z)
    # Backward error per root: |p(z)| over sum_j |c_j| |z|^j.  Unlike a plain
    # coefficient-relative residual this stays O(eps) for well-conditioned
    # roots of any magnitude (large roots amplify |p(z)| harmlessly).
    powers = np.abs(z)[:, None] ** np.arange(dense.size - 1, -1, -1)[None, :]
    denom = powers @ np.abs(dense)
    resid = float(np.max(np.abs(np.polyval(dense, z)) / np.maximum(denom, 1e-300)))
    if not np.isfinite(resid) or resid > _RESIDUAL_TOL:
        raise RootFindingError(
            f"root residual {resid:.3e} exceeds {_RESIDUAL_TOL:.1e}"
        )
    return PolynomialZeros(z, complex(dense[0]), resid)


def minimum_phase(h) -> MinPhaseResult:
    """Minimum-phase equivalent: reflect all zeros inside the unit circle.

    A zero at ``z0`` with ``|z0| > 1`` moves to ``1 / conj(z0)``; the result
    is rescaled to the Euclidean norm of the input, which makes the leading
    coefficient the largest-magnitude tap and leaves the magnitude spectrum
    unchanged up to floating point.
    """
    dense = _dense(h)
    if dense.size == 1:
        t = dense.copy()
        return MinPhaseResult(t, np.zeros(0, complex), np.zeros(0, complex), 0.0)
    pz = find_zeros(dense)
    zin = pz.zeros
    mag = np.abs(zin)
    zout = np.where(mag > 1.0 + _REFLECT_TOL, zin / mag**2, zin)
    taps = np.poly(zout).astype(np.complex128)
    taps *= np.linalg.norm(dense) / np.linalg.norm(taps)
    # rotate so the leading tap is real positive (norm scaling keeps |.|)
    lead = taps[0]
    if lead != 0:
        taps *= np.conj(lead) / np.abs(lead)
    r_in = np.correlate(dense, dense, "full")
    r_out = np.correlate(taps, taps, "full")
    wh = float(np.max(np.abs(r_out - r_in)) / np.linalg.norm(dense) ** 2)
    return MinPhaseResult(taps, zin, zout, wh)


def zero_pad_expand(h, spacing: int):
    """Insert ``spacing`` zeros between consecutive taps.

    For a uniformly padded channel the expensive factorization can run on
    the short base response; expanding the result reproduces the
    factorization of the long response exactly, because the expanded zeros
    are the ``spacing + 1``-th roots of the base zeros and reflection
    commutes with taking roots of the magnitude.

    Accepts a :class:`SparseCir`, :class:`MinPhaseResult`, or dense array
    and returns the same flavor.
    """
    if spacing < 0:
        raise ValueError("spacing must be nonnegative")
    if spacing == 0:
        return h
    if isinstance(h, SparseCir):
        return SparseCir(
            tuple(d * (spacing + 1) for d in h.delays), h.coeffs
        )
    if isinstance(h, MinPhaseResult):
        taps = _expand_dense(h.taps, spacing)
        return MinPhaseResult(
            taps,
            _all_roots(h.input_zeros, spacing),
            _all_roots(h.output_zeros, spacing),
            h.whiteness,
        )
    return _expand_dense(_dense(h), spacing)


def _expand_dense(dense: np.ndarray, spacing: int) -> np.ndarray:
    out = np.zeros((dense.size - 1) * (spacing + 1) + 1, dtype=np.complex128)
    out[:: spacing + 1] = dense
    return out


def _all_roots(zeros: np.ndarray, spacing: int) -> np.ndarray:
    m = spacing + 1
    if zeros.size == 0:
        return zeros.copy()
    k = np.arange(m)
    unit = np.exp(2j * np.pi * k / m)
    return (zeros[:, None] ** (1.0 / m) * unit[None, :]).ravel()


def design_wmf(h, num_taps: int, delay: int | None = None) -> PrefilterFir:
    """Design the FIR that maps a channel onto its delayed minimum-phase twin.

    Solves ``min_f || conv(h, f) - t ||`` where ``t`` places the
    minimum-phase equivalent at offset ``delay`` (default: the last filter
    tap position, since the ideal filter for this target is anticausal).
    The Gram matrix of the convolution operator is Hermitian Toeplitz and
    banded with bandwidth equal to the channel memory, so the solve costs
    O(num_taps * memory^2).
    """
    dense = _dense(h)
    L = dense.size - 1
    if num_taps < L + 1:
        raise ValueError(
            f"filter needs at least memory + 1 = {L + 1} taps, got {num_taps}"
        )
    q = num_taps - 1 if delay is None else int(delay)
    if not 0 <= q <= num_taps - 1:
        raise ValueError(f"decision delay {q} outside [0, {num_taps - 1}]")
    mp = minimum_phase(dense)
    target = np.zeros(num_taps + L, dtype=np.complex128)
    target[q : q + L + 1] = mp.taps

    # Normal equations C^H C f = C^H t with C the (num_taps+L) x num_taps
    # convolution matrix of the channel.  C^H C is Hermitian Toeplitz with
    # first column equal to the channel autocorrelation at lags 0..L.
    r = np.correlate(dense, dense, "full")[L:]
    b = np.correlate(target, dense, "full")[L : L + num_taps]
    band = min(L, num_taps - 1)
    ab = np.tile(r[: band + 1, None].astype(np.complex128), (1, num_taps))
    try:
        f = scipy.linalg.solveh_banded(ab, b, lower=True)
    except np.linalg.LinAlgError:
        # ill conditioning (e.g. channel with zeros on the unit circle)
        C = np.zeros((num_taps + L, num_taps), dtype=np.complex128)
        for j in range(num_taps):
            C[j : j + L + 1, j] = dense
        f = np.linalg.lstsq(C, target, rcond=None)[0]
    cascade = np.convolve(dense, f)
    err = float(np.linalg.norm(cascade - target))
    return PrefilterFir(
        taps=f,
        delay=q,
        target=mp.taps,
        design_error=err,
        noise_gain=float(np.linalg.norm(f) ** 2),
        whiteness=whiteness_metric(f),
    )


def apply_filter(signal: ReceivedSignal, fir: PrefilterFir) -> ReceivedSignal:
    """Run the prefilter and remove its decision delay.

    Output sample k is the full convolution of the input with the filter at
    index ``k + delay``; the length matches the input, so downstream
    detectors see the same framing they would without a prefilter.  The
    reported noise variance is scaled by the filter's noise gain (the noise
    stays approximately white by design).
    """
    y = np.convolve(signal.samples, fir.taps)
    z = y[fir.delay : fir.delay + len(signal)]
    if z.size < len(signal):  # degenerate: delay past the end
        z = np.pad(z, (0, len(signal) - z.size))
    return ReceivedSignal(z, signal.noise_var * fir.noise_gain)


def whiteness_metric(taps) -> float:
    """Worst-case normalized autocorrelation at nonzero lag, in [0, 1].

    Noise filtered by ``taps`` has autocorrelation proportional to the
    filter's own; the metric is 0 for a filter that keeps noise white.
    """
    f = np.asarray(taps, dtype=np.complex128).ravel()
    r = np.correlate(f, f, "full")
    mid = f.size - 1
    peak = float(np.abs(r[mid]))
    if peak == 0:
        raise ValueError("all-zero filter")
    off = np.abs(np.concatenate([r[:mid], r[mid + 1 :]]))
    return float(off.max() / peak) if off.size else 0.0
