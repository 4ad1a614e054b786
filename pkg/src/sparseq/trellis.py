"""Full-complexity reference detectors over an arbitrary channel.

``exhaustive_mlse`` scores every possible symbol sequence and is the ground
truth the trellis detectors are tested against.  ``viterbi_mlse`` finds the
same sequence on the M**L-state trellis; ``bcjr_map`` computes exact
per-symbol posteriors by the forward-backward recursion.  All three use
the block framing of the channel module: zero amplitude before index 0 and
an L-sample zero-tail runout after the data.

Ties are always resolved toward the lexicographically smallest symbol-index
sequence, in the oracle by enumeration order and in the trellis by survivor
prefix comparison, so equivalence checks can demand bit-exact matches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._kernels import detector_tables, dfe_detect, trellis_detect
from .channel import (
    Alphabet,
    ReceivedSignal,
    SparseCir,
    SymbolSequence,
    alphabet_for,
)

__all__ = [
    "TrellisSpec",
    "SurvivorSet",
    "PosteriorSequence",
    "exhaustive_mlse",
    "viterbi_mlse",
    "bcjr_map",
    "branch_metric_count",
]

_ORACLE_LIMIT = 2**24  # largest sequence count exhaustive_mlse will enumerate
_CHUNK = 2**14


@dataclass(frozen=True)
class TrellisSpec:
    """Shape of a detector trellis: symbol memory and alphabet."""

    memory: int
    alphabet: Alphabet

    def __post_init__(self):
        if self.memory < 0:
            raise ValueError("trellis memory must be nonnegative")

    @property
    def state_count(self) -> int:
        return self.alphabet.M**self.memory


@dataclass(frozen=True)
class SurvivorSet:
    """Final state of one detector pass.

    ``metrics[s]`` is the accumulated squared-error metric of state s's
    survivor including the zero-tail runout; ``winner`` is the argmin and
    ``decisions`` its symbol-index sequence.  ``work`` counts branch-metric
    evaluations.  ``history(s)`` rebuilds any state's survivor from the
    backpointer table.
    """

    spec: TrellisSpec
    metrics: np.ndarray
    winner: int
    winner_metric: float
    work: int
    decisions: np.ndarray
    backpointers: np.ndarray

    def __post_init__(self):
        for name in ("metrics", "decisions"):
            a = np.asarray(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def history(self, state: int) -> np.ndarray:
        """Survivor symbol indices ending in ``state`` at the final step."""
        if not 0 <= state < self.spec.state_count:
            raise ValueError("no such state")
        K = self.spec.memory
        if K == 0:
            return np.array(self.decisions)
        M = self.spec.alphabet.M
        SM1 = self.spec.state_count // M
        out = np.empty(self.backpointers.shape[0], dtype=np.int64)
        n = state
        for t in range(out.size - 1, -1, -1):
            out[t] = n % M
            if t >= K:
                n = n // M + int(self.backpointers[t, n]) * SM1
            else:
                n //= M
        return out


class PosteriorSequence:
    """Per-index symbol posterior probabilities from a MAP pass."""

    __slots__ = ("probs", "alphabet")

    def __init__(self, probs, alphabet: Alphabet):
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != alphabet.M:
            raise ValueError("need an (N, M) probability array")
        rows = p.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-12):
            raise ValueError("each index's probabilities must sum to 1")
        p = p / rows[:, None]
        p.setflags(write=False)
        self.probs = p
        self.alphabet = alphabet

    def __len__(self) -> int:
        return int(self.probs.shape[0])

    def decisions(self) -> SymbolSequence:
        """Hard argmax decisions (lowest index on exact ties)."""
        return SymbolSequence.from_indices(
            np.argmax(self.probs, axis=1), self.alphabet
        )


def _samples_of(y) -> np.ndarray:
    if isinstance(y, ReceivedSignal):
        return y.samples
    return np.asarray(y, dtype=np.complex128).ravel()


def _resolve(y, cir: SparseCir, alphabet, n_data):
    samples = _samples_of(y)
    ab = alphabet if isinstance(alphabet, Alphabet) else alphabet_for(alphabet)
    L = cir.memory
    if n_data is None:
        n_data = samples.size - L
    if n_data <= L:
        raise ValueError(f"need more than L={L} data symbols, got {n_data}")
    if samples.size < n_data + L:
        raise ValueError("signal too short for block plus tail runout")
    return samples, ab, int(n_data)


def kernel_pass(samples, n_data, delays, coeffs, K, alphabet: Alphabet):
    """Run the compiled detector; shared by the exact and reduced detectors.

    Returns (decisions, per-state final metrics, winner, winner metric,
    work count, backpointers).
    """
    tap_d = np.asarray(delays, dtype=np.int64)
    tap_h = np.asarray(coeffs, dtype=np.complex128)
    M = alphabet.M
    symvals = np.append(alphabet.array(), 0.0 + 0.0j)
    L = int(tap_d[-1])
    if not 0 <= K <= L:
        raise ValueError(f"trellis memory {K} outside [0, {L}]")
    if K == 0:
        dec, total, work = dfe_detect(
            np.ascontiguousarray(samples), n_data, M, symvals, tap_d, tap_h
        )
        mets = np.array([total])
        return dec, mets, 0, float(total), int(work), np.zeros((0, 1), np.int8)
    pat_idx, pat_yhat, rt_slot, rt_h = detector_tables(
        M, K, tap_d, tap_h, symvals
    )
    dec, mets, win, win_m, work, rec = trellis_detect(
        np.ascontiguousarray(samples),
        n_data,
        M,
        K,
        symvals,
        tap_d,
        tap_h,
        pat_idx,
        pat_yhat,
        rt_slot,
        rt_h,
        L - K,
    )
    return dec, mets, int(win), float(win_m), int(work), rec


def viterbi_mlse(y, cir: SparseCir, alphabet=2, n_data=None, detail=False):
    """Exact maximum-likelihood sequence decision on the full-state trellis.

    Equivalent to ``exhaustive_mlse`` on every instance, at M**(L+1) branch
    evaluations per decision instead of M**N sequences.  With ``detail``
    also returns the :class:`SurvivorSet`.
    """
    samples, ab, n_data = _resolve(y, cir, alphabet, n_data)
    dec, mets, win, win_m, work, rec = kernel_pass(
        samples, n_data, cir.delays, cir.coeffs, cir.memory, ab
    )
    seq = SymbolSequence.from_indices(dec, ab)
    if not detail:
        return seq
    surv = SurvivorSet(
        spec=TrellisSpec(cir.memory, ab),
        metrics=mets,
        winner=win,
        winner_metric=win_m,
        work=work,
        decisions=dec,
        backpointers=rec,
    )
    return seq, surv


def exhaustive_mlse(y, cir: SparseCir, alphabet=2, n_data=None):
    """Ground-truth sequence decision by scoring all M**N sequences.

    Enumerates in lexicographic symbol-index order and keeps strict minima,
    hence the same tie behavior as the trellis detectors.  Guarded to
    M**N <= 2**24.
    """
    samples, ab, n_data = _resolve(y, cir, alphabet, n_data)
    M = ab.M
    total = M**n_data
    if total > _ORACLE_LIMIT:
        raise ValueError(f"{M}**{n_data} sequences exceed the oracle limit")
    L = cir.memory
    y_blk = samples[: n_data + L]
    sym = ab.array()
    dense = cir.dense()
    # convolution as a matrix so a whole chunk scores in one product
    C = np.zeros((n_data + L, n_data), dtype=np.complex128)
    for t in range(n_data):
        C[t : t + L + 1, t] = dense
    shifts = M ** np.arange(n_data - 1, -1, -1, dtype=np.int64)
    best_metric = np.inf
    best_idx = None
    for start in range(0, total, _CHUNK):
        ids = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        digits = (ids[:, None] // shifts[None, :]) % M
        X = sym[digits]
        resid = X @ C.T - y_blk[None, :]
        metrics = np.einsum("ij,ij->i", resid.real, resid.real)
        metrics += np.einsum("ij,ij->i", resid.imag, resid.imag)
        j = int(np.argmin(metrics))
        if metrics[j] < best_metric:
            best_metric = float(metrics[j])
            best_idx = digits[j].copy()
    return SymbolSequence.from_indices(best_idx, ab)


def branch_metric_count(L: int, M: int) -> int:
    """Branch-metric evaluations per decision of the full-state detector."""
    if L < 0 or M < 2:
        raise ValueError("need L >= 0 and M >= 2")
    return M ** (L + 1)


def _digit(states: np.ndarray, i: int, M: int) -> np.ndarray:
    return (states // M**i) % M


def _yhat_table(cir: SparseCir, sym: np.ndarray, M: int, upto: int | None):
    """Noiseless predictions ŷ[p, j]; taps with delay > ``upto`` masked."""
    L = cir.memory
    S = M**L
    states = np.arange(S, dtype=np.int64)
    out = np.zeros((S, M), dtype=np.complex128)
    for d, h in zip(cir.delays, cir.coeffs):
        if upto is not None and d > upto:
            continue
        if d == 0:
            out += h * sym[None, :]
        else:
            out += h * sym[_digit(states, d - 1, M)][:, None]
    return out


def bcjr_map(
    y,
    cir: SparseCir,
    noise_var: float,
    priors=None,
    alphabet=2,
    n_data=None,
) -> PosteriorSequence:
    """Exact symbol-by-symbol posteriors via the forward-backward recursion.

    Log domain throughout, exact log-sum-exp combining.  ``priors`` is an
    optional (N, M) matrix of per-index symbol priors (default uniform).
    Rejects zero noise variance, where the posterior degenerates.
    """
    if noise_var <= 0:
        raise ValueError("forward-backward needs a positive noise variance")
    samples, ab, n_data = _resolve(y, cir, alphabet, n_data)
    M = ab.M
    sym = ab.array()
    if priors is None:
        log_pri = np.zeros((n_data, M))
    else:
        pri = np.asarray(priors, dtype=np.float64)
        if pri.shape != (n_data, M):
            raise ValueError(f"priors must have shape ({n_data}, {M})")
        if np.any(pri < 0) or np.any(np.abs(pri.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("priors must be distributions per index")
        with np.errstate(divide="ignore"):
            log_pri = np.log(pri)
    L = cir.memory
    if L == 0:
        h0 = complex(cir.coeffs[0])
        d = np.abs(samples[:n_data, None] - h0 * sym[None, :]) ** 2
        logq = log_pri - d / noise_var
        logq -= logsumexp(logq, axis=1, keepdims=True)
        return PosteriorSequence(np.exp(logq), ab)

    S = M**L
    SM1 = S // M
    yhat_full = _yhat_table(cir, sym, M, None)
    succ = None  # successor table, built lazily for the backward pass

    def gamma(k: int) -> np.ndarray:
        tbl = yhat_full if k >= L else _yhat_table(cir, sym, M, k)
        d = np.abs(samples[k] - tbl) ** 2
        return -d / noise_var + log_pri[k][None, :]

    # forward
    alpha = np.full((n_data + 1, S), -np.inf)
    alpha[0, 0] = 0.0
    for k in range(n_data):
        T = alpha[k].reshape(M, SM1, 1) + gamma(k).reshape(M, SM1, M)
        a = logsumexp(T, axis=0).reshape(-1)  # index b*M + j
        alpha[k + 1] = a - np.max(a)

    # backward, seeded by the zero-tail runout metrics
    states = np.arange(S, dtype=np.int64)
    tail = np.zeros(S)
    for t in range(L):
        pred = np.zeros(S, dtype=np.complex128)
        for d, h in zip(cir.delays, cir.coeffs):
            i = d - t - 1
            if i >= 0:
                pred += h * sym[_digit(states, i, M)]
        tail += np.abs(samples[n_data + t] - pred) ** 2
    beta = np.empty((n_data + 1, S))
    beta[n_data] = -tail / noise_var
    succ = (np.arange(S)[:, None] % SM1) * M + np.arange(M)[None, :]
    for k in range(n_data - 1, 0, -1):
        b = logsumexp(gamma(k) + beta[k + 1][succ], axis=1)
        beta[k] = b - np.max(b)

    # posterior of x[k] = j: collapse states that agree on the newest digit
    logq = np.empty((n_data, M))
    for k in range(n_data):
        v = alpha[k + 1] + beta[k + 1]
        logq[k] = logsumexp(v.reshape(SM1, M), axis=0)
    logq -= logsumexp(logq, axis=1, keepdims=True)
    return PosteriorSequence(np.exp(logq), ab)
