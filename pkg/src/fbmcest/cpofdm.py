"""CP-OFDM baseline: modulator, demodulator and per-subcarrier LS estimation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

from .errors import DegeneratePilotError, ParameterError
from .estimator import PILOT_TOL, CfrEstimate


@dataclass(frozen=True)
class OfdmPreamble:
    """Pseudo-random QPSK training ``x`` sent as ``A[i, t] * x`` on antenna ``i``, symbol ``t``."""

    x: np.ndarray
    n_tx: int
    cp_len: int

    @property
    def M(self) -> int:
        return self.x.size

    @property
    def hadamard(self) -> np.ndarray:
        return hadamard(self.n_tx).astype(float)

    def symbols(self, antenna: int) -> np.ndarray:
        """Frequency-domain symbols of one antenna, shape ``(M, N_t)``."""
        return np.outer(self.x, self.hadamard[antenna])


def make_preamble(M: int, n_tx: int = 1, cp_len: int = 0, seed=0) -> OfdmPreamble:
    """Unit-modulus QPSK training vector with a seeded generator."""
    if n_tx & (n_tx - 1):
        raise ParameterError(f"Hadamard training needs a power-of-two antenna count, got {n_tx}")
    if cp_len < 0:
        raise ParameterError("negative CP length")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(M, 2))
    x = ((2 * bits[:, 0] - 1) + 1j * (2 * bits[:, 1] - 1)) / np.sqrt(2.0)
    return OfdmPreamble(x, n_tx, int(cp_len))


def ofdm_modulate(X, cp_len: int, channel_length: int | None = None) -> np.ndarray:
    """IDFT each column of ``X`` (``M x T``), prepend a cyclic prefix, concatenate.

    The IDFT is scaled by ``sqrt(M)`` so unit-power symbols give unit-power samples.
    """
    X = np.asarray(X, dtype=complex)
    if X.ndim == 1:
        X = X[:, None]
    M = X.shape[0]
    if channel_length is not None and cp_len < channel_length - 1:
        warnings.warn(f"CP of {cp_len} samples is shorter than the channel order "
                      f"{channel_length - 1}; LS estimates will suffer from ISI/ICI",
                      RuntimeWarning, stacklevel=2)
    if cp_len > M:
        raise ParameterError("CP longer than the symbol")
    t = np.sqrt(M) * np.fft.ifft(X, axis=0)
    t = np.vstack([t[M - cp_len:], t])
    return t.T.ravel()


def ofdm_demodulate(r, M: int, T: int, cp_len: int) -> np.ndarray:
    """Strip the CP and DFT; returns ``M x T`` (``r`` may have trailing samples)."""
    r = np.asarray(r, dtype=complex)
    need = T * (M + cp_len)
    if r.size < need:
        raise ParameterError(f"{r.size} samples, {need} needed")
    blocks = r[:need].reshape(T, M + cp_len)[:, cp_len:]
    return np.fft.fft(blocks, axis=1).T / np.sqrt(M)


def ofdm_ls_estimate(Y, preamble: OfdmPreamble) -> CfrEstimate:
    """LS estimate ``H_p = Y_p (x_p A)^{-1}``.

    ``Y`` has shape ``(M, N_r, N_t)``: receive antenna by training symbol.
    A 1-D or 2-D ``Y`` is taken as SISO/SIMO with one training symbol.
    """
    Y = np.asarray(Y, dtype=complex)
    if Y.ndim == 1:
        Y = Y[:, None, None]
    elif Y.ndim == 2:
        Y = Y[:, :, None]
    x, nt = preamble.x, preamble.n_tx
    if Y.shape[0] != x.size or Y.shape[2] != nt:
        raise ParameterError(f"expected Y of shape (M={x.size}, N_r, N_t={nt}), got {Y.shape}")
    small = np.flatnonzero(np.abs(x) < PILOT_TOL)
    if small.size:
        raise DegeneratePilotError(f"zero training symbol at subcarrier {int(small[0])}", small)
    A = preamble.hadamard
    # A^{-1} = A^T / N_t for a Hadamard matrix
    H = (Y @ (A.T / nt)) / x[:, None, None]
    return CfrEstimate(H, "cp-ofdm")
