"""Tapped-delay-line Rayleigh channels with Kronecker spatial correlation, and AWGN."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import fftconvolve

from .errors import ParameterError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_SAMPLE_RATE = 10e6


@dataclass(frozen=True)
class PowerDelayProfile:
    name: str
    delays: np.ndarray  # samples, strictly increasing from 0
    powers: np.ndarray  # linear, sum to one

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=int)
        p = np.asarray(self.powers, dtype=float)
        if d.shape != p.shape or d.ndim != 1 or d.size == 0:
            raise ParameterError("delays and powers must be equal-length 1-D arrays")
        if d[0] != 0 or np.any(np.diff(d) <= 0):
            raise ParameterError("delays must start at 0 and strictly increase")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ParameterError("powers must be non-negative and sum to one")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "powers", p)

    @property
    def L_h(self) -> int:
        return int(self.delays[-1]) + 1

    @classmethod
    def from_taps(cls, name, taps_ns_db, sample_rate_hz) -> "PowerDelayProfile":
        """Map ``(delay_ns, power_db)`` pairs to samples; taps landing on one sample merge."""
        taps = np.asarray(taps_ns_db, dtype=float)
        delays = np.rint(taps[:, 0] * 1e-9 * sample_rate_hz).astype(int)
        delays -= delays.min()
        lin = 10.0 ** (taps[:, 1] / 10.0)
        uniq = np.unique(delays)
        powers = np.array([lin[delays == u].sum() for u in uniq])
        return cls(name, uniq, powers / powers.sum())


def load_profiles(path=None, sample_rate_hz: float | None = None) -> dict:
    """Read a PDP TOML file (the bundled ITU vehicular table by default)."""
    if path is None:
        text = resources.files("fbmcest.data").joinpath("itu_vehicular.toml").read_text()
    else:
        text = Path(path).read_text()
    doc = tomllib.loads(text)
    out = {}
    for entry in doc.get("profile", []):
        fs = sample_rate_hz or entry.get("sample_rate_hz", DEFAULT_SAMPLE_RATE)
        out[entry["name"]] = PowerDelayProfile.from_taps(entry["name"], entry["taps"], fs)
    return out


def get_profile(name: str, sample_rate_hz: float | None = None, path=None) -> PowerDelayProfile:
    if name == "flat":
        return PowerDelayProfile("flat", np.array([0]), np.array([1.0]))
    profiles = load_profiles(path, sample_rate_hz)
    try:
        return profiles[name.lower()]
    except KeyError:
        raise ParameterError(f"unknown power delay profile {name!r}; have {sorted(profiles)}") from None


def cfr_of_taps(taps: np.ndarray, M: int) -> np.ndarray:
    """``H_p = sum_l h[l] exp(-j 2 pi p l / M)``; ``taps`` has the delay axis last."""
    taps = np.asarray(taps)
    if taps.shape[-1] > M:
        raise ParameterError("channel longer than the DFT size")
    H = np.fft.fft(taps, n=M, axis=-1)
    return np.moveaxis(H, -1, 0)


@dataclass(frozen=True)
class ChannelRealization:
    """Impulse responses ``taps[j, i, l]`` from transmit ``i`` to receive ``j``."""

    taps: np.ndarray

    @property
    def n_rx(self) -> int:
        return self.taps.shape[0]

    @property
    def n_tx(self) -> int:
        return self.taps.shape[1]

    @property
    def length(self) -> int:
        return self.taps.shape[2]

    def cfr(self, M: int) -> np.ndarray:
        """CFR matrices, shape ``(M, N_r, N_t)``."""
        return cfr_of_taps(self.taps, M)


def exponential_correlation(n: int, rho: float) -> np.ndarray:
    return toeplitz(rho ** np.arange(n))


def _psd_sqrt(R: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(R)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def realize(pdp: PowerDelayProfile, n_tx: int = 1, n_rx: int = 1, rho_t: float = 0.0,
            rho_r: float = 0.0, rng=None) -> ChannelRealization:
    """Draw ``h_l = R_r^{1/2} H_w(l) R_t^{1/2} sqrt(P_l)`` on the profile's delay grid."""
    for rho in (rho_t, rho_r):
        if not 0.0 <= rho < 1.0:
            raise ParameterError(f"correlation coefficient must be in [0, 1), got {rho}")
    rng = np.random.default_rng(rng)
    Rt = _psd_sqrt(exponential_correlation(n_tx, rho_t))
    Rr = _psd_sqrt(exponential_correlation(n_rx, rho_r))
    n_taps = pdp.delays.size
    w = (rng.standard_normal((n_taps, n_rx, n_tx))
         + 1j * rng.standard_normal((n_taps, n_rx, n_tx))) / np.sqrt(2.0)
    h = Rr @ w @ Rt * np.sqrt(pdp.powers)[:, None, None]
    taps = np.zeros((n_rx, n_tx, pdp.L_h), dtype=complex)
    taps[:, :, pdp.delays] = np.moveaxis(h, 0, -1)
    return ChannelRealization(taps)


def convolve(signals, ch: ChannelRealization) -> np.ndarray:
    """Noise-free received signals, shape ``(N_r, L + L_h - 1)``."""
    s = np.atleast_2d(np.asarray(signals, dtype=complex))
    if s.shape[0] != ch.n_tx:
        raise ParameterError(f"{s.shape[0]} transmit signals for a {ch.n_tx}-input channel")
    out = np.zeros((ch.n_rx, s.shape[1] + ch.length - 1), dtype=complex)
    for j in range(ch.n_rx):
        for i in range(ch.n_tx):
            h = ch.taps[j, i]
            if ch.length > 64:
                out[j] += fftconvolve(s[i], h)
            else:
                out[j] += np.convolve(s[i], h)
    return out


def unit_noise(n_rx: int, length: int, rng) -> np.ndarray:
    """Unit-variance circular complex white Gaussian noise."""
    rng = np.random.default_rng(rng)
    return (rng.standard_normal((n_rx, length))
            + 1j * rng.standard_normal((n_rx, length))) / np.sqrt(2.0)


def noise_variance(snr_db: float, signal_power: float) -> float:
    if not signal_power > 0:
        raise ParameterError("zero-power signal: SNR undefined")
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    return signal_power / 10.0 ** (snr_db / 10.0)


def apply(signals, ch: ChannelRealization, snr_db: float, rng=None,
          signal_power: float | None = None) -> np.ndarray:
    """Convolve, superpose over transmit antennas and add AWGN.

    The noise variance follows from ``snr_db`` and the mean per-antenna power
    of ``signals`` (or the explicit ``signal_power``).
    """
    s = np.atleast_2d(np.asarray(signals, dtype=complex))
    if signal_power is None:
        signal_power = float(np.mean(np.abs(s) ** 2))
    var = noise_variance(snr_db, signal_power)
    rx = convolve(s, ch)
    if var > 0:
        rx = rx + np.sqrt(var) * unit_noise(ch.n_rx, rx.shape[1], rng)
    return rx
