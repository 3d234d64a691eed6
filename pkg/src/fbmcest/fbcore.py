"""Prototype filter design, OQAM framing and the OFDM/OQAM filter banks.

Conventions used everywhere in the package:

* subcarrier ``m`` in ``0..M-1`` is the row index of a grid, OQAM symbol
  ``n`` the column index;
* symbol ``n`` starts at sample ``n*M/2``;
* the atom of cell ``(m, n)`` is::

      g_{m,n}(l) = g(l - n M/2) exp(j 2 pi m (l - (Lg-1)/2) / M) exp(j phi_{m,n})

  with ``phi_{m,n} = (m + n) pi/2 - m n pi``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError

# Optimised frequency-sampling coefficients (Bellanger) for overlap factors 3 and 4.
_FREQ_SAMPLES = {
    3: (1.0, 0.911438, 0.411438),
    4: (1.0, 0.971960, np.sqrt(2.0) / 2.0, 0.235147),
}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PrototypeFilter:
    """Real, symmetric, unit-energy prototype pulse of length ``K*M``."""

    coefficients: np.ndarray
    M: int
    K: int

    def __post_init__(self):
        g = np.asarray(self.coefficients, dtype=float)
        if g.ndim != 1:
            raise ParameterError("coefficients must be one-dimensional")
        if self.M < 2 or self.M % 2:
            raise ParameterError(f"M must be even, got {self.M}")
        if g.size != self.K * self.M:
            raise ParameterError(f"filter length {g.size} != K*M = {self.K * self.M}")
        if abs(np.dot(g, g) - 1.0) > 1e-12:
            raise ParameterError("prototype filter must have unit energy")
        if np.max(np.abs(g - g[::-1])) > 1e-12:
            raise ParameterError("prototype filter must be symmetric")
        object.__setattr__(self, "coefficients", _frozen(g))

    @property
    def length(self) -> int:
        return self.coefficients.size

    @property
    def polyphase(self) -> np.ndarray:
        """Type-1 polyphase components, shape ``(M, K)``: row ``r`` is ``g[r::M]``."""
        return self.coefficients.reshape(self.K, self.M).T

    def to_csv(self, path) -> None:
        """One coefficient per line, 17 significant digits."""
        np.savetxt(Path(path), self.coefficients, fmt="%.17g")

    @classmethod
    def from_csv(cls, path, M: int) -> "PrototypeFilter":
        g = np.loadtxt(Path(path), dtype=float, ndmin=1)
        if g.size % M:
            raise ParameterError(f"{g.size} coefficients is not a multiple of M={M}")
        return cls(g, M, g.size // M)


def design_prototype(M: int, K: int = 3) -> PrototypeFilter:
    """Frequency-sampling design with ``2K-1`` nonzero frequency samples.

    The impulse response is sampled at half-integer offsets so that the
    length-``K*M`` pulse is exactly symmetric about ``(K*M-1)/2``.
    """
    if M % 2 or M < 8:
        raise ParameterError(f"M must be even and >= 8, got {M}")
    if K not in _FREQ_SAMPLES:
        raise ParameterError(f"unsupported overlap factor K={K}; choose 3 or 4")
    H = _FREQ_SAMPLES[K]
    L = K * M
    t = np.arange(L) + 0.5
    g = np.full(L, H[0])
    for k in range(1, K):
        g += 2.0 * (-1) ** k * H[k] * np.cos(2.0 * np.pi * k * t / L)
    g /= np.linalg.norm(g)
    # exact symmetry despite rounding
    g = 0.5 * (g + g[::-1])
    g /= np.linalg.norm(g)
    return PrototypeFilter(g, M, K)


class CellRole(enum.IntEnum):
    DATA = 0
    PILOT = 1
    NULL = 2
    STRUCTURED = 3


@dataclass(frozen=True)
class FrameGrid:
    """Real OQAM symbols on an ``M x N`` grid for one transmit antenna.

    ``quadrature`` marks cells whose real value is sent on the imaginary
    axis (``j * value``); this is how the IAM-I/IAM-C/E-IAM-C preambles,
    which are not strictly OQAM, are carried.
    """

    values: np.ndarray
    roles: np.ndarray = None
    quadrature: np.ndarray = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.iscomplexobj(v):
            raise ParameterError("FrameGrid values must be real")
        v = v.astype(float)
        if v.ndim != 2:
            raise ParameterError("FrameGrid values must be an M x N array")
        roles = (np.full(v.shape, CellRole.DATA, dtype=np.int8) if self.roles is None
                 else np.asarray(self.roles, dtype=np.int8))
        quad = (np.zeros(v.shape, dtype=bool) if self.quadrature is None
                else np.asarray(self.quadrature, dtype=bool))
        if roles.shape != v.shape or quad.shape != v.shape:
            raise ParameterError("roles/quadrature shape must match values")
        if np.any(v[roles == CellRole.NULL] != 0.0):
            raise ParameterError("guard-null cells must be exactly zero")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "roles", _frozen(roles))
        object.__setattr__(self, "quadrature", _frozen(quad))

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    @property
    def symbols(self) -> np.ndarray:
        """Complex symbols actually fed to the synthesis bank (before atom phase)."""
        return np.where(self.quadrature, 1j, 1.0) * self.values

    def scaled(self, factor: float) -> "FrameGrid":
        return FrameGrid(self.values * factor, self.roles, self.quadrature, dict(self.meta))

    @classmethod
    def from_symbols(cls, symbols, roles=None, meta=None) -> "FrameGrid":
        """Build from complex entries that are each purely real or purely imaginary."""
        s = np.asarray(symbols, dtype=complex)
        quad = (np.abs(s.imag) > 0) & (s.real == 0)
        if np.any((s.real != 0) & (s.imag != 0)):
            raise ParameterError("each symbol must be purely real or purely imaginary")
        values = np.where(quad, s.imag, s.real)
        if roles is None:
            roles = np.where(values == 0, CellRole.NULL, CellRole.PILOT)
        return cls(values, roles, quad, dict(meta or {}))


def concat_frames(*frames: FrameGrid) -> FrameGrid:
    """Place frames one after another in time."""
    if len({f.M for f in frames}) != 1:
        raise ParameterError("frames have different subcarrier counts")
    return FrameGrid(
        np.hstack([f.values for f in frames]),
        np.hstack([f.roles for f in frames]),
        np.hstack([f.quadrature for f in frames]),
        dict(frames[0].meta),
    )


def phase(m, n):
    """``phi_{m,n} = (m+n) pi/2 - m n pi``."""
    m = np.asarray(m)
    n = np.asarray(n)
    return (m + n) * np.pi / 2 - m * n * np.pi


def signal_length(N: int, filt: PrototypeFilter) -> int:
    return (N - 1) * filt.M // 2 + filt.length


def atom(filt: PrototypeFilter, m: int, n: int, length: int | None = None) -> np.ndarray:
    """Samples of ``g_{m,n}`` on ``0..length-1`` (direct evaluation of the definition).

    Negative ``n`` is not representable on a causal axis; callers shift
    both atoms of an inner product so that indices stay non-negative.
    """
    M, Lg = filt.M, filt.length
    if length is None:
        length = n * M // 2 + Lg
    l = np.arange(length)
    k = l - n * M // 2
    inside = (k >= 0) & (k < Lg)
    out = np.zeros(length, dtype=complex)
    out[inside] = (filt.coefficients[k[inside]]
                   * np.exp(2j * np.pi * m * (l[inside] - (Lg - 1) / 2) / M)
                   * np.exp(1j * phase(m, n)))
    return out


def _as_symbols(frame) -> np.ndarray:
    if isinstance(frame, FrameGrid):
        return frame.symbols
    return np.asarray(frame, dtype=complex)


def synthesize_direct(frame, filt: PrototypeFilter) -> np.ndarray:
    """Reference synthesis: explicit sum of atoms. O(M N Lg); for testing."""
    d = _as_symbols(frame)
    M, N = d.shape
    if M != filt.M:
        raise ParameterError(f"frame has {M} subcarriers, filter expects {filt.M}")
    L = signal_length(N, filt)
    s = np.zeros(L, dtype=complex)
    for n in range(N):
        for m in np.flatnonzero(d[:, n]):
            s += d[m, n] * atom(filt, int(m), n, L)
    return s


def synthesize(frame, filt: PrototypeFilter) -> np.ndarray:
    """Synthesis filter bank output ``s(l) = sum_{m,n} d_{m,n} g_{m,n}(l)``.

    ``frame`` is a :class:`FrameGrid` or an ``M x N`` complex array. Uses an
    IFFT per symbol followed by windowing with ``g`` and overlap-add.
    """
    d = _as_symbols(frame)
    if d.ndim != 2:
        raise ParameterError("frame must be two-dimensional")
    M, N = d.shape
    if M != filt.M:
        raise ParameterError(f"frame has {M} subcarriers, filter expects {filt.M}")
    K, Lg, half = filt.K, filt.length, M // 2
    m = np.arange(M)[:, None]
    n = np.arange(N)[None, :]
    # exp(j phi) * (-1)^{mn} from the half-symbol shift collapses to j^{m+n}
    b = d * (1j ** ((m + n) % 4)) * np.exp(-1j * np.pi * m * (Lg - 1) / M)
    blocks = M * np.fft.ifft(b, axis=0)
    x = np.tile(blocks, (K, 1)) * filt.coefficients[:, None]
    s = np.zeros(signal_length(N, filt), dtype=complex)
    for k in range(N):
        s[k * half:k * half + Lg] += x[:, k]
    return s


def analyze(signal, filt: PrototypeFilter, N: int, symbols=None) -> np.ndarray:
    """Analysis filter bank: ``y_{p,q} = sum_l s(l) conj(g_{p,q}(l))``.

    Returns an ``M x N`` complex grid, or ``M x len(symbols)`` when only the
    listed symbol instants are wanted.
    """
    s = np.asarray(signal, dtype=complex)
    M, K, Lg, half = filt.M, filt.K, filt.length, filt.M // 2
    q = np.arange(N) if symbols is None else np.asarray(symbols, dtype=int)
    if q.size and (q.min() < 0 or q.max() >= N):
        raise ParameterError("requested symbol index outside 0..N-1")
    need = signal_length(N, filt) if symbols is None else int(q.max()) * half + Lg
    if s.size < need:
        raise ParameterError(f"signal has {s.size} samples, {need} needed for {N} symbols")
    idx = q[None, :] * half + np.arange(Lg)[:, None]
    seg = s[idx] * filt.coefficients[:, None]
    folded = seg.reshape(K, M, q.size).sum(axis=0)
    p = np.arange(M)[:, None]
    corr = ((-1j) ** ((p + q[None, :]) % 4)) * np.exp(1j * np.pi * p * (Lg - 1) / M)
    return corr * np.fft.fft(folded, axis=0)


def oqam_stagger(qam) -> FrameGrid:
    """Map an ``M x T`` complex QAM grid to an ``M x 2T`` real OQAM grid.

    Real part goes to instant ``2t``, imaginary part to ``2t+1``.
    """
    x = np.asarray(qam, dtype=complex)
    if x.ndim != 2:
        raise ParameterError("QAM grid must be two-dimensional")
    d = np.empty((x.shape[0], 2 * x.shape[1]))
    d[:, 0::2] = x.real
    d[:, 1::2] = x.imag
    return FrameGrid(d)


def oqam_destagger(grid) -> np.ndarray:
    d = grid.values if isinstance(grid, FrameGrid) else np.asarray(grid, dtype=float)
    if d.shape[1] % 2:
        raise ParameterError("OQAM grid must have an even number of symbols")
    return d[:, 0::2] + 1j * d[:, 1::2]


def random_qpsk_frame(M: int, N: int, rng: np.random.Generator) -> FrameGrid:
    """Staggered unit-power QPSK: real entries ±1/sqrt(2), ``N`` must be even."""
    if N % 2:
        raise ParameterError("odd number of OQAM symbols")
    bits = rng.integers(0, 2, size=(M, N // 2, 2))
    qam = ((2 * bits[..., 0] - 1) + 1j * (2 * bits[..., 1] - 1)) / np.sqrt(2.0)
    return oqam_stagger(qam)
