"""Preamble-based CFR estimators and the NMSE metric.

All estimators return a :class:`CfrEstimate` holding ``M`` matrices of shape
``N_r x N_t``. Subcarriers where a division is ill-defined are either
rejected (:class:`DegeneratePilotError`) or flagged invalid and zeroed,
never filled with non-finite values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .errors import ConfigError, DegeneratePilotError, InterferenceNotApproximable, ParameterError
from .fbcore import CellRole, FrameGrid
from .interference import InterferenceTable, pseudo_pilots, wrap_sign

PILOT_TOL = 1e-12
COND_MAX = 1e12


@dataclass
class CfrEstimate:
    """Estimated CFR ``H[p]`` (shape ``(M, N_r, N_t)``) and a validity mask."""

    H: np.ndarray
    method: str
    valid: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        if H.ndim != 3:
            raise ParameterError("CFR estimate must have shape (M, N_r, N_t)")
        valid = (np.ones(H.shape[0], dtype=bool) if self.valid is None
                 else np.asarray(self.valid, dtype=bool))
        if valid.shape != (H.shape[0],):
            raise ParameterError("validity mask must have one entry per subcarrier")
        valid = valid & np.all(np.isfinite(H), axis=(1, 2))
        H = np.where(valid[:, None, None], H, 0.0)
        self.H, self.valid = H, valid

    @property
    def M(self) -> int:
        return self.H.shape[0]

    @property
    def excluded(self) -> int:
        return int(np.count_nonzero(~self.valid))


def _columns(y) -> np.ndarray:
    """Per-subcarrier receive vectors as an ``(M, N_r)`` array."""
    y = np.asarray(y, dtype=complex)
    if y.ndim == 1:
        y = y[:, None]
    if y.ndim != 2:
        raise ParameterError("expected AFB outputs of shape (M,) or (M, N_r)")
    return y


def iam_estimate(y, c, method: str = "iam") -> CfrEstimate:
    """Point division ``H_p = y_p / c_p`` per receive antenna.

    ``y`` has shape ``(M,)`` or ``(M, N_r)``, ``c`` shape ``(M,)``.
    """
    y = _columns(y)
    c = np.asarray(c, dtype=complex)
    if c.shape != (y.shape[0],):
        raise ParameterError("one pseudo-pilot per subcarrier expected")
    small = np.flatnonzero(np.abs(c) < PILOT_TOL)
    if small.size:
        raise DegeneratePilotError(
            f"pseudo-pilot magnitude below {PILOT_TOL:g} at subcarrier {int(small[0])}", small)
    return CfrEstimate((y / c[:, None])[:, :, None], method)


def pop_estimate(y0, y1, d0=None) -> CfrEstimate:
    """Pairs-of-pilots estimate from the two received preamble symbols.

    The preamble is ``[d0, 0]`` with real ``d0`` (``(-1)^p`` by default). The
    ZF coefficient is ``W_p = j d0_p conj(y1_p) / Im(conj(y0_p) y1_p)`` and
    ``H_p = 1 / W_p``. Subcarriers with a vanishing denominator are flagged.
    """
    y0, y1 = _columns(y0), _columns(y1)
    M = y0.shape[0]
    if y1.shape != y0.shape:
        raise ParameterError("y0 and y1 must have the same shape")
    if d0 is None:
        d0 = (-1.0) ** np.arange(M)
    d0 = np.asarray(d0, dtype=float)[:, None]
    den = np.imag(np.conj(y0) * y1)
    num = 1j * d0 * np.conj(y1)
    ok = (np.abs(den) >= PILOT_TOL) & (np.abs(num) >= PILOT_TOL)
    safe_num = np.where(ok, num, 1.0)
    H = np.where(ok, den / safe_num, 0.0)
    return CfrEstimate(H[:, :, None], "pop", valid=np.all(ok, axis=1))


def mimo_iam_estimate(Y, C) -> CfrEstimate:
    """``H_p = Y_p C_p^{-1}``.

    ``Y`` is ``(M, N_r, N_t)`` (AFB outputs at the ``N_t`` pilot instants) and
    ``C`` is ``(M, N_t, N_t)`` with ``C[p, i, k]`` the pseudo-pilot of
    antenna ``i`` at instant ``k``. Singular ``C_p`` are flagged.
    """
    Y = np.asarray(Y, dtype=complex)
    C = np.asarray(C, dtype=complex)
    if Y.ndim != 3 or C.ndim != 3 or C.shape[1] != C.shape[2] or Y.shape[2] != C.shape[1]:
        raise ParameterError("need Y of shape (M, N_r, N_t) and C of shape (M, N_t, N_t)")
    ok = np.linalg.cond(C) < COND_MAX
    Cs = np.where(ok[:, None, None], C, np.eye(C.shape[1]))
    H = Y @ np.linalg.inv(Cs)
    return CfrEstimate(H, "mimo-iam", valid=ok)


def mimo_pop_estimate(Y, D) -> CfrEstimate:
    """MIMO pairs-of-pilots estimate.

    ``Y`` has shape ``(M, N_r, 2 N_r)`` (AFB outputs at ``q = 0..2N_r-1``) and
    ``D`` shape ``(M, N_t, 2 N_r)`` (real training symbols). With
    ``Y_p = [Re Y; -Im Y]`` the real ZF equaliser is ``[W^R W^I] = D_p Y_p^+``,
    ``W = W^R + j W^I`` and ``H_p`` is the right inverse (pseudo-inverse) of ``W``.
    """
    Y = np.asarray(Y, dtype=complex)
    D = np.asarray(D, dtype=float)
    M, n_rx, n_sym = Y.shape
    n_tx = D.shape[1]
    if n_rx < n_tx:
        raise ParameterError("MIMO POP needs N_r >= N_t")
    if n_sym != 2 * n_rx or D.shape != (M, n_tx, 2 * n_rx):
        raise ParameterError("MIMO POP needs 2 N_r received instants and matching D")
    Yr = np.concatenate([Y.real, -Y.imag], axis=1)
    # noise-free Yr has rank 2 N_t, so a pseudo-inverse covers N_r > N_t
    ok = np.linalg.matrix_rank(Yr, tol=None) >= 2 * n_tx
    Yr = np.where(ok[:, None, None], Yr, np.eye(2 * n_rx))
    WRI = D @ np.linalg.pinv(Yr)
    W = WRI[:, :, :n_rx] + 1j * WRI[:, :, n_rx:]
    ok &= np.linalg.cond(W) < COND_MAX
    H = np.linalg.pinv(np.where(ok[:, None, None], W, np.eye(n_tx, n_rx)))
    return CfrEstimate(H, "mimo-pop", valid=ok)


def sparse_system(M: int, L_h: int, n_rx: int, N: int, starts, D, amplitude: float = 1.0):
    """Stacked model matrices of the sparse preamble.

    Returns ``(C, rows)``: ``C`` maps ``h = [h_1; ...; h_Nt]`` (each ``h_i``
    ordered by delay, then receive antenna) to ``y``, the AFB outputs at
    subcarriers ``rows`` stacked pilot set by pilot set, then receive antenna.
    """
    D = np.asarray(D) * amplitude
    n_tx = D.shape[0]
    starts = [int(s) for s in starts]
    k = np.arange(M // N)
    lag = np.arange(L_h)
    F = np.exp(-2j * np.pi * np.outer(k * N, lag) / M)  # every N-th row, first L_h columns
    Fbar = np.kron(F, np.eye(n_rx))
    blocks = []
    for s, p0 in enumerate(starts):
        Wp = np.kron(np.exp(-2j * np.pi * p0 * lag / M), np.ones(n_rx))
        FW = Fbar * Wp[None, :]
        blocks.append(np.hstack([D[s, i] * FW for i in range(n_tx)]))
    C = np.vstack(blocks)
    rows = np.concatenate([p0 + k * N for p0 in starts])
    return C, rows


def sparse_ls_estimate(y, M: int, L_h: int, N: int, starts, D, amplitude: float = 1.0,
                       return_taps: bool = False):
    """Least-squares fit of the channel impulse responses from a sparse preamble.

    ``y`` is the ``(M, N_r)`` (or ``(M,)``) AFB output at the pilot instant.
    The CFR follows from the ``M``-point DFT of the estimated taps.
    """
    y = _columns(y)
    n_rx = y.shape[1]
    D = np.asarray(D)
    n_tx = D.shape[0]
    C, rows = sparse_system(M, L_h, n_rx, N, starts, D, amplitude)
    yv = y[rows].ravel()  # pilot set, then subcarrier, then antenna
    h, _, rank, _ = np.linalg.lstsq(C, yv, rcond=None)
    if rank < C.shape[1]:
        raise ConfigError(f"sparse system is rank deficient ({rank} < {C.shape[1]})")
    taps = h.reshape(n_tx, L_h, n_rx).transpose(2, 0, 1)  # (N_r, N_t, L_h)
    H = np.moveaxis(np.fft.fft(taps, n=M, axis=-1), -1, 0)
    est = CfrEstimate(H, "sparse")
    return (est, taps) if return_taps else est


def circular_interp(values, known, M: int) -> np.ndarray:
    """Complex linear interpolation over ``0..M-1`` with wrap-around at the band edge."""
    known = np.asarray(known, dtype=int)
    values = np.asarray(values, dtype=complex)
    p = np.arange(M)
    if known.size == 1:
        return np.full(M, values[0])
    return (np.interp(p, known, values.real, period=M)
            + 1j * np.interp(p, known, values.imag, period=M))


def icm_pilots(frame: FrameGrid, table: InterferenceTable):
    """Pilot subcarriers, pilot instant and effective pilot values of an ICM preamble.

    Where the neighbourhood is fully known the first-order pseudo-pilot is
    used. Otherwise (structured unknown data) the interference cancels by
    construction and the pilot value itself is used; pilots whose
    neighbourhood wraps around the band edge are then dropped, since the
    wrap sign breaks the pairwise cancellation there.
    """
    M = frame.M
    q = int(frame.meta.get("pilot_symbols", [1])[0])
    known = np.flatnonzero(frame.roles[:, q] == CellRole.PILOT)
    try:
        c = pseudo_pilots(frame, table, q)[known]
    except InterferenceNotApproximable:
        if wrap_sign(M) != 1:
            known = known[(known >= 2) & (known < M - 2)]
        c = frame.symbols[known, q]
    return known, q, c


def icm_estimate(y, frame: FrameGrid, table: InterferenceTable) -> CfrEstimate:
    """Point division at pilot subcarriers, circular linear interpolation elsewhere."""
    y = _columns(y)
    M = y.shape[0]
    known, _, c = icm_pilots(frame, table)
    if known.size == 0:
        raise DegeneratePilotError("ICM preamble has no pilot subcarriers")
    small = np.abs(c) < PILOT_TOL
    if np.any(small):
        raise DegeneratePilotError(
            f"zero pilot at subcarrier {int(known[small][0])}", known[small])
    H = np.empty((M, y.shape[1]), dtype=complex)
    for j in range(y.shape[1]):
        H[:, j] = circular_interp(y[known, j] / c, known, M)
    return CfrEstimate(H[:, :, None], "icm")


def nmse(truth, est: CfrEstimate) -> float:
    """``||H - H_est||^2 / ||H||^2`` over the valid subcarriers of ``est``.

    ``truth`` is a :class:`ChannelRealization` or a CFR array ``(M, N_r, N_t)``.
    """
    if isinstance(truth, ChannelRealization):
        H = truth.cfr(est.M)
    else:
        H = np.asarray(truth, dtype=complex)
    if H.shape != est.H.shape:
        raise ParameterError(f"truth shape {H.shape} != estimate shape {est.H.shape}")
    v = est.valid
    ref = np.sum(np.abs(H[v]) ** 2)
    if not ref > 0:
        raise ParameterError("true CFR has zero norm over the valid subcarriers")
    return float(np.sum(np.abs(H[v] - est.H[v]) ** 2) / ref)
