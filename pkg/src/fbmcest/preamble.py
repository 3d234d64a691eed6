"""Preamble generators (SISO and MIMO) and analytic pseudo-pilot magnitudes."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import hadamard

from .errors import ParameterError
from .fbcore import CellRole, FrameGrid
from .interference import InterferenceTable


class Family(str, enum.Enum):
    POP = "pop"
    IAM_R = "iam-r"
    IAM_I = "iam-i"
    IAM_C = "iam-c"
    E_IAM_C = "e-iam-c"
    ICM_A = "icm-a"
    ICM_B = "icm-b"
    ICM_C = "icm-c"
    ICM_D = "icm-d"
    MIMO_IAM = "mimo-iam"
    MIMO_SPARSE = "mimo-sparse"
    MIMO_POP = "mimo-pop"


IAM_FAMILIES = (Family.IAM_R, Family.IAM_I, Family.IAM_C, Family.E_IAM_C)

# one period of the middle column, read from the M=8 tables
_IAM_R = np.array([1, -1, -1, 1], dtype=complex)
_IAM_C = np.array([1, -1j, -1, 1j])
# E-IAM-C rows (left, middle, right)
_E_IAM_C_POS = np.array([[1j, 1, -1j], [-1, -1j, 1], [-1j, -1, 1j], [1, 1j, -1]])
_E_IAM_C_NEG = np.array([[-1, 1, 1], [-1j, -1j, 1j], [-1, -1, 1], [-1j, 1j, 1j]])
_TRIPLET = np.array([1, -1j, -1])


@dataclass(frozen=True)
class PreambleSpec:
    """Everything needed to build a preamble deterministically.

    ``base`` selects the SISO IAM layout repeated by ``MIMO_IAM``.
    ``negative_epsilon`` picks the E-IAM-C variant for pulses with ``epsilon < 0``.
    ``triplet_signs`` (IAM-I), ``icm_data`` = ``(a, b, c, d_list)`` (ICM-C) and
    ``D`` (sparse) override the seeded defaults.
    """

    family: Family
    M: int
    n_tx: int = 1
    amplitude: float = 1.0
    seed: int = 0
    base: Family = Family.IAM_C
    negative_epsilon: bool = False
    triplet_signs: tuple | None = None
    icm_data: tuple | None = None
    n_rx: int = 1
    L_h: int | None = None
    starts: tuple | None = None
    D: np.ndarray | None = field(default=None, compare=False)
    cond_max: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "base", Family(self.base))
        if self.M < 8 or self.M % 2:
            raise ParameterError(f"M must be even and >= 8, got {self.M}")
        if self.n_tx < 1 or self.n_rx < 1:
            raise ParameterError("antenna counts must be positive")

    def with_epsilon_of(self, table: InterferenceTable) -> "PreambleSpec":
        """E-IAM-C variant chosen from the sign of epsilon (zero counts as non-negative)."""
        return replace(self, negative_epsilon=table.epsilon < 0)


def _grid(columns, roles=None, meta=None) -> FrameGrid:
    sym = np.column_stack(columns)
    return FrameGrid.from_symbols(sym, roles, meta)


def _guarded(middle, meta) -> FrameGrid:
    z = np.zeros_like(middle)
    return _grid([z, middle, z], meta=meta)


def iam_columns(spec: PreambleSpec, family: Family) -> np.ndarray:
    """Nonzero columns of a SISO IAM preamble: ``M x 1`` (``M x 3`` for E-IAM-C)."""
    M, d = spec.M, spec.amplitude
    p = np.arange(M)
    if family is Family.IAM_R:
        return d * _IAM_R[p % 4][:, None]
    if family is Family.IAM_C:
        return d * _IAM_C[p % 4][:, None]
    if family is Family.E_IAM_C:
        rows = _E_IAM_C_NEG if spec.negative_epsilon else _E_IAM_C_POS
        return d * rows[p % 4]
    if family is Family.IAM_I:
        n_trip = -(-M // 3)
        signs = spec.triplet_signs
        if signs is None:
            signs = np.random.default_rng(spec.seed).choice([-1.0, 1.0], size=n_trip)
        signs = np.asarray(signs, dtype=float)
        if signs.size != n_trip:
            raise ParameterError(f"IAM-I needs {n_trip} triplet signs, got {signs.size}")
        col = (signs[:, None] * _TRIPLET[None, :]).ravel()[:M]
        return d * col[:, None]
    raise ParameterError(f"{family.value} is not an IAM family")


def _siso_iam(spec: PreambleSpec, family: Family) -> FrameGrid:
    cols = iam_columns(spec, family)
    if family is Family.E_IAM_C:
        return _grid(list(cols.T), meta={"pilot_symbols": [1]})
    return _guarded(cols[:, 0], {"pilot_symbols": [1]})


def _mimo_iam(spec: PreambleSpec) -> tuple:
    nt = spec.n_tx
    if nt & (nt - 1):
        raise ParameterError(f"MIMO IAM needs a power-of-two antenna count, got {nt}")
    base = spec.base
    if base not in IAM_FAMILIES:
        raise ParameterError(f"MIMO IAM base must be an IAM family, got {base.value}")
    A = hadamard(nt)
    cols = iam_columns(spec, base)
    z = np.zeros(spec.M, dtype=complex)
    frames = []
    for i in range(nt):
        seq = []
        if base is Family.E_IAM_C:
            for t in range(nt):
                seq += list((A[i, t] * cols).T)
            centres = [3 * t + 1 for t in range(nt)]
        else:
            seq.append(z)
            for t in range(nt):
                seq += [A[i, t] * cols[:, 0], z]
            centres = [2 * t + 1 for t in range(nt)]
        frames.append(_grid(seq, meta={"pilot_symbols": centres, "hadamard": A}))
    return tuple(frames)


def check_sparse(M: int, L_h: int, n_tx: int, starts) -> int:
    """Validate a sparse layout and return the pilot spacing ``N = M / L_h``."""
    if L_h < 1 or M % L_h:
        raise ParameterError(f"L_h={L_h} does not divide M={M}")
    N = M // L_h
    if N < 2 * n_tx:
        raise ParameterError(f"spacing N={N} < 2*N_t={2 * n_tx}")
    starts = [int(s) for s in starts]
    if len(starts) != n_tx or len(set(starts)) != n_tx:
        raise ParameterError("need one distinct start position per transmit antenna")
    if any(s < 0 or s >= N for s in starts):
        raise ParameterError(f"start positions must lie in 0..{N - 1}")
    for i, a in enumerate(starts):
        for b in starts[i + 1:]:
            gap = min((a - b) % N, (b - a) % N)
            if gap < 2:
                raise ParameterError(f"pilot sets starting at {a} and {b} are adjacent")
    return N


def sparse_layout(spec: PreambleSpec):
    """Return ``(N, starts, D)`` for a sparse preamble, with defaults filled in."""
    if spec.L_h is None:
        raise ParameterError("sparse preamble needs L_h")
    starts = spec.starts if spec.starts is not None else tuple(2 * i for i in range(spec.n_tx))
    N = check_sparse(spec.M, spec.L_h, spec.n_tx, starts)
    if spec.D is None:
        if spec.n_tx & (spec.n_tx - 1):
            raise ParameterError("default D is Hadamard; give D for non power-of-two N_t")
        D = hadamard(spec.n_tx).astype(float)
    else:
        D = np.asarray(spec.D)
    if D.shape != (spec.n_tx, spec.n_tx):
        raise ParameterError("D must be N_t x N_t")
    G = D.conj().T @ D
    if not np.allclose(G, G[0, 0] * np.eye(spec.n_tx), atol=1e-12) or abs(G[0, 0]) == 0:
        raise ParameterError("D must be a (scaled) unitary matrix")
    return N, tuple(int(s) for s in starts), D


def _sparse(spec: PreambleSpec) -> tuple:
    N, starts, D = sparse_layout(spec)
    frames = []
    for i in range(spec.n_tx):
        mid = np.zeros(spec.M, dtype=complex)
        for s, p0 in enumerate(starts):
            mid[p0::N] = spec.amplitude * D[s, i]
        frames.append(_guarded(mid, {"pilot_symbols": [1], "spacing": N, "starts": starts}))
    return tuple(frames)


def pop_matrices(spec: PreambleSpec) -> np.ndarray:
    """Per-subcarrier BPSK training matrices ``D_p`` of shape ``(M, N_t, 2 N_r)``.

    Matrices with condition number above ``cond_max`` are re-drawn.
    """
    rng = np.random.default_rng(spec.seed)
    shape = (spec.n_tx, 2 * spec.n_rx)
    out = np.empty((spec.M,) + shape)
    for p in range(spec.M):
        for _ in range(1000):
            Dp = rng.choice([-1.0, 1.0], size=shape)
            if np.linalg.cond(Dp) < spec.cond_max:
                break
        else:
            raise ParameterError("could not draw a well-conditioned POP training matrix")
        out[p] = Dp
    return out


def _mimo_pop(spec: PreambleSpec) -> tuple:
    if spec.n_rx < spec.n_tx:
        raise ParameterError("MIMO POP needs N_r >= N_t")
    Dp = pop_matrices(spec) * spec.amplitude
    n_sym = 2 * spec.n_rx
    return tuple(
        _grid(list(Dp[:, i, :].T),
              roles=np.full((spec.M, n_sym), CellRole.PILOT, dtype=np.int8),
              meta={"pilot_symbols": list(range(n_sym))})
        for i in range(spec.n_tx)
    )


def _icm_c(spec: PreambleSpec) -> FrameGrid:
    M, amp = spec.M, spec.amplitude
    if M % 4:
        raise ParameterError("ICM-C needs M divisible by 4")
    K = M // 2
    if spec.icm_data is None:
        rng = np.random.default_rng(spec.seed)
        a, b, c = rng.choice([-1.0, 1.0], size=3)
        dk = rng.choice([-1.0, 1.0], size=K)
    else:
        a, b, c, dk = spec.icm_data
        dk = np.asarray(dk, dtype=float)
        if dk.size != K:
            raise ParameterError(f"ICM-C needs {K} values for the pilot-row data")
    vals = np.zeros((M, 3))
    k = np.arange(K)
    sgn = (-1.0) ** (k + 1)
    vals[1::2, 0] = sgn * a
    vals[1::2, 1] = b
    vals[1::2, 2] = sgn * c
    vals[0::2, 0] = dk
    vals[0::2, 1] = 1.0
    vals[0::2, 2] = dk
    roles = np.full((M, 3), CellRole.STRUCTURED, dtype=np.int8)
    roles[0::2, 1] = CellRole.PILOT
    return FrameGrid(amp * vals, roles, meta={"pilot_symbols": [1], "pilot_subcarriers": "even"})


def generate(spec: PreambleSpec) -> tuple:
    """Build the preamble; returns one :class:`FrameGrid` per transmit antenna."""
    f, M, d = spec.family, spec.M, spec.amplitude
    p = np.arange(M)
    if f in IAM_FAMILIES:
        if spec.n_tx != 1:
            return _mimo_iam(replace(spec, family=Family.MIMO_IAM, base=f))
        return (_siso_iam(spec, f),)
    if f is Family.MIMO_IAM:
        return _mimo_iam(spec)
    if f is Family.MIMO_SPARSE:
        return _sparse(spec)
    if f is Family.MIMO_POP:
        return _mimo_pop(spec)
    if spec.n_tx != 1:
        raise ParameterError(f"{f.value} is a single-antenna preamble")
    if f is Family.POP:
        first = d * (-1.0) ** p
        return (_grid([first, np.zeros(M)], meta={"pilot_symbols": [0, 1]}),)
    if f is Family.ICM_A:
        mid = np.where(p % 2 == 0, (-1.0) ** (p // 2), 0.0) * d
        return (_guarded(mid, {"pilot_symbols": [1], "pilot_subcarriers": "even"}),)
    if f is Family.ICM_B:
        return (_guarded(d * (-1.0) ** p, {"pilot_symbols": [1]}),)
    if f is Family.ICM_C:
        return (_icm_c(spec),)
    if f is Family.ICM_D:
        return (_grid([d * (-1.0) ** p], meta={"pilot_symbols": [0]}),)
    raise ParameterError(f"unknown family {f}")


def predicted_magnitudes(spec: PreambleSpec, table: InterferenceTable) -> np.ndarray:
    """Analytic ``|c_p|`` of an IAM preamble, one value per subcarrier.

    These closed forms assume the neighbourhood does not cross the band edge.
    """
    fam = spec.base if spec.family is Family.MIMO_IAM else spec.family
    if fam not in IAM_FAMILIES:
        raise ParameterError(f"no analytic pseudo-pilot magnitude for {fam.value}")
    d, b, c, e = spec.amplitude, table.beta, table.gamma, table.epsilon
    M = spec.M
    if fam is Family.IAM_R:
        return np.full(M, d * np.sqrt(1 + 4 * b * b))
    if fam is Family.IAM_C:
        return np.full(M, d * (1 + 2 * b))
    if fam is Family.E_IAM_C:
        if spec.negative_epsilon:
            return np.full(M, d * np.hypot(1 + 2 * b, 2 * (c - 2 * e)))
        return np.full(M, d * abs(1 + 2 * (b + c + 2 * e)))
    p = np.arange(M)
    centre = (p % 3 == 1) & (p + 1 < M)
    return np.where(centre, d * (1 + 2 * b), d * abs((1 + b) + 1j * b))
