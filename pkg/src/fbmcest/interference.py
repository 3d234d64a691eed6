"""Intrinsic interference weights and pseudo-pilots.

The weight of neighbour ``(p+dm, q+dn)`` onto cell ``(p, q)`` is
``Im <g_{p+dm,q+dn}, g_{p,q}>``. For ``|dm| <= 2`` and ``|dn| <= 1`` it takes
one of five values (beta, gamma, delta, epsilon, 0) with signs depending
only on the parity of ``p``::

        dn:    -1        0        +1
    dm=-2   s*eps       0      -s*eps
    dm=-1   s*delta   -beta    s*delta
    dm= 0  -s*gamma    (d)     s*gamma
    dm=+1   s*delta    beta    s*delta
    dm=+2   s*eps       0      -s*eps          s = (-1)^p
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InterferenceNotApproximable, ParameterError
from .fbcore import CellRole, FrameGrid, PrototypeFilter, analyze, atom, synthesize

IMAG_TOL = 1e-10


def inner_product_bruteforce(filt: PrototypeFilter, mn, pq) -> complex:
    """``sum_l g_{m,n}(l) conj(g_{p,q}(l))`` by direct summation over the atoms."""
    (m, n), (p, q) = mn, pq
    # shifting both time indices by an even amount leaves the product unchanged
    shift = 0
    low = min(n, q)
    if low < 0:
        shift = -low + (-low) % 2
    n, q = n + shift, q + shift
    L = max(n, q) * filt.M // 2 + filt.length
    return complex(np.vdot(atom(filt, p, q, L), atom(filt, m, n, L)))


def wrap_sign(M: int) -> int:
    """Sign relating the atom at subcarrier ``m + M`` to the one at ``m``.

    Atoms are anti-periodic in frequency when ``M`` is a multiple of 4, so a
    neighbour reached across the band edge enters with a flipped sign.
    """
    return -1 if (M // 2) % 2 == 0 else 1


def weights_from_coefficients(g, M: int):
    """Closed-form ``(beta, gamma, delta, epsilon)`` for pulse ``g`` and ``M`` subcarriers.

    Sums with empty index ranges evaluate to zero. Raises if any weight has an
    imaginary part above ``IMAG_TOL``.
    """
    g = np.asarray(g, dtype=float)
    Lg = g.size
    w = 2.0 * np.pi / M
    l = np.arange(Lg)
    centre = np.exp(-1j * w * (Lg - 1) / 2)

    beta = centre * np.sum(g ** 2 * np.exp(1j * w * l))
    ll = np.arange(M // 2, Lg)
    prod = g[ll] * g[ll - M // 2] if ll.size else np.zeros(0)
    gamma = np.sum(prod) + 0j
    delta = -1j * centre * np.sum(prod * np.exp(1j * w * ll))
    eps_plus = np.exp(-1j * w * (Lg - 1)) * np.sum(prod * np.exp(2j * w * ll))
    eps_minus = np.exp(1j * w * (Lg - 1)) * np.sum(prod * np.exp(-2j * w * ll))

    for name, v in (("beta", beta), ("gamma", gamma), ("delta", delta),
                    ("epsilon", eps_plus), ("epsilon", eps_minus)):
        if abs(v.imag) > IMAG_TOL:
            raise ParameterError(f"{name} has imaginary residue {v.imag:.3g}; pulse not symmetric?")
    if abs(eps_plus.real - eps_minus.real) > IMAG_TOL:
        raise ParameterError("epsilon differs between the +2 and -2 offsets")
    return float(beta.real), float(gamma.real), float(delta.real), float(eps_plus.real)


@dataclass(frozen=True)
class InterferenceTable:
    beta: float
    gamma: float
    delta: float
    epsilon: float
    M: int

    def pattern(self, m: int) -> np.ndarray:
        """5x3 weights around subcarrier ``m``; rows dm=-2..2, columns dn=-1..1."""
        s = -1.0 if m % 2 else 1.0
        b, c, d, e = self.beta, self.gamma, self.delta, self.epsilon
        return np.array([
            [s * e, 0.0, -s * e],
            [s * d, -b, s * d],
            [-s * c, 0.0, s * c],
            [s * d, b, s * d],
            [s * e, 0.0, -s * e],
        ])

    def as_dict(self) -> dict:
        return {"beta": self.beta, "gamma": self.gamma, "delta": self.delta,
                "epsilon": self.epsilon}


def closed_form_weights(filt: PrototypeFilter) -> InterferenceTable:
    return InterferenceTable(*weights_from_coefficients(filt.coefficients, filt.M), M=filt.M)


def neighborhood(m: int, table: InterferenceTable) -> np.ndarray:
    return table.pattern(m)


def time_offset2_weights(filt: PrototypeFilter) -> np.ndarray:
    """Complex inner products ``<g_{p+dm,q+dn}, g_{p,q}>`` for dn = -2, +2 and dm = -2..2.

    Shape ``(5, 2)``. These do not depend on ``p`` or ``q``.
    """
    M = filt.M
    p, q = M // 2, 2
    out = np.empty((5, 2), dtype=complex)
    for i, dm in enumerate(range(-2, 3)):
        for j, dn in enumerate((-2, 2)):
            out[i, j] = inner_product_bruteforce(filt, (p + dm, q + dn), (p, q))
    return out


_UNKNOWN = (CellRole.DATA, CellRole.STRUCTURED)


def interference(frame: FrameGrid, table: InterferenceTable, q: int,
                 filt: PrototypeFilter | None = None, check: bool = True) -> np.ndarray:
    """Interference term ``sum_{Omega} d_{m,n} <g_{m,n}, g_{p,q}>`` at every subcarrier ``p``.

    The first-order window is always used. Passing ``filt`` adds time offsets
    +-2 from brute-force inner products. With ``check`` a neighbourhood
    touching data cells raises :class:`InterferenceNotApproximable`.
    """
    M, N = frame.M, frame.N
    if M != table.M:
        raise ParameterError("frame and table disagree on M")
    d = frame.symbols
    sigma = wrap_sign(M)
    p = np.arange(M)
    parity = np.where(p % 2, -1.0, 1.0)
    base = table.pattern(0)
    span = 2 if filt is not None else 1
    ext = time_offset2_weights(filt) if filt is not None else None
    u = np.zeros(M, dtype=complex)
    for dn in range(-span, span + 1):
        n = q + dn
        if n < 0 or n >= N:
            continue
        for dm in range(-2, 3):
            if dm == 0 and dn == 0:
                continue
            idx = p + dm
            wrapped = (idx < 0) | (idx >= M)
            idx = idx % M
            if abs(dn) <= 1:
                w = 1j * base[dm + 2, dn + 1]
                # the beta entries do not alternate with parity
                w = w * (parity if dn != 0 else 1.0)
            else:
                w = ext[dm + 2, 0 if dn < 0 else 1]
            vals = d[idx, n] * np.where(wrapped, sigma, 1)
            if check:
                bad = np.isin(frame.roles[idx, n], _UNKNOWN) & (w != 0)
                if np.any(bad):
                    raise InterferenceNotApproximable(
                        f"cell ({int(idx[bad][0])}, {n}) in the neighbourhood of "
                        f"({int(p[bad][0])}, {q}) carries unknown data")
            u += w * vals
    return u


def pseudo_pilots(frame: FrameGrid, table: InterferenceTable, q: int,
                  filt: PrototypeFilter | None = None) -> np.ndarray:
    """``c_{p,q} = d_{p,q} + interference`` for all subcarriers at instant ``q``."""
    return frame.symbols[:, q] + interference(frame, table, q, filt)


def pseudo_pilot(frame: FrameGrid, table: InterferenceTable, pq,
                 filt: PrototypeFilter | None = None) -> complex:
    p, q = pq
    return complex(pseudo_pilots(frame, table, q, filt)[p])


def exact_pseudo_pilots(frame: FrameGrid, filt: PrototypeFilter, symbols=None) -> np.ndarray:
    """Noise-free, channel-free AFB output of ``frame`` alone: every interference term included."""
    return analyze(synthesize(frame, filt), filt, frame.N, symbols)
