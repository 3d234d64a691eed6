"""Monte Carlo NMSE sweeps, transmit power normalisation and PAPR profiles.

Every trial draws one channel, one block of trailing QPSK data per antenna
and one unit-variance noise sequence per receive antenna; all methods see
the same draws (paired comparison). Because the analysis bank is linear the
noise-free and the unit-noise parts of the receive signal are analysed once
and combined per SNR point as ``y = y_clean + sigma * y_noise``.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import cpofdm
from .channel import PowerDelayProfile, convolve, get_profile, realize, unit_noise
from .errors import ConfigError, DegeneratePilotError, ParameterError
from .estimator import (CfrEstimate, icm_estimate, iam_estimate, mimo_iam_estimate,
                        mimo_pop_estimate, nmse, pop_estimate, sparse_system)
from .fbcore import FrameGrid, PrototypeFilter, analyze, design_prototype, random_qpsk_frame, synthesize
from .interference import closed_form_weights, exact_pseudo_pilots, pseudo_pilots
from .preamble import IAM_FAMILIES, Family, PreambleSpec, generate, pop_matrices, sparse_layout

OQAM_METHODS = ("pop", "iam-r", "iam-i", "iam-c", "e-iam-c", "icm-a", "icm-b", "icm-c", "icm-d",
                "sparse")
METHODS = OQAM_METHODS + ("cp-ofdm",)
DATA_VARIANCE = 0.5  # per real OQAM symbol of unit-power QPSK


class Normalization(str, enum.Enum):
    SFB_OUTPUT = "sfb-output"
    SFB_INPUT = "sfb-input"
    DATA_REFERENCE = "data-reference"


@dataclass(frozen=True)
class ExperimentConfig:
    """One NMSE-versus-SNR experiment.

    ``input_energy`` is the per-antenna preamble energy at the synthesis
    bank input used in ``sfb-input`` mode, in units of ``M`` (default
    ``K + 1``, the span of a single-pilot-symbol preamble).
    """

    methods: tuple = ("iam-r", "iam-i", "iam-c", "e-iam-c", "cp-ofdm")
    M: int = 512
    K: int = 3
    n_tx: int = 1
    n_rx: int = 1
    profile: str = "veh-a"
    sample_rate_hz: float = 10e6
    rho_t: float = 0.2
    rho_r: float = 0.2
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 500
    data_symbols: int = 10
    seed: int = 1
    preamble_seed: int = 0
    normalization: str = "sfb-output"
    input_energy: float | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(str(m).lower() for m in self.methods))
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown method(s) {bad}; choose from {list(METHODS)}")
        if not self.methods or len(set(self.methods)) != len(self.methods):
            raise ConfigError("method list must be non-empty without duplicates")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.snr_db or not all(math.isfinite(s) for s in self.snr_db):
            raise ConfigError("SNR grid must be a non-empty list of finite values")
        if self.data_symbols < 0 or self.data_symbols % 2:
            raise ConfigError("data_symbols must be a non-negative even number")
        if self.n_tx < 1 or self.n_rx < 1:
            raise ConfigError("antenna counts must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        try:
            Normalization(self.normalization)
        except ValueError:
            raise ConfigError(f"normalization must be one of "
                              f"{[n.value for n in Normalization]}") from None
        if self.input_energy is not None and not self.input_energy > 0:
            raise ConfigError("input_energy must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------- power


def data_leakage(filt: PrototypeFilter, n_pre: int, window: int,
                 variance: float = DATA_VARIANCE) -> np.ndarray:
    """Expected per-sample power that trailing random data puts on ``0..window-1``.

    Data symbol ``n >= n_pre`` on every subcarrier contributes
    ``variance * g(l - n M/2)^2`` per subcarrier.
    """
    M, Lg, half = filt.M, filt.length, filt.M // 2
    g2 = filt.coefficients ** 2
    out = np.zeros(window)
    n = n_pre
    while n * half < window:
        start = n * half
        stop = min(window, start + Lg)
        out[start:stop] += g2[:stop - start]
        n += 1
    return variance * M * out


def preamble_window(n_pre: int, filt: PrototypeFilter) -> int:
    """Length of the preamble span ``[0, (N_pre - 1) M/2 + L_g)``."""
    return (n_pre - 1) * filt.M // 2 + filt.length


def normalize_power(frames, filt: PrototypeFilter, mode="sfb-output", data_symbols: int = 10,
                    input_energy: float | None = None, reference_power: float = 1.0) -> float:
    """Amplitude scale applied to a preamble before transmission.

    ``sfb-output``: the mean of ``|s(l)|^2`` over the preamble span, averaged
    over transmit antennas and including the expected leakage of the
    trailing data into the span, equals ``reference_power``.
    ``sfb-input``: the per-antenna mean of ``sum |d|^2`` equals
    ``input_energy`` (default ``(K + 1) M``).
    ``data-reference``: preamble symbols keep the unit amplitude of the data
    symbols, whose SFB output has unit mean power; no preamble-specific
    rescaling takes place.
    """
    frames = tuple(frames)
    mode = Normalization(mode)
    if not any(np.any(f.values) for f in frames):
        raise ParameterError("zero-energy preamble")
    if mode is Normalization.DATA_REFERENCE:
        return float(np.sqrt(reference_power))
    if mode is Normalization.SFB_INPUT:
        e_in = np.mean([np.sum(np.abs(f.symbols) ** 2) for f in frames])
        if not e_in > 0:
            raise ParameterError("zero-energy preamble")
        if input_energy is None:
            input_energy = (filt.K + 1) * filt.M
        return float(np.sqrt(input_energy / e_in))
    n_pre = frames[0].N
    W = preamble_window(n_pre, filt)
    p_pre = np.mean([np.mean(np.abs(synthesize(f, filt)[:W]) ** 2) for f in frames])
    if not p_pre > 0:
        raise ParameterError("zero-energy preamble")
    leak = float(np.mean(data_leakage(filt, n_pre, W))) if data_symbols else 0.0
    if leak >= reference_power:
        raise ParameterError("data leakage alone exceeds the reference power")
    return float(np.sqrt((reference_power - leak) / p_pre))


# --------------------------------------------------------------------------- PAPR


@dataclass
class PaprProfile:
    power: np.ndarray
    papr: float

    @property
    def papr_db(self) -> float:
        return 10.0 * np.log10(self.papr)


def papr_profile(signal_or_frame, filt: PrototypeFilter | None = None) -> PaprProfile:
    """``|s(l)|^2`` over the span and the peak-to-average power ratio.

    Accepts a baseband signal, or a :class:`FrameGrid` together with ``filt``.
    """
    if isinstance(signal_or_frame, FrameGrid):
        if filt is None:
            raise ParameterError("a prototype filter is needed to synthesise a frame")
        s = synthesize(signal_or_frame, filt)
    else:
        s = np.asarray(signal_or_frame, dtype=complex)
    power = np.abs(s) ** 2
    mean = power.mean() if power.size else 0.0
    if not mean > 0:
        raise ParameterError("PAPR of an all-zero signal is undefined")
    return PaprProfile(power, float(power.max() / mean))


# --------------------------------------------------------------------------- schemes


@dataclass
class Scheme:
    """A method prepared for the sweep: scaled preamble and its estimator.

    ``estimate`` receives AFB (or DFT) outputs of shape ``(N_r, M, len(symbols))``.
    """

    name: str
    kind: str  # "oqam" or "ofdm"
    signals: np.ndarray  # scaled preamble per transmit antenna
    n_pre: int
    symbols: list
    estimate: Callable[[np.ndarray], CfrEstimate]
    scale: float
    meta: dict = field(default_factory=dict)


def _family_for(method: str, n_tx: int) -> Family:
    if method == "sparse":
        return Family.MIMO_SPARSE
    if method == "pop" and n_tx > 1:
        return Family.MIMO_POP
    return Family(method)


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n) - 1).bit_length()


def prepare_scheme(method: str, cfg: ExperimentConfig, filt: PrototypeFilter,
                   pdp: PowerDelayProfile) -> Scheme:
    M, nt, nr = cfg.M, cfg.n_tx, cfg.n_rx
    if method == "cp-ofdm":
        return _prepare_ofdm(cfg, pdp)
    table = closed_form_weights(filt)
    fam = _family_for(method, nt)
    L_h = next_pow2(pdp.L_h) if fam is Family.MIMO_SPARSE else None
    spec = PreambleSpec(fam, M, n_tx=nt, n_rx=nr, seed=cfg.preamble_seed, L_h=L_h)
    spec = spec.with_epsilon_of(table)
    try:
        frames = generate(spec)
    except ParameterError as exc:
        raise ConfigError(f"{method}: {exc}") from exc
    alpha = normalize_power(frames, filt, cfg.normalization, cfg.data_symbols, cfg.input_energy)
    frames = tuple(f.scaled(alpha) for f in frames)
    signals = np.stack([synthesize(f, filt) for f in frames])
    n_pre = frames[0].N
    centres = list(frames[0].meta.get("pilot_symbols", [1]))
    meta = {"family": fam.value}

    if fam in IAM_FAMILIES and nt == 1:
        c = pseudo_pilots(frames[0], table, centres[0])

        def est(Y, c=c, name=method):
            return iam_estimate(Y[:, :, 0].T, c, name)
    elif fam in IAM_FAMILIES or fam is Family.MIMO_IAM:
        # pseudo-pilot matrix from the generated preamble, all interference terms included
        C = np.stack([exact_pseudo_pilots(f, filt, centres) for f in frames], axis=1)

        def est(Y, C=C):
            return mimo_iam_estimate(np.transpose(Y, (1, 0, 2)), C)
    elif fam is Family.POP:
        d0 = frames[0].values[:, 0]

        def est(Y, d0=d0):
            return pop_estimate_from(Y, d0)
        centres = [0, 1]
    elif fam is Family.MIMO_POP:
        D = pop_matrices(spec) * alpha

        def est(Y, D=D):
            return mimo_pop_estimate(np.transpose(Y, (1, 0, 2)), D)
    elif fam is Family.MIMO_SPARSE:
        N, starts, D = sparse_layout(spec)
        C, rows = sparse_system(M, L_h, nr, N, starts, D, alpha)
        pinv = np.linalg.pinv(C)
        meta.update(L_h=L_h, spacing=N)

        def est(Y, pinv=pinv, rows=rows):
            h = pinv @ Y[:, rows, 0].T.ravel()
            taps = h.reshape(nt, L_h, nr).transpose(2, 0, 1)
            return CfrEstimate(np.moveaxis(np.fft.fft(taps, n=M, axis=-1), -1, 0), "sparse")
    else:  # ICM families
        frame = frames[0]
        centres = centres[:1]

        def est(Y, frame=frame):
            return icm_estimate(Y[:, :, 0].T, frame, table)
    return Scheme(method, "oqam", signals, n_pre, centres, est, alpha, meta)


def pop_estimate_from(Y, d0) -> CfrEstimate:
    return pop_estimate(Y[:, :, 0].T, Y[:, :, 1].T, d0)


def _prepare_ofdm(cfg: ExperimentConfig, pdp: PowerDelayProfile) -> Scheme:
    cp = pdp.L_h - 1
    pre = cpofdm.make_preamble(cfg.M, cfg.n_tx, cp, seed=cfg.preamble_seed)
    sig = np.stack([cpofdm.ofdm_modulate(pre.symbols(i), cp) for i in range(cfg.n_tx)])
    p = np.mean(np.abs(sig) ** 2)
    alpha = float(np.sqrt(1.0 / p))
    scaled = replace(pre, x=pre.x * alpha)

    def est(Y, pre=scaled):
        return cpofdm.ofdm_ls_estimate(np.transpose(Y, (1, 0, 2)), pre)
    return Scheme("cp-ofdm", "ofdm", sig * alpha, cfg.n_tx, list(range(cfg.n_tx)), est, alpha,
                  {"cp_len": cp})


# --------------------------------------------------------------------------- sweep


@dataclass
class SweepResult:
    config: ExperimentConfig
    nmse: np.ndarray  # (methods, snr, trials), NaN where a trial failed
    excluded: np.ndarray  # (methods, snr) excluded subcarriers summed over trials
    scales: dict
    papr: dict = field(default_factory=dict)

    def _idx(self, method):
        return self.config.methods.index(method)

    def mean(self, method) -> np.ndarray:
        return np.nanmean(self.nmse[self._idx(method)], axis=-1)

    def stderr(self, method) -> np.ndarray:
        x = self.nmse[self._idx(method)]
        n = np.sum(np.isfinite(x), axis=-1)
        sd = np.nanstd(x, axis=-1, ddof=1) if x.shape[-1] > 1 else np.zeros(x.shape[0])
        return sd / np.sqrt(np.maximum(n, 1))

    def rows(self) -> list:
        out = []
        for i, m in enumerate(self.config.methods):
            mean, se = self.mean(m), self.stderr(m)
            counts = np.sum(np.isfinite(self.nmse[i]), axis=-1)
            for k, snr in enumerate(self.config.snr_db):
                out.append({"method": m, "snr_db": snr, "nmse_mean": float(mean[k]),
                            "nmse_stderr": float(se[k]), "trials": int(counts[k]),
                            "excluded": int(self.excluded[i, k])})
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "snr_db", "nmse_mean", "nmse_stderr", "trials", "excluded"])
            for r in self.rows():
                w.writerow([r["method"], repr(r["snr_db"]), repr(r["nmse_mean"]),
                            repr(r["nmse_stderr"]), r["trials"], r["excluded"]])

    def manifest(self) -> dict:
        return {"config": self.config.to_dict(), "scales": self.scales,
                "seed_derivation": "SeedSequence([seed, trial]).spawn(3) -> channel, data, noise",
                "papr": {k: v.papr for k, v in self.papr.items()}}

    def write_manifest(self, path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=2, sort_keys=True))


def trial_streams(seed: int, trial: int):
    """Independent generators for channel, data and noise of one trial."""
    ss = np.random.SeedSequence([int(seed), int(trial)])
    return [np.random.default_rng(s) for s in ss.spawn(3)]


class _Runner:
    """Holds the prepared schemes; callable on a chunk of trial indices."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.filt = design_prototype(cfg.M, cfg.K)
        self.pdp = get_profile(cfg.profile, cfg.sample_rate_hz)
        self.schemes = [prepare_scheme(m, cfg, self.filt, self.pdp) for m in cfg.methods]
        sigma2 = 10.0 ** (-np.asarray(cfg.snr_db) / 10.0)
        self.sigma = np.sqrt(sigma2)
        self.noise_len = max(s.signals.shape[1] for s in self.schemes) + \
            cfg.data_symbols * cfg.M // 2 + self.filt.length + self.pdp.L_h

    def _data_signal(self, rng) -> np.ndarray:
        cfg, filt = self.cfg, self.filt
        if cfg.data_symbols == 0:
            return np.zeros((cfg.n_tx, 0), dtype=complex)
        return np.stack([synthesize(random_qpsk_frame(cfg.M, cfg.data_symbols, rng), filt)
                         for _ in range(cfg.n_tx)])

    def _received(self, sch: Scheme, ch, data, noise):
        cfg, filt = self.cfg, self.filt
        if sch.kind == "ofdm":
            tx = sch.signals
            rc = convolve(tx, ch)
            T, cp = sch.n_pre, sch.meta["cp_len"]

            def demod(r):
                return cpofdm.ofdm_demodulate(r, cfg.M, T, cp)
        else:
            off = sch.n_pre * cfg.M // 2
            length = max(sch.signals.shape[1], off + data.shape[1])
            tx = np.zeros((cfg.n_tx, length), dtype=complex)
            tx[:, :sch.signals.shape[1]] += sch.signals
            tx[:, off:off + data.shape[1]] += data
            rc = convolve(tx, ch)
            n_sym = sch.n_pre

            def demod(r):
                return analyze(r, filt, n_sym, sch.symbols)
        yc = np.stack([demod(r) for r in rc])
        yn = np.stack([demod(noise[j, :rc.shape[1]]) for j in range(cfg.n_rx)])
        return yc, yn

    def __call__(self, trials):
        cfg = self.cfg
        n_m, n_s = len(self.schemes), len(cfg.snr_db)
        res = np.full((len(trials), n_m, n_s), np.nan)
        exc = np.zeros((len(trials), n_m, n_s), dtype=np.int64)
        for t_i, trial in enumerate(trials):
            rng_ch, rng_data, rng_noise = trial_streams(cfg.seed, trial)
            ch = realize(self.pdp, cfg.n_tx, cfg.n_rx, cfg.rho_t, cfg.rho_r, rng_ch)
            H = ch.cfr(cfg.M)
            data = self._data_signal(rng_data)
            noise = unit_noise(cfg.n_rx, self.noise_len, rng_noise)
            for m_i, sch in enumerate(self.schemes):
                yc, yn = self._received(sch, ch, data, noise)
                for k, sig in enumerate(self.sigma):
                    try:
                        e = sch.estimate(yc + sig * yn)
                        res[t_i, m_i, k] = nmse(H, e)
                        exc[t_i, m_i, k] = e.excluded
                    except (DegeneratePilotError, ParameterError):
                        exc[t_i, m_i, k] = cfg.M
        return res, exc


_WORKER_RUNNER = {}


def _run_chunk(cfg: ExperimentConfig, trials):
    # estimators are closures, so each worker process builds its own runner
    runner = _WORKER_RUNNER.get(cfg)
    if runner is None:
        runner = _WORKER_RUNNER[cfg] = _Runner(cfg)
    return runner(trials)


def run_sweep(cfg: ExperimentConfig, with_papr: bool = True) -> SweepResult:
    """Run all trials and aggregate; bit-identical for identical configs."""
    runner = _Runner(cfg)
    trials = list(range(cfg.trials))
    if cfg.workers > 1:
        chunks = [trials[i::cfg.workers] for i in range(cfg.workers)]
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, [cfg] * len(chunks), chunks))
        res = np.empty((cfg.trials, len(cfg.methods), len(cfg.snr_db)))
        exc = np.empty(res.shape, dtype=np.int64)
        for idx, (r, e) in zip(chunks, parts):
            res[idx], exc[idx] = r, e
    else:
        res, exc = runner(trials)
    papr = {}
    if with_papr:
        for sch in runner.schemes:
            papr[sch.name] = papr_profile(sch.signals[0])
    return SweepResult(cfg, np.moveaxis(res, 0, -1), exc.sum(axis=0),
                       {s.name: s.scale for s in runner.schemes}, papr)


def write_papr_csv(profiles: dict, path) -> None:
    """Long-format ``method, sample_index, power`` table."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "sample_index", "power"])
        for name, prof in profiles.items():
            for i, v in enumerate(prof.power):
                w.writerow([name, i, repr(float(v))])


# --------------------------------------------------------------------------- curve summaries


def floor_onset(snr_db, nmse, fraction: float = 0.5) -> float:
    """First grid SNR after which the curve falls by less than ``fraction`` of the SNR step.

    A noise-limited LS estimate drops 1 dB per dB of SNR; a curve flattening
    into an error floor drops less. Returns ``inf`` when no such point exists.
    """
    snr = np.asarray(snr_db, dtype=float)
    db = 10.0 * np.log10(np.asarray(nmse, dtype=float))
    for k in range(snr.size - 1):
        if db[k] - db[k + 1] < fraction * (snr[k + 1] - snr[k]):
            return float(snr[k])
    return float("inf")


def crossover_snr(result: SweepResult, reference: str = "cp-ofdm", others=None) -> float:
    """Lowest grid SNR at which ``reference`` beats every method in ``others``."""
    others = others or [m for m in result.config.methods if m != reference]
    ref = result.mean(reference)
    best = np.min([result.mean(m) for m in others], axis=0)
    hit = np.flatnonzero(ref < best)
    return float(result.config.snr_db[hit[0]]) if hit.size else float("inf")
