"""Seeded Monte Carlo experiment runner and result emission.

Frames are the unit of work and of parallelism. Every frame derives its
randomness from SeedSequence([master_seed, frame_index]) split into three
child streams (payload bits, channel draw, noise), so a sweep is
reproducible bit for bit at any worker count: per-frame error counts are
integers and summation commutes.

Common random numbers across the Eb/N0 grid: each frame synthesizes its
waveform, runs it through the channel and the matched filter once, and
matched-filters one unit-variance noise stream once; the grid points then
reuse both via y = signal + sigma * noise. That makes BER curves smooth in
Eb/N0 at a fraction of the naive cost.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import baseline as bl
from . import channel as ch
from . import rxchain as rx
from . import theory as th
from . import txchain as tx
from .waveform import WaveformParams, synth_waveform

SIM_METHODS = ("chaotic-opt", "chaotic-subopt", "chaotic-zero",
               "rrc-mmse", "rrc-noeq")
THEORY_METHODS = ("theory-opt", "theory-subopt")
METHODS = SIM_METHODS + THEORY_METHODS

CSV_COLUMNS = ("method", "channel", "ebn0_db", "bits", "errors", "ber", "ci95")

# quasi-static timing: frames are delayed by a random whole-symbol pad the
# receiver has to find again by correlation
_PAD_SYMBOLS = (2, 20)
_SYNC_GRID_STEPS = (-2, -1, 0, 1)
_MAX_DELAY = 3
_LAG_BACK = 6


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a method on a channel preset over an Eb/N0 grid.

    trials is the static-mode stop rule (total payload bits per grid
    point, rounded up to whole frames); frames is the quasi-static stop
    rule (frames per grid point). Both are carried so one config can be
    reused across modes.
    """

    method: str
    channel: str
    ebn0_grid: tuple
    n_training_bits: int = 256
    n_data_bits: int = 3840
    trials: int = 500000
    frames: int = 500
    master_seed: int = 20260822
    n_c: int = 8
    genie: bool = False
    failure_policy: str = "pessimistic"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(
                f"unknown method {self.method!r}; known: {', '.join(METHODS)}")
        ch.get_preset(self.channel)
        grid = tuple(float(g) for g in self.ebn0_grid)
        if not grid:
            raise ValueError("ebn0_grid must not be empty")
        if not all(np.isfinite(grid)):
            raise ValueError("ebn0_grid values must be finite")
        object.__setattr__(self, "ebn0_grid", grid)
        for name in ("n_training_bits", "n_data_bits", "trials", "frames"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v > 0):
                raise ValueError(f"{name} must be a positive integer, got {v}")
        if self.n_training_bits % 2 or self.n_data_bits % 2:
            raise ValueError("QPSK framing needs even bit counts")
        if not (isinstance(self.n_c, (int, np.integer)) and self.n_c >= 2):
            raise ValueError(f"n_c must be an integer >= 2, got {self.n_c}")
        if self.genie and self.method != "chaotic-opt":
            raise ValueError("genie decoding exists only for chaotic-opt")
        if self.failure_policy not in ("pessimistic", "separate"):
            raise ValueError(
                f"failure_policy must be pessimistic or separate, got {self.failure_policy!r}")


@dataclass(frozen=True)
class BerRecord:
    """One measured (or analytic) point of a BER curve.

    Simulation records carry the raw counts and ber = errors / bits with
    its 95% binomial half-width. Analytic records (theory curves) have no
    counts; they store bits = errors = 0, the model value in ber, and a
    zero half-width.
    """

    method: str
    channel: str
    ebn0_db: float
    bits: int
    errors: int
    ber: float
    ci95: float

    def __post_init__(self):
        if self.bits < 0 or not 0 <= self.errors <= max(self.bits, 0):
            raise ValueError("need 0 <= errors <= bits")
        if self.bits > 0:
            p = self.errors / self.bits
            if self.ber != p:
                raise ValueError(f"ber {self.ber} != errors/bits {p}")
            if self.ci95 != _ci95(self.bits, self.errors):
                raise ValueError("ci95 inconsistent with the counts")
        else:
            if self.errors != 0 or self.ci95 != 0.0:
                raise ValueError("analytic records carry zero counts and ci95")
            if not 0.0 <= self.ber <= 1.0:
                raise ValueError(f"ber must be a probability, got {self.ber}")

    @classmethod
    def from_counts(cls, method: str, channel: str, ebn0_db: float,
                    bits: int, errors: int) -> "BerRecord":
        bits = int(bits)
        errors = int(errors)
        return cls(method, channel, float(ebn0_db), bits, errors,
                   errors / bits, _ci95(bits, errors))

    @classmethod
    def analytic(cls, method: str, channel: str, ebn0_db: float,
                 ber: float) -> "BerRecord":
        return cls(method, channel, float(ebn0_db), 0, 0, float(ber), 0.0)


def _ci95(bits: int, errors: int) -> float:
    p = errors / bits
    return 1.96 * math.sqrt(p * (1.0 - p) / bits)


@lru_cache(maxsize=None)
def waveform_energy_per_bit(family: str, n_c: int) -> float:
    """Expected sample-sum transmit energy per rail bit.

    Rail symbols are antipodal and independent, so the pulse cross terms
    average to zero and the expectation is exactly one pulse energy per
    symbol. Computing it from the pulse samples rather than a measured
    stream keeps the Eb/N0 axis free of Monte Carlo calibration error.
    """
    if family == "chaotic":
        kernel = rx.matched_filter_taps(n_c).kernel
        return float(np.dot(kernel, kernel))
    if family == "rrc":
        taps = bl.rrc_taps(bl.DEFAULT_ROLLOFF, bl.DEFAULT_SPAN, n_c).taps
        return float(np.dot(taps, taps))
    raise ValueError(f"unknown waveform family {family!r}")


def _family(method: str) -> str:
    return "chaotic" if method.startswith(("chaotic", "theory")) else "rrc"


def sigma_w_chaotic(sigma: float, n_c: int,
                    params: Optional[WaveformParams] = None) -> float:
    """Noise standard deviation at the chaotic matched-filter output, from
    the realized (truncated) receive kernel rather than the ideal one."""
    if params is None:
        params = WaveformParams()
    k = rx.matched_filter_taps(n_c, params).kernel
    return sigma * math.sqrt(float(np.dot(k, k))) / n_c


def _frame_streams(master_seed: int, frame_idx: int):
    ss = np.random.SeedSequence([master_seed, frame_idx])
    content, chan, noise = ss.spawn(3)
    return (np.random.default_rng(content), np.random.default_rng(chan),
            np.random.default_rng(noise))


# ---------------------------------------------------------------- static ---

class _StaticContext:
    """Per-worker immutable state for known-channel static sweeps."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.n_c = config.n_c
        self.preset = ch.get_preset(config.channel)
        if not isinstance(self.preset, ch.MultipathSpec):
            raise ValueError("static sweep needs a static channel preset")
        self.sigmas = np.array([
            ch.calibrate_noise(db, waveform_energy_per_bit(
                _family(config.method), config.n_c), config.n_c)
            for db in config.ebn0_grid])
        self.n_data_sym = config.n_data_bits // 2
        self.estimate = rx.ChannelEstimate(
            self.preset.delays, np.array(self.preset.gains), 0.0)
        if _family(config.method) == "chaotic":
            self.params = WaveformParams()
            self.rparams = th.ResponseParams()
            self.mft = rx.matched_filter_taps(config.n_c, self.params)
            self.tail = np.resize(np.array([1.0, -1.0]), self.params.n_p)
            self.offset = 0
        else:
            self.filt = bl.rrc_taps(bl.DEFAULT_ROLLOFF, bl.DEFAULT_SPAN,
                                    config.n_c)
            self.offset = self.filt.span * config.n_c
            # channel and noise level are known, so the equalizer of each
            # grid point is fixed across frames
            self.eqs = [
                bl.design_mmse(rx.ChannelEstimate(
                    self.preset.delays, np.array(self.preset.gains),
                    float(s * s)))
                for s in self.sigmas]

    def rail_to_symbols(self, rail, rng_noise):
        """Shape, propagate, matched-filter one rail; return the clean
        symbol-instant samples and the unit-noise symbol samples."""
        n_c = self.n_c
        if _family(self.config.method) == "chaotic":
            x = synth_waveform(np.concatenate([rail, self.tail]), n_c,
                               self.params, strict=False)
            v = ch.propagate(x, self.preset, n_c)
            y0 = rx.matched_filter(v, self.mft)
            w = rng_noise.standard_normal(v.size)
            w0 = rx.matched_filter(w, self.mft)
        else:
            x = bl.rrc_shape(rail, n_c, filt=self.filt)
            v = ch.propagate(x, self.preset, n_c)
            y0 = bl.rrc_matched_filter(v, self.filt)
            w = rng_noise.standard_normal(v.size)
            w0 = bl.rrc_matched_filter(w, self.filt)
        n_sym = rail.size
        s0 = rx.sample_symbols(y0, self.offset, n_c, n_sym)
        sw = rx.sample_symbols(w0, self.offset, n_c, n_sym)
        return s0, sw


_CTX: Optional[object] = None


def _init_static(config: ExperimentConfig):
    global _CTX
    _CTX = _StaticContext(config)


def _static_frame(frame_idx: int) -> Tuple[int, np.ndarray]:
    ctx: _StaticContext = _CTX
    cfg = ctx.config
    rng_content, _, rng_noise = _frame_streams(cfg.master_seed, frame_idx)
    bits = rng_content.integers(0, 2, cfg.n_data_bits)
    i_syms, q_syms = tx.qpsk_map(bits)
    rails = []
    for rail in (i_syms, q_syms):
        rails.append(ctx.rail_to_symbols(rail, rng_noise))
    errors = np.zeros(len(cfg.ebn0_grid), dtype=np.int64)
    for p, sigma in enumerate(ctx.sigmas):
        # error rate is counted per rail decision: each rail carries one
        # antipodal bit per symbol, which is what the closed-form error
        # probabilities describe
        n_err = 0
        for rail_syms, (s0, sw) in zip((i_syms, q_syms), rails):
            y = s0 + sigma * sw
            dec = _decode_static(ctx, p, y, rail_syms)
            n_err += int(np.count_nonzero(dec != rail_syms))
        errors[p] = n_err
    return frame_idx, errors


def _decode_static(ctx: _StaticContext, point: int, y: np.ndarray,
                   true_rail: np.ndarray) -> np.ndarray:
    method = ctx.config.method
    if method == "chaotic-opt":
        # genie: thresholds from the true symbols including the shaping
        # tail, so every ISI term is cancelled exactly
        full = np.concatenate([true_rail, ctx.tail])
        theta = rx.threshold_optimal(full, ctx.estimate, ctx.rparams)
        return rx.decide(y, theta[: y.size])
    if method == "chaotic-subopt":
        return rx.decode_suboptimal(y, np.empty(0), ctx.estimate,
                                    ctx.rparams)
    if method == "chaotic-zero":
        return rx.decide(y, 0.0)
    if method == "rrc-mmse":
        return rx.decide(bl.apply_equalizer(y, ctx.eqs[point]), 0.0)
    if method == "rrc-noeq":
        return rx.decide(y, 0.0)
    raise ValueError(f"method {method!r} is not simulated")


def run_static_sweep(config: ExperimentConfig, jobs: int = 1) -> List[BerRecord]:
    """Known-channel Monte Carlo over the Eb/N0 grid.

    The receiver is fed the true channel parameters (the estimator is
    bypassed) and frames run until at least ``trials`` payload bits per
    grid point. chaotic-opt requires genie=True since the exact threshold
    needs the transmitted symbols themselves.
    """
    if config.method not in SIM_METHODS:
        raise ValueError(f"run_static_sweep cannot run {config.method!r}")
    if config.method == "chaotic-opt" and not config.genie:
        raise ValueError("chaotic-opt needs genie=True: the optimal "
                         "threshold uses the transmitted symbols")
    n_frames = -(-config.trials // config.n_data_bits)
    per_point = _map_frames(_static_frame, _init_static, config,
                            range(n_frames), jobs)
    errors = np.zeros(len(config.ebn0_grid), dtype=np.int64)
    for _, e in per_point:
        errors += e
    total_bits = n_frames * config.n_data_bits
    return [BerRecord.from_counts(config.method, config.channel, db,
                                  total_bits, int(errors[p]))
            for p, db in enumerate(config.ebn0_grid)]


# ---------------------------------------------------------------- quasi ----

class _QuasiContext:
    """Per-worker immutable state for estimated-channel quasi sweeps."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        n_c = self.n_c = config.n_c
        model = ch.get_preset(config.channel)
        if not isinstance(model, ch.QuasiStaticModel):
            raise ValueError("quasi sweep needs a quasi-static channel preset")
        self.model = model
        self.layout = tx.FrameLayout(config.n_training_bits, config.n_data_bits)
        train_bits = tx.gen_training(self.layout)
        self.t_i, self.t_q = tx.qpsk_map(train_bits)
        self.n_train_sym = self.t_i.size
        self.n_sym = self.layout.total // 2
        self.sigmas = np.array([
            ch.calibrate_noise(db, waveform_energy_per_bit(
                _family(config.method), n_c), n_c)
            for db in config.ebn0_grid])

        d_i = rx.build_ls_design(self.t_i, _MAX_DELAY, _LAG_BACK)
        d_q = rx.build_ls_design(self.t_q, _MAX_DELAY, _LAG_BACK)
        self.rows = d_i.rows
        self.lags = d_i.lags
        self.design2 = np.vstack([d_i.design, d_q.design])
        self.pinv2 = np.linalg.pinv(self.design2)
        self.cand = np.arange(_MAX_DELAY + 1, dtype=float)

        chaotic = _family(config.method) == "chaotic"
        if chaotic:
            self.params = WaveformParams()
            self.rparams = th.ResponseParams()
            self.mft = rx.matched_filter_taps(n_c, self.params)
            self.tail = np.resize(np.array([1.0, -1.0]), self.params.n_p)
            self.template = rx.matched_filter(
                synth_waveform(self.t_i, n_c, self.params, strict=False),
                self.mft)[: self.n_train_sym * n_c]
            self.lead = 0
            G = th.response_r(self.lags[:, None].astype(float),
                              tau=self.cand[None, :])
        else:
            self.filt = bl.rrc_taps(bl.DEFAULT_ROLLOFF, bl.DEFAULT_SPAN, n_c)
            self.template = bl.rrc_sync_template(self.t_i, self.filt)
            self.lead = self.filt.span * n_c
            rel = self.lags[:, None] - self.cand[None, :].astype(int)
            reach = int(np.max(np.abs(rel)))
            G = self.filt.symbol_cascade(reach)[rel.astype(int) + reach]
        self.G = G
        B = self.design2 @ G
        self.proj = B @ np.linalg.pinv(B)
        # delay candidates the canonical offset rule relies on: an offset
        # early by one symbol shows up as every path delay shifted up by
        # one, which still fits; an offset late by one needs delay -1 and
        # leaves the training energy unexplained
        self.search_len = ((_PAD_SYMBOLS[1] + 4) * n_c + self.lead
                           + self.template.size)

    def shape_rail(self, rail):
        if _family(self.config.method) == "chaotic":
            return synth_waveform(np.concatenate([rail, self.tail]),
                                  self.n_c, self.params, strict=False)
        return bl.rrc_shape(rail, self.n_c, filt=self.filt)

    def mf(self, stream):
        if _family(self.config.method) == "chaotic":
            return rx.matched_filter(stream, self.mft)
        return bl.rrc_matched_filter(stream, self.filt)


def _init_quasi(config: ExperimentConfig):
    global _CTX
    _CTX = _QuasiContext(config)


def _pooled_obs(ctx: _QuasiContext, y_i, y_q, offset):
    n, n_c = ctx.n_train_sym, ctx.n_c
    end = offset + n * n_c
    if offset < 0 or end > y_i.size:
        return None
    oi = y_i[offset:end:n_c][ctx.rows]
    oq = y_q[offset:end:n_c][ctx.rows]
    return np.concatenate([oi, oq])


def _sync_offset(ctx: _QuasiContext, y_i, y_q):
    """Coarse correlation peak, snapped to the symbol grid and refined by
    the pooled path-model residual; returns (offset, obs) or None.

    Among grid candidates whose residual is within a factor two of the
    best, the largest offset wins (see _QuasiContext notes). The winner
    must still explain at least half of the observed training energy.
    """
    sl = slice(0, min(ctx.search_len, y_i.size))
    coarse = rx.frame_sync(y_i[sl], ctx.template).offset
    base = int(round(coarse / ctx.n_c)) * ctx.n_c
    results = {}
    for step in _SYNC_GRID_STEPS:
        o = base + step * ctx.n_c
        obs = _pooled_obs(ctx, y_i, y_q, o)
        if obs is None:
            continue
        resid = obs - ctx.proj @ obs
        results[o] = (float(np.dot(resid, resid)), obs)
    if not results:
        return None
    best = min(v[0] for v in results.values())
    good = [o for o, v in results.items() if v[0] <= 2.0 * best + 1e-12]
    o = max(good)
    res, obs = results[o]
    if res > 0.5 * float(np.dot(obs, obs)):
        return None
    return o, obs


def _estimate_pooled(ctx: _QuasiContext, obs):
    """Two-stage LS on the stacked rails at a fixed offset."""
    r_hat = ctx.pinv2 @ obs
    resid = obs - ctx.design2 @ r_hat
    dof = obs.size - ctx.lags.size
    noise_var = float(np.dot(resid, resid)) / max(dof, 1)
    alpha, *_ = np.linalg.lstsq(ctx.G, r_hat, rcond=None)
    keep = np.abs(alpha) >= 0.05 * np.max(np.abs(alpha))
    cand = ctx.cand
    if not np.all(keep):
        alpha, *_ = np.linalg.lstsq(ctx.G[:, keep], r_hat, rcond=None)
        cand = cand[keep]
    return rx.ChannelEstimate(tuple(cand), alpha, noise_var)


def _quasi_frame(frame_idx: int):
    ctx: _QuasiContext = _CTX
    cfg = ctx.config
    n_c = ctx.n_c
    rng_content, rng_chan, rng_noise = _frame_streams(cfg.master_seed, frame_idx)
    bits = rng_content.integers(0, 2, cfg.n_data_bits)
    frame = tx.build_frame(bits, ctx.layout)
    gamma = ch.draw_gamma(ctx.model, rng_chan)
    pad = int(rng_chan.integers(_PAD_SYMBOLS[0], _PAD_SYMBOLS[1] + 1)) * n_c
    spec = ch.MultipathSpec.from_gamma(gamma, ctx.model.delays)
    true_offset = pad + ctx.lead

    streams = []
    for rail in (frame.i_syms, frame.q_syms):
        x = ctx.shape_rail(rail)
        v = ch.propagate(x, spec, n_c)
        sig = np.concatenate([np.zeros(pad), v])
        streams.append((ctx.mf(sig),
                        ctx.mf(rng_noise.standard_normal(sig.size))))

    n_points = len(cfg.ebn0_grid)
    errors = np.zeros(n_points, dtype=np.int64)
    counted = np.zeros(n_points, dtype=np.int64)
    failures = np.zeros(n_points, dtype=np.int64)
    rms = np.full(n_points, np.nan)
    true_dense = np.zeros(ctx.cand.size)
    for d, g in zip(spec.delays, spec.gains):
        true_dense[int(d)] = g

    for p, sigma in enumerate(ctx.sigmas):
        y_i = streams[0][0] + sigma * streams[0][1]
        y_q = streams[1][0] + sigma * streams[1][1]
        picked = _sync_offset(ctx, y_i, y_q)
        est = None
        offset_ok = False
        if picked is not None:
            offset, obs = picked
            try:
                est = _estimate_pooled(ctx, obs)
            except np.linalg.LinAlgError:
                est = None
            offset_ok = offset == true_offset
        if est is None or not offset_ok:
            failures[p] = 1
            if cfg.failure_policy == "pessimistic":
                errors[p] = cfg.n_data_bits
                counted[p] = cfg.n_data_bits
            continue
        dense = np.zeros(ctx.cand.size)
        for d, g in zip(est.delays, est.gains):
            dense[int(d)] = g
        rms[p] = float(np.sqrt(np.mean((dense - true_dense) ** 2)))
        eq = None
        if cfg.method == "rrc-mmse":
            eq = bl.design_mmse(est)
        decs = []
        for train, (s_mf, w_mf) in zip((ctx.t_i, ctx.t_q), streams):
            y = rx.sample_symbols(s_mf + sigma * w_mf, offset, n_c, ctx.n_sym)
            if eq is not None:
                decs.append(rx.decide(bl.apply_equalizer(y, eq), 0.0))
            else:
                decs.append(rx.decode_suboptimal(y, train, est, ctx.rparams))
        # rail-level error counting, matching the closed-form convention
        nt = ctx.n_train_sym
        n_err = 0
        for dec, ref in zip(decs, (frame.i_syms, frame.q_syms)):
            n_err += int(np.count_nonzero(dec[nt:] != ref[nt:]))
        errors[p] = n_err
        counted[p] = cfg.n_data_bits
    return frame_idx, errors, counted, failures, rms


def run_quasi_static(config: ExperimentConfig, jobs: int = 1,
                     stats: Optional[dict] = None) -> List[BerRecord]:
    """Estimated-channel Monte Carlo: per frame, draw gamma, delay the
    frame by a random whole-symbol pad, re-acquire timing by correlation,
    LS-estimate the channel from the training block, decode.

    Methods: chaotic-subopt (decision feedback) or rrc-mmse. Frames that
    fail sync or estimation are counted with every payload bit in error
    under the default pessimistic policy, or excluded from the counts (and
    reported) under failure_policy="separate". Pass a dict as ``stats`` to
    receive per-point failure counts and estimation RMS summaries.
    """
    if config.method not in ("chaotic-subopt", "rrc-mmse"):
        raise ValueError(
            f"run_quasi_static supports chaotic-subopt and rrc-mmse, "
            f"not {config.method!r}")
    if config.genie:
        raise ValueError("genie decoding is incompatible with channel estimation")
    results = _map_frames(_quasi_frame, _init_quasi, config,
                          range(config.frames), jobs)
    n_points = len(config.ebn0_grid)
    errors = np.zeros(n_points, dtype=np.int64)
    counted = np.zeros(n_points, dtype=np.int64)
    failures = np.zeros(n_points, dtype=np.int64)
    rms_all = np.full((config.frames, n_points), np.nan)
    for frame_idx, e, c, f, rms in results:
        errors += e
        counted += c
        failures += f
        rms_all[frame_idx] = rms
    if stats is not None:
        per_point = []
        for p, db in enumerate(config.ebn0_grid):
            col = rms_all[:, p]
            ok = col[np.isfinite(col)]
            per_point.append({
                "ebn0_db": float(db),
                "frames": config.frames,
                "failed_frames": int(failures[p]),
                "excluded_bits": int(config.frames * config.n_data_bits
                                     - counted[p]),
                "est_rms_mean": float(np.mean(ok)) if ok.size else float("nan"),
                "est_rms_p90": float(np.percentile(ok, 90.0)) if ok.size
                               else float("nan"),
                "est_rms_max": float(np.max(ok)) if ok.size else float("nan"),
            })
        stats["per_point"] = per_point
        stats["failure_policy"] = config.failure_policy
    records = []
    for p, db in enumerate(config.ebn0_grid):
        if counted[p] == 0:
            raise RuntimeError(
                f"every frame failed sync/estimation at {db} dB; "
                "no bits were counted")
        records.append(BerRecord.from_counts(
            config.method, config.channel, db, int(counted[p]),
            int(errors[p])))
    return records


# ---------------------------------------------------------------- theory ---

def run_theory_curves(config: ExperimentConfig) -> List[BerRecord]:
    """Closed-form BER over the grid, with sigma_W calibrated exactly the
    way the simulation calibrates its noise (measured waveform energy and
    measured receive-kernel energy)."""
    if config.method not in THEORY_METHODS:
        raise ValueError(f"run_theory_curves cannot run {config.method!r}")
    preset = ch.get_preset(config.channel)
    if not isinstance(preset, ch.MultipathSpec):
        raise ValueError("theory curves need a static channel preset")
    eb = waveform_energy_per_bit("chaotic", config.n_c)
    P = th.compute_signal_power(preset)
    records = []
    for db in config.ebn0_grid:
        sigma = ch.calibrate_noise(db, eb, config.n_c)
        sw = sigma_w_chaotic(sigma, config.n_c)
        if config.method == "theory-opt":
            ber = th.ber_optimal(P, sw)
        else:
            ber = th.ber_suboptimal(preset, sw)
        records.append(BerRecord.analytic(config.method, config.channel,
                                          db, ber))
    return records


# ---------------------------------------------------------------- output ---

def emit_csv(records: Sequence[BerRecord], path: str) -> str:
    """Newline-terminated CSV in the fixed column order."""
    if not records:
        raise ValueError("no records to emit")
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        lines.append(",".join([r.method, r.channel, repr(r.ebn0_db),
                               str(r.bits), str(r.errors), repr(r.ber),
                               repr(r.ci95)]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def parse_csv(path: str) -> List[BerRecord]:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if not lines or lines[0] != ",".join(CSV_COLUMNS):
        raise ValueError(f"{path} does not start with the expected header")
    records = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise ValueError(f"malformed CSV row: {ln!r}")
        records.append(BerRecord(parts[0], parts[1], float(parts[2]),
                                 int(parts[3]), int(parts[4]),
                                 float(parts[5]), float(parts[6])))
    return records


def emit_plotdata(records: Sequence[BerRecord], out_dir: str) -> List[str]:
    """One whitespace-separated file per method, rows sorted by ebn0_db."""
    if not records:
        raise ValueError("no records to emit")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    methods = sorted({r.method for r in records})
    for method in methods:
        rows = sorted((r for r in records if r.method == method),
                      key=lambda r: (r.ebn0_db, r.channel))
        path = os.path.join(out_dir, f"{method}.dat")
        with open(path, "w") as fh:
            fh.write("# ebn0_db ber ci95 bits errors channel\n")
            for r in rows:
                fh.write(f"{r.ebn0_db!r} {r.ber!r} {r.ci95!r} "
                         f"{r.bits} {r.errors} {r.channel}\n")
        paths.append(path)
    return paths


def emit_report(records: Sequence[BerRecord], format: str,
                out: str) -> List[str]:
    """Write records as 'csv' (out is the file path) or 'plotdata' (out is
    a directory; one file per method)."""
    if format == "csv":
        return [emit_csv(records, out)]
    if format == "plotdata":
        return emit_plotdata(records, out)
    raise ValueError(f"unknown report format {format!r}")


# ---------------------------------------------------------------- bench ----

def bench_stages(config: ExperimentConfig, n_frames: int = 3) -> Dict[str, float]:
    """Rough per-frame wall-clock of the pipeline stages, in milliseconds.

    The first frame runs untimed so one-time costs (imports, JIT warm-up,
    cached tables) do not pollute the steady-state numbers.
    """
    chaotic = _family(config.method) == "chaotic"
    is_static = isinstance(ch.get_preset(config.channel), ch.MultipathSpec)
    times: Dict[str, float] = {}
    warm = True

    def clock(name, fn, *args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        if not warm:
            times[name] = times.get(name, 0.0) + (time.perf_counter() - t0)
        return out

    if is_static:
        ctx = _StaticContext(config)
        spec = ctx.preset
    else:
        ctx = _QuasiContext(config)
        spec = ch.MultipathSpec.from_gamma(0.6, ctx.model.delays)
    for frame_idx in range(n_frames + 1):
        warm = frame_idx == 0
        rng_content, _, rng_noise = _frame_streams(config.master_seed, frame_idx)
        bits = rng_content.integers(0, 2, config.n_data_bits)
        i_syms, _ = tx.qpsk_map(bits)
        if is_static:
            if chaotic:
                x = clock("shape", synth_waveform,
                          np.concatenate([i_syms, ctx.tail]), config.n_c,
                          ctx.params, strict=False)
            else:
                x = clock("shape", bl.rrc_shape, i_syms, config.n_c,
                          filt=ctx.filt)
            v = clock("channel", ch.propagate, x, spec, config.n_c)
            if chaotic:
                y = clock("matched_filter", rx.matched_filter, v, ctx.mft)
            else:
                y = clock("matched_filter", bl.rrc_matched_filter, v, ctx.filt)
            ys = rx.sample_symbols(y, ctx.offset, config.n_c, i_syms.size)
            clock("decode", _decode_static, ctx, 0,
                  ys + ctx.sigmas[0] * rng_noise.standard_normal(ys.size),
                  i_syms)
        else:
            frame = tx.build_frame(bits, ctx.layout)
            pad = np.zeros(5 * config.n_c)
            rails = []
            for rail in (frame.i_syms, frame.q_syms):
                x = clock("shape", ctx.shape_rail, rail)
                v = clock("channel", ch.propagate, x, spec, config.n_c)
                sig = np.concatenate([pad, v])
                y0 = clock("matched_filter", ctx.mf, sig)
                w0 = clock("matched_filter", ctx.mf,
                           rng_noise.standard_normal(sig.size))
                rails.append(y0 + ctx.sigmas[0] * w0)
            y_i, y_q = rails
            picked = clock("sync", _sync_offset, ctx, y_i, y_q)
            if picked is not None:
                est = clock("estimate", _estimate_pooled, ctx, picked[1])
                ys = rx.sample_symbols(y_i, picked[0], config.n_c, ctx.n_sym)
                if config.method == "rrc-mmse":
                    eq = bl.design_mmse(est)
                    clock("decode", bl.apply_equalizer, ys, eq)
                else:
                    clock("decode", rx.decode_suboptimal, ys, ctx.t_i, est,
                          ctx.rparams)
    return {k: 1000.0 * v / n_frames for k, v in times.items()}


def _map_frames(worker, initializer, config, frame_indices, jobs):
    frames = list(frame_indices)
    if jobs <= 1:
        initializer(config)
        return [worker(i) for i in frames]
    with ProcessPoolExecutor(max_workers=jobs, initializer=initializer,
                             initargs=(config,)) as pool:
        chunk = max(1, len(frames) // (4 * jobs))
        return list(pool.map(worker, frames, chunksize=chunk))
