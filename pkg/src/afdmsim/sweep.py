"""Seeded Monte-Carlo sweep engine, result schema and experiment recipes.

A sweep point runs blocks of {sample channel, realize link, draw CSI, detect
frames}; every block derives its generator from (seed, snr index, block
index), and block statistics are reduced in block order, so results are
identical for any worker count.  Rows follow the fixed CSV schema
snr_db, frames, bit_errors, ber_sim, ber_theory, ber_lower, mean_sinr_db.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .analysis import (lmmse_ber_approx, lmmse_ber_lower_bound,
                       union_bound_curve)
from .channel import (error_support_mask, estimation_support_mask,
                      sample_channel, velocity_to_kmax)
from .detectors import (MlCandidateTable, estimate_rv_covariance,
                        analytic_rv_covariance, inject_gain_csi_error,
                        inject_matrix_csi_error, lmmse_equalize)
from .hwi import HwiConfig, hwi_preset
from .link import realize_link, transmit_batch
from .modem import AfdmParams, Constellation


class ConfigError(ValueError):
    """Invalid sweep configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class SweepConfig:
    waveform: str = "afdm"
    n: int = 64
    m: int = 1
    j: int = 1
    p: int = 2
    constellation: str = "qpsk"
    snr_db_start: float = 0.0
    snr_db_stop: float = 20.0
    snr_db_step: float = 2.0
    velocity_kmh: float = 540.0
    k_max: float | None = None  # explicit Doppler budget overrides velocity
    k_nu: int = 2
    l_max: int | None = None  # default p - 1
    delta_f: float = 15e3
    f_c: float = 4e9
    doppler_model: str = "jakes-fractional"
    detector: str = "lmmse"
    csi_mode: str = "perfect"
    sigma_h2: float = 0.0
    csi_knowledge: str = "masked"  # masked: waveform's resolved support; full
    hwi: HwiConfig = field(default_factory=HwiConfig)
    max_frames: int = 200_000
    min_bit_errors: int = 200
    frames_per_link: int = 20
    rv_frames: int = 20_000
    rv_mode: str = "monte-carlo"
    theory: bool = True
    theory_links: int = 100
    pair_budget: int | None = None
    ml_cap: int = 1 << 20
    seed: int = 0

    # -- derived helpers ---------------------------------------------------

    def snr_grid(self) -> np.ndarray:
        if self.snr_db_step <= 0:
            grid = np.array([self.snr_db_start])
        else:
            grid = np.arange(self.snr_db_start,
                             self.snr_db_stop + 0.5 * self.snr_db_step,
                             self.snr_db_step)
        return grid

    def k_max_value(self) -> float:
        if self.k_max is not None:
            return float(self.k_max)
        return velocity_to_kmax(self.velocity_kmh, self.f_c, self.delta_f)

    def effective_l_max(self) -> int:
        return self.p - 1 if self.l_max is None else self.l_max

    def params(self) -> AfdmParams:
        return AfdmParams.create(
            self.n, k_max=self.k_max_value(), k_nu=self.k_nu,
            l_max=self.effective_l_max(), delta_f=self.delta_f, f_c=self.f_c,
            waveform=self.waveform)

    def constellation_obj(self) -> Constellation:
        return Constellation.make(self.constellation)

    def bits_per_frame(self) -> int:
        return self.m * self.n * self.constellation_obj().bits_per_symbol

    def validate(self):
        try:
            params = self.params()
            const = self.constellation_obj()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.snr_grid().size == 0:
            raise ConfigError("empty SNR grid")
        if self.waveform not in ("afdm", "ofdm"):
            raise ConfigError(f"unknown waveform {self.waveform!r}")
        if self.detector not in ("ml", "lmmse"):
            raise ConfigError(f"unknown detector {self.detector!r}")
        if self.csi_mode not in ("perfect", "gaussian-error"):
            raise ConfigError(f"unknown CSI mode {self.csi_mode!r}")
        if self.csi_mode == "perfect" and self.sigma_h2 != 0.0:
            raise ConfigError("perfect CSI implies sigma_h2 = 0")
        if self.csi_knowledge not in ("masked", "full"):
            raise ConfigError(f"unknown csi_knowledge {self.csi_knowledge!r}")
        if self.doppler_model not in ("jakes-fractional", "integer-only"):
            raise ConfigError(f"unknown doppler model {self.doppler_model!r}")
        if self.m < 1 or self.j < 1 or self.p < 1:
            raise ConfigError("m, j, p must be positive")
        if self.max_frames < 0 or self.min_bit_errors < 0 or self.frames_per_link < 1:
            raise ConfigError("invalid stopping parameters")
        if self.detector == "ml":
            hyp = math.log2(const.order) * self.n * self.m
            if hyp > math.log2(self.ml_cap):
                raise ConfigError(
                    f"ML search space |A|^(NM) = 2^{hyp:.0f} exceeds the cap {self.ml_cap}")
        return params


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    frames: int
    bit_errors: int
    ber_sim: float | None
    ber_theory: float | None
    ber_lower: float | None
    mean_sinr_db: float | None
    wall_time_s: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    config: dict
    seed: int
    version: str
    sampled_bound: bool = False


CSV_COLUMNS = ("snr_db", "frames", "bit_errors", "ber_sim", "ber_theory",
               "ber_lower", "mean_sinr_db")


# ---------------------------------------------------------------------------
# Per-block simulation
# ---------------------------------------------------------------------------

@dataclass
class _BlockStats:
    frames: int = 0
    bit_errors: int = 0
    pe_sum: float = 0.0
    pl_sum: float = 0.0
    sinr_sum: float = 0.0
    n_real: int = 0


def _block_rng(seed, snr_idx, block_idx):
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(0, snr_idx, block_idx)))


def _run_block(cfg: SweepConfig, snr_idx: int, block_idx: int,
               n_frames: int) -> _BlockStats:
    """One link realization plus its frames; rng draw order is fixed:
    channel, PN, CSI error, R_v estimation, then per-frame noises."""
    rng = _block_rng(cfg.seed, snr_idx, block_idx)
    params = cfg.params()
    const = cfg.constellation_obj()
    sigma2 = 10.0 ** (-cfg.snr_grid()[snr_idx] / 10.0)
    ch = sample_channel(cfg.m, cfg.j, cfg.p, params, cfg.doppler_model, rng,
                        k_max=cfg.k_max_value())
    link = realize_link(ch, cfg.hwi, sigma2, rng)
    stats = _BlockStats()

    if cfg.detector == "ml":
        gains = None
        if cfg.csi_mode == "gaussian-error":
            gains = inject_gain_csi_error(link.gain_vector(), cfg.sigma_h2, rng)
        table = MlCandidateTable.build(link, const, gains=gains, cap=cfg.ml_cap)
        if n_frames > 0:
            k = table.symbols.shape[0]
            idx_tx = rng.integers(0, k, size=n_frames)
            x = table.symbols[idx_tx].T
            y, u = transmit_batch(link, x, rng)
            idx_rx = table.detect_indices(y, u=u)
            stats.bit_errors = int(np.count_nonzero(
                table.bits[idx_tx] != table.bits[idx_rx]))
            stats.frames = n_frames
        return stats

    # LMMSE path
    if cfg.csi_knowledge == "masked":
        base_mask = estimation_support_mask(link.channel)
        err_mask = error_support_mask(link.channel)
    else:
        base_mask = np.ones((link.nj, link.nm), dtype=bool)
        err_mask = base_mask
    h_est, h_err = inject_matrix_csi_error(link.h_eff * base_mask, err_mask,
                                           cfg.sigma_h2, rng)
    if cfg.rv_mode == "monte-carlo":
        r_v = estimate_rv_covariance(link, const, cfg.rv_frames, rng)
    else:
        r_v = analytic_rv_covariance(link)
    report = lmmse_equalize(h_est, r_v,
                            h_err=h_err if cfg.sigma_h2 > 0 else None)
    stats.pe_sum = lmmse_ber_approx(report, const)
    stats.pl_sum = lmmse_ber_lower_bound(report, const)
    stats.sinr_sum = float(np.mean(report.chi))
    stats.n_real = 1

    if n_frames > 0:
        bps = const.bits_per_symbol
        bits_tx = rng.integers(0, 2, size=(n_frames, cfg.m * cfg.n * bps))
        x = const.map_bits(bits_tx.reshape(-1, bps)).reshape(n_frames, link.nm).T
        y, _ = transmit_batch(link, x, rng)
        x_soft = report.soft_estimate(y)
        bits_rx = const.demap(x_soft.T.reshape(-1)).reshape(n_frames, -1)
        stats.bit_errors = int(np.count_nonzero(bits_rx != bits_tx))
        stats.frames = n_frames
    return stats


def _block_task(args):
    return _run_block(*args)


def _block_sizes(cfg: SweepConfig):
    """Deterministic (block_idx, n_frames) plan for one SNR point."""
    plan = []
    if cfg.max_frames > 0:
        n_blocks = (cfg.max_frames + cfg.frames_per_link - 1) // cfg.frames_per_link
        for b in range(n_blocks):
            lo = b * cfg.frames_per_link
            plan.append((b, min(cfg.frames_per_link, cfg.max_frames - lo)))
    elif cfg.detector == "lmmse":
        plan = [(b, 0) for b in range(cfg.theory_links)]
    return plan


def default_workers() -> int:
    env = os.environ.get("AFDMSIM_WORKERS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"AFDMSIM_WORKERS must be an integer, got {env!r}")
    return 1


def run_sweep(cfg: SweepConfig, workers=None) -> SweepResult:
    """Run the configured sweep; deterministic for (config, seed)."""
    params = cfg.validate()
    workers = default_workers() if workers is None else max(1, int(workers))
    grid = cfg.snr_grid()
    lb = cfg.bits_per_frame()

    bound = None
    sampled_bound = False
    if cfg.detector == "ml" and cfg.theory:
        rng_theory = np.random.default_rng(
            np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
        bound = union_bound_curve(
            params=params, m=cfg.m, j=cfg.j, p=cfg.p,
            constellation=cfg.constellation_obj(), hwi=cfg.hwi, snr_db=grid,
            sigma_h2=cfg.sigma_h2, doppler_model=cfg.doppler_model,
            n_realizations=cfg.theory_links, pair_budget=cfg.pair_budget,
            rng=rng_theory, k_max=cfg.k_max_value())
        k = cfg.constellation_obj().order ** (cfg.n * cfg.m)
        sampled_bound = (cfg.pair_budget or 1 << 16) < k * (k - 1)

    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    rows = []
    try:
        for snr_idx, snr_db in enumerate(grid):
            t0 = time.perf_counter()
            plan = _block_sizes(cfg)
            acc = _BlockStats()
            at = 0
            while at < len(plan):
                wave = plan[at:at + max(4 * workers, 4)]
                args = [(cfg, snr_idx, b, nf) for b, nf in wave]
                results = list(pool.map(_block_task, args)) if pool else [
                    _block_task(a) for a in args]
                stop = False
                for stats in results:
                    acc.frames += stats.frames
                    acc.bit_errors += stats.bit_errors
                    acc.pe_sum += stats.pe_sum
                    acc.pl_sum += stats.pl_sum
                    acc.sinr_sum += stats.sinr_sum
                    acc.n_real += stats.n_real
                    if cfg.min_bit_errors > 0 and acc.bit_errors >= cfg.min_bit_errors:
                        stop = True
                        break
                if stop:
                    break
                at += len(wave)
            ber_sim = acc.bit_errors / (acc.frames * lb) if acc.frames > 0 else None
            if cfg.detector == "ml":
                ber_theory = float(bound[snr_idx]) if bound is not None else None
                ber_lower = None
                sinr = None
            else:
                ber_theory = acc.pe_sum / acc.n_real if (cfg.theory and acc.n_real) else None
                ber_lower = acc.pl_sum / acc.n_real if (cfg.theory and acc.n_real) else None
                sinr = (10.0 * np.log10(acc.sinr_sum / acc.n_real)
                        if acc.n_real else None)
            rows.append(SweepRow(
                snr_db=float(snr_db), frames=acc.frames, bit_errors=acc.bit_errors,
                ber_sim=ber_sim, ber_theory=ber_theory, ber_lower=ber_lower,
                mean_sinr_db=sinr, wall_time_s=time.perf_counter() - t0))
    finally:
        if pool:
            pool.shutdown()
    return SweepResult(rows=tuple(rows), config=config_echo(cfg), seed=cfg.seed,
                       version=__version__, sampled_bound=sampled_bound)


def analyze(cfg: SweepConfig, workers=None) -> SweepResult:
    """Analytic curves only: no bit-error Monte Carlo."""
    return run_sweep(replace(cfg, max_frames=0, min_bit_errors=0, theory=True),
                     workers=workers)


# ---------------------------------------------------------------------------
# Result emission
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def config_echo(cfg: SweepConfig) -> dict:
    return _jsonable(dataclasses.asdict(cfg))


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def emit_results(result: SweepResult, format: str, path):
    """Write the sweep result as CSV (fixed column schema) or JSON."""
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in result.rows:
                writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
    elif format == "json":
        payload = {
            "metadata": {
                "config": result.config,
                "seed": result.seed,
                "version": result.version,
                "sampled_bound": result.sampled_bound,
            },
            "rows": [
                {**{c: _jsonable(getattr(r, c)) for c in CSV_COLUMNS},
                 "wall_time_s": r.wall_time_s}
                for r in result.rows
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        raise ConfigError(f"unknown output format {format!r}")


def read_csv(path):
    """Parse an emitted CSV back into row dicts (None for empty cells)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            rows.append({k: (None if v == "" else float(v)) for k, v in rec.items()})
        return rows


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _qualitative(cfg: SweepConfig) -> SweepConfig:
    return replace(cfg, theory=False, rv_frames=4000)


def figure_recipes() -> dict:
    """Named experiment presets, each a list of (curve label, config)."""
    base = SweepConfig(n=32, m=2, j=2, p=3, constellation="qpsk",
                       detector="lmmse", velocity_kmh=540.0, k_nu=2,
                       snr_db_start=0.0, snr_db_stop=30.0, snr_db_step=5.0,
                       max_frames=40_000, min_bit_errors=200,
                       frames_per_link=20)
    recipes = {}

    recipes["fig3"] = [
        (f"{wf}-cfo{phi:g}",
         _qualitative(replace(base, waveform=wf, hwi=HwiConfig(cfo=phi))))
        for wf in ("afdm", "ofdm") for phi in (0.0, 0.04, 0.08)
    ]
    pn = dict(pn_enabled=True, psi_t=1e-17, psi_r=1e-17)
    recipes["fig4"] = [
        (f"{wf}-{lo}",
         _qualitative(replace(base, waveform=wf,
                              hwi=HwiConfig(**(dict(pn_mode=lo, **pn)
                                               if lo != "ideal" else {})))))
        for wf in ("afdm", "ofdm") for lo in ("ideal", "clo", "slo")
    ]
    recipes["fig6"] = [
        (f"{wf}-{'ideal' if b is None else f'b{b}'}",
         _qualitative(replace(base, waveform=wf, hwi=HwiConfig(dac_bits=b))))
        for wf in ("afdm", "ofdm") for b in (None, 3, 4, 5)
    ]
    iqi_grid = [(0.0, 0.0), (0.05, 1.0), (0.05, 2.0), (0.1, 1.0)]
    recipes["fig7"] = [
        (f"{wf}-lam{lam:g}-beta{beta:g}",
         _qualitative(replace(base, waveform=wf,
                              hwi=HwiConfig(iqi_lambda=lam,
                                            iqi_beta=np.deg2rad(beta)))))
        for wf in ("afdm", "ofdm") for lam, beta in iqi_grid
    ]
    recipes["fig8"] = [
        (f"{wf}-{'ideal' if nu is None else f'nu{nu:g}dB'}",
         _qualitative(replace(base, waveform=wf, hwi=HwiConfig(nu_clip_db=nu))))
        for wf in ("afdm", "ofdm") for nu in (None, 4.0, 2.0, 1.0)
    ]
    sinr_base = replace(base, snr_db_start=0.0, snr_db_stop=28.0, snr_db_step=4.0,
                        max_frames=0, min_bit_errors=0, theory_links=60,
                        rv_frames=4000)
    recipes["fig9"] = [
        (f"dco{dt:g}-{csi}",
         replace(sinr_base,
                 hwi=HwiConfig(dco=dt + 0j),
                 csi_mode="perfect" if csi == "perfect" else "gaussian-error",
                 sigma_h2=0.0 if csi == "perfect" else 0.01))
        for dt in (0.0, 0.4, 0.8) for csi in ("perfect", "imp")
    ]
    fig10_base = SweepConfig(
        waveform="afdm", n=8, m=1, j=2, p=2, constellation="bpsk",
        detector="ml", velocity_kmh=540.0, k_nu=1, l_max=1,
        snr_db_start=4.0, snr_db_stop=20.0, snr_db_step=2.0,
        max_frames=200_000, min_bit_errors=200, frames_per_link=50,
        theory=True, theory_links=100)
    recipes["fig10"] = [
        ("ideal", fig10_base),
        ("imp-csi", replace(fig10_base, csi_mode="gaussian-error", sigma_h2=0.02)),
        ("hwi", replace(fig10_base, hwi=hwi_preset("scheme1"))),
        ("imp-csi-hwi", replace(fig10_base, hwi=hwi_preset("scheme1"),
                                csi_mode="gaussian-error", sigma_h2=0.02)),
    ]
    fig11_base = replace(base, n=16, p=3, snr_db_start=0.0, snr_db_stop=36.0,
                         snr_db_step=4.0, max_frames=60_000, rv_frames=5000,
                         theory=True)
    recipes["fig11"] = [
        ("ideal", fig11_base),
        ("imp-csi", replace(fig11_base, csi_mode="gaussian-error", sigma_h2=0.005)),
        ("hwi", replace(fig11_base, hwi=hwi_preset("scheme2"))),
        ("imp-csi-hwi", replace(fig11_base, hwi=hwi_preset("scheme2"),
                                csi_mode="gaussian-error", sigma_h2=0.005)),
    ]
    recipes["fig12"] = [
        (f"{wf}-v{int(v)}",
         _qualitative(replace(base, waveform=wf, velocity_kmh=float(v),
                              snr_db_start=20.0, snr_db_stop=20.0, snr_db_step=1.0,
                              hwi=hwi_preset("scheme1-additive"))))
        for wf in ("afdm", "ofdm") for v in (0, 135, 270, 405, 540)
    ]
    return recipes


SCHEME_PRESETS = ("ideal", "scheme1", "scheme2", "scheme1-additive")
