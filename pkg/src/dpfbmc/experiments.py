"""Monte-Carlo experiment runner: BER/SINR sweeps, offset sweeps, PSD and tables.

Every frame draws its bits, channel and noise from substreams keyed by
``(seed, frame, role)``, so all systems and all sweep points of a run see
the same payload and channel (paired comparison) and results do not depend
on the number of workers.
"""
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import channel, dp, estimation, filters, interference, metrics, modem, qam
from .modem import ConfigError
from .rng import Role, stream

from . import __version__

SYSTEMS = ("cp_ofdm", "cp_ofdm_wola", "fbmc", "dp_fbmc_s1", "dp_fbmc_s2", "dp_fbmc_s3")
SWEEP_VARIABLES = ("eb_n0_db", "xpd_db", "mismatch_deg", "cfo", "cto")
DEFAULT_CP = {"ag_los": Fraction(1, 32), "pedestrian_a": Fraction(1, 32), "awgn": Fraction(1, 32),
              "pedestrian_b": Fraction(1, 16), "vehicular_b": Fraction(1, 8)}


class NumericalError(RuntimeError):
    """NaN or infinity appeared in a pipeline."""


@dataclass(frozen=True)
class FilterSpec:
    kind: str = "srrc"
    K: int = 8
    alpha: float | None = None

    @classmethod
    def parse(cls, s):
        """``"srrc:8"``, ``"phydyas:4"``, ``"srrc:4:0.3"`` or a mapping."""
        if isinstance(s, FilterSpec):
            return s
        if isinstance(s, dict):
            return cls(str(s.get("kind", "srrc")).lower(), int(s.get("K", 8)),
                       None if s.get("alpha") is None else float(s["alpha"]))
        parts = str(s).split(":")
        kind = parts[0].lower()
        K = int(parts[1]) if len(parts) > 1 else 4
        alpha = float(parts[2]) if len(parts) > 2 else None
        return cls(kind, K, alpha)

    def label(self):
        base = f"{self.kind}:{self.K}"
        return base if self.alpha is None else f"{base}:{self.alpha:g}"


@dataclass(frozen=True)
class SystemSpec:
    """A system name with an optional filter override, written ``name`` or ``name@kind:K``."""
    name: str
    filter: FilterSpec | None = None

    @classmethod
    def parse(cls, s, default_filter=None):
        if isinstance(s, SystemSpec):
            return s
        name, _, filt = str(s).partition("@")
        name = name.strip().lower()
        if name not in SYSTEMS:
            raise ConfigError(f"unknown system {name!r}; choose from {SYSTEMS}")
        if name.startswith("cp_ofdm"):
            if filt:
                raise ConfigError(f"{name} takes no prototype filter (got {filt!r})")
            return cls(name, None)
        return cls(name, FilterSpec.parse(filt) if filt else default_filter)

    @property
    def family(self):
        if self.name.startswith("cp_ofdm"):
            return "ofdm"
        return "fbmc" if self.name == "fbmc" else "dp"

    @property
    def structure(self):
        return dp.DpStructure.parse(self.name[-2:]) if self.family == "dp" else None

    def label(self):
        if self.filter is None:
            return self.name
        return f"{self.name}@{self.filter.label()}"


@dataclass(frozen=True)
class Sweep:
    variable: str = "eb_n0_db"
    values: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)


@dataclass(frozen=True)
class ExperimentConfig:
    systems: tuple = ("cp_ofdm", "fbmc", "dp_fbmc_s1")
    filter: FilterSpec = FilterSpec()
    N: int = 512
    symbols_per_frame: int = 16
    bandwidth_hz: float = 10e6
    modulation: int = 16
    profile: str = "pedestrian_a"
    xpd_db: float | None = None
    equalizer: str = "LS_DFT"
    cp_fraction: Fraction | None = None
    window_rolloff: float = 0.05
    pilots: bool = True
    truncate_tails: bool = False
    sweep: Sweep = Sweep()
    eb_n0_db: float = 12.0
    mismatch_deg: float = 0.0
    cfo: float = 0.0
    cto: float = 0.0
    cto_unit: str = "symbol"
    xpol_cancel: bool = False
    metrics: tuple = ("ber",)
    frames: int = 200
    seed: int = 1
    workers: int = 1
    psd_frames: int = 40
    psd_segment: int | None = None
    psd_overlap: float = 0.5

    def __post_init__(self):
        self.validate()

    # -- construction ---------------------------------------------------
    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known - {"experiment", "out_dir"}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        kw = {}
        for k, v in d.items():
            if k not in known:
                continue
            if k == "filter":
                v = FilterSpec.parse(v)
            elif k == "sweep":
                if not isinstance(v, dict):
                    raise ConfigError("sweep must be a mapping with 'variable' and 'values'")
                vals = v.get("values", ())
                if isinstance(vals, (int, float)):
                    vals = (vals,)
                v = Sweep(str(v.get("variable", "eb_n0_db")), tuple(_as_float(x) for x in vals))
            elif k in ("systems", "metrics"):
                v = tuple([v] if isinstance(v, str) else v)
            elif k == "cp_fraction" and v is not None:
                v = Fraction(str(v))
            elif k == "xpd_db" and v is not None:
                v = _as_float(v)
            kw[k] = v
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        merged = self.to_dict()
        merged.update(kw)
        return ExperimentConfig.from_dict(merged)

    def to_dict(self):
        d = asdict(self)
        d["filter"] = {"kind": self.filter.kind, "K": self.filter.K, "alpha": self.filter.alpha}
        d["sweep"] = {"variable": self.sweep.variable, "values": list(self.sweep.values)}
        d["systems"] = list(self.systems)
        d["metrics"] = list(self.metrics)
        d["cp_fraction"] = None if self.cp_fraction is None else str(self.cp_fraction)
        return d

    def fingerprint(self):
        """SHA-256 over the canonical config, excluding the worker count."""
        d = self.to_dict()
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -- derived ----------------------------------------------------------
    def validate(self):
        if not self.systems:
            raise ConfigError("no systems selected")
        for s in self.systems:
            SystemSpec.parse(s, self.filter)
        if self.sweep.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep variable {self.sweep.variable!r} not in {SWEEP_VARIABLES}")
        if not self.sweep.values:
            raise ConfigError("sweep grid is empty")
        if self.frames < 1:
            raise ConfigError("frames must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.equalizer not in ("LS_DFT", "PCK"):
            raise ConfigError(f"equalizer {self.equalizer!r} not in ('LS_DFT', 'PCK')")
        if self.modulation not in qam.SUPPORTED_ORDERS:
            raise ConfigError(f"modulation {self.modulation} not in {qam.SUPPORTED_ORDERS}")
        if self.cto_unit not in ("symbol", "half_symbol"):
            raise ConfigError("cto_unit must be 'symbol' or 'half_symbol'")
        if self.symbols_per_frame < 1:
            raise ConfigError("symbols_per_frame must be >= 1")
        try:
            channel.builtin_profile(self.profile)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("cfo",):
            vals = list(self.sweep.values) if self.sweep.variable == name else [getattr(self, name)]
            if any(not abs(v) < 0.5 for v in vals):
                raise ConfigError("|CFO| must be below 0.5 subcarrier spacings")
        thetas = list(self.sweep.values) if self.sweep.variable == "mismatch_deg" else [self.mismatch_deg]
        if any(not 0 <= t <= 45 for t in thetas):
            raise ConfigError("mismatch angle must lie in [0, 45] degrees")
        if self.xpol_cancel and any(t for t in thetas):
            raise ConfigError("genie cross-polar cancellation assumes no angular mismatch")
        for m in self.metrics:
            if m not in ("ber", "sinr_db"):
                raise ConfigError(f"unknown metric {m!r}")
        self.system_config()
        if any(s.startswith("cp_ofdm_wola") for s in self.systems):
            W = int(round(self.window_rolloff * self.N))
            if W > self.system_config().cp_len:
                raise ConfigError(f"WOLA extension {W} exceeds CP length {self.system_config().cp_len}")

    def system_config(self, wola=False):
        cp = self.cp_fraction if self.cp_fraction is not None else DEFAULT_CP.get(self.profile, Fraction(1, 32))
        try:
            sc = modem.SystemConfig(N=self.N, bandwidth=self.bandwidth_hz, cp_fraction=cp,
                                    window_rolloff=self.window_rolloff if wola else 0.0)
            sc.cp_len
        except (ConfigError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return sc

    def point_params(self, value):
        p = {"eb_n0_db": self.eb_n0_db, "mismatch_deg": self.mismatch_deg, "cfo": self.cfo, "cto": self.cto,
             "xpd_db": self.effective_xpd()}
        p[self.sweep.variable] = value
        return p

    def effective_xpd(self):
        if self.xpd_db is not None:
            return self.xpd_db
        return channel.DEFAULT_XPD_DB.get(self.profile, math.inf)

    def cto_samples(self, cto):
        unit = self.N if self.cto_unit == "symbol" else self.N // 2
        return int(round(cto * unit))


def _as_float(v):
    if isinstance(v, str) and v.strip().lower() in ("inf", "+inf", "infinity", ".inf"):
        return math.inf
    return float(v)


# -- per-system static context ------------------------------------------------

@dataclass
class _Context:
    spec: SystemSpec
    sc: modem.SystemConfig
    f: filters.PrototypeFilter | None
    table: interference.LocalizationTable | None
    layout: estimation.PilotLayout
    data_mask: np.ndarray
    n_taps: int
    bps: int

    @property
    def n_info_bits(self):
        return int(self.data_mask.sum()) * self.bps


@lru_cache(maxsize=64)
def _filter(kind, K, N, alpha):
    return filters.design_filter(kind, K, N, alpha)


@lru_cache(maxsize=64)
def _aux_table(kind, K, N, alpha):
    return interference.localization_table(_filter(kind, K, N, alpha), 2, 2)


@lru_cache(maxsize=64)
def _context(cfg, spec):
    sc = cfg.system_config(wola=spec.name == "cp_ofdm_wola")
    f = table = None
    if spec.filter is not None:
        fs = spec.filter
        try:
            f = _filter(fs.kind, fs.K, cfg.N, fs.alpha)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if spec.family == "fbmc":
            table = _aux_table(fs.kind, fs.K, cfg.N, fs.alpha)
    Mq = cfg.symbols_per_frame
    layout = estimation.make_pilot_layout(sc, Mq) if cfg.pilots else estimation.empty_layout()
    data_mask = sc.active_mask[:, None] & ~layout.qam_mask(cfg.N, Mq)
    per_pol = len(layout.subcarriers) // (2 if spec.name == "dp_fbmc_s2" else 1)
    n_taps = max(1, min(sc.cp_len, per_pol)) if per_pol else 1
    return _Context(spec, sc, f, table, layout, data_mask, n_taps, qam.bits_per_symbol(cfg.modulation))


# -- frame simulation ------------------------------------------------------------

@dataclass
class FrameResult:
    errors: int = 0
    bits: int = 0
    signal: float = 0.0
    error_power: float = 0.0

    def __add__(self, o):
        return FrameResult(self.errors + o.errors, self.bits + o.bits,
                           self.signal + o.signal, self.error_power + o.error_power)


def _check_finite(name, x):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite values in {name}")


def _fbmc_offset_gain(f, N, M, cfo, cto, head_cut):
    g = np.ones((N, M), dtype=np.complex128)
    if cfo:
        i = np.arange(f.L)
        s = np.sum(f.coeffs ** 2 * np.exp(2j * np.pi * cfo * i / N)) / f.energy
        m = np.arange(M)
        g = g * (np.exp(1j * np.pi * cfo * m) * s * np.exp(-2j * np.pi * cfo * head_cut / N))[None, :]
    if cto:
        d = abs(cto)
        c = np.dot(f.coeffs[d:], f.coeffs[:f.L - d]) / f.energy if d < f.L else 0.0
        fn = modem.signed_frequencies(N)
        g = g * (np.exp(2j * np.pi * fn * cto / N) * c)[:, None]
    return g


def _ofdm_offset_gain(sc, M, cfo, cto):
    N, cp = sc.N, sc.cp_len
    g = np.ones((N, M), dtype=np.complex128)
    if cfo:
        t = np.arange(M)
        avg = np.mean(np.exp(2j * np.pi * cfo * np.arange(N) / N))
        g = g * (np.exp(2j * np.pi * cfo * (t * (N + cp) + cp) / N) * avg)[None, :]
    if cto:
        own = N - cto if cto > 0 else N - max(0, -cto - cp)
        fn = modem.signed_frequencies(N)
        g = g * (np.exp(2j * np.pi * fn * cto / N) * max(own, 0) / N)[:, None]
    return g


def simulate_frame(cfg, spec, value, frame, ctx=None):
    """Run one frame of one system at one sweep point."""
    if ctx is None:
        ctx = _context(cfg, spec)
    p = cfg.point_params(value)
    N, Mq = cfg.N, cfg.symbols_per_frame
    M = 2 * Mq
    bits = stream(cfg.seed, frame, Role.BITS).integers(0, 2, ctx.n_info_bits, dtype=np.uint8)
    cells = qam.modulate(bits, cfg.modulation)
    C = np.zeros((N, Mq), dtype=np.complex128)
    C[ctx.data_mask] = cells
    prof = channel.builtin_profile(cfg.profile)
    ch = channel.realize_channel(prof, p["xpd_db"], ctx.sc.sample_rate, stream(cfg.seed, frame, Role.CHANNEL))
    noise_rng = stream(cfg.seed, frame, Role.NOISE)
    theta = p["mismatch_deg"]
    cos_t = math.cos(math.radians(theta))
    cfo = p["cfo"]
    cto = cfg.cto_samples(p["cto"])
    fam = ctx.spec.family

    if fam == "ofdm":
        grid = estimation.place_pilots(C, ctx.layout, ctx.sc.active_mask)
        w = modem.cp_ofdm_modulate(grid, ctx.sc)
        w = modem.wola_window(w, ctx.sc)
        energy = w.energy
        rx = w.with_samples(cos_t * channel.convolve_truncated(w.samples, ch.hHH))
        rx = channel.apply_awgn(rx, p["eb_n0_db"], ctx.n_info_bits, noise_rng, energy=energy)
        rx = channel.apply_cto(channel.apply_cfo(rx, cfo, N), cto)
        R = modem.cp_ofdm_demodulate(rx, ctx.sc)
        if cfg.equalizer == "PCK":
            gains = estimation.perfect_channel_estimate(ch.hHH, N, Mq, w.gain * cos_t).gains
            gains = gains * _ofdm_offset_gain(ctx.sc, Mq, cfo, cto)
        else:
            gains = estimation.ls_estimate_layout(R, ctx.layout, "ofdm", ctx.n_taps).gains
        eq, _ = estimation.zf_equalize(R, gains)
        _check_finite("equalized grid", eq)
        est = eq[ctx.data_mask]
        sig = float(np.sum(np.abs(cells) ** 2))
        err = float(np.sum(np.abs(est - cells) ** 2))
    else:
        A = modem.qam_to_oqam(C)
        if fam == "fbmc":
            if ctx.layout.n_pilots:
                A = estimation.place_oqam_pilots(A, ctx.layout, ctx.sc.active_mask)
                A = estimation.insert_auxiliary_pilots(A, ctx.layout, ctx.table)
            w = modem.fbmc_modulate_fast(A, ctx.f, ctx.sc.sample_rate)
            if cfg.truncate_tails:
                w = modem.truncate_tails(w, ctx.f.K, N)
            energy = w.energy
            rx = w.with_samples(cos_t * channel.convolve_truncated(w.samples, ch.hHH))
            rx = channel.apply_awgn(rx, p["eb_n0_db"], ctx.n_info_bits, noise_rng, energy=energy)
            rx = channel.apply_cto(channel.apply_cfo(rx, cfo, N), cto)
            R = modem.fbmc_demodulate(rx, ctx.f)
            if cfg.equalizer == "PCK":
                gains = estimation.perfect_channel_estimate(ch.hHH, N, M, cos_t).gains
                gains = gains * _fbmc_offset_gain(ctx.f, N, M, cfo, cto, w.head_cut)
            else:
                gains = estimation.ls_estimate_layout(R, ctx.layout, "fbmc", ctx.n_taps).gains
        else:
            s = ctx.spec.structure
            if ctx.layout.n_pilots:
                A = estimation.place_oqam_pilots(A, ctx.layout, ctx.sc.active_mask, dual=True)
            P = dp.dp_split(A, s)
            pw = dp.dp_modulate(P, ctx.f, ctx.sc.sample_rate)
            if cfg.truncate_tails:
                pw = pw.map(lambda x: modem.truncate_tails(x, ctx.f.K, N))
            energy = pw.energy
            rw = channel.apply_dual_pol_channel(pw, ch)
            if theta:
                rw = channel.apply_angular_mismatch(rw, theta)
            rh = channel.apply_awgn(rw.h, p["eb_n0_db"], ctx.n_info_bits, noise_rng, energy=energy)
            rv = channel.apply_awgn(rw.v, p["eb_n0_db"], ctx.n_info_bits, noise_rng, energy=energy)
            rw = dp.PolarizedWaveform(rh, rv)
            if cfg.xpol_cancel:
                rw = estimation.xpol_cancel_ideal(rw, ch, P.aH, P.aV, ctx.f)
            rw = rw.map(lambda x: channel.apply_cto(channel.apply_cfo(x, cfo, N), cto))
            R = dp.dp_demodulate(rw, ctx.f, s)
            if cfg.equalizer == "PCK":
                gains = estimation.perfect_dp_estimate(ch, N, M, s, cos_t).gains
                gains = gains * _fbmc_offset_gain(ctx.f, N, M, cfo, cto, pw.h.head_cut)
            else:
                gains = estimation.ls_estimate_layout(R, ctx.layout, "dp", ctx.n_taps, s).gains
        eq, _ = estimation.zf_equalize(R, gains)
        _check_finite("equalized grid", eq)
        a_hat = eq.real
        est = modem.oqam_to_qam(a_hat)[ctx.data_mask]
        sig = float(np.sum(np.abs(cells) ** 2))
        err = float(np.sum(np.abs(est - cells) ** 2))

    rx_bits = qam.demodulate(est, cfg.modulation)
    errors = int(np.count_nonzero(rx_bits != bits))
    return FrameResult(errors, bits.size, sig, err)


def _run_chunk(args):
    cfg_dict, spec, value, frames = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    ctx = _context(cfg, spec)
    return [simulate_frame(cfg, spec, value, fr, ctx) for fr in frames]


# -- results -------------------------------------------------------------------

CSV_HEADER = "sweep_value,system,metric,value,ci_halfwidth,bits,frames,seed"


@dataclass
class ResultRow:
    sweep_value: float
    system: str
    metric: str
    value: float
    ci_halfwidth: float | None
    bits: int | None
    frames: int
    seed: int


def _num(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    sweep_variable: str = "eb_n0_db"

    def to_csv(self):
        lines = [f"# fingerprint={self.provenance.get('fingerprint', '')}",
                 f"# code_version={self.provenance.get('code_version', '')}",
                 f"# sweep_variable={self.sweep_variable}",
                 "# config=" + json.dumps(self.provenance.get("config", {}), sort_keys=True, default=str)]
        for k in sorted(self.provenance.get("estimator", {})):
            lines.append(f"# {k}={self.provenance['estimator'][k]}")
        lines.append(CSV_HEADER)
        for r in self.rows:
            lines.append(",".join([_num(r.sweep_value), r.system, r.metric, _num(r.value), _num(r.ci_halfwidth),
                                   _num(r.bits), str(r.frames), str(r.seed)]))
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def select(self, system=None, metric="ber"):
        return [r for r in self.rows if (system is None or r.system == system) and r.metric == metric]

    def series(self, system, metric="ber"):
        rows = self.select(system, metric)
        return np.array([r.sweep_value for r in rows]), np.array([r.value for r in rows])

    def systems(self):
        seen = []
        for r in self.rows:
            if r.system not in seen:
                seen.append(r.system)
        return seen


def _provenance(cfg, extra=None):
    return {"fingerprint": cfg.fingerprint(), "code_version": __version__, "config": cfg.to_dict() | {"workers": None},
            "estimator": extra or {}}


def _map_frames(cfg, jobs):
    """Evaluate ``jobs`` = [(spec, value)] over all frames; returns summed results per job."""
    frames = list(range(cfg.frames))
    cfg_dict = cfg.to_dict()
    if cfg.workers == 1:
        chunks = [(cfg_dict, spec, value, frames) for spec, value in jobs]
        out = [_run_chunk(c) for c in chunks]
    else:
        per = max(1, math.ceil(cfg.frames / (2 * cfg.workers)))
        chunks, owner = [], []
        for j, (spec, value) in enumerate(jobs):
            for i in range(0, cfg.frames, per):
                chunks.append((cfg_dict, spec, value, frames[i:i + per]))
                owner.append(j)
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_run_chunk, chunks))
        out = [[] for _ in jobs]
        for j, res in zip(owner, results):
            out[j].extend(res)
    totals = []
    for res in out:
        acc = FrameResult()
        for r in res:          # frame order: the float sums are reproducible
            acc = acc + r
        totals.append(acc)
    return totals


def run_ber_sweep(cfg):
    """BER (and optionally SINR) per sweep point and system."""
    specs = [SystemSpec.parse(s, cfg.filter) for s in cfg.systems]
    jobs = [(spec, v) for v in cfg.sweep.values for spec in specs]
    totals = _map_frames(cfg, jobs)
    table = ResultTable(provenance=_provenance(cfg), sweep_variable=cfg.sweep.variable)
    for (spec, v), t in zip(jobs, totals):
        rec = metrics.BerRecord(t.errors, t.bits)
        if "ber" in cfg.metrics:
            table.rows.append(ResultRow(v, spec.label(), "ber", rec.ber, rec.ci_halfwidth(), t.bits, cfg.frames, cfg.seed))
        if "sinr_db" in cfg.metrics:
            sinr = 10 * math.log10(t.signal / t.error_power) if t.error_power > 0 else math.inf
            table.rows.append(ResultRow(v, spec.label(), "sinr_db", sinr, None, t.bits, cfg.frames, cfg.seed))
    for r in table.rows:
        if isinstance(r.value, float) and math.isnan(r.value):
            raise NumericalError(f"NaN metric for {r.system} at {r.sweep_value}")
    return table


def run_offset_sweep(cfg):
    """BER versus CFO or CTO without offset compensation (genie one-tap gains)."""
    if cfg.sweep.variable not in ("cfo", "cto"):
        raise ConfigError("offset sweep needs sweep variable 'cfo' or 'cto'")
    if cfg.profile != "awgn":
        raise ConfigError("offset sweeps run on the awgn profile")
    return run_ber_sweep(cfg)


OFFSET_DEFAULTS = {"profile": "awgn", "bandwidth_hz": 5e6, "eb_n0_db": 12.0, "modulation": 16,
                   "equalizer": "PCK", "systems": ["cp_ofdm", "dp_fbmc_s1@srrc:8", "dp_fbmc_s1@srrc:4"]}


# -- spectra -------------------------------------------------------------------

def _psd_waveforms(cfg, spec):
    sc = cfg.system_config(wola=spec.name == "cp_ofdm_wola")
    N, Mq = cfg.N, cfg.symbols_per_frame
    mask = sc.active_mask
    bps = qam.bits_per_symbol(cfg.modulation)
    grids = []
    for fr in range(cfg.psd_frames):
        rng = stream(cfg.seed, fr, Role.PAYLOAD)
        C = np.zeros((N, Mq), dtype=np.complex128)
        C[mask] = qam.modulate(rng.integers(0, 2, int(mask.sum()) * Mq * bps), cfg.modulation).reshape(-1, Mq)
        grids.append(C)
    if spec.family == "ofdm":
        w = modem.wola_window(modem.cp_ofdm_modulate(np.concatenate(grids, axis=1), sc), sc)
        return [w.samples]
    fs = spec.filter
    f = _filter(fs.kind, fs.K, N, fs.alpha)
    h_parts, v_parts = [], []
    for C in grids:
        A = modem.qam_to_oqam(C)
        if spec.family == "fbmc":
            w = modem.truncate_tails(modem.fbmc_modulate_fast(A, f), f.K, N)
            h_parts.append(w.samples)
        else:
            pw = dp.dp_modulate(dp.dp_split(A, spec.structure), f)
            pw = pw.map(lambda x: modem.truncate_tails(x, f.K, N))
            h_parts.append(pw.h.samples)
            v_parts.append(pw.v.samples)
    out = [np.concatenate(h_parts)]
    if v_parts:
        out.append(np.concatenate(v_parts))
    return out


def band_edge(sc):
    """Distance in subcarrier spacings from DC to the outer edge of the occupied band."""
    fn = modem.signed_frequencies(sc.N)[sc.active_mask]
    return float(max(fn.max(), -fn.min()) + 0.5)


def run_psd(cfg, guard_offset=2.0):
    """Welch PSD per system plus out-of-band power; returns (ResultTable, {label: PsdEstimate})."""
    specs = [SystemSpec.parse(s, cfg.filter) for s in cfg.systems]
    seg = cfg.psd_segment or 4 * cfg.N
    table = ResultTable(provenance=_provenance(cfg, {"segment_len": seg, "overlap": cfg.psd_overlap,
                                                     "window": "hann", "guard_offset": guard_offset}),
                        sweep_variable="freq_subcarriers")
    edge = band_edge(cfg.system_config())
    spectra = {}
    for spec in specs:
        ests = [metrics.psd_periodogram(x, cfg.N, seg, cfg.psd_overlap) for x in _psd_waveforms(cfg, spec)]
        lin = np.mean([10 ** (e.density_db / 10) for e in ests], axis=0)
        est = metrics.PsdEstimate(ests[0].freqs, 10 * np.log10(lin / lin.max()), ests[0].params)
        _check_finite("psd", est.density_db)
        spectra[spec.label()] = est
        oob = metrics.oob_power(est, edge, guard_offset)
        table.rows.append(ResultRow(edge + guard_offset, spec.label(), "oob_db", oob, None, None, cfg.psd_frames, cfg.seed))
        for fq, d in zip(est.freqs, est.density_db):
            table.rows.append(ResultRow(float(fq), spec.label(), "psd_db", float(d), None, None, cfg.psd_frames, cfg.seed))
    return table, spectra


# -- tables ----------------------------------------------------------------------

TABLE_FILTERS = (("iota", 4), ("phydyas", 4), ("srrc", 4), ("srrc", 8))


def run_table_report(N=512, out_dir=None):
    """Compute the four reference localization tables and their deviation.

    Returns ``{(kind, K): (LocalizationTable, abs_diff_matrix)}``; with
    ``out_dir`` also writes ``table_<kind>_k<K>.csv``, the matching
    ``_diff.csv`` and a ``tables.md`` summary.
    """
    report = {}
    md = []
    for kind, K in TABLE_FILTERS:
        t = interference.localization_table(_filter(kind, K, N, None), 2, 3)
        diff = np.abs(t.entries - interference.reference_table(kind, K))
        report[(kind, K)] = (t, diff)
        md.append(f"## {t.descriptor}\n\n" + interference.render_table(t, "markdown")
                  + f"\nmax abs deviation from reference: {diff.max():.4f}\n")
        if out_dir:
            with open(os.path.join(out_dir, f"table_{kind}_k{K}.csv"), "w") as fh:
                fh.write(interference.render_table(t, "csv"))
            d = interference.LocalizationTable(2, 3, diff.astype(complex), t.descriptor + " |diff|")
            with open(os.path.join(out_dir, f"table_{kind}_k{K}_diff.csv"), "w") as fh:
                fh.write(interference.render_table(d, "csv"))
    if out_dir:
        with open(os.path.join(out_dir, "tables.md"), "w") as fh:
            fh.write("\n".join(md))
    return report
