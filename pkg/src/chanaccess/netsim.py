"""Primary-user network signal generation and the Rayleigh/AWGN channel.

Signals are at one sample per symbol. Per-user signals come back as a
``(n_users, n_samples)`` array together with the boolean activity
pattern; the channel applies one complex Rayleigh gain per user for the
whole record and adds circular Gaussian noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.linalg import hadamard

from .class_stats import PSK_ORDERS, class_label
from .constellations import build_constellation
from .errors import ConfigurationError
from .estimation import SquelchParams, usable_samples

METHODS = ("TDMA", "OFDMA", "CDMA", "CONTENTION")
DEFAULT_USERS = {"TDMA": 4, "OFDMA": 4, "CDMA": 16, "CONTENTION": 4}


@dataclass(frozen=True)
class ScenarioConfig:
    method: str = "TDMA"
    n_total: int = 4
    modulation: str = "QPSK"
    j: int = 500
    f: int = 200
    snr_db: float = 10.0
    load: float = 1.0
    packet_len: int = 0  # 0 -> j
    slot_len: int = 0  # 0 -> j
    n_sc: int = 64
    n_p: int = 0
    l_c: int = 16
    codes: str = "random"
    p_c_given_t: float = 0.05
    seed: int = 0
    squelch_kappa: float = 2.0
    squelch_window: int = 32
    squelch_granularity: str = "frame"
    squelch_frame_kappa: float = 1.25

    def __post_init__(self):
        method = self.method.upper()
        object.__setattr__(self, "method", method)
        if method not in METHODS:
            raise ConfigurationError(f"unknown access method {self.method!r}")
        if self.n_total < 1:
            raise ConfigurationError("n_total must be >= 1")
        if self.load < 0:
            raise ConfigurationError("load must be >= 0")
        if not 0 <= self.n_p < self.n_sc:
            raise ConfigurationError("need 0 <= n_p < n_sc")
        if self.l_c < 1:
            raise ConfigurationError("l_c must be >= 1")
        if not 0 < self.p_c_given_t < 1:
            raise ConfigurationError("p_c_given_t must lie in (0, 1)")
        if self.j < 4 or self.f < 2:
            raise ConfigurationError("need j >= 4 and f >= 2")
        if self.codes not in ("random", "walsh"):
            raise ConfigurationError(f"codes must be 'random' or 'walsh', got {self.codes!r}")
        if method == "CDMA" and self.codes == "walsh" and self.n_total > self.l_c:
            raise ConfigurationError(f"{self.n_total} orthogonal codes need l_c >= {self.n_total}")
        if method == "OFDMA" and self.n_sc % self.n_total:
            raise ConfigurationError(f"{self.n_sc} subcarriers cannot be split evenly among {self.n_total} users")
        if self.packet_len < 0 or self.slot_len < 0:
            raise ConfigurationError("packet_len and slot_len must be >= 0")
        # bare "PSK" is resolved to a random order >= 4 per trial
        if self.modulation.upper() != "PSK":
            build_constellation(self.modulation)
        try:
            self.squelch
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def for_method(cls, method: str, **kw) -> "ScenarioConfig":
        kw.setdefault("n_total", DEFAULT_USERS[method.upper()])
        return cls(method=method, **kw)

    @property
    def noise_variance(self) -> float:
        return 0.0 if math.isinf(self.snr_db) and self.snr_db > 0 else 10 ** (-self.snr_db / 10)

    @property
    def squelch(self) -> SquelchParams:
        return SquelchParams(self.squelch_kappa, self.squelch_window, self.squelch_granularity, self.squelch_frame_kappa)

    @property
    def packet_samples(self) -> int:
        return self.packet_len or self.j

    @property
    def slot_samples(self) -> int:
        return self.slot_len or self.j

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass(frozen=True, eq=False)
class ActivityPattern:
    active: np.ndarray  # (n_users, n_samples) bool

    def concurrency(self) -> np.ndarray:
        return self.active.sum(axis=0)


@dataclass(frozen=True, eq=False)
class UserSignals:
    signals: np.ndarray  # (n_users, n_samples) complex
    activity: ActivityPattern = field(repr=False)


# -- generators --------------------------------------------------------------


def _symbols(cfg: ScenarioConfig, rng, size) -> np.ndarray:
    return build_constellation(cfg.modulation).sample(rng, size)


def gen_tdma(cfg: ScenarioConfig, n_samples: int, rng: np.random.Generator) -> UserSignals:
    """Slots of ``slot_len`` samples, each occupied with probability ``load``; slot s belongs to user s mod N."""
    slot = cfg.slot_samples
    n_slots = -(-n_samples // slot)
    occupied = rng.random(n_slots) < min(cfg.load, 1.0)
    owner = np.arange(n_slots) % cfg.n_total
    active = np.zeros((cfg.n_total, n_slots), dtype=bool)
    active[owner[occupied], np.flatnonzero(occupied)] = True
    active = np.repeat(active, slot, axis=1)[:, :n_samples]
    signals = np.zeros(active.shape, dtype=complex)
    signals[active] = _symbols(cfg, rng, int(active.sum()))
    return UserSignals(signals, ActivityPattern(active))


def subcarrier_partition(n_sc: int, n_users: int) -> np.ndarray:
    """Owner of each subcarrier: contiguous equal blocks."""
    if n_sc % n_users:
        raise ConfigurationError(f"{n_sc} subcarriers cannot be split evenly among {n_users} users")
    return np.repeat(np.arange(n_users), n_sc // n_users)


def ofdm_modulate(symbols: np.ndarray, n_p: int) -> np.ndarray:
    """Rows of subcarrier symbols -> time samples with cyclic prefix (unit-power IDFT)."""
    n_sc = symbols.shape[-1]
    body = np.fft.ifft(symbols, axis=-1) * np.sqrt(n_sc)
    return np.concatenate([body[..., n_sc - n_p :], body], axis=-1) if n_p else body


def gen_ofdma(cfg: ScenarioConfig, n_samples: int, rng: np.random.Generator) -> UserSignals:
    owner = subcarrier_partition(cfg.n_sc, cfg.n_total)
    sym_len = cfg.n_sc + cfg.n_p
    n_sym = -(-n_samples // sym_len)
    data = _symbols(cfg, rng, (n_sym, cfg.n_sc))
    signals = np.empty((cfg.n_total, n_samples), dtype=complex)
    for u in range(cfg.n_total):
        # each user modulates only its own subcarriers
        x = ofdm_modulate(np.where(owner == u, data, 0), cfg.n_p)
        signals[u] = x.ravel()[:n_samples]
    return UserSignals(signals, ActivityPattern(np.ones(signals.shape, dtype=bool)))


def spreading_codes(n_users: int, l_c: int, kind: str, rng: np.random.Generator) -> np.ndarray:
    if kind == "walsh":
        if n_users > l_c:
            raise ConfigurationError(f"{n_users} orthogonal codes need l_c >= {n_users}, got {l_c}")
        if l_c & (l_c - 1):
            raise ConfigurationError("Walsh codes need a power-of-two length")
        return hadamard(l_c)[:n_users].astype(float)
    return rng.choice([-1.0, 1.0], size=(n_users, l_c))


def gen_cdma(cfg: ScenarioConfig, n_samples: int, rng: np.random.Generator) -> UserSignals:
    """s_i(n) = c_i(n mod L) d_i(floor(n / L)); users scaled so the sum has unit power."""
    codes = spreading_codes(cfg.n_total, cfg.l_c, cfg.codes, rng)
    n_sym = -(-n_samples // cfg.l_c)
    data = _symbols(cfg, rng, (cfg.n_total, n_sym))
    chips = np.repeat(data, cfg.l_c, axis=1)[:, :n_samples]
    idx = np.arange(n_samples) % cfg.l_c
    signals = chips * codes[:, idx] / np.sqrt(cfg.n_total)
    return UserSignals(signals, ActivityPattern(np.ones(signals.shape, dtype=bool)))


def packet_arrivals(load: float, duration: int, packet_len: int, rng: np.random.Generator) -> np.ndarray:
    """Poisson packet start times (in samples) at ``load`` packets per packet duration."""
    if load <= 0:
        return np.zeros(0, dtype=int)
    rate = load / packet_len
    n = rng.poisson(rate * (duration + packet_len))
    starts = np.sort(rng.uniform(-packet_len, duration, size=n))
    return np.floor(starts).astype(int)


def gen_contention(cfg: ScenarioConfig, n_samples: int, rng: np.random.Generator) -> UserSignals:
    """Unslotted random access: overlapping packets simply add on the channel."""
    plen = cfg.packet_samples
    starts = packet_arrivals(cfg.load, n_samples, plen, rng)
    users = rng.integers(0, cfg.n_total, size=starts.size)
    signals = np.zeros((cfg.n_total, n_samples), dtype=complex)
    active = np.zeros((cfg.n_total, n_samples), dtype=bool)
    payload = _symbols(cfg, rng, (starts.size, plen))
    for s, u, sym in zip(starts, users, payload):
        lo, hi = max(s, 0), min(s + plen, n_samples)
        if lo >= hi:
            continue
        signals[u, lo:hi] += sym[lo - s : hi - s]
        active[u, lo:hi] = True
    return UserSignals(signals, ActivityPattern(active))


GENERATORS = {"TDMA": gen_tdma, "OFDMA": gen_ofdma, "CDMA": gen_cdma, "CONTENTION": gen_contention}


# -- channel -----------------------------------------------------------------


def rayleigh_gains(n_users: int, rng: np.random.Generator, mean_power: float = 1.0) -> np.ndarray:
    return np.sqrt(mean_power / 2) * (rng.standard_normal(n_users) + 1j * rng.standard_normal(n_users))


def apply_channel(
    signals: np.ndarray,
    snr_db: float,
    rng: np.random.Generator,
    gains: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Faded sum plus noise; returns ``(r, noise_variance)``.

    Gains have unit mean power, so the mean per-user SNR is ``snr_db``
    and the noise variance is ``10**(-snr_db/10)``.
    """
    signals = np.atleast_2d(signals)
    if signals.shape[0] < 1:
        raise ValueError("need at least one user signal")
    if gains is None:
        gains = rayleigh_gains(signals.shape[0], rng)
    r = gains @ signals
    if math.isinf(snr_db) and snr_db > 0:
        return r, 0.0
    sigma2 = 10 ** (-snr_db / 10)
    noise = np.sqrt(sigma2 / 2) * (rng.standard_normal(r.size) + 1j * rng.standard_normal(r.size))
    return r + noise, sigma2


# -- scenarios ---------------------------------------------------------------


def busy_fraction(cfg: ScenarioConfig) -> float:
    if cfg.method == "TDMA":
        return min(cfg.load, 1.0)
    if cfg.method == "CONTENTION":
        return 1.0 - math.exp(-cfg.load)
    return 1.0


@dataclass(frozen=True, eq=False)
class Scenario:
    r: np.ndarray
    noise_variance: float
    label: str
    gains: np.ndarray
    activity: ActivityPattern = field(repr=False)
    config: ScenarioConfig = field(repr=False)


def _modulation_for_trial(cfg: ScenarioConfig, rng: np.random.Generator) -> ScenarioConfig:
    # "PSK" alone stands for the class of PSK orders >= 4
    if cfg.modulation.upper() == "PSK":
        return replace(cfg, modulation=f"{int(rng.choice(PSK_ORDERS))}-PSK")
    return cfg


MAX_GROWTH = 16


def synthesize_scenario(cfg: ScenarioConfig) -> Scenario:
    """Generate the received record and its true label.

    The record is grown until the squelch keeps at least ``f * j``
    samples (or a hard cap is hit). Fading gains are drawn from their own
    stream so they stay fixed while the record grows.
    """
    root = np.random.SeedSequence(cfg.seed)
    fade_ss, mod_ss, body_ss = root.spawn(3)
    cfg = _modulation_for_trial(cfg, np.random.default_rng(mod_ss))
    gains = rayleigh_gains(cfg.n_total, np.random.default_rng(fade_ss))
    label = class_label(cfg.method, cfg.modulation)
    need = cfg.f * cfg.j
    busy = busy_fraction(cfg)
    if busy <= 0:
        n = need
    else:
        n = int(math.ceil(need / busy * 1.2)) + cfg.j
    cap = need * MAX_GROWTH
    while True:
        rng = np.random.default_rng(body_ss)
        users = GENERATORS[cfg.method](cfg, n, rng)
        r, sigma2 = apply_channel(users.signals, cfg.snr_db, rng, gains)
        kept = usable_samples(r, cfg.j, sigma2, cfg.squelch)
        if kept >= need or n >= cap or busy <= 0:
            return Scenario(r, sigma2, label, gains, users.activity, cfg)
        n = min(cap, int(n * min(need / max(kept, 1), 8.0) * 1.2) + cfg.j)


# -- capture export ----------------------------------------------------------


def write_capture(path, r: np.ndarray, noise_variance: float, cfg: ScenarioConfig | None = None, label: str | None = None):
    """Interleaved little-endian float32 I/Q plus a JSON sidecar ``<path>.json``."""
    path = Path(path)
    iq = np.empty(2 * len(r), dtype="<f4")
    iq[0::2] = np.real(r)
    iq[1::2] = np.imag(r)
    iq.tofile(path)
    meta = {
        "format": "cf32_le",
        "n_samples": int(len(r)),
        "noise_variance": float(noise_variance),
        "label": label,
        "config": cfg.to_dict() if cfg is not None else None,
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def read_capture(path) -> tuple[np.ndarray, dict]:
    """Load a capture written by :func:`write_capture`; raises OSError/ValueError on malformed input."""
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    raw = np.fromfile(path, dtype="<f4")
    if raw.size % 2:
        raise ValueError(f"{path}: odd number of float32 values, not interleaved I/Q")
    if "n_samples" in meta and raw.size // 2 != int(meta["n_samples"]):
        raise ValueError(f"{path}: expected {meta['n_samples']} samples, found {raw.size // 2}")
    r = raw[0::2].astype(float) + 1j * raw[1::2].astype(float)
    return r, meta
