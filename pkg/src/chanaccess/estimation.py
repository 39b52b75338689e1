"""Frame-based C42 estimation, power normalization and squelch."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFrameError, InsufficientDataError

MIN_FRAME = 4
# frames whose estimated signal power is below this fraction of the noise
# variance are treated as noise-only and dropped
EPS_POWER_FRACTION = 0.05
DEFAULT_KAPPA = 2.0
DEFAULT_WINDOW = 32
# a J-sample block mean of noise power has relative spread 1/sqrt(J), so a
# much lower factor than the sample gate's still rejects noise-only blocks
DEFAULT_FRAME_KAPPA = 1.25
GRANULARITIES = ("frame", "sample")


@dataclass(frozen=True)
class SquelchParams:
    """Power gate applied before framing.

    ``granularity="frame"`` keeps whole ``j``-sample blocks of the raw
    record whose mean power exceeds ``kappa`` times the noise variance, so
    frames never straddle a gap between bursts. ``"sample"`` drops
    individual samples by their ``window``-sample moving average and then
    frames the concatenated survivors. The two gates have separate factors.
    """

    kappa: float = DEFAULT_KAPPA
    window: int = DEFAULT_WINDOW
    granularity: str = "frame"
    frame_kappa: float = DEFAULT_FRAME_KAPPA

    def __post_init__(self):
        if not self.kappa > 1:
            raise ValueError(f"squelch kappa must exceed 1, got {self.kappa}")
        if not self.frame_kappa > 1:
            raise ValueError(f"frame gate kappa must exceed 1, got {self.frame_kappa}")
        if self.window < 8:
            raise ValueError(f"squelch window must be >= 8 samples, got {self.window}")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"squelch granularity must be one of {GRANULARITIES}, got {self.granularity!r}")


@dataclass(frozen=True, eq=False)
class FrameSeries:
    """Normalized C42 per usable frame, plus the per-frame signal power estimate."""

    values: np.ndarray
    frame_length: int
    noise_variance: float
    signal_power: np.ndarray = field(repr=False)

    @property
    def frames_used(self) -> int:
        return len(self.values)

    def rho(self) -> np.ndarray:
        """Per-frame ``C21_hat / (C21_hat - noise)``."""
        return (self.signal_power + self.noise_variance) / self.signal_power


def center_signal(r) -> np.ndarray:
    r = np.asarray(r, dtype=complex)
    if r.size == 0:
        raise ValueError("cannot center an empty signal")
    return r - r.mean()


def estimate_c42_frame(y) -> tuple[float, float, complex]:
    """Sample-moment estimate ``(C42, C21, C20)`` of one centered frame."""
    y = np.asarray(y, dtype=complex)
    if y.size < MIN_FRAME:
        raise ValueError(f"frame needs at least {MIN_FRAME} samples, got {y.size}")
    c42, c21, c20 = _c42_frames(y[np.newaxis, :])
    return float(c42[0]), float(c21[0]), complex(c20[0])


def _c42_frames(frames: np.ndarray):
    p = frames.real**2 + frames.imag**2
    m21 = p.mean(axis=1)
    m20 = (frames * frames).mean(axis=1)
    m42 = (p * p).mean(axis=1)
    c42 = m42 - np.abs(m20) ** 2 - 2 * m21**2
    return c42, m21, m20


def debias_c42(c42, c21, c20, j: int):
    """Remove the finite-frame bias of the plug-in C42 of a centered frame.

    The plug-in estimate has mean ``C42 - (3 M42 - |M20|^2 - 2 M21^2)/J``
    from squaring sample moments, and centering shrinks what is left by
    ``1 - 4/J``. Undoing both leaves an O(1/J^2) bias.
    """
    if j <= 4:
        raise ValueError("bias correction needs j > 4")
    m42 = c42 + np.abs(c20) ** 2 + 2 * np.asarray(c21) ** 2
    return (j * c42 + 2 * m42) / (j - 1) * j / (j - 4)


def normalize_c42(c42: float, c21: float, noise_variance: float) -> float:
    power = c21 - noise_variance
    if not power > EPS_POWER_FRACTION * noise_variance:
        raise DegenerateFrameError(f"signal power {power:.3g} too small for noise variance {noise_variance:.3g}")
    return c42 / power**2


def moving_power(r: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average of |r|^2; partial windows at the ends."""
    p = np.abs(r) ** 2
    kernel = np.ones(window)
    total = np.convolve(p, kernel, mode="same")
    count = np.convolve(np.ones_like(p), kernel, mode="same")
    return total / count


def squelch_mask(r, noise_variance: float, kappa: float = DEFAULT_KAPPA, window: int = DEFAULT_WINDOW) -> np.ndarray:
    SquelchParams(kappa, window)
    r = np.asarray(r, dtype=complex)
    if r.size == 0:
        return np.zeros(0, dtype=bool)
    return moving_power(r, window) > kappa * noise_variance


def squelch(r, noise_variance: float, kappa: float = DEFAULT_KAPPA, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Keep samples whose local average power exceeds ``kappa * noise_variance``."""
    r = np.asarray(r, dtype=complex)
    return r[squelch_mask(r, noise_variance, kappa, window)]


def frame_gate_mask(r, j: int, noise_variance: float, kappa: float = DEFAULT_FRAME_KAPPA) -> np.ndarray:
    """One flag per complete ``j``-sample block: mean power above ``kappa * noise_variance``."""
    r = np.asarray(r, dtype=complex)
    n = r.size // j
    blocks = r[: n * j].reshape(n, j)
    return (blocks.real**2 + blocks.imag**2).mean(axis=1) > kappa * noise_variance


def usable_samples(r, j: int, noise_variance: float, squelch_params: "SquelchParams | None") -> int:
    """How many samples survive the gate, in whole frames for frame gating."""
    r = np.asarray(r, dtype=complex)
    if squelch_params is None:
        return r.size
    if squelch_params.granularity == "frame":
        return int(frame_gate_mask(r, j, noise_variance, squelch_params.frame_kappa).sum()) * j
    return int(squelch_mask(r, noise_variance, squelch_params.kappa, squelch_params.window).sum())


def estimate_noise_floor(r, kappa: float = DEFAULT_KAPPA, window: int = DEFAULT_WINDOW, iterations: int = 5) -> float:
    """Median power of the squelch-rejected samples, iterated from the overall median.

    Off by default everywhere; the pipeline takes the noise variance as known.
    """
    r = np.asarray(r, dtype=complex)
    p = np.abs(r) ** 2
    # median of an exponential variable is ln(2) times its mean
    sigma2 = float(np.median(p)) / np.log(2)
    for _ in range(iterations):
        rejected = ~squelch_mask(r, sigma2, kappa, window)
        if not rejected.any():
            break
        sigma2 = float(np.median(p[rejected])) / np.log(2)
    return sigma2


def frame_series(
    r,
    j: int,
    f: int,
    noise_variance: float,
    squelch_params: SquelchParams | None = SquelchParams(),
    debias: bool = True,
) -> FrameSeries:
    """Squelch, take up to ``f`` ``j``-sample frames and normalize each C42.

    Pass ``squelch_params=None`` to skip squelching and ``debias=False`` to
    keep the plain plug-in estimate; debiasing corrects both C42 and the
    centered power estimate. Degenerate frames are dropped; fewer
    than two usable frames raises InsufficientDataError.
    """
    if j < MIN_FRAME:
        raise ValueError(f"frame length must be >= {MIN_FRAME}")
    if f < 1:
        raise ValueError("need f >= 1")
    r = np.asarray(r, dtype=complex)
    if squelch_params is not None and squelch_params.granularity == "frame":
        n = r.size // j
        frames = r[: n * j].reshape(n, j)
        frames = frames[frame_gate_mask(r, j, noise_variance, squelch_params.frame_kappa)][:f]
    else:
        if squelch_params is not None:
            r = squelch(r, noise_variance, squelch_params.kappa, squelch_params.window)
        n_frames = min(f, r.size // j)
        frames = r[: n_frames * j].reshape(n_frames, j)
    frames = frames - frames.mean(axis=1, keepdims=True)
    c42, c21, c20 = _c42_frames(frames)
    if debias:
        c42 = debias_c42(c42, c21, c20, j)
        c21 = c21 * j / (j - 1)
    power = c21 - noise_variance
    ok = power > EPS_POWER_FRACTION * noise_variance
    if ok.sum() < 2:
        raise InsufficientDataError(f"only {int(ok.sum())} usable frames of {j} samples after squelch")
    return FrameSeries(c42[ok] / power[ok] ** 2, j, float(noise_variance), power[ok])
