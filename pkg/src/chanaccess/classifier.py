"""Two-stage access-method classifier.

Stage 1 picks the class whose theoretical C42 mean best explains the
sample mean ``W`` of the per-frame normalized C42 (Gaussian likelihood,
variance of a mean of F frames). Stage 2 flags contention when the
second moment of the frames around that class mean exceeds a chi-square
threshold built from the class's per-frame variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .class_stats import CLASS_BY_LABEL, CLASSES, ClassStatistics, build_class_table
from .estimation import FrameSeries, SquelchParams, frame_series
from .errors import InsufficientDataError

VARIANCE_FLOOR = 1e-6
# Per-frame centering leaves an O(1/J^2) spread that the O(1/J) theory
# drops; for noiseless BPSK it is 32/J^2, the largest among the
# zero-variance (constant-modulus) classes. It is chi-square shaped rather
# than Gaussian, so the floor doubles it.
CENTERING_J2_VAR = 64.0
CONTENTION = "contention"


@dataclass(frozen=True)
class AnalysisParams:
    """What the sensing node knows when classifying one capture.

    ``rho`` of ``None`` estimates the noisy-power ratio per frame from the
    frame power and the noise variance; a number pins it for every frame.
    """

    j: int = 500
    f: int = 200
    noise_variance: float = 0.0
    n_total: int = 4
    n_total_cdma: int = 16
    p_c_given_t: float = 0.05
    squelch: SquelchParams | None = SquelchParams()
    rho: float | None = None
    debias: bool = True


@dataclass(frozen=True)
class ClassificationResult:
    stage1_label: str
    contention: bool
    w: float
    varsigma2: float
    tau: float
    per_class_loglik: dict = field(default_factory=dict)
    frames_used: int = 0

    @property
    def verdict(self) -> str:
        return CONTENTION if self.contention else self.stage1_label

    @property
    def method(self) -> str:
        return "CONTENTION" if self.contention else CLASS_BY_LABEL[self.stage1_label].method

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "method": self.method,
            "stage1_label": self.stage1_label,
            "contention": self.contention,
            "W": self.w,
            "varsigma2": self.varsigma2,
            "tau": self.tau,
            "frames_used": self.frames_used,
            "per_class_loglik": self.per_class_loglik,
        }


def sample_mean_w(fs: FrameSeries) -> float:
    if fs.frames_used < 2:
        raise InsufficientDataError("need at least two frames")
    return float(np.mean(fs.values))


def effective_variance(stats: ClassStatistics) -> float:
    """Class variance with the floors that keep noiseless constant-modulus classes usable."""
    return max(stats.var, VARIANCE_FLOOR, CENTERING_J2_VAR / stats.j**2)


def stage1_classify(w: float, table, f: int) -> tuple[str, dict[str, float]]:
    """Maximum-likelihood class for the frame-mean ``w``; ties go to the earlier class."""
    if not table:
        raise ValueError("empty class table")
    loglik = {}
    for stats in table:
        var = effective_variance(stats) / f
        loglik[stats.label] = -0.5 * (math.log(2 * math.pi * var) + (w - stats.mean) ** 2 / var)
    best = max(loglik.values())
    label = next(lab for lab, ll in loglik.items() if ll == best)
    return label, loglik


def chi_square_quantile(p: float, dof: float) -> float:
    if not 0 < p < 1:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if not dof > 0:
        raise ValueError(f"degrees of freedom must be positive, got {dof}")
    return float(chi2.ppf(p, dof))


def stage2_contention(fs: FrameSeries, m_hat: ClassStatistics, p_c_given_t: float) -> tuple[bool, float, float]:
    """``(contention, varsigma2, tau)`` for the frames around the stage-1 class mean."""
    if not 0 < p_c_given_t < 1:
        raise ValueError("p_c_given_t must lie in (0, 1)")
    if fs.frames_used < 2:
        raise InsufficientDataError("need at least two frames")
    varsigma2 = float(np.mean((fs.values - m_hat.mean) ** 2))
    # Frames with unequal rho give a weighted chi-square; match its first two
    # moments with a scaled chi-square on fewer degrees of freedom.
    dof = fs.frames_used / max(m_hat.heterogeneity, 1.0)
    tau = effective_variance(m_hat) * chi_square_quantile(1 - p_c_given_t, dof) / dof
    return varsigma2 >= tau, varsigma2, tau


def class_table_for(fs: FrameSeries, params: AnalysisParams) -> list[ClassStatistics]:
    rho = fs.rho() if params.rho is None else params.rho
    table = []
    for spec in CLASSES:
        n = params.n_total_cdma if spec.method == "CDMA" else params.n_total
        table.extend(build_class_table(n, rho, fs.frame_length, classes=(spec,)))
    return table


def classify_frames(fs: FrameSeries, params: AnalysisParams) -> ClassificationResult:
    table = class_table_for(fs, params)
    w = sample_mean_w(fs)
    label, loglik = stage1_classify(w, table, fs.frames_used)
    m_hat = next(s for s in table if s.label == label)
    flag, varsigma2, tau = stage2_contention(fs, m_hat, params.p_c_given_t)
    return ClassificationResult(label, flag, w, varsigma2, tau, loglik, fs.frames_used)


def classify(r, params: AnalysisParams) -> ClassificationResult:
    fs = frame_series(r, params.j, params.f, params.noise_variance, params.squelch, params.debias)
    return classify_frames(fs, params)
