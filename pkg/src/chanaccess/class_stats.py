"""Theoretical mean and per-frame variance of the normalized C42 per class.

Variances are returned as ``var`` (not ``J * var``); pass ``j`` to pick
the frame length. All variance routines broadcast over an array of
noisy-power ratios ``rho`` so a table can be evaluated per frame.

The variance model assumes the normalizing power is known exactly, so it
describes ``C42_hat / P**2`` with the true signal power ``P``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constellations import (
    CumulantSet,
    MomentSet,
    alphabet_cumulants,
    build_constellation,
    canonical_name,
    cumulants_to_moments,
    moments_to_cumulants,
)
from .errors import ConfigurationError

# Gaussian estimator variance of C42 for a unit-power circular Gaussian frame.
GAUSSIAN_J_VAR = 4.0
# BPSK subcarriers make the OFDM time signal conjugate-symmetric, so every
# sample appears twice within a symbol and the effective sample count halves.
BPSK_OFDM_J_VAR = 8.0


@dataclass(frozen=True)
class ClassStatistics:
    label: str
    mean: float
    var: float
    j: int
    # mean(v^2) / mean(v)^2 over per-frame variances; 1 when all frames share one rho
    heterogeneity: float = 1.0


@dataclass(frozen=True)
class NoisyPowerRatio:
    """``C21_y / (C21_y - noise)``; equals ``1 + 1/snr`` for a unit-power signal."""

    rho: float

    def __post_init__(self):
        if not self.rho >= 1.0:
            raise ValueError(f"rho must be >= 1, got {self.rho}")

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "NoisyPowerRatio":
        if math.isinf(snr_db) and snr_db > 0:
            return cls(1.0)
        return cls(1.0 + 10 ** (-snr_db / 10))

    @classmethod
    def from_powers(cls, c21_y: float, noise_variance: float) -> "NoisyPowerRatio":
        return cls(c21_y / (c21_y - noise_variance))


def spread_factor(var) -> float:
    v = np.atleast_1d(np.asarray(var, dtype=float))
    m = float(np.mean(v))
    return float(np.mean(v**2)) / m**2 if m > 0 else 1.0


def _rho_value(rho):
    if isinstance(rho, NoisyPowerRatio):
        return rho.rho
    return np.asarray(rho, dtype=float) if np.ndim(rho) else float(rho)


def general_c42_variance(m: MomentSet, j: int) -> float:
    """Asymptotic variance of the unbiased C42 estimator from the signal moments."""
    m20, m21, m40, m41, m42 = m.m20, m.m21.real, m.m40, m.m41, m.m42.real
    m62, m63, m84 = m.m62, m.m63.real, m.m84.real
    a20 = abs(m20) ** 2
    jvar = (
        m84
        - m42**2
        + 8 * m21 * (2 * m21 * (m42 - m21**2 - a20) + 2 * (m41 * m20.conjugate()).real - m63 + m21 * m42)
        + 2 * (m20.conjugate() * (m40 * m20.conjugate() - 2 * m62)).real
        + 2 * a20 * (3 * m42 - 2 * a20)
    )
    return jvar / j


def noisy_variance_general(c: CumulantSet, rho, j: int):
    """Variance of the normalized C42 for a unit-power signal plus circular noise.

    ``c`` holds the noiseless unit-power cumulants; noise only moves C21 to
    ``rho``. This is the moment form rewritten through the moment-cumulant
    relations with no symmetry assumed.
    """
    r = _rho_value(rho)
    c20, c40, c41, c62 = c.c20, c.c40, c.c41, c.c62
    c42, c63, c84 = c.c42.real, c.c63.real, c.c84.real
    a20 = abs(c20) ** 2
    jvar = (
        c84
        + 8 * r * c63
        + 8 * (c62.conjugate() * c20).real
        + 17 * c42**2
        + 20 * r**2 * c42
        + 16 * a20 * c42
        + 16 * abs(c41) ** 2
        + 32 * r * (c41.conjugate() * c20).real
        + abs(c40) ** 2
        + 4 * (c40.conjugate() * c20**2).real
        + 16 * r**2 * a20
        + 4 * a20**2
        + 4 * r**4
    )
    return jvar / j


def noisy_variance_real(c: CumulantSet, rho, j: int, symmetry: str = "real"):
    """Real constellations: every C_k,i equals the real cumulant kappa_k, C20 = 1."""
    if symmetry != "real":
        raise ValueError(f"real-constellation variance needs symmetry 'real', got {symmetry!r}")
    r = _rho_value(rho)
    k4, k6, k8 = c.c42.real, c.c63.real, c.c84.real
    s = c.c20.real
    jvar = 34 * k4**2 + k4 * (20 * r**2 + 32 * r * s + 20 * s**2) + 8 * k6 * (r + s) + k8 + 4 * r**4 + 16 * r**2 * s**2 + 4 * s**4
    return jvar / j


def noisy_variance_fourfold(c: CumulantSet, rho, j: int, symmetry: str = "four-fold"):
    if symmetry != "four-fold":
        raise ValueError(f"four-fold variance needs symmetry 'four-fold', got {symmetry!r}")
    r = _rho_value(rho)
    c40, c42, c63, c84 = c.c40, c.c42.real, c.c63.real, c.c84.real
    jvar = c84 + abs(c40) ** 2 + 8 * r * c63 + 20 * r**2 * c42 + 4 * r**4 + 17 * c42**2
    return jvar / j


def constellation_variance(name: str, rho, j: int):
    con = build_constellation(name)
    c = alphabet_cumulants(con)
    if con.symmetry == "real":
        return noisy_variance_real(c, rho, j)
    if con.symmetry == "four-fold":
        return noisy_variance_fourfold(c, rho, j)
    return noisy_variance_general(c, rho, j)


def ofdm_statistics(sub_mod: str, rho, j: int, label: str = "") -> ClassStatistics:
    """OFDM time samples are near-Gaussian: mean 0, J var = 4 rho^4 (8 for BPSK)."""
    canon = canonical_name(sub_mod)
    r = _rho_value(rho)
    if canon == "BPSK":
        jvar = BPSK_OFDM_J_VAR * r**4
    elif build_constellation(canon).symmetry == "four-fold":
        gauss = CumulantSet(*([0j] * 10)).with_c21(1.0)
        jvar = j * noisy_variance_fourfold(gauss, r, j)
    else:
        raise ConfigurationError(f"no OFDM statistics for sub-modulation {sub_mod!r}")
    return ClassStatistics(label or f"{canon}-OFDM", 0.0, float(np.mean(jvar)) / j, j, spread_factor(jvar))


def sum_of_users_cumulants(chip: str, powers) -> CumulantSet:
    """Cumulants of a sum of independent users sharing one chip alphabet.

    ``powers`` are the received user powers; the result is normalized to
    unit total power. Cumulants add, and scaling a user by sqrt(p)
    scales its C_k,i by p^(k/2).
    """
    p = np.asarray(powers, dtype=float)
    if p.size < 1 or np.any(p <= 0):
        raise ValueError("need at least one user with positive power")
    p = p / p.sum()
    base = alphabet_cumulants(build_constellation(chip))
    return CumulantSet.from_lookup(lambda k, i: base.get(k, i) * np.sum(p ** (k / 2)))


def cdma_moments(n_total: int, chip: str = "BPSK") -> MomentSet:
    """Moments of an equal-power sum of ``n_total`` i.i.d. chip streams."""
    if n_total < 1:
        raise ValueError(f"n_total must be >= 1, got {n_total}")
    return cumulants_to_moments(sum_of_users_cumulants(chip, np.ones(n_total)))


def cdma_statistics(n_total: int, rho, j: int, chip: str = "BPSK", label: str = "") -> ClassStatistics:
    """Chip-correlation-free CDMA model: mean C42(chip)/N, variance via the moment form."""
    if n_total < 1:
        raise ValueError(f"n_total must be >= 1, got {n_total}")
    c = moments_to_cumulants(cdma_moments(n_total, chip))
    var = noisy_variance_general(c, rho, j)
    canon = canonical_name(chip)
    return ClassStatistics(label or f"{canon}-CDMA", c.c42.real, float(np.mean(var)), j, spread_factor(var))


def multiuser_statistics(per_user, noise_variance: float, j: int) -> tuple[float, float]:
    """Mean and variance of the normalized C42 when several users add on the channel.

    ``per_user`` is a sequence of ``(C21_u, C42_u, var_u)``; noise enters
    with the Gaussian-frame estimator variance ``4/J``.
    """
    users = np.asarray(list(per_user), dtype=float).reshape(-1, 3)
    if len(users) == 0:
        raise ValueError("need at least one user")
    c21, c42, var = users.T
    if np.any(c21 <= 0):
        raise ValueError("user powers must be positive")
    total = c21.sum()
    mean = np.sum(c21**2 * c42) / total**2
    variance = (np.sum(c21**4 * var) + noise_variance**4 * GAUSSIAN_J_VAR / j) / total**4
    return float(mean), float(variance)


def mixture_statistics(components) -> tuple[float, float]:
    """Law of total variance over ``(prob, mean, var)`` components."""
    comp = np.asarray(list(components), dtype=float).reshape(-1, 3)
    p, mu, var = comp.T
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("mixture probabilities must be nonnegative and sum to 1")
    mean = np.sum(p * mu)
    return float(mean), float(np.sum(p * (var + (mu - mean) ** 2)))


# -- hypothesis classes -----------------------------------------------------


@dataclass(frozen=True)
class ClassSpec:
    label: str
    method: str
    modulation: str


CLASSES = (
    ClassSpec("M1", "TDMA", "BPSK"),
    ClassSpec("M2", "TDMA", "QPSK"),
    ClassSpec("M3", "TDMA", "4-PAM"),
    ClassSpec("M4", "TDMA", "8-PAM"),
    ClassSpec("M5", "TDMA", "16-PAM"),
    ClassSpec("M6", "TDMA", "32-PAM"),
    ClassSpec("M7", "TDMA", "64-PAM"),
    ClassSpec("M8", "TDMA", "16-QAM"),
    ClassSpec("M9", "TDMA", "64-QAM"),
    ClassSpec("M10", "TDMA", "256-QAM"),
    ClassSpec("M11", "OFDMA", "QPSK"),
    ClassSpec("M12", "OFDMA", "16-QAM"),
    ClassSpec("M13", "CDMA", "BPSK"),
    ClassSpec("M14", "CDMA", "QPSK"),
    ClassSpec("M15", "CDMA", "16-QAM"),
)
CLASS_BY_LABEL = {c.label: c for c in CLASSES}
PSK_ORDERS = (4, 8, 16, 32, 64)


def class_label(method: str, modulation: str) -> str:
    """Hypothesis label of a (method, modulation) pair; any PSK of order >= 4 maps to M2."""
    method = method.upper()
    if method == "CONTENTION":
        return "contention"
    canon = canonical_name(modulation)
    if method == "TDMA" and canon.endswith("-PSK"):
        canon = "QPSK"
    for spec in CLASSES:
        if spec.method == method and spec.modulation == canon:
            return spec.label
    raise ConfigurationError(f"({method}, {modulation}) is not a listed class")


def class_statistics(spec: ClassSpec, n_total: int, rho, j: int) -> ClassStatistics:
    if spec.method == "TDMA":
        mean = alphabet_cumulants(build_constellation(spec.modulation)).c42.real
        var = constellation_variance(spec.modulation, rho, j)
        return ClassStatistics(spec.label, mean, float(np.mean(var)), j, spread_factor(var))
    if spec.method == "OFDMA":
        return ofdm_statistics(spec.modulation, rho, j, label=spec.label)
    return cdma_statistics(n_total, rho, j, chip=spec.modulation, label=spec.label)


def build_class_table(n_total: int, rho, j: int, classes=CLASSES) -> list[ClassStatistics]:
    """Statistics for every listed class.

    ``rho`` may be a scalar or a per-frame array; with an array the
    variance is the frame average, i.e. the mixture over frames that all
    hold the same number of users.
    """
    if n_total < 1:
        raise ValueError(f"n_total must be >= 1, got {n_total}")
    if np.any(np.asarray(_rho_value(rho)) < 1.0):
        raise ValueError("rho must be >= 1")
    return [class_statistics(spec, n_total, rho, j) for spec in classes]


def table_csv_rows(n_total: int, rho, j: int, n_total_cdma: int | None = None) -> list[dict]:
    """One row per class: label, method, modulation, mean and J times the variance."""
    rows = []
    for spec in CLASSES:
        n = n_total_cdma if spec.method == "CDMA" and n_total_cdma else n_total
        stats = class_statistics(spec, n, rho, j)
        rows.append(
            {
                "label": stats.label,
                "method": spec.method,
                "modulation": spec.modulation,
                "mean": round(stats.mean, 6),
                "j_var": round(stats.var * j, 6),
            }
        )
    return rows


def reference_table(j: int = 1) -> list[dict]:
    """Noiseless C42 and J times the estimator variance for every reference row.

    Rows follow the single-carrier table, then the continuous PAM/QAM limits
    and the two OFDM rows.
    """
    from .constellations import TABLE_ROWS, alphabet_moments, continuous_limit

    rows = []
    for label, ident in TABLE_ROWS.items():
        con = build_constellation(ident)
        c = alphabet_cumulants(con)
        rows.append({"row": label, "c42": round(c.c42.real, 6), "j_var": round(float(general_c42_variance(alphabet_moments(con), j)) * j, 6)})
    for kind in ("PAM", "QAM"):
        con, w = continuous_limit(kind)
        m = alphabet_moments(con, w)
        rows.append({"row": f"{kind}(inf)", "c42": round(moments_to_cumulants(m).c42.real, 6), "j_var": round(float(general_c42_variance(m, j)) * j, 6)})
    for sub in ("BPSK", "QPSK"):
        s = ofdm_statistics(sub, 1.0, j)
        rows.append({"row": f"{sub}-OFDM", "c42": 0.0, "j_var": round(s.var * j, 6)})
    return rows
