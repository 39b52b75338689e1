"""Unit-power modulation alphabets and their exact moments / cumulants.

Moments are ``M_ki = E[y^(k-i) conj(y)^i]`` over equiprobable symbols.
Cumulants are obtained from moments (and back) by summing over set
partitions of the ``k`` copies, which handles the non-circular terms
(``C20``, ``C40``, ``C41`` ...) of real constellations without special
cases. Only zero-mean, odd-moment-free alphabets are supported; every
alphabet built here is symmetric under ``y -> -y``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError

SYMMETRIES = ("real", "four-fold", "none")

# (k, i) keys carried by MomentSet / CumulantSet, in field order.
ORDERS = ((2, 0), (2, 1), (4, 0), (4, 1), (4, 2), (4, 3), (6, 2), (6, 3), (6, 4), (8, 4))


@dataclass(frozen=True, eq=False)
class Constellation:
    name: str
    points: np.ndarray
    symmetry: str

    def __post_init__(self):
        pts = np.array(self.points, dtype=complex)
        # instances are cached and shared
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.symmetry not in SYMMETRIES:
            raise ConfigurationError(f"unknown symmetry {self.symmetry!r}")

    @property
    def order(self) -> int:
        return len(self.points)

    def power(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.points[rng.integers(0, self.order, size=size)]


class _OrderedSet:
    """Shared behaviour of MomentSet and CumulantSet: lookup by (k, i)."""

    def get(self, k: int, i: int) -> complex:
        if k % 2:
            return 0j
        if (k, i) in ORDERS:
            return complex(getattr(self, f"{self._prefix}{k}{i}"))
        # X_{k,i} = conj(X_{k,k-i})
        if (k, k - i) in ORDERS:
            return complex(getattr(self, f"{self._prefix}{k}{k - i}")).conjugate()
        raise KeyError((k, i))

    def as_dict(self) -> dict[str, complex]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_lookup(cls, lookup) -> "_OrderedSet":
        return cls(*(complex(lookup(k, i)) for k, i in ORDERS))


@dataclass(frozen=True)
class MomentSet(_OrderedSet):
    m20: complex
    m21: complex
    m40: complex
    m41: complex
    m42: complex
    m43: complex
    m62: complex
    m63: complex
    m64: complex
    m84: complex

    _prefix = "m"


@dataclass(frozen=True)
class CumulantSet(_OrderedSet):
    c20: complex
    c21: complex
    c40: complex
    c41: complex
    c42: complex
    c43: complex
    c62: complex
    c63: complex
    c64: complex
    c84: complex

    _prefix = "c"

    def scaled(self, power: float) -> "CumulantSet":
        """Cumulants of ``sqrt(power) * y`` (C_ki scales as power^(k/2))."""
        return CumulantSet.from_lookup(lambda k, i: self.get(k, i) * power ** (k / 2))

    def with_c21(self, c21: float) -> "CumulantSet":
        values = self.as_dict()
        values["c21"] = complex(c21)
        return CumulantSet(**values)


# -- set-partition machinery ------------------------------------------------


def _set_partitions(items: tuple[int, ...]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [(first,)] + part
        for j in range(len(part)):
            yield part[:j] + [(first,) + part[j]] + part[j + 1 :]


@lru_cache(maxsize=None)
def _even_partition_terms(k: int, i: int) -> tuple[tuple[int, tuple[tuple[int, int], ...]], ...]:
    """Partitions of k-i plain and i conjugated copies into even-sized blocks.

    Returns ``(n_blocks, ((k_b, i_b), ...))`` per partition; odd blocks are
    dropped because every odd-order moment/cumulant is zero here.
    """
    conj = tuple([0] * (k - i) + [1] * i)
    terms = []
    for part in _set_partitions(tuple(range(k))):
        if any(len(b) % 2 for b in part):
            continue
        blocks = tuple(sorted((len(b), sum(conj[x] for x in b)) for b in part))
        terms.append((len(part), blocks))
    return tuple(terms)


def _moment_from_cumulants(c: CumulantSet, k: int, i: int) -> complex:
    return sum(math.prod(c.get(kb, ib) for kb, ib in blocks) for _, blocks in _even_partition_terms(k, i))


def _cumulant_from_moments(m: MomentSet, k: int, i: int) -> complex:
    total = 0j
    for n, blocks in _even_partition_terms(k, i):
        total += (-1) ** (n - 1) * math.factorial(n - 1) * math.prod(m.get(kb, ib) for kb, ib in blocks)
    return total


def moments_to_cumulants(m: MomentSet) -> CumulantSet:
    """Zero-mean cumulants C_ki from the moment set by Moebius inversion."""
    return CumulantSet.from_lookup(lambda k, i: _cumulant_from_moments(m, k, i))


def cumulants_to_moments(c: CumulantSet) -> MomentSet:
    """Inverse of :func:`moments_to_cumulants` (sum over even partitions)."""
    return MomentSet.from_lookup(lambda k, i: _moment_from_cumulants(c, k, i))


def closed_form_moments(c: CumulantSet) -> dict[str, complex]:
    """The five explicit moment-cumulant relations used by the variance derivation.

    Written out term by term; agrees with :func:`cumulants_to_moments`
    on the moments it covers.
    """
    c20, c21, c40, c41, c42, c43 = c.c20, c.c21, c.c40, c.c41, c.c42, c.c43
    c63, c64, c84 = c.c63, c.c64, c.c84
    a20 = abs(c20) ** 2
    m84 = (
        c84
        + 16 * c63 * c21
        + 12 * (c64 * c20).real
        + 72 * c21**2 * c42
        + 18 * c42**2
        + 16 * abs(c41) ** 2
        + abs(c40) ** 2
        + 6 * (c40.conjugate() * c20**2).real
        + 96 * (c41.conjugate() * c20).real * c21
        + 36 * a20 * c42
        + 72 * a20 * c21**2
        + 24 * c21**4
        + 9 * a20**2
    )
    m63 = c63 + 6 * (c20 * c43).real + 9 * a20 * c21 + 6 * c21**3 + 9 * c21 * c42
    m42 = c42 + a20 + 2 * c21**2
    m40 = c40 + 3 * c20**2
    return {"m84": m84, "m63": m63, "m42": m42, "m40": m40, "m21": c21}


# -- alphabets --------------------------------------------------------------


def alphabet_moments(c: Constellation, weights: np.ndarray | None = None) -> MomentSet:
    """Exact moments of an equiprobable (or explicitly weighted) alphabet."""
    p = c.points
    w = np.full(len(p), 1.0 / len(p)) if weights is None else np.asarray(weights, float)
    pc = np.conj(p)
    return MomentSet.from_lookup(lambda k, i: np.sum(w * p ** (k - i) * pc**i))


def alphabet_cumulants(c: Constellation) -> CumulantSet:
    return moments_to_cumulants(alphabet_moments(c))


def _unit_power(points) -> np.ndarray:
    pts = np.asarray(points, dtype=complex)
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


def _is_pow2(n: int) -> bool:
    return n >= 2 and n & (n - 1) == 0


def _psk(order: int) -> np.ndarray:
    if order == 2:
        return np.array([-1.0, 1.0], dtype=complex)
    if order == 4:
        # QPSK is drawn on the diagonals, (+-1 +-j)/sqrt(2)
        return np.exp(1j * (np.pi / 4 + np.pi / 2 * np.arange(4)))
    return np.exp(2j * np.pi * np.arange(order) / order)


def _pam(order: int) -> np.ndarray:
    return np.arange(-(order - 1), order, 2).astype(complex)


def _qam(i_levels: int, q_levels: int) -> np.ndarray:
    re_, im_ = np.meshgrid(_pam(i_levels).real, _pam(q_levels).real, indexing="ij")
    return (re_ + 1j * im_).ravel()


def _v29() -> np.ndarray:
    axes = np.array([3, 5])
    diag = np.array([1, 3]) * (1 + 1j)
    rot = 1j ** np.arange(4)
    return np.concatenate([np.outer(rot, axes).ravel(), np.outer(rot, diag).ravel()])


def _v32() -> np.ndarray:
    grid = _qam(6, 6)
    return grid[~((np.abs(grid.real) == 5) & (np.abs(grid.imag) == 5))]


PAM_ORDERS = (4, 8, 16, 32, 64)
SQUARE_QAM_ORDERS = (16, 64, 256)
TABLE_QAM_SIDES = (4, 8, 16, 32)

_NAME_RE = [
    (re.compile(r"^(\d+)-?(PSK|PAM|QAM)$"), lambda m: (m[2], int(m[1]))),
    (re.compile(r"^(PSK|PAM)\((\d+)\)$"), lambda m: (m[1], int(m[2]))),
    (re.compile(r"^QAM\((\d+),(\d+)\)$"), lambda m: ("QAM", int(m[1]) * int(m[2]))),
]


def canonical_name(name: str) -> str:
    """Map the accepted spellings to one identifier (``'QAM(4,4)'`` -> ``'16-QAM'``)."""
    key = name.strip().upper().replace(" ", "")
    if key in ("BPSK", "2-PSK", "2PSK", "PSK(2)"):
        return "BPSK"
    if key in ("QPSK", "4-QAM", "4QAM", "QAM(2,2)"):
        return "QPSK"
    if key in ("V29", "V.29", "V32", "V.32"):
        return key.replace(".", "")
    for pattern, parse in _NAME_RE:
        m = pattern.match(key)
        if m:
            kind, order = parse(m)
            if kind == "PSK":
                return {2: "BPSK", 4: "QPSK"}.get(order, f"{order}-PSK")
            if kind == "QAM" and order == 4:
                return "QPSK"
            return f"{order}-{kind}"
    raise ConfigurationError(f"unknown modulation identifier {name!r}")


@lru_cache(maxsize=None)
def build_constellation(name: str) -> Constellation:
    """Unit-power alphabet for a modulation identifier.

    Accepts ``BPSK``, ``QPSK``, ``M-PSK``, ``M-PAM``, ``M-QAM`` (square),
    the table spellings ``PSK(M)``, ``PAM(M)``, ``QAM(a,b)``, and ``V29``/``V32``.
    """
    canon = canonical_name(name)
    if canon == "BPSK":
        return Constellation("BPSK", _psk(2), "real")
    if canon == "QPSK":
        return Constellation("QPSK", _unit_power(_psk(4)), "four-fold")
    if canon == "V29":
        return Constellation("V29", _unit_power(_v29()), "four-fold")
    if canon == "V32":
        return Constellation("V32", _unit_power(_v32()), "four-fold")
    order_s, kind = canon.split("-")
    order = int(order_s)
    if kind == "PSK":
        if not _is_pow2(order):
            raise ConfigurationError(f"PSK order must be a power of two, got {order}")
        return Constellation(canon, _psk(order), "four-fold")
    if kind == "PAM":
        if order not in PAM_ORDERS:
            raise ConfigurationError(f"PAM order must be one of {PAM_ORDERS}, got {order}")
        return Constellation(canon, _unit_power(_pam(order)), "real")
    side = math.isqrt(order)
    if side * side != order or side not in TABLE_QAM_SIDES:
        raise ConfigurationError(f"unsupported square QAM order {order}")
    return Constellation(canon, _unit_power(_qam(side, side)), "four-fold")


# Rows of the reference table: display label -> identifier.
TABLE_ROWS = {
    "BPSK": "BPSK",
    "PAM(4)": "4-PAM",
    "PAM(8)": "8-PAM",
    "PAM(16)": "16-PAM",
    "PAM(32)": "32-PAM",
    "PAM(64)": "64-PAM",
    "PSK(>=4)": "QPSK",
    "V32": "V32",
    "V29": "V29",
    "QAM(4,4)": "16-QAM",
    "QAM(8,8)": "64-QAM",
    "QAM(16,16)": "256-QAM",
    "QAM(32,32)": "1024-QAM",
}


def reference_c42_table() -> dict[str, float]:
    """Analytic C42 of every single-carrier row of the reference table."""
    return {label: alphabet_cumulants(build_constellation(ident)).c42.real for label, ident in TABLE_ROWS.items()}


def continuous_limit(kind: str, nodes: int = 8) -> tuple[Constellation, np.ndarray]:
    """Quadrature stand-in for PAM(inf) / QAM(inf): uniform density on a line or square.

    Gauss-Legendre with ``nodes`` points integrates the polynomials up to
    degree 8 exactly, so the returned weighted alphabet reproduces the
    continuous moments used by the variance formulas.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    w = w / 2
    if kind.upper() == "PAM":
        pts = x * math.sqrt(3)
        return Constellation("PAM(inf)", pts, "real"), w
    if kind.upper() == "QAM":
        a = x * math.sqrt(1.5)
        re_, im_ = np.meshgrid(a, a, indexing="ij")
        return Constellation("QAM(inf)", (re_ + 1j * im_).ravel(), "four-fold"), np.outer(w, w).ravel()
    raise ConfigurationError(f"no continuous limit for {kind!r}")
