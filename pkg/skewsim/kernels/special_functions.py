"""Gaussian kernels, Hermite polynomials and the moment tables behind the drifted series"""

import logging
import math
from enum import Enum
from functools import lru_cache
from typing import List, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import hermite_e
from scipy import special

from ..utils.errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# Largest n with n! representable as a double
FACTORIAL_CAP = 170
_FACTORIALS = special.factorial(np.arange(FACTORIAL_CAP + 1), exact=False)


class MomentIntegralKind(Enum):
    """Which tail of the Gaussian moment integral to take."""

    LOWER_TAIL = 'lower_tail'   # integral over (-inf, alpha]
    UPPER_TAIL = 'upper_tail'   # integral over [alpha, inf)


def _as_float_array(u: ArrayLike, name: str = 'u') -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {u!r}")
    return arr


def _like(result: np.ndarray, template: ArrayLike) -> ArrayLike:
    """Return a Python float when the input was a scalar."""
    if np.ndim(template) == 0:
        return float(np.asarray(result).item())
    return result


def _check_index(name: str, value: int) -> int:
    if int(value) != value or value < 0:
        raise DomainError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def factorial(n: int) -> float:
    """n! in floating point; inf beyond the double range (use log_factorial there)."""
    n = _check_index('n', n)
    if n <= FACTORIAL_CAP:
        return float(_FACTORIALS[n])
    return math.inf


def log_factorial(n: int) -> float:
    """log(n!) through the log-gamma function."""
    n = _check_index('n', n)
    return float(special.gammaln(n + 1))


def binom(n: int, k: int) -> float:
    """Binomial coefficient C(n, k) as a float; zero outside 0 <= k <= n."""
    if k < 0 or k > n:
        return 0.0
    if n <= FACTORIAL_CAP:
        return float(_FACTORIALS[n] / (_FACTORIALS[k] * _FACTORIALS[n - k]))
    return math.exp(log_factorial(n) - log_factorial(k) - log_factorial(n - k))


def normal_pdf(u: ArrayLike) -> ArrayLike:
    """Standard Gaussian density (2*pi)^(-1/2) exp(-u^2/2).

    Args:
        u: Point(s) of evaluation, finite

    Returns:
        Density value(s), same shape as u
    """
    arr = _as_float_array(u)
    return _like(np.exp(-0.5 * arr * arr - LOG_SQRT_2PI), u)


def log_normal_pdf(u: ArrayLike) -> ArrayLike:
    """Logarithm of normal_pdf; finite where the density itself underflows."""
    arr = _as_float_array(u)
    return _like(-0.5 * arr * arr - LOG_SQRT_2PI, u)


def normal_tail(u: ArrayLike) -> ArrayLike:
    """Gaussian upper tail 1 - Phi(u)."""
    arr = _as_float_array(u)
    return _like(special.ndtr(-arr), u)


def scaled_normal_tail(u: ArrayLike) -> ArrayLike:
    """Mills-type product exp(u^2/2) * (1 - Phi(u)), evaluated as one function.

    Uses erfcx so that neither factor is formed on its own; the product
    behaves like 1/(u*sqrt(2*pi)) for large u.

    Args:
        u: Point(s) of evaluation, finite

    Returns:
        exp(u^2/2) * Phi^c(u), same shape as u
    """
    arr = _as_float_array(u)
    return _like(0.5 * special.erfcx(arr / math.sqrt(2.0)), u)


def hermite_prob(n: int, w: ArrayLike) -> ArrayLike:
    """Probabilists' Hermite polynomial He_n(w) via the three-term recurrence.

    He_{n+1}(w) = w He_n(w) - n He_{n-1}(w), He_0 = 1, He_1 = w.
    """
    n = _check_index('n', n)
    arr = _as_float_array(w, 'w')
    prev = np.ones_like(arr)
    if n == 0:
        return _like(prev, w)
    cur = arr.copy()
    for k in range(1, n):
        prev, cur = cur, arr * cur - k * prev
    return _like(cur, w)


@lru_cache(maxsize=128)
def hermite_coefficients(d: int) -> Tuple[float, ...]:
    """Monomial coefficients of He_d, lowest degree first."""
    d = _check_index('d', d)
    basis = np.zeros(d + 1)
    basis[d] = 1.0
    return tuple(float(c) for c in hermite_e.herme2poly(basis))


def gaussian_moment(kind: MomentIntegralKind, q: int, alpha: ArrayLike) -> ArrayLike:
    """Truncated Gaussian moment of order q.

    LOWER_TAIL gives the integral of v^q exp(-v^2/2) over (-inf, alpha],
    UPPER_TAIL the one over [alpha, inf). Both follow
    M_q = alpha^(q-1) M_1 + (q-1) M_{q-2}.

    Args:
        kind: Which tail to integrate
        q: Moment order, q >= 0
        alpha: Truncation point(s)

    Returns:
        Moment value(s), same shape as alpha
    """
    q = _check_index('q', q)
    a = _as_float_array(alpha, 'alpha')
    edge = np.exp(-0.5 * a * a)

    if kind is MomentIntegralKind.LOWER_TAIL:
        m0, m1 = SQRT_2PI * special.ndtr(a), -edge
    elif kind is MomentIntegralKind.UPPER_TAIL:
        m0, m1 = SQRT_2PI * special.ndtr(-a), edge
    else:
        raise DomainError(f"Unknown moment kind: {kind!r}")

    moments = [m0, m1]
    for k in range(2, q + 1):
        moments.append(a ** (k - 1) * m1 + (k - 1) * moments[k - 2])
    return _like(moments[q], alpha)


class JTable:
    """Lazily extended table of J_q(omega, A) for q = 0, 1, 2, ...

    J_q(omega, A) = exp(A^2/2 + A*omega) * I_q(-(omega + A)) for A >= 0, and
    -exp(A^2/2 + A*omega) * upper-tail I_q(-(omega + A)) for A < 0. Every
    entry carries the factor exp(-omega^2/2); with ``scaled=True`` that
    factor is dropped, which keeps far-tail entries representable.

    omega may be an array; all entries then share its shape.
    """

    def __init__(self, omega: ArrayLike, a: float, scaled: bool = False):
        self.omega = _as_float_array(omega, 'omega')
        self.a = float(a)
        if not math.isfinite(self.a):
            raise DomainError(f"A must be finite, got {a!r}")
        self.scaled = scaled
        self._alpha = -(self.omega + self.a)
        self._rows: List[np.ndarray] = [self._j0(), self._j1()]

    def _j0(self) -> np.ndarray:
        sign = 1.0 if self.a >= 0 else -1.0
        v = sign * (self.omega + self.a)
        if self.scaled:
            return sign * SQRT_2PI * 0.5 * special.erfcx(v / math.sqrt(2.0))

        # exp(A^2/2 + A*omega) is below 1 wherever v < 0; clipping only
        # touches the branch np.where discards
        upper = (np.exp(-0.5 * self.omega ** 2)
                 * 0.5 * special.erfcx(np.maximum(v, 0.0) / math.sqrt(2.0)))
        exponent = np.minimum(0.5 * self.a ** 2 + self.a * self.omega, 0.0)
        lower = np.exp(exponent) * special.ndtr(-np.minimum(v, 0.0))
        return sign * SQRT_2PI * np.where(v >= 0, upper, lower)

    def _j1(self) -> np.ndarray:
        if self.scaled:
            return -np.ones_like(self.omega)
        return -np.exp(-0.5 * self.omega ** 2)

    def __getitem__(self, q: int) -> np.ndarray:
        q = _check_index('q', q)
        rows = self._rows
        while len(rows) <= q:
            k = len(rows)
            rows.append(self._alpha ** (k - 1) * rows[1] + (k - 1) * rows[k - 2])
        return rows[q]

    def __len__(self) -> int:
        return len(self._rows)

    def array(self, q_max: int) -> np.ndarray:
        """Rows 0..q_max stacked along a new leading axis."""
        self[q_max]
        return np.stack(self._rows[:q_max + 1])


def j_func(q: int, omega: ArrayLike, a: float) -> ArrayLike:
    """J_q(omega, A) for a single order q (see JTable)."""
    q = _check_index('q', q)
    return _like(JTable(omega, a)[q], omega)


def _check_hmn(h: int, m: int, n: int) -> None:
    if h not in (0, 1, 2):
        raise DomainError(f"h must be 0, 1 or 2, got {h!r}")
    _check_index('m', m)
    _check_index('n', n)


def s_func(h: int, m: int, n: int, ell: int, omega: ArrayLike, a: float,
           table: Optional[JTable] = None) -> ArrayLike:
    """Double binomial sum S^h_{m,n,ell}(omega, A).

    S = sum_r sum_s C(n,r) C(e,s) (omega+A)^(n-r) A^(e-s) J_{r+s},
    with e = 2(m - ell) + h. It equals exp(A^2/2 + A*omega) times the
    integral of (v+A+omega)^n (v+A)^e exp(-v^2/2) over v < -(omega+A).

    Args:
        h, m, n, ell: Indices, with ell <= m + h // 2
        omega: Evaluation point(s)
        a: The constant A
        table: Optional shared J table for (omega, A)

    Returns:
        S value(s)
    """
    _check_hmn(h, m, n)
    ell = _check_index('ell', ell)
    if ell > m + h // 2:
        raise DomainError(f"ell={ell} exceeds m + h//2 = {m + h // 2}")

    if table is None:
        table = JTable(omega, a)
    e = 2 * (m - ell) + h
    c = table.omega + table.a
    total = np.zeros_like(table.omega)
    for r in range(n + 1):
        inner = np.zeros_like(table.omega)
        for s in range(e + 1):
            inner = inner + binom(e, s) * table.a ** (e - s) * table[r + s]
        total = total + binom(n, r) * c ** (n - r) * inner
    return _like(total, omega)


def g_script(h: int, m: int, n: int, omega: ArrayLike, a: float,
             table: Optional[JTable] = None) -> ArrayLike:
    """Alternating sum (2m+h)! sum_ell (-1)^(ell+h) S / (2^ell ell! (2(m-ell)+h)!).

    Equals (-1)^h (w^n g(w,A) * D^(2m+h) exp(-w^2/2))(omega) where
    g(w, A) = exp(A w) 1[w < 0].
    """
    _check_hmn(h, m, n)
    if table is None:
        table = JTable(omega, a)
    d = 2 * m + h
    total = np.zeros_like(table.omega)
    for ell in range(m + h // 2 + 1):
        weight = (-1) ** (ell + h) * factorial(d) / (
            2 ** ell * factorial(ell) * factorial(d - 2 * ell))
        total = total + weight * s_func(h, m, n, ell, omega, a, table)
    return _like(total, omega)


def f_script(h: int, m: int, n: int, omega: ArrayLike, a1: float, a2: float,
             tables: Optional[Tuple[JTable, JTable]] = None) -> ArrayLike:
    """Difference G^h_{m,n}(omega, A2) - (-1)^n G^h_{m,n}(omega, A1), for A1 != A2."""
    if a1 == a2:
        raise DomainError("f_script needs A1 != A2; use the equal-skewness branch")
    t1, t2 = tables if tables is not None else (JTable(omega, a1), JTable(omega, a2))
    g2 = np.asarray(g_script(h, m, n, omega, a2, t2))
    g1 = np.asarray(g_script(h, m, n, omega, a1, t1))
    return _like(g2 - (-1) ** n * g1, omega)


def g_script_table(m_max: int, n_max: int, omega: ArrayLike, a: float,
                   scaled: bool = False) -> np.ndarray:
    """All G^h_{m,n}(omega, A) for h = 0..2, m <= m_max, n <= n_max at once.

    Same values as g_script, computed through the monomial coefficients of
    He_{2m+h} so that each S sum is shared between every (h, m).

    Returns:
        Array of shape (3, m_max + 1, n_max + 1) + omega.shape
    """
    m_max = _check_index('m_max', m_max)
    n_max = _check_index('n_max', n_max)
    table = JTable(omega, a, scaled=scaled)
    w = table.omega
    d_max = 2 * m_max + 2
    jrows = table.array(n_max + d_max)

    # K[e, r] = sum_s C(e,s) A^(e-s) J_{r+s}
    kmat = np.zeros((d_max + 1, n_max + 1) + w.shape)
    for e in range(d_max + 1):
        for s in range(e + 1):
            kmat[e] += binom(e, s) * a ** (e - s) * jrows[s:s + n_max + 1]

    # S[e, n] = sum_r C(n,r) c^(n-r) K[e, r]
    c = w + a
    cpow = [np.ones_like(w)]
    for _ in range(n_max):
        cpow.append(cpow[-1] * c)
    smat = np.zeros((d_max + 1, n_max + 1) + w.shape)
    for n in range(n_max + 1):
        for r in range(n + 1):
            smat[:, n] += binom(n, r) * cpow[n - r] * kmat[:, r]

    out = np.zeros((3, m_max + 1, n_max + 1) + w.shape)
    for h in range(3):
        for m in range(m_max + 1):
            d = 2 * m + h
            coef = np.asarray(hermite_coefficients(d))
            out[h, m] = (-1) ** h * np.tensordot(coef, smat[:d + 1], axes=1)
    return out
