"""
Log-space evaluation of the first- and second-moment formulas for independent
sets in sparse random graphs, plus the derived thresholds.

Every binomial goes through ``scipy.special.gammaln``; no factorial products are
formed. Quantities are carried as ``LogValue`` so that numbers like
C(10^6, 10^5) never overflow.
"""
import math
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import gammaln, logsumexp

from constants import FLOOR_EPS
from errors import InfeasibleOverlap, InvalidParameter, NoRootError, UndefinedRatio

Number = Union[int, float]


@total_ordering
@dataclass(frozen=True)
class LogValue:
    """
    A real number stored as (sign, natural log of the magnitude).

    Args:
        sign: -1, 0 or +1
        log_mag: log|x|; must be -inf exactly when sign is 0
    """
    sign: int
    log_mag: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise InvalidParameter(f"sign must be -1, 0 or 1, got {self.sign}")
        if math.isnan(self.log_mag):
            raise InvalidParameter("log magnitude is NaN")
        if (self.sign == 0) != (self.log_mag == -math.inf):
            raise InvalidParameter("sign 0 and log magnitude -inf must go together")
        object.__setattr__(self, "log_mag", float(self.log_mag))

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(0, -math.inf)

    @classmethod
    def one(cls) -> "LogValue":
        return cls(1, 0.0)

    @classmethod
    def from_log(cls, log_mag: float) -> "LogValue":
        """Positive value exp(log_mag); -inf gives zero."""
        log_mag = float(log_mag)
        return cls.zero() if log_mag == -math.inf else cls(1, log_mag)

    @classmethod
    def from_float(cls, x: Number) -> "LogValue":
        if x == 0:
            return cls.zero()
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @staticmethod
    def coerce(x: Union["LogValue", Number]) -> "LogValue":
        return x if isinstance(x, LogValue) else LogValue.from_float(x)

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.log_mag)
        except OverflowError:
            return self.sign * math.inf

    def __float__(self) -> float:
        return self.to_float()

    def __neg__(self) -> "LogValue":
        return LogValue(-self.sign, self.log_mag)

    def __mul__(self, other) -> "LogValue":
        other = LogValue.coerce(other)
        if self.sign == 0 or other.sign == 0:
            return LogValue.zero()
        return LogValue(self.sign * other.sign, self.log_mag + other.log_mag)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogValue":
        other = LogValue.coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("LogValue division by zero")
        if self.sign == 0:
            return LogValue.zero()
        return LogValue(self.sign * other.sign, self.log_mag - other.log_mag)

    def __add__(self, other) -> "LogValue":
        other = LogValue.coerce(other)
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        if self.sign == other.sign:
            return LogValue(self.sign, float(np.logaddexp(self.log_mag, other.log_mag)))
        big, small = (self, other) if self.log_mag >= other.log_mag else (other, self)
        if big.log_mag == small.log_mag:
            return LogValue.zero()
        return LogValue(big.sign, big.log_mag + math.log1p(-math.exp(small.log_mag - big.log_mag)))

    __radd__ = __add__

    def __sub__(self, other) -> "LogValue":
        return self + (-LogValue.coerce(other))

    def __rsub__(self, other) -> "LogValue":
        return LogValue.coerce(other) - self

    def __pow__(self, p: Number) -> "LogValue":
        if self.sign == 0:
            if p > 0:
                return LogValue.zero()
            if p == 0:
                return LogValue.one()
            raise ZeroDivisionError("zero raised to a negative power")
        if self.sign < 0:
            if float(p) != int(p):
                raise InvalidParameter("negative LogValue raised to a non-integer power")
            sign = -1 if int(p) % 2 else 1
            return LogValue(sign, p * self.log_mag)
        return LogValue(1, p * self.log_mag)

    def __lt__(self, other) -> bool:
        other = LogValue.coerce(other)
        if self.sign != other.sign:
            return self.sign < other.sign
        if self.sign == 0:
            return False
        if self.sign > 0:
            return self.log_mag < other.log_mag
        return self.log_mag > other.log_mag

    def to_dict(self) -> Dict:
        return {"sign": self.sign, "log_mag": self.log_mag}


@dataclass
class Estimate:
    """A value together with metadata flags describing how it was evaluated."""
    value: Union[LogValue, float]
    meta: Dict = field(default_factory=dict)


@dataclass
class SecondMoment:
    """Terms a_0..a_k and their sum, the ratio E[X^2]/E[X]^2."""
    terms: List[LogValue]
    ratio: LogValue


@dataclass
class TermRatio:
    """b_i = a_{i+1}/a_i plus the crossing indices of the whole b-sequence."""
    value: LogValue
    i1: Optional[int]
    i2: Optional[int]


def log_binom(n, k):
    """log C(n, k) via log-gamma; -inf outside 0 <= k <= n. Accepts arrays."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    valid = (k >= 0) & (k <= n) & (n >= 0)
    safe_n = np.where(valid, n, 0.0)
    safe_k = np.where(valid, k, 0.0)
    out = np.where(valid, gammaln(safe_n + 1) - gammaln(safe_k + 1) - gammaln(safe_n - safe_k + 1), -np.inf)
    return float(out) if out.ndim == 0 else out


def _m_log(m: int, base: float) -> float:
    """m * log(base) with the convention 0^0 = 1."""
    if m == 0:
        return 0.0
    if base <= 0:
        return -math.inf
    return m * math.log(base)


def _floor_size(x: float) -> int:
    return int(math.floor(x + FLOOR_EPS))


def _check_nmk(n: int, m: int, k: int) -> None:
    if n < 1:
        raise InvalidParameter(f"n must be positive, got {n}")
    if m < 0:
        raise InvalidParameter(f"m must be non-negative, got {m}")
    if not 0 <= k <= n:
        raise InvalidParameter(f"k must lie in [0, n], got k={k}, n={n}")


def expected_count_star(n: int, m: int, k: int) -> LogValue:
    """E[X_k] in G*(n, m): C(n,k) (1 - (k/n)^2)^m."""
    _check_nmk(n, m, k)
    s2 = (k / n) ** 2
    if m and s2 >= 1.0:
        return LogValue.zero()
    edge_term = m * math.log1p(-s2) if m else 0.0
    return LogValue.from_log(log_binom(n, k) + edge_term)


def expected_count_gnm(n: int, m: int, k: int) -> LogValue:
    """E[X_k] in G(n, m): C(n,k) C(C(n,2)-C(k,2), m) / C(C(n,2), m)."""
    _check_nmk(n, m, k)
    total = math.comb(n, 2)
    if m > total:
        raise InvalidParameter(f"m={m} exceeds C({n},2)={total}")
    pool = total - math.comb(k, 2)
    if m > pool:
        return LogValue.zero()
    return LogValue.from_log(log_binom(n, k) + log_binom(pool, m) - log_binom(total, m))


def _normalized_log_expectation(n: int, m: int, k: int) -> float:
    return expected_count_star(n, m, k).log_mag / k


def k_epsilon(n: int, m: int, eps: float) -> int:
    """
    The k in [1, n] whose normalized log-expectation ln E[X_k]/k is closest to eps.

    The profile is decreasing in k, so the crossing is located by bisection.

    Raises:
        NoRootError: If ln E[X_k]/k - eps does not change sign on [1, n]
    """
    _check_nmk(n, m, 1)

    def gap(k: int) -> float:
        return _normalized_log_expectation(n, m, k) - eps

    lo, hi = 1, n
    if gap(lo) <= 0 or gap(hi) >= 0:
        raise NoRootError(f"ln E[X_k]/k - {eps} has no sign change on [1, {n}] (n={n}, m={m})")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if gap(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(gap(lo)) <= abs(gap(hi)) else hi


def delta_k(n: int, k: int) -> Estimate:
    """Leading terms 2(n/k) ln(n/k) + 2(n/k); the lower-order term is dropped."""
    if not 0 < k <= n:
        raise InvalidParameter(f"need 0 < k <= n, got k={k}, n={n}")
    r = n / k
    return Estimate(2 * r * math.log(r) + 2 * r, {"leading_order_only": True})


def _second_moment_logs(n: int, m: int, k: int) -> np.ndarray:
    s2 = (k / n) ** 2
    denom_base = 1.0 - s2
    if m and denom_base <= 0:
        raise UndefinedRatio(f"E[X_{k}] vanishes for k=n={n} with m={m} edges")
    i = np.arange(k + 1)
    logs = log_binom(k, i) + log_binom(n - k, k - i) - log_binom(n, k) - 2 * _m_log(m, denom_base)
    bases = 1.0 - 2 * s2 + (i / n) ** 2
    edge = np.array([_m_log(m, b) for b in bases])
    return np.atleast_1d(logs + edge)


def second_moment_terms(n: int, m: int, k: int) -> SecondMoment:
    """
    The sequence a_0..a_k whose sum is E[X^2]/E[X]^2 in G*(n, m), where a_i is
    the contribution of pairs of k-sets sharing i vertices:

        a_i = C(k,i) C(n-k,k-i) (1 - 2(k/n)^2 + (i/n)^2)^m / [C(n,k) (1-(k/n)^2)^{2m}]
    """
    _check_nmk(n, m, k)
    logs = _second_moment_logs(n, m, k)
    terms = [LogValue.from_log(x) for x in logs]
    finite = logs[np.isfinite(logs)]
    ratio = LogValue.from_log(float(logsumexp(finite))) if finite.size else LogValue.zero()
    return SecondMoment(terms=terms, ratio=ratio)


def sm_term_ratio(n: int, m: int, k: int, i: int) -> TermRatio:
    """
    b_i = a_{i+1}/a_i, with i1 = min{i >= 1 : b_i < 1} and
    i2 = max{i < k : b_i > 1} + 1 over the whole sequence (None when absent).

    Raises:
        UndefinedRatio: If a_i is zero
    """
    _check_nmk(n, m, k)
    if not 0 <= i < k:
        raise InvalidParameter(f"need 0 <= i < k, got i={i}, k={k}")
    logs = _second_moment_logs(n, m, k)
    if logs[i] == -np.inf:
        raise UndefinedRatio(f"a_{i} = 0 for (n={n}, m={m}, k={k})")
    b_logs = [logs[j + 1] - logs[j] if np.isfinite(logs[j]) else np.nan for j in range(k)]
    below = [j for j in range(1, k) if not np.isnan(b_logs[j]) and b_logs[j] < 0]
    above = [j for j in range(k) if not np.isnan(b_logs[j]) and b_logs[j] > 0]
    return TermRatio(
        value=LogValue.from_log(b_logs[i]),
        i1=min(below) if below else None,
        i2=max(above) + 1 if above else None,
    )


def expandable_expected(n: int, m: int, k: int, gamma: float, delta: float) -> Estimate:
    """
    A_sigma(gamma, delta): expected number of independent tau with |tau| = (1+gamma)k
    and |tau & sigma| = (1-delta)k, given sigma independent in G*(n, m).

    Both set sizes are floored; the chosen integers are returned in ``meta``.

    Raises:
        InfeasibleOverlap: If the per-edge probability base is negative
    """
    _check_nmk(n, m, k)
    if gamma < 0 or not 0 <= delta <= 1:
        raise InvalidParameter(f"need gamma >= 0 and 0 <= delta <= 1, got {gamma}, {delta}")
    kept = _floor_size((1 - delta) * k)
    added = _floor_size((gamma + delta) * k)
    s2 = (k / n) ** 2
    if m and s2 >= 1:
        raise InfeasibleOverlap("sigma covers every vertex; no edge can avoid it")
    base = (1 - s2 - (1 + gamma) ** 2 * s2 + (1 - delta) ** 2 * s2) / (1 - s2)
    if base < 0:
        raise InfeasibleOverlap(f"per-edge base {base:.6g} is negative for gamma={gamma}, delta={delta}")
    log_value = log_binom(k, kept) + log_binom(n - k, added) + _m_log(m, base)
    meta = {"kept": kept, "added": added, "rounding": "floor", "base": base}
    return Estimate(LogValue.from_log(log_value), meta)


def cluster_expected(n: int, m: int, k: int, x: float, lam: float) -> Estimate:
    """
    First-moment bound on the number of k-sets tau at overlap |sigma & tau| = xn:

        C(k, xn) C(n-k, k-xn) ((1 - 2(k/n)^2 + (xn/n)^2) / (1 - (k/n)^2))^m exp(y(lam) n)

    y(lam) = lam is a surrogate that vanishes as lam -> 0 and is nondecreasing;
    the o(1) term is dropped.
    """
    _check_nmk(n, m, k)
    if lam < 0:
        raise InvalidParameter(f"lambda must be non-negative, got {lam}")
    i = _floor_size(x * n)
    if not 0 <= i <= k:
        raise InvalidParameter(f"overlap size {i} outside [0, {k}]")
    s2 = (k / n) ** 2
    if m and s2 >= 1:
        return Estimate(LogValue.zero(), {"overlap_size": i})
    base = (1 - 2 * s2 + (i / n) ** 2) / (1 - s2)
    log_value = log_binom(k, i) + log_binom(n - k, k - i) + _m_log(m, base) + lam * n
    meta = {"overlap_size": i, "rounding": "floor", "y_surrogate": "lambda", "leading_order_only": True}
    return Estimate(LogValue.from_log(log_value), meta)


def f_d_profile(n: int, m: int, grid: Sequence[float]) -> List[Tuple[float, float]]:
    """(k/n, ln E[X_k]/k) for k = max(1, floor(s n)) at every s in the grid."""
    out = []
    for s in grid:
        if not 0 < s < 1:
            raise InvalidParameter(f"grid point {s} outside (0, 1)")
        k = max(1, _floor_size(s * n))
        out.append((k / n, _normalized_log_expectation(n, m, k)))
    return out
