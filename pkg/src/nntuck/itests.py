"""Likelihood-ratio tests for layer independence, dependence and redundance.

Naming follows the layer-interdependence definitions: in the independence
test the null model is the layer dependent NNTuck, so *rejecting* H0 is
what certifies layer independence; failing to reject means layer
dependence. In the redundance test failing to reject means redundance.
"""

import enum
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import special

from .masks import split_mask
from .model import ModelVariant, reconstruct
from .solver import FitConfig, fit_multistart
from .tensor import poisson_log_likelihood

log = logging.getLogger(__name__)

REJECT = "reject_H0"
FAIL_TO_REJECT = "fail_to_reject_H0"


class InadmissibleTestError(ValueError):
    """The full model has no more free parameters than the nested one."""


class TestType(str, enum.Enum):
    INDEPENDENCE = "independence"
    REDUNDANCE = "redundance"
    NESTED = "nested"


@dataclass(frozen=True)
class TestKind:
    """A pair of nested NNTucks to compare.

    ``independence``: dependent (K, C) nested in independent (K).
    ``redundance``: redundant (K) nested in dependent (K, C=2).
    ``nested``: dependent (K, C_nested) nested in dependent (K, C).
    """

    __test__ = False

    type: TestType
    K: int
    C: int = None
    C_nested: int = None
    symmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "type", TestType(self.type))
        if self.type is TestType.REDUNDANCE:
            object.__setattr__(self, "C", 2)
        if self.type is TestType.INDEPENDENCE and self.C is None:
            raise ValueError("the independence test needs the dependent model's C")
        if self.type is TestType.NESTED:
            if self.C is None or self.C_nested is None or not self.C_nested < self.C:
                raise ValueError("the nested test needs C_nested < C")

    @classmethod
    def independence(cls, K, C, symmetric=False):
        return cls(TestType.INDEPENDENCE, K, C, symmetric=symmetric)

    @classmethod
    def redundance(cls, K, symmetric=False):
        return cls(TestType.REDUNDANCE, K, 2, symmetric=symmetric)

    @classmethod
    def nested(cls, K, C_full, C_nested, symmetric=False):
        return cls(TestType.NESTED, K, C_full, C_nested, symmetric)

    def full_variant(self):
        if self.type is TestType.INDEPENDENCE:
            return ModelVariant.independent(self.K, symmetric=self.symmetric)
        return ModelVariant.dependent(self.K, self.C, self.symmetric)

    def nested_variant(self):
        if self.type is TestType.REDUNDANCE:
            return ModelVariant.redundant(self.K, self.symmetric)
        C = self.C if self.type is TestType.INDEPENDENCE else self.C_nested
        return ModelVariant.dependent(self.K, C, self.symmetric)

    def raw_df(self, L):
        K = self.K
        if self.type is TestType.INDEPENDENCE:
            return (L - self.C) * K * K - L * self.C
        if self.type is TestType.REDUNDANCE:
            return K * K + 2 * L
        return (L + K * K) * (self.C - self.C_nested)

    def meaning(self, verdict):
        rejected = verdict == REJECT
        if self.type is TestType.INDEPENDENCE:
            return "layer independence" if rejected else "layer dependence"
        if self.type is TestType.REDUNDANCE:
            return "not layer redundant" if rejected else "layer redundance"
        return f"prefer C={self.C}" if rejected else f"prefer C={self.C_nested}"


def degrees_of_freedom(kind, L):
    """Difference in free parameters between the full and nested model."""
    df = kind.raw_df(L)
    if df <= 0:
        raise InadmissibleTestError(
            f"{kind.type.value} test with K={kind.K}, C={kind.C}, L={L} has df = {df} <= 0"
        )
    return df


def chi_squared_sf(x, df):
    """Upper tail ``P(X > x)`` of a chi-squared variable, via the regularized gamma."""
    if int(df) != df or df < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {df}")
    if x < 0:
        raise ValueError("x must be nonnegative")
    return float(special.gammaincc(df / 2.0, x / 2.0))


@dataclass
class TestReport:
    __test__ = False

    kind: TestKind
    ll_full: float
    ll_nested: float
    statistic: float
    df: int
    p_value: float
    alpha: float
    verdict: str
    method: str
    conclusion: str = ""
    clipped: bool = False
    df_degenerate: bool = False
    seeds: dict = field(default_factory=dict)
    n_starts: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["kind"] = {k: (v.value if isinstance(v, enum.Enum) else v)
                     for k, v in asdict(self.kind).items()}
        return d


def _verdict_standard(kind, ll_full, ll_nested, L, alpha, degenerate):
    raw = 2.0 * (ll_full - ll_nested)
    clipped = raw < 0
    statistic = max(raw, 0.0)
    df = kind.raw_df(L)
    if df <= 0:
        if degenerate != "conservative":
            degrees_of_freedom(kind, L)
        # no reference distribution: a test that never rejects has size 0
        p = 1.0
    else:
        p = chi_squared_sf(statistic, df)
    return statistic, df, p, clipped


def standard_lrt(network, kind, alpha=0.05, n_starts=20, config=FitConfig(),
                 degenerate="raise", n_jobs=1):
    """Chi-squared likelihood-ratio test between the two fitted models.

    Both models are the best of ``n_starts`` fits. A negative statistic
    (the nested fit beating the full one, a local-optimum artifact) is
    clipped to zero and flagged. With ``degenerate="conservative"`` a test
    whose degrees of freedom are not positive is reported with p = 1
    instead of raising.
    """
    if degenerate not in ("raise", "conservative"):
        raise ValueError(f"unknown degenerate-df policy {degenerate!r}")
    L = network.adjacency.shape[2] if hasattr(network, "adjacency") else np.shape(network)[2]
    if degenerate == "raise":
        degrees_of_freedom(kind, L)
    full = fit_multistart(network, kind.full_variant(), config, n_starts, n_jobs=n_jobs)
    nested = fit_multistart(network, kind.nested_variant(), config, n_starts, n_jobs=n_jobs)
    statistic, df, p, clipped = _verdict_standard(
        kind, full.log_likelihood, nested.log_likelihood, L, alpha, degenerate)
    verdict = REJECT if p < alpha else FAIL_TO_REJECT
    return TestReport(
        kind, full.log_likelihood, nested.log_likelihood, statistic, df, p, alpha,
        verdict, "standard", kind.meaning(verdict), clipped, df <= 0,
        seeds={"full": full.seed, "nested": nested.seed, "base": config.seed},
        n_starts={"full": n_starts, "nested": n_starts},
    )


def lrt_from_likelihoods(kind, ll_full, ll_nested, L, alpha=0.05, degenerate="raise"):
    """Standard test from already-fitted log-likelihoods."""
    statistic, df, p, clipped = _verdict_standard(kind, ll_full, ll_nested, L, alpha, degenerate)
    verdict = REJECT if p < alpha else FAIL_TO_REJECT
    return TestReport(kind, ll_full, ll_nested, statistic, df, p, alpha, verdict,
                      "standard", kind.meaning(verdict), clipped, df <= 0)


def split_decision(ll0_full, ll0_nested, alpha):
    """Return (log ratio, verdict) for the split test evaluated on the first half."""
    ratio = ll0_full - ll0_nested
    return ratio, (REJECT if ratio > math.log(1.0 / alpha) else FAIL_TO_REJECT)


def split_lrt(network, kind, alpha=0.05, split_seed=0, n_starts_full=20,
              n_starts_nested=50, config=FitConfig(), n_jobs=1):
    """Split likelihood-ratio test, valid without regularity conditions.

    The entries are split by a fair coin into halves D0 and D1. The full
    model is fitted on D1, the nested model on D0, and both are scored on
    D0; H0 is rejected when the log-likelihood ratio exceeds ``log(1/alpha)``.
    """
    A = network.adjacency if hasattr(network, "adjacency") else np.asarray(network, dtype=float)
    symmetric = hasattr(network, "directed") and not network.directed
    m0 = split_mask(A.shape, split_seed, symmetric=symmetric)
    m1 = 1.0 - m0
    full = fit_multistart(A, kind.full_variant(), config, n_starts_full, mask=m1, n_jobs=n_jobs)
    nested = fit_multistart(A, kind.nested_variant(), replace(config, seed=config.seed + n_starts_full),
                            n_starts_nested, mask=m0, n_jobs=n_jobs)
    ll_full = poisson_log_likelihood(A, reconstruct(full.model), m0)
    ll_nested = poisson_log_likelihood(A, reconstruct(nested.model), m0)
    ratio, verdict = split_decision(ll_full, ll_nested, alpha)
    log.info("split LRT %s: log ratio %.4g vs threshold %.4g", kind.type.value, ratio,
             math.log(1 / alpha))
    return TestReport(
        kind, ll_full, ll_nested, ratio, None, None, alpha, verdict, "split",
        kind.meaning(verdict),
        seeds={"full": full.seed, "nested": nested.seed, "base": config.seed,
               "split": split_seed},
        n_starts={"full": n_starts_full, "nested": n_starts_nested},
    )
