"""Masked multiplicative-update estimation of the NNTuck under KL loss.

Two implementations of the same updates live here:

* ``update_U``/``update_V``/``update_Y``/``update_core`` spell the masked
  multiplicative updates out with unfoldings and mode products on dense
  tensors. They are slow but transparent, and serve as the reference.
* ``_Kernel`` evaluates identical updates touching the dense mask only
  through ``mask @ factor`` products and the data only at its observed
  nonzeros. ``fit`` runs on it.

``em_update`` implements the expectation-maximization step with explicit
responsibilities; it exists only to check that EM and the multiplicative
updates coincide.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .model import Kind, NNTuckModel, reconstruct
from .tensor import EPS, mode_product, poisson_log_likelihood, unfold

log = logging.getLogger(__name__)

INIT_LOW = 1e-3


class NumericalError(FloatingPointError):
    """Raised when the objective becomes non-finite during fitting."""


@dataclass(frozen=True)
class FitConfig:
    rel_tol: float = 1e-5
    patience: int = 10
    max_iters: int = 5000
    seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.patience < 1 or self.max_iters < 1:
            raise ValueError("patience and max_iters must be at least 1")
        if not self.init_scale > INIT_LOW:
            raise ValueError(f"init_scale must exceed {INIT_LOW}")


@dataclass
class FitResult:
    model: NNTuckModel
    kl_trace: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int
    seed: int
    test_log_likelihood: float = None
    start_log_likelihoods: list = field(default_factory=list)

    @property
    def kl(self):
        return float(self.kl_trace[-1])


def _as_mask(mask, shape):
    if mask is None:
        return None
    mask = np.asarray(mask, dtype=float)
    if mask.shape != shape:
        raise ValueError(f"mask shape {mask.shape} does not match data {shape}")
    if not np.isin(mask, (0.0, 1.0)).all():
        raise ValueError("mask must be binary")
    # an all-ones mask is the unmasked problem
    if mask.all():
        return None
    return mask


def _data(network):
    return network.adjacency if hasattr(network, "adjacency") else np.asarray(network, dtype=float)


def initialize(network, variant, config=FitConfig()):
    """Random strictly positive starting point honouring the variant's constraints."""
    A = _data(network)
    N, _, L = A.shape
    v = variant.resolve(N, L)
    K, C = v.K, v.C
    rng = np.random.default_rng(config.seed)
    lo, hi = INIT_LOW, config.init_scale
    U = rng.uniform(lo, hi, (N, K))
    V = rng.uniform(lo, hi, (N, K))
    Y = rng.uniform(lo, hi, (L, C))
    core = rng.uniform(lo, hi, (K, K, C))
    if v.kind is Kind.INDEPENDENT:
        Y = np.eye(L)
    elif v.kind is Kind.REDUNDANT:
        Y = np.ones((L, 1))
    if v.symmetric:
        V = U
        core = np.einsum("hkc,hmc->kmc", core, core)
    return NNTuckModel(U, V.copy() if v.symmetric else V, Y, core, v)


# --- reference updates -----------------------------------------------------

def _ratio(model, A, mask):
    Ahat = reconstruct(model)
    M = np.ones_like(A) if mask is None else np.asarray(mask, dtype=float)
    R = M * A / np.maximum(Ahat, EPS)
    return M, R


def update_U(model, A, mask=None):
    """One masked multiplicative update of U (every other factor held fixed)."""
    A = _data(A)
    M, R = _ratio(model, A, mask)
    W = unfold(mode_product(mode_product(model.core, model.V, 2), model.Y, 3), 1)
    return model.U * (unfold(R, 1) @ W.T) / (unfold(M, 1) @ W.T + EPS)


def update_V(model, A, mask=None):
    A = _data(A)
    M, R = _ratio(model, A, mask)
    W = unfold(mode_product(mode_product(model.core, model.U, 1), model.Y, 3), 2)
    return model.V * (unfold(R, 2) @ W.T) / (unfold(M, 2) @ W.T + EPS)


def update_Y(model, A, mask=None):
    A = _data(A)
    M, R = _ratio(model, A, mask)
    W = unfold(mode_product(mode_product(model.core, model.U, 1), model.V, 2), 3)
    return model.Y * (unfold(R, 3) @ W.T) / (unfold(M, 3) @ W.T + EPS)


def update_core(model, A, mask=None):
    A = _data(A)
    M, R = _ratio(model, A, mask)

    def project(t):
        t = mode_product(t, model.U.T, 1)
        t = mode_product(t, model.V.T, 2)
        return mode_product(t, model.Y.T, 3)

    core = model.core * project(R) / (project(M) + EPS)
    if model.variant.symmetric:
        core = (core + core.transpose(1, 0, 2)) / 2
    return core


def em_update(model, A, mask=None):
    """EM re-estimates of (U, V, Y, core), each computed from the same current state.

    The responsibilities ``rho[i,j,l,k,m,c]`` split each count ``a_ijl`` over
    the latent (node group, node group, layer group) triples. The M-step
    divides expected counts by the expected exposure over observed entries.
    """
    A = _data(A)
    M = np.ones_like(A) if mask is None else np.asarray(mask, dtype=float)
    U, V, Y, G = model.U, model.V, model.Y, model.core
    terms = np.einsum("ik,jm,lc,kmc->ijlkmc", U, V, Y, G)
    rho = terms / terms.sum(axis=(3, 4, 5), keepdims=True)
    counts = (M * A)[..., None, None, None] * rho
    exposure = M[..., None, None, None] * np.einsum("ik,jm,lc,kmc->ijlkmc",
                                                     np.ones_like(U), V, Y, G)
    U_new = counts.sum(axis=(1, 2, 4, 5)) / exposure.sum(axis=(1, 2, 4, 5))
    exposure = M[..., None, None, None] * np.einsum("ik,jm,lc,kmc->ijlkmc",
                                                     U, np.ones_like(V), Y, G)
    V_new = counts.sum(axis=(0, 2, 3, 5)) / exposure.sum(axis=(0, 2, 3, 5))
    exposure = M[..., None, None, None] * np.einsum("ik,jm,lc,kmc->ijlkmc",
                                                     U, V, np.ones_like(Y), G)
    Y_new = counts.sum(axis=(0, 1, 3, 4)) / exposure.sum(axis=(0, 1, 3, 4))
    exposure = M[..., None, None, None] * np.einsum("ik,jm,lc,kmc->ijlkmc",
                                                     U, V, Y, np.ones_like(G))
    G_new = counts.sum(axis=(0, 1, 2)) / exposure.sum(axis=(0, 1, 2))
    return U_new, V_new, Y_new, G_new


# --- fast kernel -----------------------------------------------------------

class _Kernel:
    """Multiplicative updates evaluated at observed nonzeros.

    Entries with ``a = 0`` contribute nothing to update numerators, so the
    ratio tensor is only formed on the support of ``mask * A``. Mask
    denominators go through dense ``mask_layer @ factor`` products; without a
    mask they collapse to column sums.
    """

    def __init__(self, A, mask):
        self.N, _, self.L = A.shape
        observed = A if mask is None else A * mask
        i, j, l = np.nonzero(observed)
        self.i, self.j, self.l = i, j, l
        self.li = l * self.N + i
        self.lj = l * self.N + j
        self.a = observed[i, j, l]
        self.nnz = len(self.a)
        ones = np.ones(self.nnz)
        cols = np.arange(self.nnz)
        self.Si = sp.csr_matrix((ones, (i, cols)), shape=(self.N, self.nnz))
        self.Sj = sp.csr_matrix((ones, (j, cols)), shape=(self.N, self.nnz))
        self.Sl = sp.csr_matrix((ones, (l, cols)), shape=(self.L, self.nnz))
        self.mask = None if mask is None else np.ascontiguousarray(mask.transpose(2, 0, 1))
        self.mask_t = None if mask is None else np.ascontiguousarray(mask.transpose(2, 1, 0))
        self.const = float(np.sum(self.a * np.log(self.a) - self.a)) if self.nnz else 0.0

    @staticmethod
    def layer_cores(core, Y):
        # H[l] = sum_c y_lc core[:, :, c]
        return np.einsum("kmc,lc->lkm", core, Y)

    def _at(self, X, index):
        return np.take(X.reshape(-1, X.shape[-1]), index, axis=0)

    def rates(self, U, V, H):
        Q = np.matmul(U, H)  # (L, N, K)
        return np.einsum("ek,ek->e", self._at(Q, self.li), self._at(V, self.j))

    def _ratio(self, ahat):
        return self.a / np.maximum(ahat, EPS)

    def step_U(self, U, V, H, symmetric=False):
        r = self._ratio(self.rates(U, V, H))
        P = np.matmul(V, H.transpose(0, 2, 1))  # P[l, j, k] = sum_m v_jm H_l[k, m]
        num = self.Si @ (r[:, None] * self._at(P, self.lj))
        if self.mask is None:
            den = P.sum(axis=(0, 1))[None, :]
        else:
            den = np.matmul(self.mask, P).sum(axis=0)
        if symmetric:
            # U enters twice; the square root keeps this a majorize-minimize step
            return U * np.sqrt(num / (den + EPS))
        return U * num / (den + EPS)

    def step_V(self, U, V, H):
        Q = np.matmul(U, H)  # Q[l, i, m] = sum_k u_ik H_l[k, m]
        Qe = self._at(Q, self.li)
        r = self._ratio(np.einsum("ek,ek->e", Qe, self._at(V, self.j)))
        num = self.Sj @ (r[:, None] * Qe)
        if self.mask is None:
            den = Q.sum(axis=(0, 1))[None, :]
        else:
            den = np.matmul(self.mask_t, Q).sum(axis=0)
        return V * num / (den + EPS)

    def exposure(self, U, V):
        """``S[l] = U^T mask_l V``, the observed exposure per node-group pair."""
        if self.mask is None:
            S = np.outer(U.sum(axis=0), V.sum(axis=0))
            return np.broadcast_to(S, (self.L,) + S.shape)
        return np.matmul(U.T, np.matmul(self.mask, V))

    def pair_terms(self, U, V):
        B = self._at(U, self.i)[:, :, None] * self._at(V, self.j)[:, None, :]
        return B.reshape(self.nnz, -1)

    def step_Y(self, Y, core, B, S):
        K = core.shape[0]
        Z = B @ core.reshape(K * K, -1)  # (nnz, C)
        ahat = np.einsum("ec,ec->e", Z, self._at(Y, self.l))
        r = self._ratio(ahat)
        num = self.Sl @ (r[:, None] * Z)
        den = S.reshape(self.L, -1) @ core.reshape(K * K, -1)
        return Y * num / (den + EPS)

    def step_core(self, Y, core, B, S, symmetric=False):
        K = core.shape[0]
        Z = B @ core.reshape(K * K, -1)
        r = self._ratio(np.einsum("ec,ec->e", Z, self._at(Y, self.l)))
        T = self.Sl @ (r[:, None] * B)  # (L, K*K)
        num = (T.T @ Y).reshape(core.shape)
        den = (S.reshape(self.L, -1).T @ Y).reshape(core.shape)
        core = core * num / (den + EPS)
        if symmetric:
            core = (core + core.transpose(1, 0, 2)) / 2
        return core

    def objective(self, U, V, Y, core, S=None):
        """Masked KL divergence and log-likelihood at the given parameters."""
        H = self.layer_cores(core, Y)
        ahat = self.rates(U, V, H)
        if S is None:
            S = self.exposure(U, V)
        total = float(np.einsum("lkm,lkm->", S, H))
        fit = float(np.sum(self.a * np.log(np.maximum(ahat, EPS))))
        loglik = fit - total
        return self.const - loglik, loglik


def _validate_fit_inputs(A, v, mask):
    if v.symmetric:
        if not np.array_equal(A, A.transpose(1, 0, 2)):
            raise ValueError("a symmetric model needs an undirected (symmetric) network")
        if mask is not None and not np.array_equal(mask, mask.transpose(1, 0, 2)):
            raise ValueError("a symmetric model needs a symmetric mask")


def fit(network, variant, config=FitConfig(), mask=None):
    """Fit one NNTuck from a seeded random start.

    Updates run U, V, Y, core in sequence, each against a refreshed
    reconstruction, skipping factors the variant fixes. Iteration stops once
    the KL divergence has fallen by less than ``rel_tol`` (relative) over the
    last ``patience`` sweeps, or after ``max_iters`` sweeps.
    """
    A = _data(network)
    mask = _as_mask(mask, A.shape)
    model = initialize(A, variant, config)
    v = model.variant
    _validate_fit_inputs(A, v, mask)
    kernel = _Kernel(A, mask)

    U, V, Y, core = model.U, model.V, model.Y, model.core
    free_Y = v.kind is Kind.DEPENDENT
    kl, loglik = kernel.objective(U, V, Y, core)
    trace = [kl]
    converged = False
    it = 0
    while it < config.max_iters:
        it += 1
        H = kernel.layer_cores(core, Y)
        U = kernel.step_U(U, V, H, symmetric=v.symmetric)
        if v.symmetric:
            V = U
        else:
            V = kernel.step_V(U, V, H)
        B = kernel.pair_terms(U, V)
        S = kernel.exposure(U, V)
        if free_Y:
            Y = kernel.step_Y(Y, core, B, S)
        core = kernel.step_core(Y, core, B, S, symmetric=v.symmetric)
        kl, loglik = kernel.objective(U, V, Y, core, S)
        if not math.isfinite(kl):
            raise NumericalError(f"non-finite KL divergence at iteration {it}")
        trace.append(kl)
        if it >= config.patience:
            previous = trace[-1 - config.patience]
            if kl == 0 or (previous - kl) / kl < config.rel_tol:
                converged = True
                break

    fitted = NNTuckModel(U, U.copy() if v.symmetric else V, Y, core, v)
    result = FitResult(fitted, np.array(trace), loglik, converged, it, config.seed)
    if mask is not None:
        result.test_log_likelihood = poisson_log_likelihood(A, reconstruct(fitted), 1 - mask)
    log.debug("seed %d: %d iterations, KL %.6g", config.seed, it, kl)
    return result


def _fit_job(args):
    return fit(*args)


def fit_multistart(network, variant, config=FitConfig(), n_starts=20, mask=None,
                   selection="train", n_jobs=1):
    """Best of ``n_starts`` fits seeded ``config.seed, config.seed + 1, ...``.

    ``selection="train"`` keeps the largest log-likelihood on observed
    entries; ``selection="test"`` keeps the largest log-likelihood on the
    held-out entries of ``mask`` (this peeks at the test set). Ties go to
    the lowest seed.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    if selection not in ("train", "test"):
        raise ValueError(f"unknown selection criterion {selection!r}")
    A = _data(network)
    if selection == "test" and _as_mask(mask, A.shape) is None:
        raise ValueError("test-set selection needs a mask with held-out entries")
    jobs = [(A, variant, replace(config, seed=config.seed + s), mask) for s in range(n_starts)]
    if n_jobs == 1:
        results = [_fit_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_fit_job, jobs))

    def score(res):
        return res.log_likelihood if selection == "train" else res.test_log_likelihood

    best = results[0]
    for res in results[1:]:
        if score(res) > score(best):
            best = res
    best.start_log_likelihoods = [score(res) for res in results]
    return best
