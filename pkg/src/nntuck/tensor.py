"""Dense third-order tensor algebra.

Tensors are plain ``numpy`` arrays of shape ``(d1, d2, d3)`` indexed
``t[i, j, k]``; matrices are 2-D arrays. Modes are numbered 1, 2, 3.

Unfoldings follow the Kolda-Bader convention: the mode-n unfolding of an
``I1 x I2 x I3`` tensor has shape ``In x prod(others)`` and its columns are
the mode-n fibers ordered with the lower remaining index varying fastest.
This is the only convention under which ``A_(1) / Ahat_(1)`` times
``[G x2 V x3 Y]_(1)^T`` is conformable with an ``N x K`` factor.
"""

import numpy as np

EPS = 1e-12


def _check_tensor(t, name="tensor"):
    t = np.asarray(t, dtype=float)
    if t.ndim != 3:
        raise ValueError(f"{name} must be third-order, got shape {t.shape}")
    return t


def _check_mode(mode):
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode!r}")
    return mode - 1


def frontal_slice(t, ell):
    """Return the ``d1 x d2`` matrix ``t[:, :, ell]``."""
    t = _check_tensor(t)
    if not 0 <= ell < t.shape[2]:
        raise IndexError(f"layer {ell} out of range for {t.shape[2]} layers")
    return t[:, :, ell].copy()


def unfold(t, mode):
    """Mode-``mode`` unfolding, shape ``(d_mode, product of the other dims)``."""
    t = _check_tensor(t)
    n = _check_mode(mode)
    return np.reshape(np.moveaxis(t, n, 0), (t.shape[n], -1), order="F")


def fold(m, mode, dims):
    """Inverse of :func:`unfold`."""
    m = np.asarray(m, dtype=float)
    n = _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ValueError("dims must have three entries")
    rest = [d for i, d in enumerate(dims) if i != n]
    expected = (dims[n], rest[0] * rest[1])
    if m.shape != expected:
        raise ValueError(f"matrix of shape {m.shape} cannot fold to {dims} along mode {mode}")
    moved = np.reshape(m, (dims[n], rest[0], rest[1]), order="F")
    return np.moveaxis(moved, 0, n).copy()


def mode_product(t, b, mode):
    """n-mode product ``t x_n b``.

    For mode 1, ``(t x1 b)[i, j, k] = sum_h t[h, j, k] * b[i, h]``.
    """
    t = _check_tensor(t)
    b = np.asarray(b, dtype=float)
    n = _check_mode(mode)
    if b.ndim != 2 or b.shape[1] != t.shape[n]:
        raise ValueError(
            f"matrix of shape {b.shape} incompatible with mode {mode} of tensor {t.shape}"
        )
    out = np.tensordot(b, t, axes=([1], [n]))
    return np.moveaxis(out, 0, n)


def tucker(core, u, v, y):
    """``core x1 u x2 v x3 y``."""
    return mode_product(mode_product(mode_product(core, u, 1), v, 2), y, 3)


def _prepare(a, ahat, mask):
    a = _check_tensor(a, "a")
    ahat = _check_tensor(ahat, "ahat")
    if a.shape != ahat.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {ahat.shape}")
    if (a < 0).any() or (ahat < 0).any():
        raise ValueError("KL divergence is defined for nonnegative tensors only")
    if mask is not None:
        mask = _check_tensor(mask, "mask")
        if mask.shape != a.shape:
            raise ValueError(f"mask shape {mask.shape} does not match {a.shape}")
        keep = mask != 0
        a, ahat = a[keep], ahat[keep]
    else:
        a, ahat = a.ravel(), ahat.ravel()
    return a, ahat


def _xlogy(x, y):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(y[pos])
    return out


def kl_divergence(a, ahat, mask=None):
    """Generalized KL divergence ``sum a log(a/ahat) - a + ahat`` over observed entries.

    ``0 log(0/x)`` is taken as 0; ``ahat`` is clamped to ``EPS`` where ``a > 0``.
    """
    a, ahat = _prepare(a, ahat, mask)
    safe = np.maximum(ahat, EPS)
    return float(np.sum(_xlogy(a, a) - _xlogy(a, safe) - a + ahat))


def poisson_log_likelihood(a, ahat, mask=None):
    """Poisson log-likelihood ``sum a log(ahat) - ahat`` without the factorial term."""
    a, ahat = _prepare(a, ahat, mask)
    safe = np.maximum(ahat, EPS)
    return float(np.sum(_xlogy(a, safe) - ahat))
